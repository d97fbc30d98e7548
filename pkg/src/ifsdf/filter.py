"""Bilateral filtering of level sets and the training objective.

Each training query q is pulled onto the zero level set (q_hat) and filtered
against the input points around NN(q); the input points are also pushed
out to q's own level set so that non-zero level sets get filtered too.
The Chamfer term between pulled queries and the input keeps the field from
collapsing to a zero gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import torch

from .geom import InputError, PointCloud, QueryBatch


class DegenerateGradientError(RuntimeError):
    """The field gradient vanished where a direction was needed."""


SIGMA_P_POLICIES = ("max", "diagonal")
CONSTRAINTS = ("cd", "pull")
PROJECTIONS = ("bidirectional", "unidirectional")
FILTER_MODES = ("bilateral", "average")


@dataclass(frozen=True)
class FilterConfig:
    sigma_n_deg: float = 15.0
    sigma_p_policy: str = "max"
    k_filter: int = 16
    alpha1: float = 1.0          # L_field
    alpha2: float = 1.0          # L_dist
    alpha3: float = 10.0         # gradient constraint (L_CD or L_pull)
    zero_weight: float = 1.0     # L_zero; 0 for ablations without zero-level filtering
    eikonal_weight: float = 0.0  # opt-in ablation only
    constraint: str = "cd"
    projection: str = "bidirectional"
    filter_mode: str = "bilateral"
    weight_floor: float = 1e-12

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.sigma_n_deg < 90.0:
            raise InputError("sigma_n_deg must lie in (0, 90)")
        if self.k_filter < 2:
            raise InputError("k_filter must be at least 2")
        for name in ("alpha1", "alpha2", "alpha3", "zero_weight", "eikonal_weight"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and non-negative (got {v})")
        if not (math.isfinite(self.weight_floor) and self.weight_floor > 0):
            raise InputError("weight_floor must be positive")
        for name, allowed in (("sigma_p_policy", SIGMA_P_POLICIES), ("constraint", CONSTRAINTS),
                              ("projection", PROJECTIONS), ("filter_mode", FILTER_MODES)):
            if getattr(self, name) not in allowed:
                raise InputError(f"{name} must be one of {allowed}")

    @property
    def normal_scale(self) -> float:
        return 1.0 - math.cos(math.radians(self.sigma_n_deg))


# Loss combinations of the ablation study, keyed by their CLI names.
LOSS_COMBOS = {
    "l_pull": dict(zero_weight=0.0, alpha1=0.0, alpha2=0.0, constraint="pull"),
    "l_cd": dict(zero_weight=0.0, alpha1=0.0, alpha2=0.0, constraint="cd"),
    "l_cd+l_zero": dict(zero_weight=1.0, alpha1=0.0, alpha2=0.0, constraint="cd"),
    "l_cd+l_zero+l_field": dict(zero_weight=1.0, alpha1=1.0, alpha2=0.0, constraint="cd"),
    "full": dict(zero_weight=1.0, alpha1=1.0, alpha2=1.0, constraint="cd"),
    "average": dict(zero_weight=1.0, alpha1=1.0, alpha2=1.0, constraint="cd", filter_mode="average"),
}


def combo_config(name: str, base: FilterConfig | None = None) -> FilterConfig:
    if name not in LOSS_COMBOS:
        raise InputError(f"unknown loss combination {name!r}; choose from {sorted(LOSS_COMBOS)}")
    return replace(base or FilterConfig(), **LOSS_COMBOS[name])


# --- elementary pieces (tensor level) ------------------------------------

def unit(g: torch.Tensor, floor: float = 1e-12) -> torch.Tensor:
    return g / torch.clamp_min(torch.linalg.vector_norm(g, dim=-1, keepdim=True), floor)


def spatial_weight(dist2: torch.Tensor, sigma_p: torch.Tensor) -> torch.Tensor:
    return torch.exp(-dist2 / sigma_p ** 2)


def normal_weight(n_a: torch.Tensor, n_b: torch.Tensor, sigma_n_deg: float) -> torch.Tensor:
    scale = 1.0 - math.cos(math.radians(sigma_n_deg))
    return torch.exp(-(1.0 - (n_a * n_b).sum(-1)) / scale)


def patch_sigma(center, nbrs, policy: str, floor: float):
    """sigma_p per patch: farthest neighbor, or bounding-box diagonal of the patch."""
    if policy == "max":
        s = torch.linalg.vector_norm(center[:, None, :] - nbrs, dim=-1).max(dim=-1).values
    else:
        pts = torch.cat([center[:, None, :], nbrs], dim=1)
        s = torch.linalg.vector_norm(pts.max(dim=1).values - pts.min(dim=1).values, dim=-1)
    return torch.clamp_min(s, floor)


def bilateral_terms(center, center_n, nbrs, nbr_n, cfg: FilterConfig):
    """Per-patch filtered projection distance, shape (B,).

    center: (B, d), center_n: (B, d) unit, nbrs: (B, K, d), nbr_n: (B, K, d) unit.
    """
    diff = center[:, None, :] - nbrs
    sigma_p = patch_sigma(center, nbrs, cfg.sigma_p_policy, cfg.weight_floor)
    w = spatial_weight((diff ** 2).sum(-1), sigma_p[:, None])
    w = w * normal_weight(center_n[:, None, :], nbr_n, cfg.sigma_n_deg)
    proj = torch.abs((nbr_n * diff).sum(-1))
    if cfg.projection == "bidirectional":
        proj = proj + torch.abs((center_n[:, None, :] * diff).sum(-1))
    return (proj * w).sum(-1) / torch.clamp_min(w.sum(-1), cfg.weight_floor)


def average_terms(center, nbrs, cfg: FilterConfig):
    """Distance from each center to its spatially weighted neighbor mean, shape (B,)."""
    diff = center[:, None, :] - nbrs
    sigma_p = patch_sigma(center, nbrs, cfg.sigma_p_policy, cfg.weight_floor)
    w = spatial_weight((diff ** 2).sum(-1), sigma_p[:, None])
    mean = (w[..., None] * nbrs).sum(1) / torch.clamp_min(w.sum(-1), cfg.weight_floor)[:, None]
    return torch.linalg.vector_norm(center - mean, dim=-1)


def filter_terms(center, center_n, nbrs, nbr_n, cfg: FilterConfig):
    if cfg.filter_mode == "average":
        return average_terms(center, nbrs, cfg)
    return bilateral_terms(center, center_n, nbrs, nbr_n, cfg)


def nearest_distances(a: torch.Tensor, b: torch.Tensor, chunk: int = 2048) -> torch.Tensor:
    """For each row of ``a`` the Euclidean distance to its nearest row of ``b``."""
    idx = []
    with torch.no_grad():
        for s in range(0, len(a), chunk):
            d2 = ((a[s:s + chunk, None, :] - b[None, :, :]) ** 2).sum(-1)
            idx.append(d2.argmin(dim=1))
    idx = torch.cat(idx) if idx else torch.zeros(0, dtype=torch.long)
    return torch.linalg.vector_norm(a - b[idx], dim=-1)


# --- public single-item operations (numpy in, numpy out) -----------------

def weight_spatial(p_bar, p_j, sigma_p: float) -> float:
    if sigma_p <= 0:
        raise InputError("sigma_p must be positive")
    d2 = float(np.sum((np.asarray(p_bar, float) - np.asarray(p_j, float)) ** 2))
    return math.exp(-d2 / sigma_p ** 2)


def weight_normal(n_a, n_b, sigma_n_deg: float = 15.0) -> float:
    n_a, n_b = np.asarray(n_a, float), np.asarray(n_b, float)
    for n in (n_a, n_b):
        if abs(np.linalg.norm(n) - 1.0) > 1e-6:
            raise InputError("normals must be unit length")
    return math.exp(-(1.0 - float(n_a @ n_b)) / (1.0 - math.cos(math.radians(sigma_n_deg))))


def pull(field, q, floor: float = 1e-12) -> np.ndarray:
    """Move ``q`` onto the zero level set along the normalized field gradient."""
    q = np.asarray(q, dtype=np.float64)
    f, g = field.eval_points(q.reshape(-1, field.dim))
    norm = np.linalg.norm(g, axis=1)
    if np.any(norm <= floor):
        raise DegenerateGradientError("vanishing field gradient at query; the field may have collapsed")
    return (q.reshape(-1, field.dim) - f[:, None] * g / norm[:, None]).reshape(q.shape)


def project_neighbors(field, level, neighbors, floor: float = 1e-12) -> np.ndarray:
    """Push zero-level points out to ``level`` along their own gradients."""
    p = np.asarray(neighbors, dtype=np.float64).reshape(-1, field.dim)
    _, g = field.eval_points(p)
    norm = np.linalg.norm(g, axis=1)
    if np.any(norm <= floor):
        raise DegenerateGradientError("vanishing field gradient at a neighbor point")
    return p + np.asarray(level, dtype=np.float64).reshape(-1, 1) * g / norm[:, None]


def bilateral_distance(center, center_grad, neighbors, neighbor_grads, cfg: FilterConfig | None = None) -> float:
    """Filtered projection distance of one point against its neighborhood.

    Gradients need not be normalized; they are normalized here.
    """
    cfg = cfg or FilterConfig()
    nb = np.asarray(neighbors, dtype=np.float64)
    if nb.size == 0:
        raise InputError("empty neighborhood")
    d = nb.shape[-1]
    c = torch.as_tensor(np.asarray(center, float).reshape(1, d))
    cn = unit(torch.as_tensor(np.asarray(center_grad, float).reshape(1, d)), cfg.weight_floor)
    nbr = torch.as_tensor(nb.reshape(1, -1, d))
    nn_ = unit(torch.as_tensor(np.asarray(neighbor_grads, float).reshape(1, -1, d)), cfg.weight_floor)
    return float(bilateral_terms(c, cn, nbr, nn_, cfg)[0])


def average_filter_baseline(center, neighbors, sigma_p: float | None = None) -> np.ndarray:
    """Gaussian-weighted mean of the neighbor positions (the smoothing baseline).

    ``sigma_p`` defaults to the farthest-neighbor distance.
    """
    nb = np.asarray(neighbors, dtype=np.float64)
    if nb.size == 0:
        raise InputError("empty neighborhood")
    nb = nb.reshape(-1, nb.shape[-1])
    d2 = ((nb - np.asarray(center, float)) ** 2).sum(-1)
    if sigma_p is None:
        sigma_p = max(float(np.sqrt(d2.max())), 1e-12)
    w = np.exp(-d2 / sigma_p ** 2)
    return (w[:, None] * nb).sum(0) / max(w.sum(), 1e-12)


# --- losses ---------------------------------------------------------------

@dataclass
class FilterTermBreakdown:
    """Loss terms as tensors; ``None`` marks a term that was skipped."""

    l_dist: torch.Tensor | None
    l_zero: torch.Tensor | None
    l_field: torch.Tensor | None
    l_cd: torch.Tensor | None
    l_pull: torch.Tensor | None
    l_eikonal: torch.Tensor | None
    total: torch.Tensor
    degenerate_fraction: float = 0.0
    per_query: dict = field(default_factory=dict)

    def terms(self) -> dict:
        names = ("l_dist", "l_zero", "l_field", "l_cd", "l_pull", "l_eikonal")
        out = {n: getattr(self, n) for n in names if getattr(self, n) is not None}
        out["total"] = self.total
        return out

    def as_floats(self) -> dict:
        return {n: float("nan") if getattr(self, n) is None else float(getattr(self, n).detach())
                for n in ("l_dist", "l_zero", "l_field", "l_cd", "l_pull", "l_eikonal", "total")}


def _points_tensor(cloud, dtype):
    pts = cloud.points if isinstance(cloud, PointCloud) else cloud
    return torch.tensor(np.asarray(pts, dtype=np.float64), dtype=dtype)


def total_loss(field, batch: QueryBatch, cloud, cfg: FilterConfig | None = None,
               dist_index=None, cd_index=None, compute_all: bool = True) -> FilterTermBreakdown:
    """Evaluate every loss term with shared field evaluations.

    ``dist_index``/``cd_index`` restrict the input-point side of L_dist and
    L_CD to a subset (mini-batch training); by default all points are used.
    With ``compute_all=False`` terms whose weight is zero are skipped.
    """
    cfg = cfg or FilterConfig()
    if len(batch) == 0:
        raise InputError("empty query batch")
    dtype = field.dtype
    P = _points_tensor(cloud, dtype)
    n_pts = P.shape[0]
    floor = cfg.weight_floor

    want = {
        "zero": compute_all or cfg.zero_weight > 0,
        "field": compute_all or cfg.alpha1 > 0,
        "dist": compute_all or cfg.alpha2 > 0,
        "cd": compute_all or (cfg.alpha3 > 0 and cfg.constraint == "cd"),
        "pull": compute_all or (cfg.alpha3 > 0 and cfg.constraint == "pull"),
        "eik": cfg.eikonal_weight > 0,
    }
    dist_index = np.arange(n_pts) if dist_index is None else np.array(dist_index, dtype=np.int64)
    cd_index = np.arange(n_pts) if cd_index is None else np.array(cd_index, dtype=np.int64)
    nbr_idx = np.array(batch.neighbor_indices, dtype=np.int64)

    # input points that need a field evaluation (values and/or gradients)
    needed = []
    if want["zero"] or want["field"]:
        needed.append(nbr_idx.reshape(-1))
    if want["dist"]:
        needed.append(dist_index)
    if needed:
        uniq, inv = np.unique(np.concatenate(needed), return_inverse=True)
        f_p, g_p = field.value_and_grad(P[uniq], create_graph=True)
        n_p = unit(g_p, floor)
        slot = {"nbr": None, "dist": None}
        off = 0
        if want["zero"] or want["field"]:
            slot["nbr"] = torch.as_tensor(inv[off:off + nbr_idx.size].reshape(nbr_idx.shape))
            off += nbr_idx.size
        if want["dist"]:
            slot["dist"] = torch.as_tensor(inv[off:off + len(dist_index)])

    q = torch.tensor(np.asarray(batch.queries, dtype=np.float64), dtype=dtype)
    f_q, g_q = field.value_and_grad(q, create_graph=True)
    gnorm = torch.linalg.vector_norm(g_q, dim=-1)
    degenerate = float((gnorm.detach() <= 1e-8).double().mean())
    n_q = unit(g_q, floor)
    q_hat = q - f_q[:, None] * n_q

    per_query = {}
    out = dict(l_dist=None, l_zero=None, l_field=None, l_cd=None, l_pull=None, l_eikonal=None)

    if want["dist"]:
        out["l_dist"] = torch.abs(f_p[slot["dist"]]).mean()

    if want["zero"]:
        _, g_hat = field.value_and_grad(q_hat, create_graph=True)
        nbrs = P[torch.as_tensor(nbr_idx)]
        terms = filter_terms(q_hat, unit(g_hat, floor), nbrs, n_p[slot["nbr"]], cfg)
        per_query["l_zero"] = terms.detach()
        out["l_zero"] = terms.mean()

    if want["field"]:
        nbr_n = n_p[slot["nbr"]]
        lifted = P[torch.as_tensor(nbr_idx)] + f_q[:, None, None] * nbr_n
        terms = filter_terms(q, n_q, lifted, nbr_n, cfg)
        per_query["l_field"] = terms.detach()
        out["l_field"] = terms.mean()

    if want["cd"]:
        ref = P[torch.as_tensor(cd_index)]
        d_qp = nearest_distances(q_hat, ref)
        d_pq = nearest_distances(ref, q_hat)
        per_query["l_cd"] = d_qp.detach()
        out["l_cd"] = d_qp.mean() + d_pq.mean()

    if want["pull"]:
        d = torch.linalg.vector_norm(q_hat - P[torch.as_tensor(np.array(batch.nn_index, dtype=np.int64))], dim=-1)
        per_query["l_pull"] = d.detach()
        out["l_pull"] = d.mean()

    if want["eik"]:
        out["l_eikonal"] = ((gnorm - 1.0) ** 2).mean()

    zero = torch.zeros((), dtype=dtype)
    total = zero
    if cfg.zero_weight > 0:
        total = total + cfg.zero_weight * out["l_zero"]
    if cfg.alpha1 > 0:
        total = total + cfg.alpha1 * out["l_field"]
    if cfg.alpha2 > 0:
        total = total + cfg.alpha2 * out["l_dist"]
    if cfg.alpha3 > 0:
        total = total + cfg.alpha3 * (out["l_cd"] if cfg.constraint == "cd" else out["l_pull"])
    if cfg.eikonal_weight > 0:
        total = total + cfg.eikonal_weight * out["l_eikonal"]
    return FilterTermBreakdown(**out, total=total, degenerate_fraction=degenerate, per_query=per_query)


def loss_dist(field, cloud) -> torch.Tensor:
    P = _points_tensor(cloud, field.dtype)
    return torch.abs(field(P)).mean()


def _single(term, field, batch, cloud, cfg):
    cfg = cfg or FilterConfig()
    return getattr(total_loss(field, batch, cloud, cfg), term)


def loss_zero(field, batch: QueryBatch, cloud, cfg: FilterConfig | None = None) -> torch.Tensor:
    return _single("l_zero", field, batch, cloud, cfg)


def loss_field(field, batch: QueryBatch, cloud, cfg: FilterConfig | None = None) -> torch.Tensor:
    return _single("l_field", field, batch, cloud, cfg)


def loss_cd(field, batch: QueryBatch, cloud) -> torch.Tensor:
    return _single("l_cd", field, batch, cloud, None)


def loss_pull(field, batch: QueryBatch, cloud) -> torch.Tensor:
    return _single("l_pull", field, batch, cloud, None)

