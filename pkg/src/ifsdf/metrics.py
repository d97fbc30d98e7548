"""Reconstruction metrics: Chamfer, Hausdorff, normal consistency, F-score, edge Chamfer."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geom import InputError
from .mesher import Mesh, sample_mesh_surface


def _pts(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or len(a) == 0:
        raise InputError("point sets must be non-empty (n, d) arrays")
    return a


def nearest(a, b):
    """Distance from each point of ``a`` to its nearest point in ``b`` and that point's index."""
    a, b = _pts(a), _pts(b)
    d, i = cKDTree(b).query(a, k=1)
    return d, i


def one_sided_chamfer(a, b, order: str = "L1") -> float:
    d, _ = nearest(a, b)
    return float(np.mean(d if order == "L1" else d ** 2))


def chamfer(a, b, order: str = "L1") -> float:
    """Mean of the two one-sided averages (squared distances for L2)."""
    if order not in ("L1", "L2"):
        raise InputError("order must be 'L1' or 'L2'")
    return 0.5 * (one_sided_chamfer(a, b, order) + one_sided_chamfer(b, a, order))


def one_sided_hausdorff(a, b) -> float:
    d, _ = nearest(a, b)
    return float(d.max())


def hausdorff(a, b) -> float:
    return max(one_sided_hausdorff(a, b), one_sided_hausdorff(b, a))


def normal_consistency(a, na, b, nb) -> float:
    """Mean absolute cosine between each normal and its nearest counterpart's, both ways."""
    a, b = _pts(a), _pts(b)
    na, nb = np.asarray(na, float), np.asarray(nb, float)
    _, i_ab = nearest(a, b)
    _, i_ba = nearest(b, a)
    ab = np.abs((na * nb[i_ab]).sum(1)).mean()
    ba = np.abs((nb * na[i_ba]).sum(1)).mean()
    return float(0.5 * (ab + ba))


def f_score(pred, gt, threshold: float = 0.01) -> float:
    d_pg, _ = nearest(pred, gt)
    d_gp, _ = nearest(gt, pred)
    precision = float(np.mean(d_pg < threshold))
    recall = float(np.mean(d_gp < threshold))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def edge_mask(points, normals, epsilon: float = 0.01, sigma: float = 0.1) -> np.ndarray:
    """Points with an epsilon-neighbor whose normal is nearly orthogonal (|n_p . n_q| < sigma)."""
    points = _pts(points)
    normals = np.asarray(normals, dtype=np.float64)
    pairs = cKDTree(points).query_pairs(r=epsilon, output_type="ndarray")
    mask = np.zeros(len(points), dtype=bool)
    if len(pairs):
        dots = np.abs((normals[pairs[:, 0]] * normals[pairs[:, 1]]).sum(1))
        sharp = pairs[dots < sigma]
        mask[sharp[:, 0]] = True
        mask[sharp[:, 1]] = True
    return mask


def edge_points(points, normals, epsilon: float = 0.01, sigma: float = 0.1):
    mask = edge_mask(points, normals, epsilon, sigma)
    return np.asarray(points)[mask], np.asarray(normals)[mask]


def edge_chamfer_points(pred, pred_n, gt, gt_n, epsilon: float = 0.01, sigma: float = 0.1):
    """(ecd_l1, ecd_l2, fallback_used) on already-sampled surfaces.

    When one side has no edge points, its full sample set stands in for it.
    """
    pe = pred[edge_mask(pred, pred_n, epsilon, sigma)]
    ge = gt[edge_mask(gt, gt_n, epsilon, sigma)]
    fallback = len(pe) == 0 or len(ge) == 0
    a = pe if len(pe) else np.asarray(pred)
    b = ge if len(ge) else np.asarray(gt)
    return chamfer(a, b, "L1"), chamfer(a, b, "L2"), fallback


def edge_chamfer(pred_mesh: Mesh, gt_mesh: Mesh, n_samples: int = 100_000,
                 epsilon: float = 0.01, sigma: float = 0.1, seed: int = 0):
    pp, pn = sample_mesh_surface(pred_mesh, n_samples, seed)
    gp, gn = sample_mesh_surface(gt_mesh, n_samples, seed)
    return edge_chamfer_points(pp, pn, gp, gn, epsilon, sigma)


@dataclass
class MetricsReport:
    cd_l1: float
    cd_l2: float
    hausdorff: float
    one_sided_cd: float
    one_sided_hd: float
    normal_consistency: float | None
    f_score: float
    f_threshold: float
    ecd_l1: float | None = None
    ecd_l2: float | None = None
    ecd_fallback: bool | None = None
    n_samples: int = 0
    ecd_epsilon: float = 0.01
    ecd_sigma: float = 0.1

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self, cd_l2_factor: float = 1.0) -> str:
        """Flat ``key=value`` block; ``cd_l2_factor`` adds a scaled CD_L2 line (e.g. 100 or 1000)."""
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k}={'unavailable' if v is None else v}")
        if cd_l2_factor != 1.0:
            lines.append(f"cd_l2_x{cd_l2_factor:g}={self.cd_l2 * cd_l2_factor}")
        return "\n".join(lines) + "\n"

    def csv_header(self) -> str:
        return ",".join(self.as_dict())

    def csv_row(self) -> str:
        return ",".join("" if v is None else str(v) for v in self.as_dict().values())


def evaluate(pred: Mesh, gt, n_samples: int = 100_000, fscore_threshold: float = 0.01,
             ecd: bool = False, epsilon: float = 0.01, sigma: float = 0.1, seed: int = 0,
             gt_normals=None) -> MetricsReport:
    """Score ``pred`` against a reference mesh, or against reference points.

    Against bare points (no ``gt_normals``) normal consistency and edge
    Chamfer are reported as unavailable. One-sided distances run from the
    prediction to the reference. Both meshes are sampled with the same seed,
    so a mesh scored against itself gets exactly zero distance.
    """
    pp, pn = sample_mesh_surface(pred, n_samples, seed)
    if isinstance(gt, Mesh):
        gp, gn = sample_mesh_surface(gt, n_samples, seed)
    else:
        gp, gn = _pts(gt), gt_normals
    nc = normal_consistency(pp, pn, gp, gn) if gn is not None else None
    rep = MetricsReport(
        cd_l1=chamfer(pp, gp, "L1"),
        cd_l2=chamfer(pp, gp, "L2"),
        hausdorff=hausdorff(pp, gp),
        one_sided_cd=one_sided_chamfer(pp, gp, "L1"),
        one_sided_hd=one_sided_hausdorff(pp, gp),
        normal_consistency=nc,
        f_score=f_score(pp, gp, fscore_threshold),
        f_threshold=fscore_threshold,
        n_samples=n_samples,
        ecd_epsilon=epsilon,
        ecd_sigma=sigma,
    )
    if ecd and gn is not None:
        rep.ecd_l1, rep.ecd_l2, rep.ecd_fallback = edge_chamfer_points(pp, pn, gp, gn, epsilon, sigma)
    return rep


def level_set_irregularity(values, spacing: float, band: float) -> float:
    """Spread of the level-set spacing of a gridded 2D field near its zero set.

    Neighboring level sets are ``1/|grad f|`` apart, so the coefficient of
    variation of ``|grad f|`` over ``|f| < band`` measures how unevenly the
    level sets are spaced. A true distance field gives 0.
    """
    values = np.asarray(values, dtype=np.float64)
    gx, gy = np.gradient(values, spacing)
    g = np.hypot(gx, gy)[np.abs(values) < band]
    if g.size == 0:
        raise InputError("no grid nodes inside the band")
    return float(g.std() / g.mean())
