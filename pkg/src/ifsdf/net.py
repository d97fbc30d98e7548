"""The SDF network: a softplus MLP with geometric (sphere) initialization."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

MAGIC = b"IFSDF1"

DEFAULT_WIDTHS = (256,) * 8


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class SdfSample:
    value: float
    gradient: np.ndarray


def default_skip(layer_widths) -> tuple[int, ...]:
    n = len(layer_widths)
    return (n // 2,) if n >= 4 else ()


class FieldBase(nn.Module):
    """Anything mapping (B, dim) points to (B,) signed distances.

    Subclasses set ``dim`` and implement ``forward``; input gradients come
    from autograd.
    """

    dim: int = 3

    @property
    def dtype(self):
        for p in self.parameters():
            return p.dtype
        return torch.float64

    def value_and_grad(self, x: torch.Tensor, create_graph: bool = False):
        """Field values and exact input gradients for a batch of points."""
        with torch.enable_grad():
            if not x.requires_grad:
                x = x.detach().requires_grad_(True)
            f = self(x)
            (g,) = torch.autograd.grad(f.sum(), x, create_graph=create_graph)
        if not create_graph:
            f, g = f.detach(), g.detach()
        return f, g

    def eval_points(self, points, chunk: int = 65536):
        """Numpy convenience: values and gradients, chunked to bound memory."""
        pts = np.array(points, dtype=np.float64).reshape(-1, self.dim)
        vals, grads = [], []
        for s in range(0, len(pts), chunk):
            x = torch.as_tensor(pts[s:s + chunk], dtype=self.dtype)
            f, g = self.value_and_grad(x)
            vals.append(f.numpy().astype(np.float64))
            grads.append(g.numpy().astype(np.float64))
        if not vals:
            return np.zeros(0), np.zeros((0, self.dim))
        return np.concatenate(vals), np.concatenate(grads)

    def values(self, points, chunk: int = 65536) -> np.ndarray:
        pts = np.array(points, dtype=np.float64).reshape(-1, self.dim)
        out = []
        with torch.no_grad():
            for s in range(0, len(pts), chunk):
                out.append(self(torch.as_tensor(pts[s:s + chunk], dtype=self.dtype)).numpy())
        return np.concatenate(out).astype(np.float64) if out else np.zeros(0)


class MlpField(FieldBase):
    """Scalar field f(x) built from ``len(layer_widths)`` softplus hidden layers.

    ``skip_layers`` lists hidden-layer indices whose input is the previous
    activation concatenated with the raw coordinates (scaled by 1/sqrt(2)).
    """

    def __init__(self, layer_widths=DEFAULT_WIDTHS, dim: int = 3, beta: float = 100.0,
                 skip_layers=None, dtype=torch.float32):
        super().__init__()
        self.layer_widths = tuple(int(w) for w in layer_widths)
        self.dim = int(dim)
        self.beta = float(beta)
        self.skip_layers = tuple(default_skip(self.layer_widths) if skip_layers is None else skip_layers)
        if any(s <= 0 or s >= len(self.layer_widths) for s in self.skip_layers):
            raise ValueError("skip layer index must address an interior hidden layer")

        dims = [self.dim, *self.layer_widths, 1]
        layers = []
        for i in range(len(dims) - 1):
            out_dim = dims[i + 1]
            if i + 1 in self.skip_layers:
                out_dim -= self.dim
                if out_dim <= 0:
                    raise ValueError("layer too narrow to host a skip connection")
            layers.append(nn.Linear(dims[i], out_dim, dtype=dtype))
        self.layers = nn.ModuleList(layers)

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Activations feeding the output layer."""
        h = x
        for i, lin in enumerate(self.layers[:-1]):
            if i in self.skip_layers:
                h = torch.cat([h, x], dim=-1) / math.sqrt(2.0)
            h = F.softplus(lin(h), beta=self.beta)
        return h

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers[-1](self.features(x))[..., 0]


def geometric_init(layer_widths=DEFAULT_WIDTHS, radius: float = 0.5, rng_seed: int = 0,
                   dim: int = 3, beta: float = 100.0, skip_layers=None,
                   dtype=torch.float32, fit_output: bool = True) -> MlpField:
    """Initialize so that f(x) is close to ``|x| - radius``.

    Hidden layers get N(0, 2/out) weights and zero bias; the output layer gets
    weights near sqrt(pi/in) and bias ``-radius``. With ``fit_output`` the
    output layer is then refit by ridge regression (pulled toward those
    weights) against the sphere SDF on a fixed sample of the working box,
    which removes the slope/offset drift that softplus stacking introduces.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    gen = torch.Generator().manual_seed(int(rng_seed))
    field = MlpField(layer_widths, dim=dim, beta=beta, skip_layers=skip_layers, dtype=dtype)
    last = len(field.layers) - 1
    with torch.no_grad():
        for i, lin in enumerate(field.layers):
            out_dim, in_dim = lin.weight.shape
            if i == last:
                w = math.sqrt(math.pi) / math.sqrt(in_dim) + 1e-4 * torch.randn(lin.weight.shape, generator=gen, dtype=torch.float64)
                lin.weight.copy_(w)
                lin.bias.fill_(-radius)
            else:
                w = torch.randn(lin.weight.shape, generator=gen, dtype=torch.float64) * (math.sqrt(2.0) / math.sqrt(out_dim))
                lin.weight.copy_(w)
                lin.bias.zero_()
    if fit_output:
        _fit_output_layer(field, radius)
    return field


def _fit_output_layer(field: MlpField, radius: float, ridge: float = 1e-4, n: int = 8192) -> None:
    half = max(0.55, 1.1 * radius)
    pts = np.random.default_rng(12345).uniform(-half, half, (n, field.dim))
    pts = pts[np.linalg.norm(pts, axis=1) > 0.05]
    with torch.no_grad():
        H = field.features(torch.as_tensor(pts, dtype=field.dtype)).double().numpy()
    A = np.hstack([H, np.ones((len(H), 1))])
    target = np.linalg.norm(pts, axis=1) - radius
    last = field.layers[-1]
    w0 = np.concatenate([last.weight.detach().double().numpy()[0], [-radius]])
    lhs = A.T @ A / len(A) + ridge * np.eye(A.shape[1])
    rhs = A.T @ target / len(A) + ridge * w0
    w = np.linalg.solve(lhs, rhs)
    with torch.no_grad():
        last.weight.copy_(torch.as_tensor(w[None, :-1]))
        last.bias.fill_(float(w[-1]))


def eval(field: MlpField, q) -> SdfSample:  # noqa: A001 - mirrors the public op name
    f, g = field.eval_points(np.asarray(q, dtype=np.float64)[None, :])
    return SdfSample(value=float(f[0]), gradient=g[0])


def eval_batch(field: MlpField, qs) -> list[SdfSample]:
    f, g = field.eval_points(qs)
    return [SdfSample(float(v), gv) for v, gv in zip(f, g)]


# --- checkpoints ---------------------------------------------------------

_DTYPES = {"float32": (torch.float32, "<f4"), "float64": (torch.float64, "<f8")}


def save_checkpoint(field: MlpField, path, extra: dict | None = None) -> None:
    """Write ``MAGIC | u32 header length | JSON header | little-endian row-major params``."""
    dtype_name = "float64" if field.dtype == torch.float64 else "float32"
    np_dtype = _DTYPES[dtype_name][1]
    arrays, shapes = [], []
    for lin in field.layers:
        for p in (lin.weight, lin.bias):
            a = np.ascontiguousarray(p.detach().cpu().numpy().astype(np_dtype))
            arrays.append(a)
            shapes.append(list(a.shape))
    header = {
        "format": 1,
        "dim": field.dim,
        "layer_widths": list(field.layer_widths),
        "beta": field.beta,
        "skip_layers": list(field.skip_layers),
        "dtype": dtype_name,
        "shapes": shapes,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes(order="C"))


def load_checkpoint(path) -> tuple[MlpField, dict]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not an IFSDF1 checkpoint")
    off = len(MAGIC)
    (hlen,) = struct.unpack("<I", data[off:off + 4])
    off += 4
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    torch_dtype, np_dtype = _DTYPES[header["dtype"]]
    field = MlpField(header["layer_widths"], dim=header["dim"], beta=header["beta"],
                     skip_layers=header["skip_layers"], dtype=torch_dtype)
    params = [p for lin in field.layers for p in (lin.weight, lin.bias)]
    with torch.no_grad():
        for p, shape in zip(params, header["shapes"]):
            if list(p.shape) != shape:
                raise CheckpointError(f"{path}: parameter shape mismatch {shape} vs {list(p.shape)}")
            n = int(np.prod(shape)) * np.dtype(np_dtype).itemsize
            raw = data[off:off + n]
            if len(raw) != n:
                raise CheckpointError(f"{path}: truncated parameter data")
            a = np.frombuffer(raw, dtype=np_dtype).reshape(shape)
            p.copy_(torch.from_numpy(a.copy()))
            off += n
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameters")
    return field, header.get("extra", {})
