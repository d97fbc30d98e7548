"""Optimization loop: fixed query set, random mini-batches, Adam on the total loss."""
from __future__ import annotations

import copy
import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .autodiff import TrainingError, check_finite
from .filter import FilterConfig, total_loss
from .geom import InputError, PointCloud, sample_queries
from .net import geometric_init

log = logging.getLogger(__name__)

LOG_COLUMNS = ("iteration", "l_dist", "l_zero", "l_field", "l_cd", "l_pull", "total")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 10000
    learning_rate: float = 1e-3
    adam_betas: tuple = (0.9, 0.999)
    batch_queries: int = 256
    warmup: int = 0
    checkpoint_every: int = 0
    seed: int = 0
    per_point: int = 25
    sigma_k: int = 50
    layer_widths: tuple = (64, 64, 64)
    beta: float = 100.0
    init_radius: float = 0.5
    dtype: str = "float32"
    deterministic: bool = True
    threads: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InputError("learning_rate must be positive")
        if self.batch_queries < 1:
            raise InputError("batch_queries must be at least 1")
        if self.iterations < 0:
            raise InputError("iterations must be non-negative")
        if self.dtype not in ("float32", "float64"):
            raise InputError("dtype must be float32 or float64")
        b1, b2 = self.adam_betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise InputError("adam betas must lie in [0, 1)")

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32


@dataclass
class TrainLog:
    history: list = field(default_factory=list)      # one dict of term floats per iteration
    wall_time: list = field(default_factory=list)    # seconds per iteration

    def __len__(self):
        return len(self.history)

    def totals(self) -> np.ndarray:
        return np.array([h["total"] for h in self.history])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for i, h in enumerate(self.history):
                w.writerow([i] + [repr(h[c]) for c in LOG_COLUMNS[1:]])


@dataclass
class AdamState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
    """In-place Adam update with bias correction; returns ``state``."""
    b1, b2 = betas
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    for g in grads:
        if not torch.all(torch.isfinite(g)):
            raise TrainingError("non-finite gradient passed to adam_step", term="gradient")
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            p.sub_(lr * (m / c1) / (torch.sqrt(v / c2) + eps))
    return state


def _configure_threads(cfg: TrainConfig):
    if cfg.deterministic:
        torch.set_num_threads(1)
    elif cfg.threads > 0:
        torch.set_num_threads(cfg.threads)


def train(cloud: PointCloud, filter_cfg: FilterConfig | None = None, train_cfg: TrainConfig | None = None,
          on_checkpoint=None, batch=None):
    """Fit a field to ``cloud`` (already normalized). Returns ``(field, TrainLog)``.

    ``on_checkpoint(field, iteration)`` is called every ``checkpoint_every``
    iterations. On a non-finite loss or a collapsed gradient a TrainingError
    is raised whose ``field`` attribute holds the last good parameters.
    """
    filter_cfg = filter_cfg or FilterConfig()
    train_cfg = train_cfg or TrainConfig()
    _configure_threads(train_cfg)
    torch.manual_seed(train_cfg.seed)

    fld = geometric_init(train_cfg.layer_widths, train_cfg.init_radius, train_cfg.seed,
                         dim=cloud.dim, beta=train_cfg.beta, dtype=train_cfg.torch_dtype)
    tlog = TrainLog()
    if train_cfg.iterations == 0:
        return fld, tlog

    if batch is None:
        batch = sample_queries(cloud, train_cfg.per_point, min(train_cfg.sigma_k, cloud.count),
                               train_cfg.seed, filter_cfg.k_filter)
    if len(batch) == 0:
        raise InputError("no training queries (per_point must be positive)")
    rng = np.random.default_rng(train_cfg.seed + 1)
    params = list(fld.parameters())
    state = AdamState()
    bsz = min(train_cfg.batch_queries, len(batch))
    last_good = None

    for it in range(train_cfg.iterations):
        t0 = time.perf_counter()
        rows = rng.choice(len(batch), size=bsz, replace=False) if bsz < len(batch) else np.arange(len(batch))
        sub = batch.subset(rows)
        dist_index = np.unique(sub.neighbor_indices)
        cd_index = np.unique(sub.nn_index)
        br = total_loss(fld, sub, cloud, filter_cfg, dist_index=dist_index, cd_index=cd_index,
                        compute_all=False)
        try:
            check_finite(br)
            if br.degenerate_fraction > 0.5:
                raise TrainingError(
                    f"field collapse: gradient vanished at {br.degenerate_fraction:.0%} of queries "
                    f"(iteration {it})", term="gradient")
            grads = torch.autograd.grad(br.total, params)
            lr = train_cfg.learning_rate
            if train_cfg.warmup > 0:
                lr *= min(1.0, (it + 1) / train_cfg.warmup)
            last_good = [p.detach().clone() for p in params]
            adam_step(params, grads, state, lr, train_cfg.adam_betas)
        except TrainingError as err:
            if last_good is not None:
                with torch.no_grad():
                    for p, good in zip(params, last_good):
                        p.copy_(good)
            err.field = fld
            err.log = tlog
            err.iteration = it
            raise
        tlog.history.append(br.as_floats())
        tlog.wall_time.append(time.perf_counter() - t0)
        if train_cfg.checkpoint_every and on_checkpoint and (it + 1) % train_cfg.checkpoint_every == 0:
            on_checkpoint(fld, it + 1)
        if it % 1000 == 0:
            log.info("iter %d total %.6f", it, tlog.history[-1]["total"])
    return fld, tlog


def smoothed(values, window: int = 100) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        return values.copy()
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def clone_field(fld):
    return copy.deepcopy(fld)
