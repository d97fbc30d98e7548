"""O(N^2) reference implementations of the reconstruction metrics."""
import numpy as np


def dmat(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def chamfer(a, b, order="L1"):
    d = dmat(a, b)
    if order == "L2":
        d = d ** 2
    return 0.5 * (d.min(1).mean() + d.min(0).mean())


def hausdorff(a, b):
    d = dmat(a, b)
    return max(d.min(1).max(), d.min(0).max())


def normal_consistency(a, na, b, nb):
    d = dmat(a, b)
    ab = np.abs((na * nb[d.argmin(1)]).sum(1)).mean()
    ba = np.abs((nb * na[d.argmin(0)]).sum(1)).mean()
    return 0.5 * (ab + ba)


def f_score(a, b, t):
    d = dmat(a, b)
    p = (d.min(1) < t).mean()
    r = (d.min(0) < t).mean()
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def edge_mask(p, n, eps, sigma):
    d = dmat(p, p)
    dots = np.abs(n @ n.T)
    close = (d <= eps) & ~np.eye(len(p), dtype=bool)
    return np.any(close & (dots < sigma), axis=1)


def ecd(a, na, b, nb, eps, sigma):
    ea, eb = a[edge_mask(a, na, eps, sigma)], b[edge_mask(b, nb, eps, sigma)]
    fb = len(ea) == 0 or len(eb) == 0
    ea = ea if len(ea) else a
    eb = eb if len(eb) else b
    return chamfer(ea, eb, "L1"), chamfer(ea, eb, "L2"), fb
