"""Parameter gradients of field values, of input gradients, and of whole losses.

Losses in this package contain the input gradient of the field, so their
parameter gradients need mixed second derivatives. Single-query helpers
use forward-over-reverse (a JVP pushed through the reverse pass); batched
training losses go through torch autograd with ``create_graph``.
"""
from __future__ import annotations

from collections import OrderedDict

import numpy as np
import torch
from torch.func import functional_call, grad, jvp

ParamGrad = OrderedDict  # name -> tensor, same shapes as field.named_parameters()


class TrainingError(RuntimeError):
    """Non-finite loss or gradient; carries the offending term and query."""

    def __init__(self, message, term=None, query_index=None):
        super().__init__(message)
        self.term = term
        self.query_index = query_index


def _params(field):
    return OrderedDict((k, v.detach()) for k, v in field.named_parameters())


def _as_input(field, q):
    return torch.as_tensor(np.asarray(q, dtype=np.float64), dtype=field.dtype).reshape(field.dim)


def grad_params_of_value(field, q) -> ParamGrad:
    """d f(q) / d theta."""
    x = _as_input(field, q)

    def value(params):
        return functional_call(field, params, (x[None, :],))[0]

    return OrderedDict(grad(value)(_params(field)))


def grad_params_of_input_gradient(field, q, cotangent) -> ParamGrad:
    """d (c . grad_x f(q)) / d theta via forward-over-reverse.

    The reverse pass gives x -> d f(x)/d theta; a JVP of that map along the
    direction ``c`` yields the mixed derivative without forming a Hessian.
    """
    x = _as_input(field, q)
    c = torch.as_tensor(np.asarray(cotangent, dtype=np.float64), dtype=field.dtype).reshape(field.dim)
    params = _params(field)

    def param_grad_at(xx):
        def value(p):
            return functional_call(field, p, (xx[None, :],))[0]
        return grad(value)(params)

    _, tangent = jvp(param_grad_at, (x,), (c,))
    return OrderedDict(tangent)


def grad_params_of_loss(loss_evaluator, field, batch):
    """Evaluate ``loss_evaluator(field, batch)`` and backpropagate into the parameters.

    The evaluator returns a scalar tensor or an object with a ``total``
    tensor attribute (a term breakdown). Returns ``(value, ParamGrad)``.
    """
    out = loss_evaluator(field, batch)
    total = out.total if hasattr(out, "total") else out
    check_finite(out)
    names = [k for k, _ in field.named_parameters()]
    params = [p for _, p in field.named_parameters()]
    grads = torch.autograd.grad(total, params, allow_unused=True)
    pg = OrderedDict()
    for name, p, g in zip(names, params, grads):
        g = torch.zeros_like(p) if g is None else g
        if not torch.all(torch.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name}", term="gradient")
        pg[name] = g.detach()
    return float(total.detach()), pg


def check_finite(out) -> None:
    """Raise TrainingError naming the first non-finite term (and query, if known)."""
    terms = getattr(out, "terms", None)
    if terms is None:
        if not torch.isfinite(out).all():
            raise TrainingError("non-finite loss", term="total")
        return
    for name, value in terms().items():
        if not torch.isfinite(value).all():
            per_query = getattr(out, "per_query", {}).get(name)
            qi = None
            if per_query is not None:
                bad = torch.nonzero(~torch.isfinite(per_query)).flatten()
                qi = int(bad[0]) if len(bad) else None
            where = f" at query {qi}" if qi is not None else ""
            raise TrainingError(f"non-finite loss term {name}{where}", term=name, query_index=qi)


def flatten(pg: ParamGrad) -> torch.Tensor:
    return torch.cat([g.reshape(-1) for g in pg.values()])


def combine(a: ParamGrad, b: ParamGrad, wa: float = 1.0, wb: float = 1.0) -> ParamGrad:
    return OrderedDict((k, wa * a[k] + wb * b[k]) for k in a)
