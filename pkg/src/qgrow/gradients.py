"""Parameter-shift derivatives of the model output.

Every rotation in the circuit has a generator with eigenvalues +-1/2, so the
two-point shift ``(f(a + pi/2) - f(a - pi/2)) / 2`` is the exact derivative
with respect to that gate's angle.  Derivatives with respect to ``psi`` and
to the inputs follow by the chain rule through ``angle = psi * x[d]``.

These routines only ever run the circuit forward.  Training uses the adjoint
sweep in :mod:`qgrow.engine` instead; the two are checked against each other
and against finite differences in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .engine import compile_ops, evaluate
from .errors import NumericError, ShapeError
from .model import ReuploaderModel

SHIFT = np.pi / 2


@dataclass(frozen=True)
class DerivativeRequest:
    dim: int
    order: int = 1

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"derivative order must be 1 or 2, got {self.order}")


def _point(model: ReuploaderModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.input_dim:
        raise ShapeError(f"model takes {model.input_dim} inputs, got {x.size}")
    return x.reshape(1, -1)


def _shifted(model, X, ops, shifts: dict[int, float]) -> float:
    return float(evaluate(model, X, offsets=shifts, ops=ops).value[0])


def _gate_shift(model, X, ops, i: int) -> float:
    return 0.5 * (
        _shifted(model, X, ops, {i: SHIFT}) - _shifted(model, X, ops, {i: -SHIFT})
    )


def parameter_shift_gradient(model: ReuploaderModel, x) -> np.ndarray:
    """d<Z>/d(trainable slot) at a single input, ordered like
    ``model.params.trainable_keys()``."""
    X = _point(model, x)
    ops = compile_ops(model)
    where = {(op.param, op.slot): i for i, op in enumerate(ops) if op.param}
    grads = []
    for kind, slot in model.params.trainable_keys():
        i = where[(kind, slot)]
        g = _gate_shift(model, X, ops, i)
        if kind == "psi":
            g *= X[0, ops[i].dim]
        grads.append(g)
    grads = np.array(grads)
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite parameter-shift gradient")
    return grads


def input_derivative(model: ReuploaderModel, x, req: DerivativeRequest) -> float:
    """First or second derivative of the output along input ``req.dim``.

    ``f`` depends on ``x[d]`` only through the encoding angles
    ``a_g = psi_g * x[d]``, so ``df/dx = sum_g psi_g df/da_g`` and the second
    derivative sums ``psi_g psi_h d2f/(da_g da_h)`` over all ordered pairs,
    each term being a four-point shift.  On the diagonal the two shifts land
    on the same gate and combine into shifts of ``+-pi`` and ``0``.
    """
    X = _point(model, x)
    ops = compile_ops(model)
    psi = model.params.psi
    enc = [i for i, op in enumerate(ops) if op.dim == req.dim]
    if not enc:
        return 0.0
    if req.order == 1:
        return float(sum(psi[ops[i].slot] * _gate_shift(model, X, ops, i) for i in enc))

    total = 0.0
    for g, h in product(enc, enc):
        acc = 0.0
        for sg, sh in product((1, -1), (1, -1)):
            shifts = {g: sg * SHIFT}
            shifts[h] = shifts.get(h, 0.0) + sh * SHIFT
            acc += sg * sh * _shifted(model, X, ops, shifts)
        total += psi[ops[g].slot] * psi[ops[h].slot] * acc / 4.0
    return float(total)
