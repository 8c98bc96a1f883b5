"""Batched circuit evaluation with input-derivative jets and reverse mode.

The state carried through the circuit is a stack of ``C`` amplitude arrays,
shape ``(C, B, 2**n)``: the state itself and, for every tracked input
dimension ``d``, its first and second derivatives with respect to ``x[d]``.
An encoding gate ``RX(s * x[d])`` acts on that stack as ``U @ M`` where ``M``
mixes the derivative slots with ``A = -i s X / 2`` (``A`` commutes with ``U``):

    J_d'  = J_d  + A J_0
    J_dd' = J_dd + 2 A J_d + A^2 J_0          (A^2 = -s^2 / 4)

From the final stack we read ``f = <Z>``, ``df/dx_d`` and ``d2f/dx_d^2``.
:func:`backward` pulls a loss cotangent on those outputs back to ``theta``
and ``psi`` in a single reverse sweep (adjoint differentiation), which is
what makes the Laplace objective affordable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError
from .model import ReuploaderModel, Role
from .simulator import GateKind, cnot_permutation, half_generator, rotate, z_signs


@dataclass(frozen=True)
class Op:
    kind: GateKind
    qubit: int
    perm: np.ndarray | None = None
    param: str | None = None  # "theta" or "psi"
    slot: int | None = None
    dim: int | None = None


def compile_ops(model: ReuploaderModel) -> list[Op]:
    ops = []
    for block in model.blocks:
        for g in block.gates:
            if g.kind is GateKind.CNOT:
                perm = cnot_permutation(model.n_qubits, g.control, g.qubit)
                ops.append(Op(g.kind, g.qubit, perm=perm))
            elif block.role is Role.FEATURE_MAP:
                ops.append(Op(g.kind, g.qubit, param="psi", slot=g.slot, dim=g.input_dim))
            else:
                ops.append(Op(g.kind, g.qubit, param="theta", slot=g.slot))
    return ops


@dataclass
class Evaluation:
    value: np.ndarray  # (B,)
    d1: np.ndarray  # (B, len(dims))
    d2: np.ndarray  # (B, len(dims))
    dims: tuple[int, ...]
    # Retained for backward(); None when evaluate(..., keep=False).
    _tape: tuple | None = None


def _angles(ops, model, X, offsets):
    theta, psi = model.params.theta, model.params.psi
    out = []
    for i, op in enumerate(ops):
        if op.perm is not None:
            out.append(None)
            continue
        a = theta[op.slot] if op.param == "theta" else psi[op.slot] * X[:, op.dim]
        if offsets and i in offsets:
            a = a + offsets[i]
        out.append(a)
    return out


def _mix(J, op_hg, s, k):
    # Apply M for tracked-dim slot k (value 0, first 1+2k, second 2+2k).
    i1, i2 = 1 + 2 * k, 2 + 2 * k
    J = J.copy()
    hg0 = op_hg(J[0])
    J[i2] = J[i2] + 2.0 * s * op_hg(J[i1]) - (s * s / 4.0) * J[0]
    J[i1] = J[i1] + s * hg0
    return J


def evaluate(
    model: ReuploaderModel,
    X: np.ndarray,
    dims: Sequence[int] = (),
    offsets: dict[int, float] | None = None,
    keep: bool = False,
    ops: list[Op] | None = None,
) -> Evaluation:
    """Run the circuit on every row of ``X``.

    ``offsets`` maps op indices (in :func:`compile_ops` order) to angle shifts
    and is how parameter-shift rules are evaluated.  ``keep=True`` stores the
    intermediate stacks so :func:`backward` can run afterwards.
    """
    X = np.asarray(X, dtype=np.float64)
    ops = compile_ops(model) if ops is None else ops
    dims = tuple(dims)
    track = {d: k for k, d in enumerate(dims)}
    n_comp = 1 + 2 * len(dims)
    B = X.shape[0]
    J = np.zeros((n_comp, B, 2**model.n_qubits), dtype=np.complex128)
    J[0, :, 0] = 1.0
    angles = _angles(ops, model, X, offsets)
    stack = [] if keep else None
    for op, a in zip(ops, angles):
        if keep:
            stack.append(J)
        if op.perm is not None:
            J = J[..., op.perm]
            continue
        if op.dim in track:
            s = model.params.psi[op.slot]
            J = _mix(J, lambda v, op=op: half_generator(v, op.kind, op.qubit), s, track[op.dim])
        J = rotate(J, op.kind, op.qubit, a)

    z = z_signs(model.n_qubits, model.measured_qubit)
    value = np.einsum("bi,i,bi->b", J[0].conj(), z, J[0]).real
    d1 = np.empty((B, len(dims)))
    d2 = np.empty((B, len(dims)))
    for k in range(len(dims)):
        J1, J2 = J[1 + 2 * k], J[2 + 2 * k]
        d1[:, k] = 2.0 * np.einsum("bi,i,bi->b", J[0].conj(), z, J1).real
        d2[:, k] = 2.0 * (
            np.einsum("bi,i,bi->b", J1.conj(), z, J1).real
            + np.einsum("bi,i,bi->b", J[0].conj(), z, J2).real
        )
    tape = (ops, angles, stack, J, X, z) if keep else None
    return Evaluation(value, d1, d2, dims, tape)


def backward(
    model: ReuploaderModel,
    ev: Evaluation,
    g_value: np.ndarray | None = None,
    g_d1: np.ndarray | None = None,
    g_d2: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``sum(g_value*value + g_d1*d1 + g_d2*d2)`` w.r.t. (theta, psi)."""
    if ev._tape is None:
        raise ValueError("evaluate() was called without keep=True")
    ops, angles, stack, J_final, X, z = ev._tape
    B = X.shape[0]
    K = len(ev.dims)
    track = {d: k for k, d in enumerate(ev.dims)}
    g_value = np.zeros(B) if g_value is None else np.asarray(g_value, float)
    g_d1 = np.zeros((B, K)) if g_d1 is None else np.asarray(g_d1, float).reshape(B, K)
    g_d2 = np.zeros((B, K)) if g_d2 is None else np.asarray(g_d2, float).reshape(B, K)

    # Cotangent convention: dL = Re sum(conj(lam) * dJ).
    zJ = z * J_final
    lam = np.zeros_like(J_final)
    lam[0] = 2.0 * g_value[:, None] * zJ[0]
    for k in range(K):
        i1, i2 = 1 + 2 * k, 2 + 2 * k
        lam[0] += 2.0 * g_d1[:, k, None] * zJ[i1] + 2.0 * g_d2[:, k, None] * zJ[i2]
        lam[i1] += 2.0 * g_d1[:, k, None] * zJ[0] + 4.0 * g_d2[:, k, None] * zJ[i1]
        lam[i2] += 2.0 * g_d2[:, k, None] * zJ[0]

    grad_theta = np.zeros(model.params.theta.size)
    grad_psi = np.zeros(model.params.psi.size)
    J_after = J_final
    for i in range(len(ops) - 1, -1, -1):
        op, a = ops[i], angles[i]
        J_before = stack[i]
        if op.perm is not None:
            lam = lam[..., op.perm]
            J_after = J_before
            continue

        def hg(v, op=op):
            return half_generator(v, op.kind, op.qubit)

        hJ = hg(J_after)
        d_angle = np.einsum("cbi,cbi->b", lam.conj(), hJ).real
        if op.param == "theta":
            grad_theta[op.slot] += d_angle.sum()
        else:
            total = X[:, op.dim] * d_angle
            if op.dim in track:
                k = track[op.dim]
                i1, i2 = 1 + 2 * k, 2 + 2 * k
                # d/ds of M, pushed through U, reduces to these two terms.
                total = total + np.einsum("bi,bi->b", lam[i1].conj(), hJ[0]).real
                total = total + 2.0 * np.einsum("bi,bi->b", lam[i2].conj(), hJ[i1]).real
            grad_psi[op.slot] += total.sum()

        mu = rotate(lam, op.kind, op.qubit, -a)
        if op.dim in track:
            s = model.params.psi[op.slot]
            k = track[op.dim]
            i1, i2 = 1 + 2 * k, 2 + 2 * k
            # M^dagger, with A^dagger = -s * hg.
            lam = mu.copy()
            lam[0] = mu[0] - s * hg(mu[i1]) - (s * s / 4.0) * mu[i2]
            lam[i1] = mu[i1] - 2.0 * s * hg(mu[i2])
        else:
            lam = mu
        J_after = J_before

    if not (np.all(np.isfinite(grad_theta)) and np.all(np.isfinite(grad_psi))):
        raise NumericError("non-finite gradient")
    return grad_theta, grad_psi


def trainable_gradient(model: ReuploaderModel, grad_theta, grad_psi) -> np.ndarray:
    """Flatten a (theta, psi) gradient onto the model's trainable slots."""
    mask = model.params.psi_trainable
    return np.concatenate([grad_theta, np.asarray(grad_psi)[mask]])
