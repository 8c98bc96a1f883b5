"""Randomised property suites: growth preservation and derivative accuracy.

Shared by ``qgrow verify`` and the acceptance tests.  Each suite draws its
own models from a seeded generator and returns the worst deviation found.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gradients import DerivativeRequest, input_derivative, parameter_shift_gradient
from .growth import GrowthSchedule, GrowthStrategy, grow, verify_preservation
from .model import (
    InitSpec,
    ReuploaderModel,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    forward,
    gapped_layout,
    reuploader_layout,
)


def random_model(
    rng: np.random.Generator,
    max_qubits: int = 2,
    max_blocks: int = 9,
    integer_psi: bool = False,
    init_mode: str | None = None,
    gapped: bool = False,
    paired: bool | None = None,
) -> ReuploaderModel:
    """A random reuploader with at most ``max_blocks`` blocks."""
    n = int(rng.integers(1, max_qubits + 1))
    rotations = [("RY",), ("RY", "RX"), ("RX",)][int(rng.integers(3))]
    if paired is None:
        paired = bool(rng.integers(2)) if init_mode != "identity" else True
    a = ansatz_block(n, rotations, paired=paired)
    input_dim = int(rng.integers(1, n + 1))
    dims = [int(rng.integers(input_dim)) for _ in range(n)]
    # Make sure every input dimension is encoded somewhere.
    dims[0] = input_dim - 1
    if input_dim > 1:
        dims[1 % n] = 0
    f = feature_map_block(n, dims, paired=paired)
    if gapped:
        n_gaps = int(rng.integers(2, max_blocks // 2 + 1))
        filled = rng.choice(n_gaps, size=int(rng.integers(1, n_gaps)), replace=False)
        layout = gapped_layout(n_gaps, filled, a, f)
    else:
        layout = reuploader_layout(int(rng.integers(1, (max_blocks - 1) // 2 + 1)), a, f)
    mode = init_mode or ("uniform" if rng.integers(2) else "identity")
    init = InitSpec(mode, (0.0, math.pi), (0.0, math.pi))
    model = build_reuploader(n, layout, init, seed=int(rng.integers(2**31)), input_dim=input_dim)
    if integer_psi:
        psi = rng.integers(-2, 3, size=model.params.psi.size).astype(float)
        model = model.with_params(psi=psi)
    return model


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.cases} cases, worst {self.worst:.3e} (tol {self.tolerance:g})"


def preservation_suite(cases: int = 200, seed: int = 0, tol: float = 1e-10) -> SuiteResult:
    """Grow random (model, strategy, seed) triples; report the largest probe residual."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    strategies = list(GrowthStrategy)
    for _ in range(cases):
        strategy = strategies[int(rng.integers(len(strategies)))]
        gapped = strategy is not GrowthStrategy.BLOCK
        # Bounds keep the grown model within 9 blocks.
        max_blocks = 8 if gapped else 7
        model = random_model(rng, 2, max_blocks, init_mode="uniform", gapped=gapped, paired=True)
        schedule = GrowthSchedule(strategy, max_feature_map_blocks=model.n_feature_maps + 1)
        grown, event = grow(model, schedule, seed=int(rng.integers(2**31)))
        worst = max(worst, event.residual, verify_preservation(model, grown))
    return SuiteResult("preservation", cases, worst, tol)


def _fd_param_gradient(model: ReuploaderModel, x, h: float) -> np.ndarray:
    v0 = model.params.trainable_vector()
    out = np.empty(v0.size)
    for i in range(v0.size):
        e = np.zeros(v0.size)
        e[i] = h
        out[i] = (
            forward(model.with_trainable_vector(v0 + e), x)
            - forward(model.with_trainable_vector(v0 - e), x)
        ) / (2 * h)
    return out


def gradient_suite(
    cases: int = 100, seed: int = 0, tol_param: float = 1e-6, tol_d2: float = 1e-4
) -> tuple[SuiteResult, SuiteResult]:
    """Shift-rule partials vs central differences (h=1e-5) and second input
    derivatives vs a 3-point stencil (h=1e-4)."""
    rng = np.random.default_rng(seed)
    worst_p = worst_d2 = 0.0
    h = 1e-4
    for _ in range(cases):
        model = random_model(rng, 2, 9)
        x = rng.uniform(0.0, 2 * math.pi, model.input_dim)
        dev = np.abs(parameter_shift_gradient(model, x) - _fd_param_gradient(model, x, 1e-5))
        worst_p = max(worst_p, float(dev.max()))
        f0 = forward(model, x)
        for d in range(model.input_dim):
            e = np.zeros(model.input_dim)
            e[d] = h
            stencil = (forward(model, x + e) - 2 * f0 + forward(model, x - e)) / h**2
            exact = input_derivative(model, x, DerivativeRequest(d, 2))
            worst_d2 = max(worst_d2, abs(exact - stencil))
    return (
        SuiteResult("parameter gradients", cases, worst_p, tol_param),
        SuiteResult("second input derivatives", cases, worst_d2, tol_d2),
    )
