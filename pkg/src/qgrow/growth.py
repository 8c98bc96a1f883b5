"""Circuit growth: when to grow, and the three ways of doing it.

* ``BLOCK`` appends ``(feature map, ansatz)`` block pairs at the end.
* ``SEQ_FM`` fills empty gaps between pre-allocated ansatz blocks left to right.
* ``INT_FM`` fills the same gaps from the centre outwards.

New rotations always arrive as identity pairs, so the represented function is
unchanged at the moment of growth; :func:`grow` measures and reports that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import LayoutError, SaturatedError
from .model import (
    BlockSpec,
    InitSpec,
    ReuploaderModel,
    Role,
    assign_slots,
    draw_block_values,
    predict,
)
from .simulator import GateKind

PRESERVATION_TOL = 1e-10
PROBES_PER_DIM = 64

# First-member ranges for freshly inserted identity pairs.
GROWTH_INIT = InitSpec("identity", theta_range=(0.0, 0.1), psi_range=(0.0, math.pi / 9))


class GrowthStrategy(str, Enum):
    BLOCK = "BLOCK"
    SEQ_FM = "SEQ_FM"
    INT_FM = "INT_FM"


class Trigger(str, Enum):
    FIXED_INTERVAL = "FIXED_INTERVAL"
    PLATEAU = "PLATEAU"


@dataclass(frozen=True)
class GrowthSchedule:
    strategy: GrowthStrategy = GrowthStrategy.BLOCK
    trigger: Trigger = Trigger.FIXED_INTERVAL
    interval: int = 100
    patience: int = 50
    min_improvement: float = 1e-3
    blocks_per_event: int = 1
    max_feature_map_blocks: int = 5
    probe_domain: tuple[float, float] = (0.0, 2 * math.pi)

    def __post_init__(self):
        object.__setattr__(self, "strategy", GrowthStrategy(self.strategy))
        object.__setattr__(self, "trigger", Trigger(self.trigger))
        if self.blocks_per_event < 1:
            raise ValueError("blocks_per_event must be at least 1")
        if self.trigger is Trigger.FIXED_INTERVAL and self.interval < 1:
            raise ValueError("growth interval must be at least 1 epoch")
        if self.trigger is Trigger.PLATEAU and self.patience < 1:
            raise ValueError("plateau patience must be at least 1 epoch")


@dataclass(frozen=True)
class GrowthEvent:
    epoch: int
    strategy: GrowthStrategy
    blocks_added: int
    positions: tuple[int, ...]
    residual: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "strategy": self.strategy.value,
            "blocks_added": self.blocks_added,
            "positions": list(self.positions),
            "residual": self.residual,
        }


def should_grow(
    schedule: GrowthSchedule,
    epoch: int,
    test_loss_history: Sequence[float],
    current_fm_blocks: int,
) -> bool:
    """Growth predicate.

    For ``PLATEAU`` the history should cover only the epochs since the last
    growth event: the model grows once the best loss of the last ``patience``
    entries fails to beat the best before them by the relative margin
    ``min_improvement``.
    """
    if current_fm_blocks >= schedule.max_feature_map_blocks:
        return False
    if schedule.trigger is Trigger.FIXED_INTERVAL:
        return epoch > 0 and epoch % schedule.interval == 0
    history = np.asarray(test_loss_history, dtype=np.float64)
    p = schedule.patience
    if history.size <= p:
        return False
    best_before = history[:-p].min()
    best_recent = history[-p:].min()
    return bool(best_recent > best_before * (1.0 - schedule.min_improvement))


# -- gap bookkeeping ---------------------------------------------------------


def ansatz_gaps(model: ReuploaderModel) -> list[bool]:
    """For each gap between consecutive ansatz blocks: is a feature map in it?"""
    occupied: list[bool] = []
    fm_pending = False
    first = True
    for block in model.blocks:
        if block.role is Role.FEATURE_MAP:
            fm_pending = True
            continue
        if not first:
            occupied.append(fm_pending)
        fm_pending = False
        first = False
    return occupied


def fill_order(n_gaps: int, strategy: GrowthStrategy) -> list[int]:
    """Gap visiting order: left to right, or centre-out with left winning ties."""
    strategy = GrowthStrategy(strategy)
    if strategy is GrowthStrategy.SEQ_FM:
        return list(range(n_gaps))
    if strategy is GrowthStrategy.INT_FM:
        centre = (n_gaps - 1) / 2.0
        return sorted(range(n_gaps), key=lambda g: (abs(g - centre), g))
    raise ValueError(f"{strategy} does not fill gaps")


# -- growing --------------------------------------------------------------------


def _next_slots(model: ReuploaderModel) -> tuple[int, int]:
    return model.params.theta.size, model.params.psi.size


def _insert(model, position: int, block: BlockSpec, rng):
    """Insert an identity-initialised copy of ``block`` before ``position``."""
    n_theta, n_psi = _next_slots(model)
    slotted, _, _ = assign_slots(block, n_theta, n_psi)
    values = draw_block_values(block, GROWTH_INIT, rng)
    p = model.params
    if block.role is Role.FEATURE_MAP:
        psi = np.concatenate([p.psi, values])
        mask = np.concatenate([p.psi_trainable, np.full(len(values), _psi_flag(model))])
        theta = p.theta
    else:
        theta = np.concatenate([p.theta, values])
        psi, mask = p.psi, p.psi_trainable
    blocks = list(model.blocks)
    blocks.insert(position, slotted)
    params = type(p)(theta, psi, mask, p.gamma)
    return replace(model, blocks=tuple(blocks), params=params)


def _psi_flag(model) -> bool:
    mask = model.params.psi_trainable
    return bool(mask.all()) if mask.size else True


def _template(model: ReuploaderModel, role: Role) -> BlockSpec:
    tpl = model.ansatz_template if role is Role.ANSATZ else model.feature_map_template
    if tpl is None:
        raise LayoutError(f"model carries no {role.value} template to grow with")
    gates = tpl.gates
    for i, g in enumerate(gates):
        paired = g.pairs_previous or (i + 1 < len(gates) and gates[i + 1].pairs_previous)
        if g.is_rotation and not paired:
            raise LayoutError("growth templates must consist of identity pairs")
        if g.kind is GateKind.CNOT and g.control != model.measured_qubit:
            raise LayoutError("appended CNOTs must be controlled by the measured qubit")
    return tpl


def probe_grid(model: ReuploaderModel, domain=(0.0, 2 * math.pi), n: int = PROBES_PER_DIM):
    axes = [np.linspace(domain[0], domain[1], n)] * model.input_dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def verify_preservation(
    before: ReuploaderModel, after: ReuploaderModel, probes=None, tol: float | None = None
) -> float:
    """Largest ``|f_after - f_before|`` over the probe inputs.

    ``tol`` is accepted for call-site symmetry; asserting against it is the
    caller's business.
    """
    if before.input_dim != after.input_dim:
        raise LayoutError("models take different input dimensions")
    probes = probe_grid(before) if probes is None else np.asarray(probes, float)
    return float(np.max(np.abs(predict(after, probes) - predict(before, probes))))


def grow(
    model: ReuploaderModel, schedule: GrowthSchedule, seed: int, epoch: int = 0
) -> tuple[ReuploaderModel, GrowthEvent]:
    rng = np.random.default_rng(seed)
    room = schedule.max_feature_map_blocks - model.n_feature_maps
    if room <= 0:
        raise SaturatedError(
            f"model already has {model.n_feature_maps} feature maps "
            f"(max {schedule.max_feature_map_blocks})"
        )
    n_new = min(schedule.blocks_per_event, room)
    fm = _template(model, Role.FEATURE_MAP)
    grown = model
    positions: list[int] = []

    if schedule.strategy is GrowthStrategy.BLOCK:
        ansatz = _template(model, Role.ANSATZ)
        for _ in range(n_new):
            end = len(grown.blocks)
            grown = _insert(grown, end, fm, rng)
            grown = _insert(grown, end + 1, ansatz, rng)
            positions.append(end)
    else:
        occupied = ansatz_gaps(grown)
        if not occupied:
            raise LayoutError("feature-map growth needs pre-allocated ansatz gaps")
        order = [g for g in fill_order(len(occupied), schedule.strategy) if not occupied[g]]
        if not order:
            raise SaturatedError("every ansatz gap already holds a feature map")
        for gap in order[:n_new]:
            grown = _insert(grown, _gap_position(grown, gap), fm, rng)
            positions.append(gap)

    residual = verify_preservation(model, grown, probe_grid(model, schedule.probe_domain))
    event = GrowthEvent(epoch, schedule.strategy, len(positions), tuple(positions), residual)
    return grown, event


def _gap_position(model: ReuploaderModel, gap: int) -> int:
    # Block index just after ansatz block number ``gap``.
    seen = -1
    for i, block in enumerate(model.blocks):
        if block.role is Role.ANSATZ:
            seen += 1
            if seen == gap:
                return i + 1
    raise LayoutError(f"gap {gap} does not exist")
