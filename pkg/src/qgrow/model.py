"""Reuploader circuit structure, parameters and spectral analysis.

A model is an ordered list of blocks, each either an *ansatz* block
(trainable ``RY``/``RX`` rotations plus a CNOT entangler) or a *feature-map*
block (``RX(psi * x[d])`` encoding gates).  Every rotation gate owns exactly
one slot in the parameter store: ansatz gates index ``theta``, encoding gates
index ``psi``.  Gates flagged ``pairs_previous`` are the second half of an
identity pair; at construction their value is the negation of the gate just
before them, so the pair composes to the identity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    AliasingError,
    LayoutError,
    NonIntegerFrequencyError,
    ShapeError,
    SpectrumError,
)
from .simulator import GateKind

SPECTRUM_TOL = 1e-9
MAX_SPECTRUM_SIZE = 200_000
LAYOUT_SCHEMA = 1


class Role(str, Enum):
    ANSATZ = "ANSATZ"
    FEATURE_MAP = "FEATURE_MAP"


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    qubit: int
    control: int | None = None
    input_dim: int | None = None
    pairs_previous: bool = False
    slot: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))

    @property
    def is_rotation(self) -> bool:
        return self.kind is not GateKind.CNOT


@dataclass(frozen=True)
class BlockSpec:
    role: Role
    gates: tuple[GateSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "gates", tuple(self.gates))

    def unslotted(self) -> "BlockSpec":
        return BlockSpec(self.role, tuple(replace(g, slot=None) for g in self.gates))


@dataclass(frozen=True)
class ParameterStore:
    theta: np.ndarray
    psi: np.ndarray
    psi_trainable: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        psi = np.array(self.psi, dtype=np.float64)
        mask = np.array(self.psi_trainable, dtype=bool).reshape(psi.shape)
        for arr in (theta, psi, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "psi_trainable", mask)

    def __eq__(self, other):
        if not isinstance(other, ParameterStore):
            return NotImplemented
        return (
            np.array_equal(self.theta, other.theta)
            and np.array_equal(self.psi, other.psi)
            and np.array_equal(self.psi_trainable, other.psi_trainable)
            and self.gamma == other.gamma
        )

    __hash__ = None

    @property
    def n_trainable(self) -> int:
        return self.theta.size + int(self.psi_trainable.sum())

    def trainable_keys(self) -> list[tuple[str, int]]:
        keys = [("theta", i) for i in range(self.theta.size)]
        keys += [("psi", int(j)) for j in np.flatnonzero(self.psi_trainable)]
        return keys

    def trainable_vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.psi[self.psi_trainable]])

    def with_trainable_vector(self, vec) -> "ParameterStore":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_trainable,):
            raise ShapeError(f"expected {self.n_trainable} values, got {vec.shape}")
        n_theta = self.theta.size
        psi = self.psi.copy()
        psi[self.psi_trainable] = vec[n_theta:]
        return ParameterStore(vec[:n_theta], psi, self.psi_trainable, self.gamma)


@dataclass(frozen=True)
class InitSpec:
    """How to draw initial angles.

    ``mode="uniform"`` draws every slot independently from its class range.
    ``mode="identity"`` draws only the first member of each identity pair and
    negates it for the second; unpaired gates start at zero.
    """

    mode: str = "identity"
    theta_range: tuple[float, float] = (0.0, 0.1)
    psi_range: tuple[float, float] = (0.0, math.pi / 9)

    def __post_init__(self):
        if self.mode not in ("uniform", "identity"):
            raise ValueError(f"unknown init mode {self.mode!r}")


@dataclass(frozen=True)
class ReuploaderModel:
    n_qubits: int
    input_dim: int
    blocks: tuple[BlockSpec, ...]
    params: ParameterStore
    measured_qubit: int = 0
    ansatz_template: BlockSpec | None = None
    feature_map_template: BlockSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def n_feature_maps(self) -> int:
        return sum(b.role is Role.FEATURE_MAP for b in self.blocks)

    @property
    def n_ansatz(self) -> int:
        return sum(b.role is Role.ANSATZ for b in self.blocks)

    def gates(self):
        for block in self.blocks:
            yield from block.gates

    def with_params(self, theta=None, psi=None) -> "ReuploaderModel":
        p = self.params
        store = ParameterStore(
            p.theta if theta is None else theta,
            p.psi if psi is None else psi,
            p.psi_trainable,
            p.gamma,
        )
        if store.theta.shape != p.theta.shape or store.psi.shape != p.psi.shape:
            raise ShapeError("replacement parameters change the store size")
        return replace(self, params=store)

    def with_trainable_vector(self, vec) -> "ReuploaderModel":
        return replace(self, params=self.params.with_trainable_vector(vec))

    def layout_signature(self) -> str:
        return "".join("U" if b.role is Role.ANSATZ else "F" for b in self.blocks)


# -- templates -------------------------------------------------------------


def ansatz_block(
    n_qubits: int,
    rotations: Sequence[str] = ("RY",),
    paired: bool = True,
    measured_qubit: int = 0,
) -> BlockSpec:
    """One ansatz layer: per qubit, each rotation kind (twice when ``paired``),
    followed by CNOTs controlled on the measured qubit."""
    gates = []
    for q in range(n_qubits):
        for kind in rotations:
            gates.append(GateSpec(kind, q))
            if paired:
                gates.append(GateSpec(kind, q, pairs_previous=True))
    for q in range(n_qubits):
        if q != measured_qubit:
            gates.append(GateSpec(GateKind.CNOT, q, control=measured_qubit))
    return BlockSpec(Role.ANSATZ, tuple(gates))


def feature_map_block(
    n_qubits: int, dims: Sequence[int] | None = None, paired: bool = True
) -> BlockSpec:
    """``RX(psi * x[dims[q]])`` on every qubit ``q`` (twice when ``paired``)."""
    dims = list(range(n_qubits)) if dims is None else list(dims)
    if len(dims) != n_qubits:
        raise LayoutError("need one input dimension per qubit")
    gates = []
    for q, d in enumerate(dims):
        gates.append(GateSpec(GateKind.RX, q, input_dim=d))
        if paired:
            gates.append(GateSpec(GateKind.RX, q, input_dim=d, pairs_previous=True))
    return BlockSpec(Role.FEATURE_MAP, tuple(gates))


def reuploader_layout(
    n_layers: int, ansatz: BlockSpec, feature_map: BlockSpec
) -> list[BlockSpec]:
    """``U0 (F U)^n_layers``."""
    layout = [ansatz]
    for _ in range(n_layers):
        layout += [feature_map, ansatz]
    return layout


def gapped_layout(
    n_gaps: int, filled: Sequence[int], ansatz: BlockSpec, feature_map: BlockSpec
) -> list[BlockSpec]:
    """``n_gaps + 1`` ansatz blocks with feature maps only in ``filled`` gaps."""
    filled = set(filled)
    if any(not 0 <= g < n_gaps for g in filled):
        raise LayoutError(f"gap indices must lie in [0, {n_gaps})")
    layout = [ansatz]
    for g in range(n_gaps):
        if g in filled:
            layout.append(feature_map)
        layout.append(ansatz)
    return layout


# -- construction -------------------------------------------------------------


def _validate_block(block: BlockSpec, n_qubits: int, input_dim: int):
    prev = None
    for g in block.gates:
        if not 0 <= g.qubit < n_qubits:
            raise LayoutError(f"qubit {g.qubit} out of range for {n_qubits} qubits")
        if g.kind is GateKind.CNOT:
            if g.control is None or not 0 <= g.control < n_qubits or g.control == g.qubit:
                raise LayoutError(f"bad CNOT control {g.control} -> {g.qubit}")
            if block.role is Role.FEATURE_MAP:
                raise LayoutError("feature-map blocks hold encoding gates only")
        elif block.role is Role.FEATURE_MAP:
            if g.kind is not GateKind.RX:
                raise LayoutError("feature-map gates must be RX")
            if g.input_dim is None or not 0 <= g.input_dim < input_dim:
                raise LayoutError(
                    f"feature-map gate reads input dim {g.input_dim}, "
                    f"model has {input_dim}"
                )
        elif g.input_dim is not None:
            raise LayoutError("ansatz gates cannot read inputs")
        if g.pairs_previous:
            if prev is None or (prev.kind, prev.qubit, prev.input_dim) != (
                g.kind,
                g.qubit,
                g.input_dim,
            ):
                raise LayoutError("a paired gate must follow a gate of the same kind")
        prev = g


def assign_slots(
    block: BlockSpec, next_theta: int, next_psi: int
) -> tuple[BlockSpec, int, int]:
    gates = []
    for g in block.gates:
        if not g.is_rotation:
            gates.append(replace(g, slot=None))
        elif block.role is Role.FEATURE_MAP:
            gates.append(replace(g, slot=next_psi))
            next_psi += 1
        else:
            gates.append(replace(g, slot=next_theta))
            next_theta += 1
    return BlockSpec(block.role, tuple(gates)), next_theta, next_psi


def draw_block_values(
    block: BlockSpec, init: InitSpec, rng: np.random.Generator
) -> list[float]:
    """Initial values for the rotation gates of ``block`` in gate order."""
    lo, hi = init.psi_range if block.role is Role.FEATURE_MAP else init.theta_range
    gates = block.gates
    values: list[float] = []
    for i, g in enumerate(gates):
        if not g.is_rotation:
            continue
        if init.mode == "uniform":
            values.append(float(rng.uniform(lo, hi)))
        elif g.pairs_previous:
            values.append(-values[-1])
        elif i + 1 < len(gates) and gates[i + 1].pairs_previous:
            values.append(float(rng.uniform(lo, hi)))
        else:
            # A lone gate has nothing to cancel against, so it starts at zero.
            values.append(0.0)
    return values


def build_reuploader(
    n_qubits: int,
    layout: Sequence[BlockSpec],
    init: InitSpec | None = None,
    seed: int = 0,
    input_dim: int | None = None,
    measured_qubit: int = 0,
    psi_trainable: bool = True,
    feature_map_template: BlockSpec | None = None,
) -> ReuploaderModel:
    """Instantiate ``layout``; ``feature_map_template`` lets a model without
    encoding blocks grow them later."""
    layout = list(layout)
    if not layout:
        raise LayoutError("layout is empty")
    if layout[0].role is not Role.ANSATZ:
        raise LayoutError("a reuploader layout starts with an ansatz block")
    if not 0 <= measured_qubit < n_qubits:
        raise LayoutError(f"measured qubit {measured_qubit} out of range")
    if input_dim is None:
        dims = [g.input_dim for b in layout for g in b.gates if g.input_dim is not None]
        input_dim = max(dims, default=0) + 1
    init = init or InitSpec()
    rng = np.random.default_rng(seed)

    blocks, theta, psi = [], [], []
    for block in layout:
        _validate_block(block, n_qubits, input_dim)
        slotted, _, _ = assign_slots(block, len(theta), len(psi))
        values = draw_block_values(block, init, rng)
        (psi if block.role is Role.FEATURE_MAP else theta).extend(values)
        blocks.append(slotted)

    fm = next((b for b in layout if b.role is Role.FEATURE_MAP), feature_map_template)
    params = ParameterStore(theta, psi, np.full(len(psi), psi_trainable))
    return ReuploaderModel(
        n_qubits=n_qubits,
        input_dim=input_dim,
        blocks=tuple(blocks),
        params=params,
        measured_qubit=measured_qubit,
        ansatz_template=layout[0].unslotted(),
        feature_map_template=None if fm is None else fm.unslotted(),
    )


# -- evaluation ------------------------------------------------------------


def _as_batch(model: ReuploaderModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if model.input_dim == 1 and x.size != 1 else x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(
            f"model takes {model.input_dim}-dimensional inputs, got shape {x.shape}"
        )
    return x


def forward(model: ReuploaderModel, x) -> float:
    """``<Z>`` on the measured qubit for a single input vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.input_dim:
        raise ShapeError(f"model takes {model.input_dim} inputs, got {x.size}")
    return float(predict(model, x.reshape(1, -1))[0])


def predict(model: ReuploaderModel, X) -> np.ndarray:
    """Vectorised :func:`forward` over the rows of ``X``."""
    from .engine import evaluate

    # Clip the last-ulp rounding that can push |<Z>| past 1.
    return np.clip(evaluate(model, _as_batch(model, X)).value, -1.0, 1.0)


# -- spectrum --------------------------------------------------------------


@dataclass(frozen=True)
class OmegaSet:
    frequencies: np.ndarray

    @property
    def K(self) -> int:
        return int(self.frequencies.size)

    def is_integer(self) -> bool:
        f = self.frequencies
        return bool(np.all(np.abs(f - np.round(f)) < SPECTRUM_TOL))

    def __str__(self) -> str:
        f = self.frequencies
        if self.is_integer():
            ints = np.round(f).astype(int)
            lo, hi = int(ints[0]), int(ints[-1])
            if hi - lo + 1 == ints.size and ints.size > 3:
                return f"Ω = {{{lo}..{hi}}}, K = {self.K}"
            body = ", ".join(str(int(v)) for v in ints)
        else:
            body = ", ".join(f"{v:.6g}" for v in f)
        return f"Ω = {{{body}}}, K = {self.K}"


def _dedup_sorted(values: np.ndarray) -> np.ndarray:
    values = np.sort(values)
    keep = np.concatenate([[True], np.diff(values) > SPECTRUM_TOL])
    return values[keep]


def encoding_scales(model: ReuploaderModel, dim: int) -> np.ndarray:
    psi = model.params.psi
    return np.array(
        [psi[g.slot] for g in model.gates() if g.input_dim == dim], dtype=np.float64
    )


def _spectrum_for_dim(model: ReuploaderModel, dim: int) -> OmegaSet:
    # Each encoding gate contributes eigenvalues +-psi/2 of its own term in the
    # summed generator, so the gap set is the sumset of {-psi, 0, psi}.
    omega = np.zeros(1)
    for s in encoding_scales(model, dim):
        omega = _dedup_sorted(np.concatenate([omega - s, omega, omega + s]))
        if omega.size > MAX_SPECTRUM_SIZE:
            raise SpectrumError(
                f"spectrum for dim {dim} exceeds {MAX_SPECTRUM_SIZE} frequencies"
            )
    # Symmetrise exactly so rounding never breaks the +-omega pairing.
    omega = _dedup_sorted(np.concatenate([omega, -omega]))
    return OmegaSet(omega)


def accessible_spectrum(model: ReuploaderModel, dim: int | None = None):
    """Frequencies reachable by the model's output along each input dimension.

    Returns one :class:`OmegaSet` for single-input models (or when ``dim`` is
    given), otherwise a tuple with one set per input dimension.
    """
    if model.n_feature_maps == 0:
        raise SpectrumError("model has no feature-map blocks")
    if dim is not None:
        return _spectrum_for_dim(model, dim)
    sets = tuple(_spectrum_for_dim(model, d) for d in range(model.input_dim))
    return sets[0] if model.input_dim == 1 else sets


def fourier_coefficients(
    model: ReuploaderModel, dim: int = 0, grid_points: int = 64, fixed=None
) -> dict[int, complex]:
    """Fit ``f(x) = sum_k c_k exp(i k x)`` along ``dim`` on a uniform grid.

    Other input coordinates are held at ``fixed`` (zeros by default).
    """
    scales = encoding_scales(model, dim)
    if np.any(np.abs(scales - np.round(scales)) > 1e-12):
        raise NonIntegerFrequencyError(
            f"encoding scales on dim {dim} are not integers: {scales}"
        )
    omega = _spectrum_for_dim(model, dim) if scales.size else OmegaSet(np.zeros(1))
    max_freq = int(round(float(np.max(np.abs(omega.frequencies)))))
    if grid_points < 2 * max_freq + 1:
        raise AliasingError(
            f"{grid_points} grid points cannot resolve frequency {max_freq}; "
            f"need at least {2 * max_freq + 1}"
        )
    base = np.zeros(model.input_dim) if fixed is None else np.asarray(fixed, float)
    X = np.tile(base, (grid_points, 1))
    X[:, dim] = 2 * np.pi * np.arange(grid_points) / grid_points
    coeffs = np.fft.fft(predict(model, X)) / grid_points
    freqs = np.fft.fftfreq(grid_points, d=1.0 / grid_points).round().astype(int)
    return {int(k): complex(c) for k, c in sorted(zip(freqs, coeffs))}


# -- serialisation ---------------------------------------------------------


def _block_to_dict(block: BlockSpec) -> dict:
    gates = []
    for g in block.gates:
        entry = {"kind": g.kind.value, "qubit": g.qubit}
        if g.control is not None:
            entry["control"] = g.control
        if g.input_dim is not None:
            entry["input_dim"] = g.input_dim
        if g.pairs_previous:
            entry["pairs_previous"] = True
        if g.slot is not None:
            entry["slot"] = g.slot
        gates.append(entry)
    return {"role": block.role.value, "gates": gates}


def _block_from_dict(data: dict) -> BlockSpec:
    gates = tuple(
        GateSpec(
            kind=g["kind"],
            qubit=int(g["qubit"]),
            control=g.get("control"),
            input_dim=g.get("input_dim"),
            pairs_previous=bool(g.get("pairs_previous", False)),
            slot=g.get("slot"),
        )
        for g in data["gates"]
    )
    return BlockSpec(Role(data["role"]), gates)


def model_to_dict(model: ReuploaderModel) -> dict:
    p = model.params
    return {
        "schema": LAYOUT_SCHEMA,
        "n_qubits": model.n_qubits,
        "input_dim": model.input_dim,
        "measured_qubit": model.measured_qubit,
        "blocks": [_block_to_dict(b) for b in model.blocks],
        "ansatz_template": None
        if model.ansatz_template is None
        else _block_to_dict(model.ansatz_template),
        "feature_map_template": None
        if model.feature_map_template is None
        else _block_to_dict(model.feature_map_template),
        # repr() of a float is the shortest string that round-trips exactly.
        "theta": [float(v) for v in p.theta],
        "psi": [float(v) for v in p.psi],
        "psi_trainable": [bool(v) for v in p.psi_trainable],
    }


def model_from_dict(data: dict) -> ReuploaderModel:
    if data.get("schema", LAYOUT_SCHEMA) != LAYOUT_SCHEMA:
        raise LayoutError(f"unsupported layout schema {data.get('schema')}")
    params = ParameterStore(data["theta"], data["psi"], data["psi_trainable"])
    blocks = tuple(_block_from_dict(b) for b in data["blocks"])
    model = ReuploaderModel(
        n_qubits=int(data["n_qubits"]),
        input_dim=int(data["input_dim"]),
        blocks=blocks,
        params=params,
        measured_qubit=int(data.get("measured_qubit", 0)),
        ansatz_template=_opt_block(data.get("ansatz_template")),
        feature_map_template=_opt_block(data.get("feature_map_template")),
    )
    for b in blocks:
        _validate_block(b, model.n_qubits, model.input_dim)
    return model


def _opt_block(data):
    return None if data is None else _block_from_dict(data)


def model_to_json(model: ReuploaderModel) -> str:
    return json.dumps(model_to_dict(model), indent=1)


def model_from_json(text: str) -> ReuploaderModel:
    return model_from_dict(json.loads(text))
