"""Experiment presets: teachers, the seven student variants, one-seed runs.

Variants
--------
``block-growth``      starts as ``U0 F U1`` and appends ``(F, U)`` blocks.
``seq-fm``/``int-fm`` start with the full ansatz stack and one feature map,
                      then fill the remaining gaps left-to-right / centre-out.
``cdl-*-matched``     full depth equal to the teacher's layer count.
``cdl-*-deep``        full depth beyond it (20 layers for one qubit, 9 for two).
``*-rand``            every angle uniform on [0, pi]; ``*-id`` identity pairs.

Teacher parameter ranges are fixed per experiment: one qubit draws ansatz
angles from [0, 0.1] and encoding scales from [0, pi/9]; two qubits draw
both from [0, pi/5].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum

from .growth import GrowthSchedule, GrowthStrategy, Trigger, fill_order
from .model import (
    InitSpec,
    ReuploaderModel,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    gapped_layout,
    reuploader_layout,
)
from .training import (
    LaplaceProblem,
    TrainConfig,
    TrainReport,
    make_teacher_dataset,
    train_laplace,
    train_regression,
)

CONFIG_SCHEMA = 1

VARIANTS = (
    "block-growth",
    "seq-fm",
    "int-fm",
    "cdl-rand-matched",
    "cdl-rand-deep",
    "cdl-id-matched",
    "cdl-id-deep",
)
GROWTH_VARIANTS = {
    "block-growth": GrowthStrategy.BLOCK,
    "seq-fm": GrowthStrategy.SEQ_FM,
    "int-fm": GrowthStrategy.INT_FM,
}

RAND_INIT = InitSpec("uniform", theta_range=(0.0, math.pi), psi_range=(0.0, math.pi))
IDENTITY_INIT = InitSpec("identity", theta_range=(0.0, 0.1), psi_range=(0.0, math.pi / 9))

class Experiment(str, Enum):
    STUDENT_TEACHER_1Q = "STUDENT_TEACHER_1Q"
    STUDENT_TEACHER_2Q = "STUDENT_TEACHER_2Q"
    NOISY_ST = "NOISY_ST"
    LAPLACE = "LAPLACE"
    SPECTRUM = "SPECTRUM"

@dataclass(frozen=True)
class Preset:
    n_qubits: int
    teacher_layers: int
    deep_layers: int
    initial_layers: int
    target_layers: int
    epochs: int
    lr: float
    rotations: tuple[str, ...] = ("RY",)
    teacher_range: tuple[float, float] | None = (0.0, 0.1)
    teacher_psi_range: tuple[float, float] | None = (0.0, math.pi / 9)
    domain: tuple[float, float] = (0.0, 2 * math.pi)
    n_train: int = 500
    n_test: int = 500
    noise_sigma: float = 0.0
    trigger: Trigger = Trigger.FIXED_INTERVAL

PRESETS = {
    Experiment.STUDENT_TEACHER_1Q: Preset(1, 5, 20, 1, 5, 1000, 0.1),
    Experiment.STUDENT_TEACHER_2Q: Preset(
        2, 5, 9, 1, 5, 1000, 0.1,
        teacher_range=(0.0, math.pi / 5), teacher_psi_range=(0.0, math.pi / 5),
    ),
    Experiment.NOISY_ST: Preset(
        1, 5, 20, 1, 20, 1000, 0.1, n_train=20, n_test=80, noise_sigma=0.5,
        trigger=Trigger.PLATEAU,
    ),
    Experiment.LAPLACE: Preset(
        2, 9, 13, 5, 9, 2000, 0.02, rotations=("RY", "RX"),
        teacher_range=None, teacher_psi_range=None, domain=(0.0, 1.0),
    ),
    Experiment.SPECTRUM: Preset(1, 5, 20, 1, 5, 1, 0.1),
}

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    variant: str
    seeds: tuple[int, ...] = tuple(range(50))
    epochs: int | None = None
    lr: float | None = None
    blocks_per_event: int = 1
    growth_interval: int | None = None
    patience: int = 50
    min_improvement: float = 1e-3
    plateau_metric: str = "test"
    teacher_seed: int = 2024
    data_seed: int = 0
    n_train: int | None = None
    n_test: int | None = None
    noise_sigma: float | None = None
    n_boundary: int = 250
    n_collocation: int = 250
    grid_size: int = 250
    jobs: int = 1
    out: str = "runs"
    schema: int = CONFIG_SCHEMA

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; choose one of: {', '.join(VARIANTS)}"
            )

    @property
    def preset(self) -> Preset:
        return PRESETS[self.experiment]

    def resolved(self) -> "ExperimentConfig":
        """Copy with every preset-dependent default filled in."""
        p = self.preset
        epochs = p.epochs if self.epochs is None else self.epochs
        return replace(
            self,
            epochs=epochs,
            lr=p.lr if self.lr is None else self.lr,
            n_train=p.n_train if self.n_train is None else self.n_train,
            n_test=p.n_test if self.n_test is None else self.n_test,
            noise_sigma=p.noise_sigma if self.noise_sigma is None else self.noise_sigma,
            growth_interval=self.growth_interval or default_interval(epochs, p, self.blocks_per_event),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)

def default_interval(epochs: int, preset: Preset, blocks_per_event: int = 1) -> int:
    """Spread the growth events so the final depth trains for one interval too."""
    events = math.ceil((preset.target_layers - preset.initial_layers) / blocks_per_event)
    return max(1, epochs // (events + 1))

# -- models ---------------------------------------------------------------------

def _templates(preset: Preset):
    a = ansatz_block(preset.n_qubits, preset.rotations, paired=True)
    f = feature_map_block(preset.n_qubits, paired=True)
    return a, f

def build_teacher(experiment: Experiment, seed: int) -> ReuploaderModel:
    preset = PRESETS[Experiment(experiment)]
    if preset.teacher_range is None:
        raise ValueError(f"{experiment} has no teacher circuit")
    a, f = _templates(preset)
    init = InitSpec("uniform", preset.teacher_range, preset.teacher_psi_range)
    return build_reuploader(
        preset.n_qubits, reuploader_layout(preset.teacher_layers, a, f), init, seed
    )

def build_student(config: ExperimentConfig, seed: int) -> ReuploaderModel:
    preset = config.preset
    a, f = _templates(preset)
    variant = config.variant
    if variant == "block-growth":
        layout = reuploader_layout(preset.initial_layers, a, f)
        init = IDENTITY_INIT
    elif variant in ("seq-fm", "int-fm"):
        n_gaps = preset.target_layers
        order = fill_order(n_gaps, GROWTH_VARIANTS[variant])
        layout = gapped_layout(n_gaps, order[: preset.initial_layers], a, f)
        init = IDENTITY_INIT
    else:
        layers = preset.deep_layers if variant.endswith("deep") else _matched_layers(preset)
        layout = reuploader_layout(layers, a, f)
        init = RAND_INIT if "-rand-" in variant else IDENTITY_INIT
    return build_reuploader(preset.n_qubits, layout, init, seed)

def _matched_layers(preset: Preset) -> int:
    return preset.target_layers if preset.teacher_range is None else preset.teacher_layers

def growth_schedule(config: ExperimentConfig) -> GrowthSchedule | None:
    strategy = GROWTH_VARIANTS.get(config.variant)
    if strategy is None:
        return None
    cfg = config.resolved()
    preset = config.preset
    return GrowthSchedule(
        strategy=strategy,
        trigger=preset.trigger,
        interval=cfg.growth_interval,
        patience=cfg.patience,
        min_improvement=cfg.min_improvement,
        blocks_per_event=cfg.blocks_per_event,
        max_feature_map_blocks=preset.target_layers,
        probe_domain=preset.domain,
    )

def train_config(config: ExperimentConfig, seed: int) -> TrainConfig:
    cfg = config.resolved()
    loss = "LAPLACE" if cfg.experiment is Experiment.LAPLACE else "MSE"
    return TrainConfig(
        epochs=cfg.epochs,
        lr=cfg.lr,
        loss=loss,
        seed=seed,
        schedule=growth_schedule(cfg),
        plateau_metric=cfg.plateau_metric,
    )

def run_seed(config: ExperimentConfig, seed: int) -> TrainReport:
    """Train one student for ``seed``; teacher and data are shared by all seeds."""
    cfg = config.resolved()
    if cfg.experiment is Experiment.SPECTRUM:
        raise ValueError("SPECTRUM runs analyse models; they do not train")
    student = build_student(cfg, seed)
    tcfg = train_config(cfg, seed)
    if cfg.experiment is Experiment.LAPLACE:
        problem = LaplaceProblem(cfg.n_boundary, cfg.n_collocation, cfg.grid_size)
        return train_laplace(student, problem, tcfg)
    teacher = build_teacher(cfg.experiment, cfg.teacher_seed)
    data = make_teacher_dataset(
        teacher, cfg.n_train, cfg.n_test, cfg.preset.domain, cfg.noise_sigma, cfg.data_seed
    )
    return train_regression(student, data, tcfg)

@dataclass(frozen=True)
class SeedRunner:
    """Picklable ``seed -> TrainReport`` callable for process pools."""

    config: ExperimentConfig

    def __call__(self, seed: int) -> TrainReport:
        return run_seed(self.config, seed)
