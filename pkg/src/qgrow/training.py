"""Training loop, losses, datasets and multi-seed sweeps.

Each epoch runs one full-batch cycle: forward pass on the training set, loss,
Adam update, evaluation, then the growth check.  When the circuit grows, the
optimizer moments of pre-existing parameters carry over untouched and the new
slots start from zero moments.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .engine import backward, compile_ops, evaluate, trainable_gradient
from .errors import NumericError, ShapeError
from .gradients import DerivativeRequest, input_derivative
from .growth import GrowthEvent, GrowthSchedule, grow, should_grow
from .model import ReuploaderModel, model_to_dict, predict

log = logging.getLogger(__name__)


# -- data --------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    def __post_init__(self):
        if len(self.x_train) != len(self.y_train) or len(self.x_test) != len(self.y_test):
            raise ShapeError("inputs and targets differ in length")


def _domain_bounds(domain, input_dim: int) -> np.ndarray:
    bounds = np.asarray(domain, dtype=np.float64)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (input_dim, 1))
    if bounds.shape != (input_dim, 2):
        raise ShapeError(f"need one (lo, hi) interval per input dim, got {bounds.shape}")
    return bounds


def make_teacher_dataset(
    teacher: ReuploaderModel,
    n_train: int,
    n_test: int,
    domain=(0.0, 2 * math.pi),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Sample inputs uniformly and label them with the teacher circuit.

    Gaussian noise of width ``noise_sigma`` is added to the training targets
    only; test targets stay clean so test loss measures recovery of the
    underlying function.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")
    bounds = _domain_bounds(domain, teacher.input_dim)
    rng = np.random.default_rng(seed)
    lo, hi = bounds[:, 0], bounds[:, 1]
    x_train = rng.uniform(lo, hi, size=(n_train, teacher.input_dim))
    x_test = rng.uniform(lo, hi, size=(n_test, teacher.input_dim))
    y_train = predict(teacher, x_train)
    if noise_sigma > 0:
        y_train = y_train + rng.normal(0.0, noise_sigma, size=n_train)
    return Dataset(x_train, y_train, x_test, predict(teacher, x_test))


def mse_loss(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ShapeError(f"shape mismatch: {predictions.shape} vs {targets.shape}")
    return float(np.mean((predictions - targets) ** 2))


# -- optimizer -----------------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, **hyper)

    def remap(self, old_keys, new_keys) -> "AdamState":
        """Carry moments over to a new slot layout; unseen slots start at zero."""
        where = {k: i for i, k in enumerate(old_keys)}
        m = np.zeros(len(new_keys))
        v = np.zeros(len(new_keys))
        for i, k in enumerate(new_keys):
            j = where.get(k)
            if j is not None:
                m[i], v[i] = self.m[j], self.v[j]
        return replace(self, m=m, v=v)


def adam_update(state: AdamState, params, grads) -> tuple[AdamState, np.ndarray]:
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError("parameters, gradients and moments must align")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to Adam")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=t), new_params


# -- configuration and reports ------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 0.1
    loss: str = "MSE"
    seed: int = 0
    schedule: GrowthSchedule | None = None
    plateau_metric: str = "test"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.loss not in ("MSE", "LAPLACE"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.plateau_metric not in ("test", "train"):
            raise ValueError("plateau_metric must be 'test' or 'train'")

    def to_dict(self) -> dict:
        s = self.schedule
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "loss": self.loss,
            "seed": self.seed,
            "plateau_metric": self.plateau_metric,
            "adam": {"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps},
            "schedule": None
            if s is None
            else {
                "strategy": s.strategy.value,
                "trigger": s.trigger.value,
                "interval": s.interval,
                "patience": s.patience,
                "min_improvement": s.min_improvement,
                "blocks_per_event": s.blocks_per_event,
                "max_feature_map_blocks": s.max_feature_map_blocks,
            },
        }


@dataclass
class TrainReport:
    config: TrainConfig
    train_losses: np.ndarray
    test_losses: np.ndarray
    n_fm_blocks: np.ndarray
    growth_events: list[GrowthEvent]
    final_model: ReuploaderModel
    wall_time: float = 0.0
    metrics: dict = field(default_factory=dict)

    @property
    def best_loss(self) -> float:
        return float(np.min(self.test_losses))

    @property
    def best_epoch(self) -> int:
        return int(np.argmin(self.test_losses))

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "config": self.config.to_dict(),
            "best_loss": self.best_loss,
            "best_epoch": self.best_epoch,
            "final_train_loss": float(self.train_losses[-1]),
            "final_test_loss": float(self.test_losses[-1]),
            "train_losses": [float(v) for v in self.train_losses],
            "test_losses": [float(v) for v in self.test_losses],
            "growth_events": [e.to_dict() for e in self.growth_events],
            "metrics": dict(self.metrics),
            "final_model": model_to_dict(self.final_model),
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "test_loss", "n_fm_blocks"])
        for i, (a, b, n) in enumerate(zip(self.train_losses, self.test_losses, self.n_fm_blocks)):
            w.writerow([i, repr(float(a)), repr(float(b)), int(n)])
        return buf.getvalue()


def _growth_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, 7]).generate_state(1)[0])


class _Trainer:
    """Shared Algorithm-1 bookkeeping for both objectives."""

    def __init__(self, model: ReuploaderModel, config: TrainConfig):
        self.model = model
        self.config = config
        self.vec = model.params.trainable_vector()
        self.adam = AdamState.zeros(
            self.vec.size, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps
        )
        self.ops = compile_ops(model)
        self.train, self.test, self.sizes = [], [], []
        self.events: list[GrowthEvent] = []
        self.since_growth: list[float] = []

    def step(self, grad_theta, grad_psi):
        g = trainable_gradient(self.model, grad_theta, grad_psi)
        self.adam, self.vec = adam_update(self.adam, self.vec, g)
        self.model = self.model.with_trainable_vector(self.vec)

    def record(self, epoch: int, train_loss: float, test_loss: float):
        if not (math.isfinite(train_loss) and math.isfinite(test_loss)):
            raise NumericError(f"non-finite loss at epoch {epoch}")
        self.train.append(train_loss)
        self.test.append(test_loss)
        self.sizes.append(self.model.n_feature_maps)
        metric = test_loss if self.config.plateau_metric == "test" else train_loss
        self.since_growth.append(metric)
        schedule = self.config.schedule
        if schedule is None:
            return
        if should_grow(schedule, epoch, self.since_growth, self.model.n_feature_maps):
            old_keys = self.model.params.trainable_keys()
            grown, event = grow(self.model, schedule, _growth_seed(self.config.seed, epoch), epoch)
            self.adam = self.adam.remap(old_keys, grown.params.trainable_keys())
            self.model = grown
            self.vec = grown.params.trainable_vector()
            self.ops = compile_ops(grown)
            self.events.append(event)
            self.since_growth = []
            log.debug("epoch %d: grew to %s (residual %.2e)", epoch, grown.layout_signature(), event.residual)

    def report(self, started: float, **metrics) -> TrainReport:
        return TrainReport(
            config=self.config,
            train_losses=np.array(self.train),
            test_losses=np.array(self.test),
            n_fm_blocks=np.array(self.sizes),
            growth_events=self.events,
            final_model=self.model,
            wall_time=time.perf_counter() - started,
            metrics=metrics,
        )


def train_regression(model: ReuploaderModel, data: Dataset, config: TrainConfig) -> TrainReport:
    started = time.perf_counter()
    tr = _Trainer(model, config)
    X, y = np.asarray(data.x_train, float), np.asarray(data.y_train, float)
    Xt, yt = np.asarray(data.x_test, float), np.asarray(data.y_test, float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"training inputs have shape {X.shape}, model takes {model.input_dim}")
    n = X.shape[0]
    for epoch in range(config.epochs):
        try:
            ev = evaluate(tr.model, X, keep=True, ops=tr.ops)
            resid = ev.value - y
            loss = float(np.mean(resid**2))
            tr.step(*backward(tr.model, ev, g_value=2.0 * resid / n))
            test_loss = mse_loss(evaluate(tr.model, Xt, ops=tr.ops).value, yt)
            tr.record(epoch, loss, test_loss)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc
    return tr.report(started)


# -- Laplace ---------------------------------------------------------------------


def exact_laplace_solution(x, y):
    return np.exp(-np.pi * np.asarray(x)) * np.sin(np.pi * np.asarray(y))


EDGES = ("left", "bottom", "right", "top")


@dataclass(frozen=True)
class LaplaceProblem:
    """Dirichlet problem on the unit square.

    ``right_edge="exact"`` uses ``exp(-pi) sin(pi y)`` on ``x = 1``, the trace
    of the analytic solution; ``"zero"`` imposes a homogeneous condition there.
    """

    n_boundary: int = 250
    n_collocation: int = 250
    grid_size: int = 250
    boundary_weight: float = 1.0
    interior_weight: float = 1.0
    right_edge: str = "exact"

    def __post_init__(self):
        if self.right_edge not in ("exact", "zero"):
            raise ValueError("right_edge must be 'exact' or 'zero'")
        if min(self.n_boundary, self.n_collocation) < 1 or self.grid_size < 2:
            raise ValueError("need at least one sample point per term and a 2x2 grid")

    def boundary_value(self, edge: str, x, y):
        if edge == "left":
            return np.sin(np.pi * y)
        if edge == "right" and self.right_edge == "exact":
            return np.exp(-np.pi) * np.sin(np.pi * y)
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    def sample(self, seed: int, epoch: int):
        """Collocation points and per-edge boundary points for one epoch."""
        rng = np.random.default_rng([seed, epoch])
        interior = rng.uniform(0.0, 1.0, size=(self.n_collocation, 2))
        edges = {}
        for edge in EDGES:
            t = rng.uniform(0.0, 1.0, size=self.n_boundary)
            fixed0 = np.zeros_like(t)
            fixed1 = np.ones_like(t)
            pts = {
                "left": (fixed0, t),
                "right": (fixed1, t),
                "bottom": (t, fixed0),
                "top": (t, fixed1),
            }[edge]
            xy = np.stack(pts, axis=1)
            edges[edge] = (xy, self.boundary_value(edge, xy[:, 0], xy[:, 1]))
        return interior, edges


@dataclass(frozen=True)
class AnalyticField:
    """A closed-form stand-in for a trained model in the Laplace pipeline."""

    value_fn: Callable
    laplacian_fn: Callable

    def values(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return np.asarray(self.value_fn(p[:, 0], p[:, 1]), dtype=np.float64) * np.ones(len(p))

    def laplacian(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return np.asarray(self.laplacian_fn(p[:, 0], p[:, 1]), dtype=np.float64) * np.ones(len(p))


def _check_2d(model):
    if isinstance(model, ReuploaderModel) and model.input_dim != 2:
        raise ShapeError(f"Laplace problems need a 2-input model, got {model.input_dim}")


def _field_values(model, points) -> np.ndarray:
    if isinstance(model, ReuploaderModel):
        return predict(model, points)
    return model.values(points)


def _field_laplacian(model, points) -> np.ndarray:
    if isinstance(model, ReuploaderModel):
        ev = evaluate(model, np.asarray(points, float), dims=(0, 1))
        return ev.d2.sum(axis=1)
    return model.laplacian(points)


def laplace_residual(model, point) -> float:
    """``u_xx + u_yy`` at one point (parameter-shift route for circuits)."""
    _check_2d(model)
    if isinstance(model, ReuploaderModel):
        return input_derivative(model, point, DerivativeRequest(0, 2)) + input_derivative(
            model, point, DerivativeRequest(1, 2)
        )
    return float(model.laplacian(point)[0])


def laplace_loss(model, problem: LaplaceProblem, seed: int, epoch: int) -> float:
    """Mean squared PDE residual plus the sum of per-edge boundary MSEs."""
    _check_2d(model)
    interior, edges = problem.sample(seed, epoch)
    pde = float(np.mean(_field_laplacian(model, interior) ** 2))
    bnd = sum(mse_loss(_field_values(model, xy), target) for xy, target in edges.values())
    return problem.interior_weight * pde + problem.boundary_weight * bnd


def _laplace_value_and_grad(model, problem, seed, epoch, ops):
    interior, edges = problem.sample(seed, epoch)
    ev = evaluate(model, interior, dims=(0, 1), keep=True, ops=ops)
    r = ev.d2.sum(axis=1)
    n = r.size
    w_i = problem.interior_weight
    g_d2 = np.repeat((w_i * 2.0 * r / n)[:, None], 2, axis=1)
    gt, gp = backward(model, ev, g_d2=g_d2)
    loss = w_i * float(np.mean(r**2))

    xy = np.concatenate([p for p, _ in edges.values()])
    target = np.concatenate([t for _, t in edges.values()])
    # Per-edge means: each edge's residuals are scaled by its own count.
    counts = np.concatenate([np.full(len(t), len(t)) for _, t in edges.values()])
    eb = evaluate(model, xy, keep=True, ops=ops)
    resid = eb.value - target
    w_b = problem.boundary_weight
    gt_b, gp_b = backward(model, eb, g_value=w_b * 2.0 * resid / counts)
    loss += w_b * float(np.sum(resid**2 / counts))
    return loss, gt + gt_b, gp + gp_b


def l2_relative_error(model, grid_size: int = 250) -> float:
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    _check_2d(model)
    axis = np.linspace(0.0, 1.0, grid_size)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    exact = exact_laplace_solution(pts[:, 0], pts[:, 1])
    pred = _field_values(model, pts)
    return float(np.linalg.norm(pred - exact) / np.linalg.norm(exact))


def train_laplace(
    model: ReuploaderModel, problem: LaplaceProblem, config: TrainConfig
) -> TrainReport:
    """Physics-informed training; the "test" column is the objective after the
    update, re-evaluated on the same epoch's sample points."""
    _check_2d(model)
    started = time.perf_counter()
    tr = _Trainer(model, config)
    for epoch in range(config.epochs):
        try:
            loss, gt, gp = _laplace_value_and_grad(tr.model, problem, config.seed, epoch, tr.ops)
            tr.step(gt, gp)
            after = laplace_loss(tr.model, problem, config.seed, epoch)
            tr.record(epoch, loss, after)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc
    return tr.report(started, l2_relative_error=l2_relative_error(tr.model, problem.grid_size))


# -- sweeps ------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSummary:
    per_seed: dict[int, float]
    mean: float
    stderr: float
    best: float
    worst: float
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.per_seed)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "best": self.best,
            "worst": self.worst,
            "n_seeds": self.n,
            "per_seed": [{"seed": s, "best_loss": v} for s, v in sorted(self.per_seed.items())],
            "failures": [{"seed": s, "error": e} for s, e in sorted(self.failures.items())],
        }


def summarize(per_seed: dict[int, float], failures: dict[int, str] | None = None) -> SweepSummary:
    """Mean, standard error (sample std / sqrt(n)), best and worst."""
    if not per_seed:
        raise ValueError("no successful runs to summarise")
    seeds = sorted(per_seed)
    values = np.array([per_seed[s] for s in seeds], dtype=np.float64)
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return SweepSummary(
        per_seed={s: float(per_seed[s]) for s in seeds},
        mean=float(values.mean()),
        stderr=stderr,
        best=float(values.min()),
        worst=float(values.max()),
        failures=dict(failures or {}),
    )


def _best_of(result) -> float:
    return float(result.best_loss) if hasattr(result, "best_loss") else float(result)


def seed_sweep(
    experiment: Callable[[int], object], seeds: Sequence[int], jobs: int = 1
) -> SweepSummary:
    """Run ``experiment(seed)`` for every seed and summarise the best losses.

    ``experiment`` returns a :class:`TrainReport` or a bare loss.  Failing
    seeds are logged and left out of the statistics.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    per_seed, failures = {}, {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {s: pool.submit(experiment, s) for s in seeds}
            outcomes = {}
            for s, fut in futures.items():
                try:
                    outcomes[s] = fut.result()
                except Exception as exc:  # noqa: BLE001 - recorded per seed
                    failures[s] = f"{type(exc).__name__}: {exc}"
    else:
        outcomes = {}
        for s in seeds:
            try:
                outcomes[s] = experiment(s)
            except Exception as exc:  # noqa: BLE001 - recorded per seed
                failures[s] = f"{type(exc).__name__}: {exc}"
    for s, result in outcomes.items():
        per_seed[s] = _best_of(result)
    if failures:
        log.warning("%d of %d seeds failed", len(failures), len(seeds))
    return summarize(per_seed, failures)
