"""Acceptance criteria, one test each, at the stated scale and tolerance.

Every test prints a single ``CRITERION n: PASS|FAIL ...`` line (visible with
or without ``-s``).  The statistical criteria (4-6) take several minutes on
one core; deselect them with ``-m "not slow"``.
"""
import json
import math
import time

import numpy as np
import pytest

from qgrow.cli import run_command
from qgrow.experiments import (
    PRESETS,
    VARIANTS,
    Experiment,
    ExperimentConfig,
    build_student,
    run_seed,
)
from qgrow.model import (
    InitSpec,
    accessible_spectrum,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    fourier_coefficients,
    predict,
    reuploader_layout,
)
from qgrow.training import AnalyticField, LaplaceProblem, exact_laplace_solution, l2_relative_error, laplace_loss
from qgrow.verify import gradient_suite, preservation_suite, random_model

IDENTITY_VARIANTS = ("block-growth", "seq-fm", "int-fm", "cdl-id-matched", "cdl-id-deep")


@pytest.fixture
def verdict(capsys):
    def emit(n, passed, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if passed else 'FAIL'} {detail}")
        assert passed, detail

    return emit


def test_criterion_1_preservation(verdict):
    t0 = time.perf_counter()
    r = preservation_suite(cases=200, seed=2024)
    elapsed = time.perf_counter() - t0
    verdict(1, r.passed and elapsed < 60, f"{r.cases} triples, worst residual {r.worst:.2e} (tol 1e-10), {elapsed:.1f}s (limit 60s)")


def test_criterion_2_gradients(verdict):
    t0 = time.perf_counter()
    params, second = gradient_suite(cases=100, seed=2024)
    elapsed = time.perf_counter() - t0
    ok = params.passed and second.passed and elapsed < 120
    verdict(2, ok, (
        f"worst partial error {params.worst:.2e} (tol 1e-6), worst d2 error {second.worst:.2e} (tol 1e-4), "
        f"{params.cases} cases, {elapsed:.1f}s (limit 120s)"
    ))


def test_criterion_3_spectrum(verdict):
    ks = {}
    for L in range(1, 7):
        layout = reuploader_layout(L, ansatz_block(1, paired=False), feature_map_block(1, paired=False))
        m = build_reuploader(1, layout, InitSpec("identity"))
        m = m.with_params(psi=np.ones(m.params.psi.size))
        ks[L] = accessible_spectrum(m).K
    linear = all(k == 2 * L + 1 for L, k in ks.items())

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        m = random_model(rng, max_qubits=2, max_blocks=11, integer_psi=True, init_mode="uniform")
        for d in range(m.input_dim):
            omega = set(accessible_spectrum(m, d).frequencies.round().astype(int).tolist())
            c = fourier_coefficients(m, d, grid_points=64, fixed=rng.uniform(0, 2 * math.pi, m.input_dim))
            worst = max(worst, sum(abs(v) ** 2 for k, v in c.items() if k not in omega))
    verdict(3, linear and worst < 1e-9, f"K(L)={ks}; max energy outside Omega {worst:.2e} (tol 1e-9)")


# -- student-teacher trend and determinism ------------------------------------------------

ST_EPOCHS, ST_SEEDS = 500, 10


def _sweep(root, tag):
    """One ``qgrow run`` per variant; returns {variant: summary.json bytes}."""
    out = {}
    for v in VARIANTS:
        d = root / tag / v
        argv = ["run", "--experiment", "STUDENT_TEACHER_1Q", "--variant", v,
                "--epochs", str(ST_EPOCHS), "--seeds", str(ST_SEEDS), "--out", str(d)]
        code = run_command(argv)
        assert code == 0, f"run failed for {v}"
        out[v] = (d / "summary.json").read_bytes()
    return out


@pytest.fixture(scope="module")
def st_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("st1q")
    t0 = time.perf_counter()
    first = _sweep(root, "a")
    return root, first, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_4_student_teacher_trend(verdict, st_sweep, capsys):
    _, summaries, elapsed = st_sweep
    stats = {}
    for v, raw in summaries.items():
        s = json.loads(raw)
        bests = np.array([row["best_loss"] for row in s["per_seed"]])
        stats[v] = (float(np.median(bests)), float(bests.mean()))
    with capsys.disabled():
        for v, (med, mean) in stats.items():
            print(f"\n    {v:<18} median {med:.3e}  mean {mean:.3e}")
    ref = stats["cdl-rand-matched"][0]
    ratios = {v: ref / stats[v][0] for v in ("block-growth", "seq-fm", "int-fm")}
    tenfold = all(r >= 10 for r in ratios.values())
    lowest = min(mean for _, mean in stats.values())
    int_ok = stats["int-fm"][1] <= 2 * lowest
    detail = (
        "median(cdl-rand-matched)/median(growth) = "
        + ", ".join(f"{v} {r:.1f}x" for v, r in ratios.items())
        + f" (need >= 10x); int-fm mean {stats['int-fm'][1]:.2e} vs lowest {lowest:.2e} (need <= 2x)"
        + f"; {elapsed / 60:.1f} min"
    )
    verdict(4, tenfold and int_ok, detail)


@pytest.mark.slow
def test_criterion_7_determinism(verdict, st_sweep):
    root, first, _ = st_sweep
    second = _sweep(root, "b")
    same = [v for v in VARIANTS if first[v] == second[v]]
    verdict(7, len(same) == len(VARIANTS), f"{len(same)}/{len(VARIANTS)} summary.json files bit-identical")


# -- noisy regularisation --------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_5_noisy_regularisation(verdict, capsys):
    t0 = time.perf_counter()
    finals = {}
    for v in ("block-growth", "cdl-id-deep"):
        cfg = ExperimentConfig(Experiment.NOISY_ST, v, epochs=1000)
        runs = [run_seed(cfg, s) for s in range(10)]
        train = np.array([r.train_losses[-1] for r in runs])
        test = np.array([r.test_losses[-1] for r in runs])
        finals[v] = (train, test)
    elapsed = time.perf_counter() - t0
    gap = {v: float(np.mean(te - tr)) for v, (tr, te) in finals.items()}
    ratio = {v: float(te.mean() / tr.mean()) for v, (tr, te) in finals.items()}
    with capsys.disabled():
        for v, (tr, te) in finals.items():
            print(f"\n    {v:<12} train {tr.mean():.4f} test {te.mean():.4f} gap {gap[v]:.4f} ratio {ratio[v]:.2f}")
    gap_ok = gap["block-growth"] < gap["cdl-id-deep"]
    ratio_ok = ratio["cdl-id-deep"] >= 3 * ratio["block-growth"]
    detail = (
        f"gap block {gap['block-growth']:.4f} vs cdl {gap['cdl-id-deep']:.4f}; "
        f"test/train ratio cdl/block = {ratio['cdl-id-deep'] / ratio['block-growth']:.2f}x (need >= 3x); "
        f"{elapsed / 60:.1f} min"
    )
    verdict(5, gap_ok and ratio_ok, detail)


# -- Laplace ------------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_laplace(verdict, capsys):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(Experiment.LAPLACE, "block-growth", epochs=2000, lr=0.02, grid_size=50)
    errors = []
    for s in range(3):
        r = run_seed(cfg, s)
        assert r.final_model.n_feature_maps == 9
        errors.append(r.metrics["l2_relative_error"])
    elapsed = time.perf_counter() - t0
    exact = AnalyticField(exact_laplace_solution, lambda x, y: 0.0 * x)
    stub_l2 = l2_relative_error(exact, 50)
    stub_loss = laplace_loss(exact, LaplaceProblem(grid_size=50), seed=0, epoch=0)
    ok = all(e < 0.15 for e in errors) and stub_l2 < 1e-15 and stub_loss < 1e-20
    detail = (
        "L2 relative errors " + ", ".join(f"{e:.4f}" for e in errors)
        + f" (need < 0.15); exact stub L2 {stub_l2:.1e}, loss {stub_loss:.1e}; {elapsed / 60:.1f} min"
    )
    verdict(6, ok, detail)


def test_criterion_8_identity_constant(verdict):
    rng = np.random.default_rng(2024)
    worst, count = 0.0, 0
    for exp in Experiment:
        preset = PRESETS[exp]
        for v in IDENTITY_VARIANTS:
            model = build_student(ExperimentConfig(exp, v, seeds=(0,)).resolved(), seed=0)
            lo, hi = preset.domain
            X = rng.uniform(lo, hi, size=(64, model.input_dim))
            worst = max(worst, float(np.max(np.abs(predict(model, X) - 1.0))))
            count += 1
    verdict(8, worst <= 1e-12, f"{count} preset models, max |f - 1| = {worst:.1e} (tol 1e-12)")
