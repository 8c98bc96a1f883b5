"""``qgrow`` command line: run sweeps, inspect spectra, verify, aggregate.

Teacher circuits use fixed parameter ranges: one qubit draws ansatz angles
from [0, 0.1] and encoding scales from [0, pi/9]; two qubits draw both from
[0, pi/5].  Configs are JSON; flags override file values, which override
the experiment defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import VARIANTS, Experiment, ExperimentConfig, run_seed
from .model import (
    InitSpec,
    accessible_spectrum,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    reuploader_layout,
)
from .training import SweepSummary, seed_sweep, summarize
from .verify import gradient_suite, preservation_suite

log = logging.getLogger("qgrow")

SEED_OFFSET_ENV = "QGROW_SEED_OFFSET"


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file and fill in experiment defaults."""
    return config_from_dict(_read_config(path))


def _read_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "experiment" not in data or "variant" not in data:
        raise ConfigError("config needs both 'experiment' and 'variant'")
    try:
        Experiment(data["experiment"])
    except ValueError:
        choices = ", ".join(e.value for e in Experiment)
        raise ConfigError(f"unknown experiment {data['experiment']!r}; choose one of: {choices}") from None
    if data["variant"] not in VARIANTS:
        raise ConfigError(f"unknown variant {data['variant']!r}; choose one of: {', '.join(VARIANTS)}")
    if "seeds" in data:
        data["seeds"] = parse_seeds(data["seeds"])
    try:
        return ExperimentConfig.from_dict(data).resolved()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_seeds(value) -> tuple[int, ...]:
    """``5`` -> seeds 0..4; ``"3,7,9"`` or ``[3, 7, 9]`` -> exactly those."""
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if "," in text or text.startswith("["):
        return tuple(int(v) for v in text.strip("[]").split(",") if v.strip())
    n = int(text)
    if n < 1:
        raise ConfigError("need at least one seed")
    return tuple(range(n))


def _seed_offset() -> int:
    raw = os.environ.get(SEED_OFFSET_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_OFFSET_ENV} must be an integer, got {raw!r}") from None


def _overrides(args) -> dict:
    out = {}
    for flag, key in [
        ("experiment", "experiment"),
        ("variant", "variant"),
        ("epochs", "epochs"),
        ("lr", "lr"),
        ("growth_interval", "growth_interval"),
        ("blocks_per_event", "blocks_per_event"),
        ("jobs", "jobs"),
        ("out", "out"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    if args.seeds is not None:
        out["seeds"] = parse_seeds(args.seeds)
    return out


def resolve_run_config(args) -> ExperimentConfig:
    # flags > file > experiment defaults; resolution happens once, at the end
    data = _read_config(args.config) if args.config else {}
    data.update(_overrides(args))
    return config_from_dict(data)


# -- run ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _SeedJob:
    """Train one seed and write its report and loss curve."""

    config: ExperimentConfig
    out: str

    def __call__(self, seed: int) -> float:
        report = run_seed(self.config, seed)
        out = Path(self.out)
        (out / f"seed_{seed}_report.json").write_text(
            json.dumps(report.to_dict(), indent=1)
        )
        (out / f"seed_{seed}_losses.csv").write_text(report.to_csv())
        return report.best_loss


def _check_writable(out: Path):
    """Fail before any work if ``out`` cannot take files; leave nothing behind."""
    created = []
    try:
        missing = [p for p in [out, *out.parents] if not p.exists()]
        for p in reversed(missing):
            p.mkdir()
            created.append(p)
        with tempfile.TemporaryFile(dir=out):
            pass
    except OSError as exc:
        for p in reversed(created):
            p.rmdir()
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    cfg = resolve_run_config(args)
    if cfg.experiment is Experiment.SPECTRUM:
        raise ConfigError("SPECTRUM configs do not train; use the 'spectrum' subcommand")
    offset = _seed_offset()
    seeds = [s + offset for s in cfg.seeds]
    out = Path(cfg.out)
    _check_writable(out)

    summary = seed_sweep(_SeedJob(cfg, str(out)), seeds, jobs=cfg.jobs)
    entries = []
    for s in seeds:
        entry = {"seed": s, "status": "failed" if s in summary.failures else "ok"}
        if s not in summary.failures:
            entry["report"] = f"seed_{s}_report.json"
            entry["losses"] = f"seed_{s}_losses.csv"
        entries.append(entry)
    summary_payload = {
        "experiment": cfg.experiment.value,
        "variant": cfg.variant,
        **summary.to_dict(),
    }
    _write_json(out / "summary.json", summary_payload)
    _write_json(
        out / "manifest.json",
        {
            "toolkit_version": __version__,
            "config": cfg.to_dict(),
            "seed_offset": offset,
            "seeds": entries,
            "partial": bool(summary.failures),
            "summary": "summary.json",
            "statistics": summary.to_dict(),
        },
    )
    print(format_table([(f"{cfg.experiment.value} {cfg.variant}", summary)]))
    if summary.failures:
        print(f"{len(summary.failures)} seed(s) failed; see manifest.json", file=sys.stderr)
        return 1
    return 0


# -- spectrum -----------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    psi = [float(v) for v in str(args.psi).split(",")]
    n = args.qubits
    if len(psi) not in (1, n):
        raise ConfigError(f"--psi needs 1 or {n} values, got {len(psi)}")
    dims = [0] * n if args.shared_input else list(range(n))
    layout = reuploader_layout(
        args.layers,
        ansatz_block(n, paired=False),
        feature_map_block(n, dims, paired=False),
    )
    model = build_reuploader(n, layout, InitSpec("identity"))
    per_gate = np.tile(psi if len(psi) == n else psi * n, args.layers)
    model = model.with_params(psi=per_gate)
    omegas = accessible_spectrum(model)
    omegas = omegas if isinstance(omegas, tuple) else (omegas,)
    for d, om in enumerate(omegas):
        prefix = f"x{d}: " if len(omegas) > 1 else ""
        print(prefix + str(om))
    return 0


# -- verify --------------------------------------------------------------------------


def cmd_verify(args) -> int:
    results = [preservation_suite(args.cases_preservation, args.seed)]
    results += list(gradient_suite(args.cases_gradient, args.seed))
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


# -- report --------------------------------------------------------------------------


def summary_from_run_dir(run_dir) -> tuple[str, SweepSummary]:
    """Recompute statistics from the per-seed reports listed in a manifest."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    per_seed, failures = {}, {}
    for entry in manifest["seeds"]:
        if entry["status"] != "ok":
            failures[entry["seed"]] = "failed during run"
            continue
        report = json.loads((run_dir / entry["report"]).read_text())
        per_seed[entry["seed"]] = report["best_loss"]
    cfg = manifest["config"]
    return f"{cfg['experiment']} {cfg['variant']}", summarize(per_seed, failures)


def format_table(rows) -> str:
    head = f"{'Model':<36} {'Mean':>24} {'Best':>10} {'Worst':>10} {'n':>4}"
    lines = [head, "-" * len(head)]
    for label, s in rows:
        mean = f"{s.mean:.3e} ± {s.stderr:.2e}"
        lines.append(f"{label:<36} {mean:>24} {s.best:>10.3e} {s.worst:>10.3e} {s.n:>4}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    rows = [summary_from_run_dir(d) for d in args.run_dirs]
    print(format_table(rows))
    if args.json:
        payload = [{"model": label, **s.to_dict()} for label, s in rows]
        Path(args.json).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return 0


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qgrow", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    p.add_argument("--version", action="version", version=f"qgrow {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train a seed sweep and write reports")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--experiment", choices=[e.value for e in Experiment])
    run.add_argument("--variant", help=f"one of: {', '.join(VARIANTS)}")
    run.add_argument("--seeds", help="N (seeds 0..N-1) or a comma list")
    run.add_argument("--epochs", type=int)
    run.add_argument("--lr", type=float)
    run.add_argument("--growth-interval", type=int)
    run.add_argument("--blocks-per-event", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--out", help="output directory (default: runs)")
    run.set_defaults(func=cmd_run)

    spectrum = sub.add_parser("spectrum", help="print the accessible frequencies of a reuploader")
    spectrum.add_argument("--qubits", type=int, default=1)
    spectrum.add_argument("--layers", type=int, default=1)
    spectrum.add_argument("--psi", default="1", help="encoding scale, or one per qubit (comma list)")
    spectrum.add_argument("--shared-input", action="store_true", help="all qubits encode x0")
    spectrum.set_defaults(func=cmd_spectrum)

    ver = sub.add_parser("verify", help="run the preservation and gradient property suites")
    ver.add_argument("--cases-preservation", type=int, default=200)
    ver.add_argument("--cases-gradient", type=int, default=100)
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="aggregate finished runs into a Mean/Best/Worst table")
    rep.add_argument("run_dirs", nargs="+")
    rep.add_argument("--json", help="also write the table as JSON")
    rep.set_defaults(func=cmd_report)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"qgrow {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main():  # pragma: no cover - console entry
    sys.exit(run_command())
