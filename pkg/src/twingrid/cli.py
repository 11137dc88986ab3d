"""Command-line front end: ``twingrid generate | experiment | inspect``.

Exit codes: 0 success, 1 validation, 2 runtime or divergence, 3 I/O.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import errors
from .experiment import ExperimentConfig, run_experiment
from .ml.cv import PrepConfig
from .ml.data import load_dataset
from .ml.forest import ForestHyper
from .ml.lstm import LstmConfig
from .pipeline import RunManifest, build_datasets, config_hash, ensure_dir, generate, inspect_dataset
from .scenario import benchmark_config, load_config, scenario_from_config

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

MODEL_CHOICES = {"rf": ("RF",), "lstm": ("LSTM",), "all": ("RF", "LSTM")}
FEATURE_CHOICES = {"plain": ("without_dt",), "dt": ("with_dt",), "both": ("without_dt", "with_dt")}


class StageError(Exception):
    """Wraps a pipeline failure with the name of the stage that raised it."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise StageError(name, exc) from exc


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.exc
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (errors.ValidationError, errors.IngestionError)):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def _load_cfg(path, duration=None):
    """Parsed config, its base directory and a label for the manifest.

    For the built-in benchmark a duration override also rescales the attack
    windows; user configs are taken literally.
    """
    if path is None:
        cfg = benchmark_config() if duration is None else benchmark_config(duration=duration)
        return cfg, None, "<builtin benchmark>"
    cfg = load_config(path)
    if duration is not None:
        cfg["duration"] = float(duration)
    return cfg, Path(path).parent, str(path)


def _add_common(p):
    p.add_argument("--config", help="scenario config (YAML or JSON); default: built-in benchmark")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--residuals", action="store_true",
                   help="add per-bus |measured - twin| voltage residual features")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twingrid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate, tamper, replay the twin and export datasets")
    _add_common(g)
    g.add_argument("--duration", type=float, help="override the run length in seconds")
    g.add_argument("--frames", action="store_true", help="also write the tampered telemetry frame stream")
    g.add_argument("--delimiter", default=",", choices=[",", ";", "comma", "semicolon"])
    g.add_argument("--decimal-mark", default=".", choices=[".", ",", "period", "comma"])

    e = sub.add_parser("experiment", help="RF / LSTM comparison with and without twin features")
    _add_common(e)
    e.add_argument("--duration", type=float, help="override the run length in seconds")
    e.add_argument("--plain", help="existing WITHOUT_DT dataset file (skips simulation)")
    e.add_argument("--dt", help="existing WITH_DT dataset file (skips simulation)")
    e.add_argument("--models", choices=sorted(MODEL_CHOICES), default="all")
    e.add_argument("--features", choices=sorted(FEATURE_CHOICES), default="both")
    e.add_argument("--folds", type=int, default=10)
    e.add_argument("--paper-order", action="store_true",
                   help="resample the whole set before splitting (leaks; for comparison only)")
    e.add_argument("--format", choices=["text", "structured"], default="text")
    e.add_argument("--holdout", type=float, default=0.2, help="held-out fraction, 0 disables")
    e.add_argument("--trees", type=int, default=100)
    e.add_argument("--hidden", type=int, default=32, choices=[32, 64])
    e.add_argument("--epochs", type=int, default=50)
    e.add_argument("--lr", type=float, default=1e-3)
    e.add_argument("--window", type=int, default=20)
    e.add_argument("--stride", type=int, default=20)
    e.add_argument("--augment", type=float, default=0.0, help="Gaussian augmentation sigma fraction")

    i = sub.add_parser("inspect", help="descriptive statistics, Pearson matrix and plot data")
    i.add_argument("dataset")
    i.add_argument("--out", default="inspect")
    i.add_argument("--columns", nargs="*", help="columns for the time-series export (default: all)")
    i.add_argument("--svg", action="store_true", help="also write a self-contained SVG chart")
    i.add_argument("--delimiter", choices=[",", ";", "comma", "semicolon"])
    i.add_argument("--decimal-mark", choices=[".", ",", "period", "comma"])
    return ap


def cmd_generate(args) -> int:
    cfg, base, src = _stage("config", _load_cfg, args.config, args.duration)
    data, man = _stage("generate", generate, cfg, args.out, seed=args.seed, residuals=args.residuals,
                       frames=args.frames, delimiter=args.delimiter, decimal_mark=args.decimal_mark,
                       base_dir=base, config_path=src)
    print(f"{len(data.trace)} records ({int(data.trace.labels.sum())} attack) -> {args.out}")
    for name in man.outputs:
        print(f"  {name}")
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        models=MODEL_CHOICES[args.models], features=FEATURE_CHOICES[args.features],
        folds=args.folds, seed=args.seed if args.seed is not None else 42,
        holdout_frac=args.holdout,
        prep=PrepConfig(paper_order=args.paper_order, augment_sigma=args.augment),
        forest=ForestHyper(n_estimators=args.trees),
        lstm=LstmConfig(hidden=args.hidden, lr=args.lr, epochs=args.epochs),
        window=args.window, stride=args.stride)


def cmd_experiment(args) -> int:
    out = _stage("output", ensure_dir, args.out)
    if args.plain or args.dt:
        inputs = [p for p in (args.plain, args.dt) if p]
        plain = _stage("load", load_dataset, args.plain) if args.plain else None
        dt = _stage("load", load_dataset, args.dt) if args.dt else None
        if plain is None:
            raise StageError("load", errors.ParameterError("--plain is required with --dt"))
        man = RunManifest("experiment", config_hash({"inputs": inputs}), 0, inputs=inputs)
        cfg = _stage("config", _experiment_config, args)
        if dt is None:
            cfg = replace(cfg, features=("without_dt",))
    else:
        scfg, base, src = _stage("config", _load_cfg, args.config, args.duration)
        if args.seed is not None:
            scfg["seed"] = int(args.seed)
        scenario = _stage("config", scenario_from_config, scfg, base)
        cfg = _stage("config", _experiment_config, args)
        man = RunManifest("experiment", config_hash(scfg), scenario.seed, inputs=[src])
        data = _stage("generate", build_datasets, scenario, args.residuals, man)
        plain, dt = data.plain, data.dt
    man.seed = cfg.seed

    def log(msg):
        print(msg, file=sys.stderr, flush=True)

    with man.timed("experiment"):
        report = _stage("experiment", run_experiment, plain, dt, cfg, log)
    report_cfg = dict(report.config, config_hash=man.config_hash)
    report = type(report)(report.cells, report_cfg)
    text, js = report.render(), report.to_json()
    _stage("output", (out / "report.txt").write_text, text, encoding="utf-8")
    _stage("output", (out / "report.json").write_text, js, encoding="utf-8")
    man.record(out, out / "report.txt", out / "report.json")
    _stage("output", man.write, out / "manifest.json")
    sys.stdout.write(text if args.format == "text" else js)
    return EXIT_OK


def cmd_inspect(args) -> int:
    man = _stage("inspect", inspect_dataset, args.dataset, args.out, columns=args.columns,
                 svg=args.svg, delimiter=args.delimiter, decimal_mark=args.decimal_mark)
    rep = man.report
    print(f"{len(rep.stats)} features -> {args.out}")
    for s in rep.stats:
        flag = "  [constant]" if s.constant else ""
        print(f"  {s.name:<10} mean={s.mean:.6g} median={s.median:.6g} var={s.variance:.6g} "
              f"iqr={s.iqr:.6g}{flag}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "experiment": cmd_experiment, "inspect": cmd_inspect}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (StageError, errors.TwinGridError, OSError, ValueError) as exc:
        code = exit_code(exc)
        kind = {EXIT_VALIDATION: "validation error", EXIT_IO: "I/O error"}.get(code, "error")
        print(f"twingrid: {kind}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
