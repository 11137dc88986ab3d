"""End-to-end runs behind the command-line tool: generate, experiment, inspect."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .ml.data import LabeledDataset, eda_report, load_dataset, svg_timeseries
from .scenario import Scenario, SimulationTrace, export_dataset, run_scenario, scenario_from_config
from .tables import write_table
from .telemetry import records_to_frames, write_stream
from .twin import TwinConfig, VirtualSeries, dt_columns, dt_dataset, plain_dataset, replay_trace, voltage_residuals


TIMINGS_FILE = "timings.json"


def tool_version() -> str:
    try:
        return metadata.version("twingrid")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def config_hash(cfg) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    inputs: list[str] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)   # name -> sha256
    timings: dict[str, float] = field(default_factory=dict)
    version: str = field(default_factory=tool_version)

    @contextmanager
    def timed(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[stage] = round(time.perf_counter() - t0, 3)

    def record(self, out_dir: Path, *paths) -> None:
        for p in paths:
            p = Path(p)
            self.outputs[p.relative_to(out_dir).as_posix()] = file_digest(p)

    def as_dict(self) -> dict:
        return {"command": self.command, "version": self.version, "config_hash": self.config_hash,
                "seed": self.seed, "inputs": list(self.inputs),
                "outputs": dict(sorted(self.outputs.items()))}

    def write(self, path) -> None:
        """Write the manifest and, next to it, the wall-clock timings.

        Timings live in their own file so that the manifest itself is
        byte-identical across re-runs.
        """
        path = Path(path)
        _write_text(path, json.dumps(self.as_dict(), indent=1, sort_keys=True) + "\n")
        _write_text(path.with_name(TIMINGS_FILE),
                    json.dumps({"command": self.command, "timings": self.timings}, indent=1) + "\n")


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


# -- generate ------------------------------------------------------------------

@dataclass(eq=False)
class GeneratedData:
    scenario: Scenario
    trace: SimulationTrace
    virtuals: VirtualSeries
    plain: LabeledDataset
    dt: LabeledDataset


def build_datasets(scenario: Scenario, residuals: bool = False, manifest: RunManifest | None = None,
                   on_error: str = "raise") -> GeneratedData:
    """simulate -> inject_attacks -> twin replay -> plain and DT feature sets."""
    def stage(name):
        return manifest.timed(name) if manifest else _null()

    with stage("simulate"):
        trace = run_scenario(scenario)
    with stage("twin"):
        virtuals = replay_trace(trace, TwinConfig.from_scenario(scenario), on_error=on_error)
    measured = np.abs(trace.voltage) if residuals else None
    return GeneratedData(scenario, trace, virtuals, plain_dataset(trace),
                         dt_dataset(trace, virtuals, residuals, measured))


@contextmanager
def _null():
    yield


def generate(cfg: dict, out_dir, *, seed: int | None = None, residuals: bool = False,
             frames: bool = False, delimiter: str = ",", decimal_mark: str = ".",
             base_dir=None, config_path: str | None = None) -> tuple[GeneratedData, RunManifest]:
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    scenario = scenario_from_config(cfg, base_dir)
    out = ensure_dir(out_dir)
    man = RunManifest("generate", config_hash(cfg), scenario.seed,
                      inputs=[config_path] if config_path else ["<builtin benchmark>"])
    data = build_datasets(scenario, residuals, man)
    tr = data.trace
    with man.timed("export"):
        written = export_dataset(tr, out / "dataset_plain.csv", delimiter=delimiter, decimal_mark=decimal_mark)
        res = voltage_residuals(data.virtuals, np.abs(tr.voltage), tr.bases.v_base_v) if residuals else None
        extra = dt_columns(data.virtuals, tr.bases.v_base_v, res)
        written += export_dataset(tr, out / "dataset_dt.csv", delimiter=delimiter,
                                  decimal_mark=decimal_mark, extra=extra)
        if frames:
            p = out / "frames.tmf"
            write_stream(p, records_to_frames(tr.t_ms, tr.tampered))
            written.append(p)
    man.record(out, *written)
    man.write(out / "manifest.json")
    return data, man


# -- inspect -------------------------------------------------------------------

def inspect_dataset(path, out_dir, *, columns=None, svg: bool = False,
                    delimiter: str | None = None, decimal_mark: str | None = None) -> RunManifest:
    out = ensure_dir(out_dir)
    man = RunManifest("inspect", file_digest(path), 0, inputs=[str(path)])
    with man.timed("load"):
        data = load_dataset(path, delimiter, decimal_mark)
    with man.timed("eda"):
        rep = eda_report(data)
    header, cols = rep.stats_table()
    files = [out / "stats.csv", out / "pearson.csv", out / "timeseries.csv"]
    _write_stats(files[0], header, cols)
    names = rep.feature_names
    _write_csv(files[1], ["feature", *names],
               [[n, *(repr(float(v)) for v in row)] for n, row in zip(names, rep.correlation)])
    chosen = list(columns) if columns else names
    missing = [c for c in chosen if c not in names]
    if missing:
        raise SchemaError(f"unknown columns {missing}")
    t = data.t_ms if data.t_ms is not None else np.arange(len(data), dtype=np.int64)
    series = {c: data.X[:, names.index(c)] for c in chosen}
    write_table(files[2], ["t_ms", *chosen], [np.asarray(t, np.int64), *series.values()])
    if svg:
        p = out / "timeseries.svg"
        _write_text(p, svg_timeseries(np.asarray(t, float) / 1000.0, series))
        files.append(p)
    man.record(out, *files)
    man.write(out / "manifest.json")
    man.report = rep  # type: ignore[attr-defined]
    return man


def _write_stats(path, header, cols):
    rows = [[r[0], *(repr(float(v)) for v in r[1:-1]), int(r[-1])] for r in zip(*cols)]
    _write_csv(path, header, rows)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _write_text(path, buf.getvalue())
