"""Time-stepped plant simulation, MITM tampering and dataset export."""

from __future__ import annotations

import copy
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import grid
from .errors import AttackSpecError, ConfigurationError, PowerFlowDiverged
from .network import (
    Bases, FeederModel, FrequencyParams, InverterSpec, LoadSpec, NetworkConfig, SolverParams,
)
from .tables import write_table
from .telemetry import CHANNELS

ATTACK_KINDS = ("bias", "scale", "replay", "freeze", "noise")


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator for a named purpose."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True, eq=False)
class Profile:
    """Piecewise-constant reference trajectory for one device (kW / kvar)."""

    device: str
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or len(t) == 0 or len(self.p) != len(t) or len(self.q) != len(t):
            raise ConfigurationError("profile arrays must be 1-D and equally long",
                                     key=f"profiles.{self.device}")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("profile timestamps must be strictly increasing",
                                     key=f"profiles.{self.device}")

    def sample(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Zero-order hold; times before the first sample take the first value."""
        idx = np.searchsorted(self.t, np.asarray(times, dtype=float) + 1e-9, side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 1)
        return np.asarray(self.p, float)[idx], np.asarray(self.q, float)[idx]


def _ou(n: int, dt: float, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Ornstein-Uhlenbeck path started from its stationary law."""
    a = math.exp(-dt / tau)
    b = math.sqrt(1.0 - a * a)
    w = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = w[0]
    for k in range(1, n):
        x[k] = a * x[k - 1] + b * w[k]
    return x


def synthetic_profile(device: str, spec: Mapping[str, Any], times: np.ndarray,
                      rng: np.random.Generator) -> Profile:
    """Stochastic profile: mean + OU fluctuation + optional random steps and jitter.

    Keys (kW/kvar unless noted): ``p_mean``, ``p_std``, ``tau`` (s),
    ``jitter``, ``steps`` = {period (s), low, high}, ``p_min``, ``p_max``,
    ``q_mean``, ``q_ratio`` (q per unit p), ``q_std``.
    """
    n = len(times)
    dt = float(times[1] - times[0]) if n > 1 else 1.0
    tau = float(spec.get("tau", 60.0))
    p = np.full(n, float(spec.get("p_mean", 0.0)))
    if spec.get("p_std", 0.0):
        p += float(spec["p_std"]) * _ou(n, dt, tau, rng)
    steps = spec.get("steps")
    if steps:
        period = float(steps["period"])
        k = np.floor((times - times[0]) / period).astype(int)
        levels = rng.uniform(float(steps["low"]), float(steps["high"]), size=k.max() + 1)
        p += levels[k]
    if spec.get("jitter", 0.0):
        p += float(spec["jitter"]) * rng.standard_normal(n)
    p = np.clip(p, float(spec.get("p_min", -np.inf)), float(spec.get("p_max", np.inf)))
    q = np.full(n, float(spec.get("q_mean", 0.0))) + float(spec.get("q_ratio", 0.0)) * p
    if spec.get("q_std", 0.0):
        q += float(spec["q_std"]) * _ou(n, dt, tau, rng)
    return Profile(device, np.asarray(times, float), p, q)


# ---------------------------------------------------------------------------
# attacks


@dataclass(frozen=True)
class AttackSpec:
    """On-path tampering of selected channels over ``[t_start, t_end)`` seconds.

    ``magnitude`` is the bias (channel units), scale factor, replay offset
    (s) or noise sigma depending on ``kind``; it is ignored for ``freeze``.
    """

    kind: str
    targets: tuple[str, ...]
    t_start: float
    t_end: float
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise AttackSpecError(f"unknown attack kind {self.kind!r}")
        if not self.t_start < self.t_end:
            raise AttackSpecError("attack window must satisfy t_start < t_end")
        if not self.targets:
            raise AttackSpecError("attack must target at least one channel")
        object.__setattr__(self, "targets", tuple(self.targets))


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class UpstreamGrid:
    """Thevenin equivalent behind the head of the feeder.

    The EMF magnitude follows ``voltage`` plus a slow OU drift of standard
    deviation ``walk_sigma`` (pu) and correlation time ``walk_tau`` (s).
    """

    voltage: float = 1.0
    r: float = 0.0
    x: float = 0.0
    walk_sigma: float = 0.0
    walk_tau: float = 300.0

    @property
    def impedance(self) -> complex:
        return complex(self.r, self.x)


@dataclass(frozen=True, eq=False)
class Scenario:
    network: NetworkConfig
    profiles: Mapping[str, Profile] = field(default_factory=dict)
    attacks: tuple[AttackSpec, ...] = ()
    seed: int = 0
    duration: float = 60.0
    upstream: UpstreamGrid = field(default_factory=UpstreamGrid)
    config: Mapping[str, Any] | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigurationError("duration must be positive", key="duration")
        devices = {d.id for d in self.network.inverters} | {d.id for d in self.network.loads}
        for name in self.profiles:
            if name not in devices:
                raise ConfigurationError(f"profile for unknown device {name!r}", key=f"profiles.{name}")
        for k, a in enumerate(self.attacks):
            for ch in a.targets:
                if ch not in self.network.channels:
                    raise ConfigurationError(f"unknown channel {ch!r}", key=f"attacks[{k}].targets")

    @property
    def bases(self) -> Bases:
        return self.network.bases

    @property
    def n_records(self) -> int:
        return int(round(self.duration / self.network.dt_telemetry))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_records) * self.network.dt_telemetry

    def with_seed(self, seed: int) -> "Scenario":
        if self.config is not None:
            cfg = copy.deepcopy(dict(self.config))
            cfg["seed"] = int(seed)
            return scenario_from_config(cfg)
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Everything recorded on the telemetry grid.

    Channel values are in engineering units (kW / kvar), voltages are complex
    per-unit phasors per bus, frequencies are in Hz.
    """

    t_ms: np.ndarray
    channels: tuple[str, ...]
    clean: np.ndarray
    tampered: np.ndarray
    labels: np.ndarray
    voltage: np.ndarray
    f_node: np.ndarray
    f_sys: np.ndarray
    emf: np.ndarray
    bases: Bases = field(default_factory=Bases)

    def __len__(self):
        return len(self.t_ms)

    @property
    def head_voltage(self) -> np.ndarray:
        return self.voltage[:, 0]

    def channel(self, name: str, tampered: bool = True) -> np.ndarray:
        data = self.tampered if tampered else self.clean
        return data[:, self.channels.index(name)]


def simulate(scenario: Scenario) -> SimulationTrace:
    """Run the plant over the scenario and record ground truth + clean telemetry."""
    net = scenario.network
    n = scenario.n_records
    times = scenario.times
    nch = len(net.channels)
    refs = np.zeros((n, nch))
    for spec in (*net.inverters, *net.loads):
        prof = scenario.profiles.get(spec.id)
        if prof is None:
            continue
        p, q = prof.sample(times)
        refs[:, net.channel_index(spec.p_channel)] = p
        refs[:, net.channel_index(spec.q_channel)] = q

    up = scenario.upstream
    emf = np.full(n, float(up.voltage))
    if up.walk_sigma > 0 and n > 0:
        emf += up.walk_sigma * _ou(n, net.dt_telemetry, up.walk_tau, rng_stream(scenario.seed, "upstream"))
    emf = emf.astype(complex)

    t_ms = np.rint(times * 1000.0).astype(np.int64)
    v = np.empty((n, net.n_bus), dtype=complex)
    f_node = np.empty((n, net.n_bus))
    f_sys = np.empty(n)
    model = FeederModel(net)
    refs_pu = refs / net.bases.s_base_kva
    zth = up.impedance
    for k in range(n):
        try:
            res = model.step(refs_pu[k], emf=emf[k], source_impedance=zth)
        except PowerFlowDiverged as exc:
            raise PowerFlowDiverged("plant power flow diverged", exc.solution,
                                    timestamp=int(t_ms[k])) from exc
        v[k] = res.voltage
        f_node[k] = res.f_node
        f_sys[k] = res.f_sys
    return SimulationTrace(t_ms=t_ms, channels=net.channels, clean=refs, tampered=refs.copy(),
                           labels=np.zeros(n, dtype=np.int64), voltage=v, f_node=f_node,
                           f_sys=f_sys, emf=emf, bases=net.bases)


def attack_mask(t_ms: np.ndarray, attack: AttackSpec) -> np.ndarray:
    t = np.asarray(t_ms, dtype=np.int64)
    return (t >= round(attack.t_start * 1000)) & (t < round(attack.t_end * 1000))


def label_records(t_ms: np.ndarray, attacks: Sequence[AttackSpec]) -> np.ndarray:
    labels = np.zeros(len(t_ms), dtype=np.int64)
    for a in attacks:
        labels[attack_mask(t_ms, a)] = 1
    return labels


def inject_attacks(trace: SimulationTrace, attacks: Sequence[AttackSpec],
                   rng: np.random.Generator | None = None) -> SimulationTrace:
    """Apply attacks in order to a copy of the clean telemetry and label records.

    Replay reads from the clean recording; every other kind transforms the
    current (possibly already tampered) values.
    """
    t = trace.t_ms
    dt_ms = int(t[1] - t[0]) if len(t) > 1 else 1
    duration_ms = int(t[-1]) + dt_ms if len(t) else 0
    out = trace.clean.copy()
    for k, a in enumerate(attacks):
        if a.t_start < 0 or round(a.t_end * 1000) > duration_ms:
            raise AttackSpecError(f"attack {k} window [{a.t_start}, {a.t_end}) outside the trace")
        cols = [trace.channels.index(c) for c in a.targets]
        rows = np.flatnonzero(attack_mask(t, a))
        if len(rows) == 0:
            continue
        if a.kind == "bias":
            out[np.ix_(rows, cols)] += a.magnitude
        elif a.kind == "scale":
            out[np.ix_(rows, cols)] *= a.magnitude
        elif a.kind == "replay":
            shift = int(round(a.magnitude * 1000 / dt_ms))
            if a.magnitude <= 0 or a.t_start - a.magnitude < -1e-9 or rows[0] - shift < 0:
                raise AttackSpecError(
                    f"replay offset {a.magnitude} s exceeds the time elapsed before t={a.t_start} s")
            out[np.ix_(rows, cols)] = trace.clean[np.ix_(rows - shift, cols)]
        elif a.kind == "freeze":
            out[np.ix_(rows, cols)] = out[rows[0], cols]
        elif a.kind == "noise":
            if rng is None:
                raise AttackSpecError("noise attacks need a random generator")
            out[np.ix_(rows, cols)] += rng.normal(0.0, a.magnitude, size=(len(rows), len(cols)))
    return replace(trace, tampered=out, labels=label_records(t, attacks))


def run_scenario(scenario: Scenario) -> SimulationTrace:
    """simulate + inject_attacks with the scenario's own seeded noise stream."""
    trace = simulate(scenario)
    return inject_attacks(trace, scenario.attacks, rng_stream(scenario.seed, "attacks"))


# ---------------------------------------------------------------------------
# export


def dataset_columns(trace: SimulationTrace, extra: Mapping[str, np.ndarray] | None = None,
                    tampered: bool = True) -> tuple[list[str], list[np.ndarray]]:
    data = trace.tampered if tampered else trace.clean
    header = ["t_ms", *trace.channels]
    cols = [trace.t_ms, *(data[:, j] for j in range(data.shape[1]))]
    for name, col in (extra or {}).items():
        if len(col) != len(trace):
            raise ValueError(f"extra column {name!r} has {len(col)} rows, expected {len(trace)}")
        header.append(name)
        cols.append(np.asarray(col))
    return header, cols


def export_dataset(trace: SimulationTrace, path, *, delimiter: str = ",", decimal_mark: str = ".",
                   extra: Mapping[str, np.ndarray] | None = None, split: bool = True) -> list[Path]:
    """Write the labeled dataset and, when ``split``, separate normal/attack files.

    The split files carry no label column; they are the raw inputs that
    :func:`twingrid.ml.data.label_and_merge` labels and merges.
    """
    path = Path(path)
    header, cols = dataset_columns(trace, extra)
    labels = np.asarray(trace.labels)
    write_table(path, header + ["label"], cols + [labels], delimiter, decimal_mark)
    written = [path]
    if split:
        for tag, mask in (("normal", labels == 0), ("attack", labels == 1)):
            p = path.with_name(f"{path.stem}_{tag}{path.suffix}")
            write_table(p, header, [c[mask] for c in cols], delimiter, decimal_mark)
            written.append(p)
    return written


# ---------------------------------------------------------------------------
# configuration


def _req(d: Mapping, key: str, path: str):
    if not isinstance(d, Mapping):
        raise ConfigurationError("expected a mapping", key=path)
    if key not in d:
        raise ConfigurationError("missing required key", key=f"{path}.{key}" if path else key)
    return d[key]


def _num(value, path: str, cast=float):
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", key=path) from None


def _load_profile_file(path: Path, device: str) -> Profile:
    from .ml.data import load_table

    try:
        table = load_table(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read profile file: {exc}", key=f"profiles.{device}.file") from exc
    cols = {name: table.values[:, k] for k, name in enumerate(table.header)}
    for need in ("t", "p", "q"):
        if need not in cols:
            raise ConfigurationError(f"profile file lacks column {need!r}", key=f"profiles.{device}.file")
    return Profile(device, cols["t"], cols["p"], cols["q"])


def scenario_from_config(cfg: Mapping[str, Any], base_dir: str | Path | None = None) -> Scenario:
    """Build and validate a :class:`Scenario` from a parsed config mapping.

    Validation errors are :class:`ConfigurationError` whose ``key`` names the
    offending entry (e.g. ``devices[2].bus``).
    """
    if not isinstance(cfg, Mapping):
        raise ConfigurationError("config root must be a mapping")
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    seed = _num(cfg.get("seed", 0), "seed", int)
    duration = _num(_req(cfg, "duration", ""), "duration")

    b = cfg.get("bases", {}) or {}
    bases = Bases(_num(b.get("s_base_kva", 1000.0), "bases.s_base_kva"),
                  _num(b.get("v_base_v", 10000.0), "bases.v_base_v"),
                  _num(b.get("f_nominal", 50.0), "bases.f_nominal"))

    buses_cfg = _req(cfg, "buses", "")
    buses = []
    for k, bc in enumerate(buses_cfg):
        p = f"buses[{k}]"
        buses.append(grid.Bus(_num(_req(bc, "id", p), f"{p}.id", int), bc.get("kind", "PQ"),
                              _num(bc.get("v_nominal", 1.0), f"{p}.v_nominal")))
    bus_ids = {bb.id for bb in buses}
    lines = []
    for k, lc in enumerate(cfg.get("lines", []) or []):
        p = f"lines[{k}]"
        fb = _num(_req(lc, "from", p), f"{p}.from", int)
        tb = _num(_req(lc, "to", p), f"{p}.to", int)
        for key, val in (("from", fb), ("to", tb)):
            if val not in bus_ids:
                raise ConfigurationError(f"references unknown bus {val}", key=f"{p}.{key}")
        lines.append(grid.LineSegment(fb, tb, _num(_req(lc, "r", p), f"{p}.r"),
                                      _num(_req(lc, "x", p), f"{p}.x")))
    feeder = grid.Feeder(buses, lines)

    inverters, loads = [], []
    for k, dc in enumerate(_req(cfg, "devices", "")):
        p = f"devices[{k}]"
        kind = _req(dc, "kind", p)
        dev_id = str(_req(dc, "id", p))
        if kind == "inverter":
            bus = _num(_req(dc, "bus", p), f"{p}.bus", int)
            if bus not in bus_ids:
                raise ConfigurationError(f"references unknown bus {bus}", key=f"{p}.bus")
            inverters.append(InverterSpec(
                dev_id, bus, str(_req(dc, "p_channel", p)), str(_req(dc, "q_channel", p)),
                tau_i=_num(dc.get("tau_i", 0.02), f"{p}.tau_i"),
                i_max=_num(dc.get("i_max", 1.5), f"{p}.i_max"),
                kp=_num(dc.get("kp", 100.0), f"{p}.kp"), ki=_num(dc.get("ki", 100.0), f"{p}.ki")))
        elif kind == "load":
            lb = dc.get("buses", [dc.get("bus")] if "bus" in dc else None)
            if not lb:
                raise ConfigurationError("missing required key", key=f"{p}.buses")
            lb = tuple(_num(x, f"{p}.buses", int) for x in lb)
            for x in lb:
                if x not in bus_ids:
                    raise ConfigurationError(f"references unknown bus {x}", key=f"{p}.buses")
            shares = tuple(_num(x, f"{p}.shares") for x in dc.get("shares", [1.0 / len(lb)] * len(lb)))
            try:
                grid.ExponentialLoad(v0=_num(dc.get("v0", 1.0), f"{p}.v0"),
                                     n_p=_num(dc.get("n_p", 1.0), f"{p}.n_p"),
                                     n_q=_num(dc.get("n_q", 1.0), f"{p}.n_q"))
            except ConfigurationError as exc:
                raise ConfigurationError(str(exc), key=p) from None
            loads.append(LoadSpec(dev_id, lb, str(_req(dc, "p_channel", p)), str(_req(dc, "q_channel", p)),
                                  shares=shares, v0=float(dc.get("v0", 1.0)),
                                  n_p=float(dc.get("n_p", 1.0)), n_q=float(dc.get("n_q", 1.0))))
        else:
            raise ConfigurationError(f"unknown device kind {kind!r}", key=f"{p}.kind")

    fc = cfg.get("frequency", {}) or {}
    sc = cfg.get("solver", {}) or {}
    network = NetworkConfig(
        feeder=feeder, inverters=tuple(inverters), loads=tuple(loads), bases=bases,
        frequency=FrequencyParams(_num(fc.get("t_f", 2.0), "frequency.t_f"),
                                  _num(fc.get("k_f", 0.5), "frequency.k_f"),
                                  _num(fc.get("tau_pll", 0.1), "frequency.tau_pll")),
        solver=SolverParams(_num(sc.get("tol", 1e-8), "solver.tol"),
                            _num(sc.get("max_iter", 50), "solver.max_iter", int),
                            _num(sc.get("v_min", 0.1), "solver.v_min")),
        dt_sim=_num(cfg.get("dt_sim", 0.01), "dt_sim"),
        dt_telemetry=_num(cfg.get("dt_telemetry", 0.1), "dt_telemetry"))

    gc = cfg.get("grid", {}) or {}
    upstream = UpstreamGrid(_num(gc.get("voltage", 1.0), "grid.voltage"),
                            _num(gc.get("r", 0.0), "grid.r"), _num(gc.get("x", 0.0), "grid.x"),
                            _num(gc.get("walk_sigma", 0.0), "grid.walk_sigma"),
                            _num(gc.get("walk_tau", 300.0), "grid.walk_tau"))

    n = int(round(duration / network.dt_telemetry))
    times = np.arange(n) * network.dt_telemetry
    device_ids = {d.id for d in inverters} | {d.id for d in loads}
    profiles = {}
    for name, pc in (cfg.get("profiles", {}) or {}).items():
        p = f"profiles.{name}"
        if name not in device_ids:
            raise ConfigurationError(f"profile for unknown device {name!r}", key=p)
        if "samples" in pc:
            arr = np.asarray(pc["samples"], dtype=float).reshape(-1, 3)
            profiles[name] = Profile(name, arr[:, 0], arr[:, 1], arr[:, 2])
        elif "file" in pc:
            profiles[name] = _load_profile_file(base_dir / pc["file"], name)
        elif "synthetic" in pc:
            profiles[name] = synthetic_profile(name, pc["synthetic"], times,
                                               rng_stream(seed, f"profile:{name}"))
        else:
            raise ConfigurationError("profile needs 'samples', 'file' or 'synthetic'", key=p)

    attacks = []
    for k, ac in enumerate(cfg.get("attacks", []) or []):
        p = f"attacks[{k}]"
        try:
            attacks.append(AttackSpec(str(_req(ac, "kind", p)), tuple(_req(ac, "targets", p)),
                                      _num(_req(ac, "start", p), f"{p}.start"),
                                      _num(_req(ac, "end", p), f"{p}.end"),
                                      _num(ac.get("magnitude", 0.0), f"{p}.magnitude")))
        except AttackSpecError as exc:
            raise ConfigurationError(str(exc), key=p) from None

    return Scenario(network=network, profiles=profiles, attacks=tuple(attacks), seed=seed,
                    duration=duration, upstream=upstream, config=copy.deepcopy(dict(cfg)))


def load_config(path) -> dict:
    """Parse a YAML (or JSON) scenario file into a plain mapping."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: config root must be a mapping")
    return cfg


def load_scenario(path) -> Scenario:
    path = Path(path)
    return scenario_from_config(load_config(path), base_dir=path.parent)


def benchmark_config(seed: int = 42, duration: float = 3600.0) -> dict:
    """Configuration of the default six-bus benchmark (editable copy)."""
    from importlib import resources

    text = resources.files("twingrid").joinpath("data/benchmark.yaml").read_text(encoding="utf-8")
    cfg = yaml.safe_load(text)
    # attack windows and replay offsets scale with the run length
    k = float(duration) / float(cfg["duration"])
    for a in cfg.get("attacks", []):
        a["start"] *= k
        a["end"] *= k
        if a["kind"] == "replay":
            a["magnitude"] *= k
    cfg["seed"] = int(seed)
    cfg["duration"] = float(duration)
    return cfg


def benchmark_scenario(seed: int = 42, duration: float = 3600.0) -> Scenario:
    return scenario_from_config(benchmark_config(seed, duration))
