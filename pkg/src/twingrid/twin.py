"""Digital-twin state estimator.

The twin owns a replica of the feeder and replays IED power telemetry
through it, anchored at the (trusted) head-of-feeder voltage, to produce
virtual voltage and frequency measurements at every bus.  It only ever sees
the telemetry it is given, so tampered inputs yield physically inconsistent
virtual measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, EstimatorError, ParameterError, PowerFlowDiverged
from .ml.data import LabeledDataset
from .network import FeederModel, NetworkConfig
from .scenario import Scenario, SimulationTrace


@dataclass(frozen=True)
class TwinConfig:
    network: NetworkConfig

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "TwinConfig":
        return cls(scenario.network)

    @property
    def n_bus(self) -> int:
        return self.network.n_bus


@dataclass(frozen=True)
class TelemetryRecord:
    t: int
    p_pv: float = 0.0
    q_pv: float = 0.0
    p_batt: float = 0.0
    q_batt: float = 0.0
    p_w: float = 0.0
    q_w: float = 0.0
    p_n: float = 0.0
    q_n: float = 0.0
    label: int = 0

    def values(self, channels: Sequence[str]) -> np.ndarray:
        return np.array([getattr(self, c) for c in channels], dtype=float)


def records_from_trace(trace: SimulationTrace, tampered: bool = True) -> list[TelemetryRecord]:
    data = trace.tampered if tampered else trace.clean
    return [TelemetryRecord(int(t), *map(float, row), label=int(y))
            for t, row, y in zip(trace.t_ms, data, trace.labels)]


@dataclass(frozen=True, eq=False)
class VirtualMeasurements:
    t: int
    v: np.ndarray       # pu magnitude per bus
    f: np.ndarray       # Hz per bus


@dataclass(frozen=True, eq=False)
class VirtualSeries:
    """Stacked virtual measurements for a whole replay."""

    t_ms: np.ndarray
    v: np.ndarray           # (n, N) pu
    f: np.ndarray           # (n, N) Hz
    flagged: np.ndarray     # records whose estimate failed

    def __len__(self):
        return len(self.t_ms)


class DigitalTwin:
    def __init__(self, config: TwinConfig, head_voltage: complex = 1.0):
        self.config = config
        self.model = FeederModel(config.network, head_voltage=head_voltage)

    def step(self, head_voltage: complex, record, t_ms: int | None = None) -> VirtualMeasurements:
        """Assimilate one telemetry record (engineering units) and emit estimates."""
        net = self.config.network
        if isinstance(record, TelemetryRecord):
            t_ms = record.t if t_ms is None else t_ms
            values = record.values(net.channels)
        else:
            values = np.asarray(record, dtype=float)
        if not abs(head_voltage) > 0:
            raise EstimatorError("head voltage magnitude must be positive", timestamp=t_ms)
        try:
            res = self.model.step(values / net.bases.s_base_kva, head_voltage=head_voltage)
        except PowerFlowDiverged as exc:
            raise EstimatorError(f"twin power flow diverged at t={t_ms} ms", timestamp=t_ms) from exc
        return VirtualMeasurements(t=t_ms if t_ms is not None else 0, v=np.abs(res.voltage), f=res.f_node)


def twin_step(twin: DigitalTwin, head_voltage: complex, ied_powers,
              t_ms: int | None = None) -> tuple[DigitalTwin, VirtualMeasurements]:
    vm = twin.step(head_voltage, ied_powers, t_ms)
    return twin, vm


def replay(config: TwinConfig, t_ms: np.ndarray, channels: np.ndarray, head_voltage: np.ndarray,
           on_error: str = "raise") -> VirtualSeries:
    """Run a fresh twin over a telemetry matrix.

    With ``on_error="flag"`` a failed estimate is reported as NaN and its
    record is marked in ``flagged``; the twin then continues from its last
    good state.
    """
    if on_error not in ("raise", "flag"):
        raise ParameterError("on_error must be 'raise' or 'flag'")
    n = len(t_ms)
    if len(channels) != n or len(head_voltage) != n:
        raise AlignmentError("telemetry, head voltage and timestamps differ in length")
    nb = config.n_bus
    v = np.empty((n, nb))
    f = np.empty((n, nb))
    flagged = np.zeros(n, dtype=bool)
    twin = DigitalTwin(config)
    for k in range(n):
        try:
            vm = twin.step(head_voltage[k], channels[k], int(t_ms[k]))
        except EstimatorError:
            if on_error == "raise":
                raise
            flagged[k] = True
            v[k] = np.nan
            f[k] = np.nan
            continue
        v[k] = vm.v
        f[k] = vm.f
    return VirtualSeries(np.asarray(t_ms, dtype=np.int64), v, f, flagged)


def replay_trace(trace: SimulationTrace, config: TwinConfig, tampered: bool = True,
                 on_error: str = "raise") -> VirtualSeries:
    data = trace.tampered if tampered else trace.clean
    return replay(config, trace.t_ms, data, trace.head_voltage, on_error=on_error)


def voltage_names(n: int) -> list[str]:
    return [f"V{k}" for k in range(1, n + 1)]


def frequency_names(n: int) -> list[str]:
    return [f"F{k}" for k in range(1, n + 1)]


def residual_names(n: int) -> list[str]:
    return [f"R{k}" for k in range(1, n + 1)]


def dt_columns(virtuals: VirtualSeries, v_base: float,
               residuals: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Extra dataset columns: V1..VN in volts, F1..FN in Hz, optional R1..RN."""
    n = virtuals.v.shape[1]
    cols = {name: virtuals.v[:, k] * v_base for k, name in enumerate(voltage_names(n))}
    cols.update({name: virtuals.f[:, k] for k, name in enumerate(frequency_names(n))})
    if residuals is not None:
        cols.update({name: residuals[:, k] for k, name in enumerate(residual_names(n))})
    return cols


def voltage_residuals(virtuals: VirtualSeries, measured_v: np.ndarray, v_base: float = 1.0) -> np.ndarray:
    """Per-node |measured - twin| voltage mismatch (scaled by ``v_base``)."""
    measured_v = np.abs(np.asarray(measured_v))
    if measured_v.shape != virtuals.v.shape:
        raise AlignmentError(f"measured voltages {measured_v.shape} vs twin {virtuals.v.shape}")
    return np.abs(measured_v - virtuals.v) * v_base


def augment_with_dt(records: LabeledDataset, virtuals: VirtualSeries, include_residuals: bool = False,
                    measured_v: np.ndarray | None = None, v_base: float = 1.0) -> LabeledDataset:
    """Extend plain IED features with the twin's virtual measurements.

    ``records`` must carry timestamps aligned with ``virtuals``.  Residual
    features need node voltage measurements (``measured_v``, pu).
    """
    if len(records) != len(virtuals):
        raise AlignmentError(f"{len(records)} records vs {len(virtuals)} virtual measurements")
    if records.t_ms is None or not np.array_equal(records.t_ms, virtuals.t_ms):
        raise AlignmentError("record and virtual-measurement timestamps differ")
    if include_residuals and measured_v is None:
        raise ParameterError("residual features need measured node voltages")
    extra = dt_columns(virtuals, v_base,
                       voltage_residuals(virtuals, measured_v, v_base) if include_residuals else None)
    X = np.column_stack([records.X, *extra.values()])
    return LabeledDataset(X, records.y.copy(), list(records.feature_names) + list(extra),
                          t_ms=records.t_ms.copy())


def plain_dataset(trace: SimulationTrace) -> LabeledDataset:
    """WITHOUT_DT feature set: the tampered IED power channels."""
    return LabeledDataset(trace.tampered.copy(), np.asarray(trace.labels, dtype=np.int64).copy(),
                          list(trace.channels), t_ms=trace.t_ms.copy())


def dt_dataset(trace: SimulationTrace, virtuals: VirtualSeries, include_residuals: bool = False,
               measured_v: np.ndarray | None = None) -> LabeledDataset:
    """WITH_DT feature set, voltages in volts like the exported files."""
    return augment_with_dt(plain_dataset(trace), virtuals, include_residuals, measured_v,
                           v_base=trace.bases.v_base_v)


__all__ = [
    "TwinConfig", "TelemetryRecord", "VirtualMeasurements", "VirtualSeries", "DigitalTwin",
    "twin_step", "replay", "replay_trace", "augment_with_dt", "dt_columns", "plain_dataset",
    "dt_dataset", "voltage_residuals", "records_from_trace",
]
