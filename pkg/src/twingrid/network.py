"""Feeder description shared by the simulated plant and the digital twin.

:class:`FeederModel` performs one telemetry period of the co-simulation:
apply device references, integrate inverter/PLL/frequency dynamics at the
internal step, then solve the network.  The plant and the twin run the very
same stepping code; they differ only in how the head of the feeder is
anchored (upstream Thevenin source vs. measured head voltage).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import grid
from .errors import ConfigurationError
from .telemetry import CHANNELS


@dataclass(frozen=True)
class Bases:
    s_base_kva: float = 1000.0
    v_base_v: float = 10000.0
    f_nominal: float = 50.0

    def __post_init__(self):
        if self.s_base_kva <= 0 or self.v_base_v <= 0 or self.f_nominal <= 0:
            raise ConfigurationError("bases must be positive", key="bases")


@dataclass(frozen=True)
class InverterSpec:
    id: str
    bus: int
    p_channel: str
    q_channel: str
    tau_i: float = 0.02
    i_max: float = 1.5
    kp: float = 100.0
    ki: float = 100.0


@dataclass(frozen=True)
class LoadSpec:
    id: str
    buses: tuple[int, ...]
    p_channel: str
    q_channel: str
    shares: tuple[float, ...] = (1.0,)
    v0: float = 1.0
    n_p: float = 1.0
    n_q: float = 1.0


@dataclass(frozen=True)
class FrequencyParams:
    t_f: float = 2.0
    k_f: float = 0.5
    tau_pll: float = 0.1


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-8
    max_iter: int = 50
    v_min: float = 0.1


@dataclass(frozen=True)
class NetworkConfig:
    """Topology, devices and numerical settings; everything but the inputs."""

    feeder: grid.Feeder
    inverters: tuple[InverterSpec, ...] = ()
    loads: tuple[LoadSpec, ...] = ()
    bases: Bases = field(default_factory=Bases)
    frequency: FrequencyParams = field(default_factory=FrequencyParams)
    solver: SolverParams = field(default_factory=SolverParams)
    dt_sim: float = 0.01
    dt_telemetry: float = 0.1
    channels: tuple[str, ...] = CHANNELS

    def __post_init__(self):
        n = self.feeder.n_bus
        seen_ids = set()
        used = set()
        for kind, devs in (("inverter", self.inverters), ("load", self.loads)):
            for k, d in enumerate(devs):
                key = f"devices.{d.id}"
                if d.id in seen_ids:
                    raise ConfigurationError(f"duplicate device id {d.id!r}", key=key)
                seen_ids.add(d.id)
                buses = (d.bus,) if kind == "inverter" else d.buses
                for b in buses:
                    if not 1 <= b <= n:
                        raise ConfigurationError(f"references unknown bus {b}", key=f"{key}.bus")
                for ch in (d.p_channel, d.q_channel):
                    if ch not in self.channels:
                        raise ConfigurationError(f"unknown channel {ch!r}", key=f"{key}.channel")
                    if ch in used:
                        raise ConfigurationError(f"channel {ch!r} assigned twice", key=f"{key}.channel")
                    used.add(ch)
                if kind == "load" and len(d.shares) != len(d.buses):
                    raise ConfigurationError("shares and buses differ in length", key=f"{key}.shares")
        if not self.dt_sim > 0 or not self.dt_telemetry > 0:
            raise ConfigurationError("time steps must be positive", key="dt_sim")
        ratio = self.dt_telemetry / self.dt_sim
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("dt_telemetry must be a multiple of dt_sim", key="dt_telemetry")
        for inv in self.inverters:
            if self.dt_sim > inv.tau_i / 2:
                raise ConfigurationError(
                    f"dt_sim={self.dt_sim} exceeds tau_i/2 for inverter {inv.id}", key="dt_sim")
        if self.dt_sim > self.frequency.tau_pll / 2 or self.dt_sim > self.frequency.t_f / 2:
            raise ConfigurationError("dt_sim too large for the frequency model", key="dt_sim")

    @property
    def n_bus(self) -> int:
        return self.feeder.n_bus

    @property
    def substeps(self) -> int:
        return int(round(self.dt_telemetry / self.dt_sim))

    def channel_index(self, name: str) -> int:
        return self.channels.index(name)


@dataclass
class StepResult:
    voltage: np.ndarray          # complex pu per bus
    f_node: np.ndarray           # Hz per bus
    f_sys: float
    imbalance: float             # pu, net demand minus generation
    iterations: int


class FeederModel:
    """Stateful stepper around the pure grid functions."""

    def __init__(self, config: NetworkConfig, head_voltage: complex = 1.0):
        self.config = config
        n = config.n_bus
        f0 = config.bases.f_nominal
        w0 = grid.TWO_PI * f0
        self.inverters = [
            grid.InverterState(tau_i=s.tau_i, i_max=s.i_max,
                               pll=grid.PllState(kp=s.kp, ki=s.ki, omega_hat=w0, omega_nominal=w0))
            for s in config.inverters
        ]
        self.loads = [
            [grid.ExponentialLoad(v0=s.v0, n_p=s.n_p, n_q=s.n_q) for _ in s.buses]
            for s in config.loads
        ]
        fp = config.frequency
        self.freq = grid.FrequencyState.nominal(n, f0, t_f=fp.t_f, k_f=fp.k_f, tau_pll=fp.tau_pll)
        self.voltage = np.full(n, complex(head_voltage))
        self.phase = 0.0
        self.imbalance = 0.0
        self._p_idx = [(config.channel_index(s.p_channel), config.channel_index(s.q_channel))
                       for s in config.inverters]
        self._l_idx = [(config.channel_index(s.p_channel), config.channel_index(s.q_channel))
                       for s in config.loads]

    def step(self, refs_pu: Sequence[float], *, emf: complex | None = None,
             source_impedance: complex = 0j, head_voltage: complex | None = None) -> StepResult:
        """Advance one telemetry period.

        ``refs_pu`` holds per-channel power references in pu (channel order of
        the config).  Exactly one of ``emf`` (plant: Thevenin source) or
        ``head_voltage`` (twin: measured bus-1 phasor) anchors the solve.
        """
        cfg = self.config
        sv = cfg.solver
        vm_prev = np.abs(self.voltage)
        va_prev = np.angle(self.voltage)

        for spec, members, (ip, iq) in zip(cfg.loads, self.loads, self._l_idx):
            p, q = refs_pu[ip], refs_pu[iq]
            for k, share in enumerate(spec.shares):
                members[k] = members[k].with_reference(share * p, share * q)

        invs = self.inverters
        for k, (spec, (ip, iq)) in enumerate(zip(cfg.inverters, self._p_idx)):
            i_d_ref, i_q_ref = grid.current_refs_from_power(
                refs_pu[ip], refs_pu[iq], vm_prev[spec.bus - 1], spec.i_max, sv.v_min)
            invs[k] = replace(invs[k], i_d_ref=i_d_ref, i_q_ref=i_q_ref)

        dt = cfg.dt_sim
        freq = self.freq
        phase = self.phase
        f0 = cfg.bases.f_nominal
        buses = [s.bus - 1 for s in cfg.inverters]
        for _ in range(cfg.substeps):
            freq = grid.frequency_step(freq, self.imbalance, dt)
            phase = grid._wrap(phase + grid.TWO_PI * (freq.f_sys - f0) * dt)
            for k, b in enumerate(buses):
                st = invs[k]
                pll = grid.pll_step(st.pll, va_prev[b] + phase, dt)
                invs[k] = grid.current_loop_step(replace(st, pll=pll), dt)
        self.freq = freq
        self.phase = phase

        loads = [(b, ld) for spec, members in zip(cfg.loads, self.loads)
                 for b, ld in zip(spec.buses, members)]
        sources = [(spec.bus, st) for spec, st in zip(cfg.inverters, invs)]
        if head_voltage is not None:
            slack, zs = complex(head_voltage), 0j
            v_init = self.voltage.copy()
            v_init[cfg.feeder.slack] = slack
        else:
            slack, zs = complex(emf), complex(source_impedance)
            v_init = self.voltage
        sol = grid.solve_power_flow(cfg.feeder, slack, loads, sources, source_impedance=zs,
                                    tol=sv.tol, max_iter=sv.max_iter, v_init=v_init)
        self.voltage = sol.voltage
        self.imbalance = -float(np.sum(sol.p_inj))
        return StepResult(voltage=self.voltage.copy(), f_node=freq.f_node.copy(), f_sys=freq.f_sys,
                          imbalance=self.imbalance, iterations=sol.iterations)


def default_feeder() -> grid.Feeder:
    """Six-bus radial feeder used by the benchmark scenario."""
    buses = [grid.Bus(1, "slack")] + [grid.Bus(i) for i in range(2, 7)]
    lines = [
        grid.LineSegment(1, 2, 0.020, 0.015),
        grid.LineSegment(2, 3, 0.025, 0.018),
        grid.LineSegment(3, 4, 0.015, 0.010),
        grid.LineSegment(3, 5, 0.030, 0.020),
        grid.LineSegment(5, 6, 0.020, 0.015),
    ]
    return grid.Feeder(buses, lines)


def pu_to_kw(x, bases: Bases):
    return np.asarray(x) * bases.s_base_kva


def kw_to_pu(x, bases: Bases):
    return np.asarray(x, dtype=float) / bases.s_base_kva


__all__ = [
    "Bases", "InverterSpec", "LoadSpec", "FrequencyParams", "SolverParams",
    "NetworkConfig", "FeederModel", "StepResult", "default_feeder",
]
