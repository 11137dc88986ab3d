"""Physical models of a radial feeder.

Everything in this module works in per-unit on the scenario's bases and is
side-effect free: each step function takes a state and returns a new one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    PowerFlowDiverged,
    TopologyError,
    UnderVoltageError,
)

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    return a - TWO_PI * np.ceil((a - math.pi) / TWO_PI)


def _wrap(a: float) -> float:
    return a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)


# ---------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "PQ"
    v_nominal: float = 1.0

    def __post_init__(self):
        if self.kind not in ("slack", "PQ"):
            raise ConfigurationError(f"unknown bus kind {self.kind!r}", key=f"buses.{self.id}.kind")


@dataclass(frozen=True)
class LineSegment:
    from_bus: int
    to_bus: int
    r: float
    x: float

    def __post_init__(self):
        if self.r < 0 or self.x < 0:
            raise ConfigurationError(
                f"line {self.from_bus}-{self.to_bus} has negative impedance")

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


class Feeder:
    """Radial network: buses with ids 1..N and a tree of series-RX lines.

    The constructor validates the topology and precomputes a breadth-first
    ordering from the slack bus, which is all the sweep solver needs.
    """

    def __init__(self, buses: Sequence[Bus], lines: Sequence[LineSegment]):
        self.buses = tuple(sorted(buses, key=lambda b: b.id))
        self.lines = tuple(lines)
        n = len(self.buses)
        if n == 0:
            raise TopologyError("feeder has no buses")
        ids = [b.id for b in self.buses]
        if ids != list(range(1, n + 1)):
            raise TopologyError(f"bus ids must be contiguous from 1, got {ids}")
        slacks = [b.id for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise TopologyError(f"expected exactly one slack bus, found {len(slacks)}")
        self.slack = slacks[0] - 1

        if len(self.lines) != n - 1:
            raise TopologyError(
                f"a radial feeder with {n} buses needs {n - 1} lines, got {len(self.lines)}")
        adj: list[list[tuple[int, complex]]] = [[] for _ in range(n)]
        for ln in self.lines:
            a, b = ln.from_bus - 1, ln.to_bus - 1
            if not (0 <= a < n and 0 <= b < n):
                raise TopologyError(f"line {ln.from_bus}-{ln.to_bus} references an unknown bus")
            if a == b:
                raise TopologyError(f"line {ln.from_bus}-{ln.to_bus} is a self-loop")
            adj[a].append((b, ln.z))
            adj[b].append((a, ln.z))

        parent = np.full(n, -1, dtype=int)
        z = np.zeros(n, dtype=complex)
        seen = np.zeros(n, dtype=bool)
        order = []
        queue = deque([self.slack])
        seen[self.slack] = True
        while queue:
            i = queue.popleft()
            order.append(i)
            for j, zij in adj[i]:
                if seen[j]:
                    continue
                seen[j] = True
                parent[j] = i
                z[j] = zij
                queue.append(j)
        if not seen.all():
            missing = [int(k) + 1 for k in np.flatnonzero(~seen)]
            raise TopologyError(f"buses {missing} are not connected to the slack bus")
        self.parent = parent
        self.z = z
        self.order = order

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def index(self, bus_id: int) -> int:
        if not 1 <= bus_id <= self.n_bus:
            raise TopologyError(f"unknown bus {bus_id}")
        return bus_id - 1


# ---------------------------------------------------------------------------
# loads


@dataclass(frozen=True)
class ExponentialLoad:
    p0: float = 0.0
    q0: float = 0.0
    v0: float = 1.0
    n_p: float = 1.0
    n_q: float = 1.0
    p_ref: float = 0.0
    q_ref: float = 0.0

    def __post_init__(self):
        if not self.v0 > 0:
            raise ConfigurationError("load reference voltage v0 must be positive")
        if not (0 <= self.n_p <= 3 and 0 <= self.n_q <= 3):
            raise ConfigurationError("load exponents must lie in [0, 3]")

    def with_reference(self, p_ref: float, q_ref: float) -> "ExponentialLoad":
        """Apply an IED reference: the nominal powers follow it."""
        return replace(self, p0=p_ref, q0=q_ref, p_ref=p_ref, q_ref=q_ref)


def load_power(load: ExponentialLoad, v: float) -> tuple[float, float]:
    """Active and reactive consumption of an exponential load at voltage ``v``."""
    if not v > 0:
        raise DomainError(f"load voltage must be positive, got {v}")
    ratio = v / load.v0
    return load.p0 * ratio ** load.n_p, load.q0 * ratio ** load.n_q


# ---------------------------------------------------------------------------
# grid-following inverter


@dataclass(frozen=True)
class PllState:
    kp: float = 100.0
    ki: float = 100.0
    theta_hat: float = 0.0
    omega_hat: float = TWO_PI * 50.0
    integ: float = 0.0
    rho: float = 0.0
    omega_nominal: float = TWO_PI * 50.0


@dataclass(frozen=True)
class InverterState:
    i_d: float = 0.0
    i_q: float = 0.0
    i_d_ref: float = 0.0
    i_q_ref: float = 0.0
    tau_i: float = 0.02
    i_max: float = 1.5
    pll: PllState = field(default_factory=PllState)

    def __post_init__(self):
        if not self.tau_i > 0:
            raise ConfigurationError("current-loop time constant tau_i must be positive")
        if not self.i_max > 0:
            raise ConfigurationError("current limit i_max must be positive")


def inverter_power(i_d: float, i_q: float, v_poc: float, rho: float) -> tuple[float, float]:
    """Power delivered at the point of connection by a dq current source.

    ``rho`` is the PLL angle error; at lock (rho = 0) this reduces to
    p = i_d * v and q = -i_q * v.
    """
    c, s = math.cos(rho), math.sin(rho)
    p = i_d * v_poc * c + i_q * v_poc * s
    q = -i_q * v_poc * c + i_d * v_poc * s
    return p, q


def limit_current(i_d: float, i_q: float, i_max: float) -> tuple[float, float]:
    """Scale (i_d, i_q) down proportionally so the magnitude is at most i_max."""
    mag = math.hypot(i_d, i_q)
    if mag <= i_max:
        return i_d, i_q
    k = i_max / mag
    return i_d * k, i_q * k


def current_refs_from_power(p_ref: float, q_ref: float, v_poc: float,
                            i_max: float = math.inf, v_min: float = 0.1) -> tuple[float, float]:
    if v_poc < v_min:
        raise UnderVoltageError(
            f"POC voltage {v_poc:.4g} pu below {v_min} pu; refusing current references")
    return limit_current(p_ref / v_poc, -q_ref / v_poc, i_max)


def current_loop_step(state: InverterState, dt: float) -> InverterState:
    """One explicit-Euler step of the closed current loop (first-order lag)."""
    if not 0 < dt <= state.tau_i / 2:
        raise ConfigurationError(
            f"dt={dt} outside (0, tau_i/2] for tau_i={state.tau_i}")
    a = dt / state.tau_i
    i_d = state.i_d + a * (state.i_d_ref - state.i_d)
    i_q = state.i_q + a * (state.i_q_ref - state.i_q)
    i_d, i_q = limit_current(i_d, i_q, state.i_max)
    return replace(state, i_d=i_d, i_q=i_q)


def pll_step(state: PllState, theta_poc: float, dt: float) -> PllState:
    """Advance a synchronous-reference-frame PLL by one step.

    Angles are expressed in a frame rotating at ``omega_nominal``, so a grid
    running exactly at nominal frequency has a constant ``theta_poc``.
    """
    err = _wrap(theta_poc - state.theta_hat)
    integ = state.integ + state.ki * err * dt
    omega_hat = state.omega_nominal + state.kp * err + integ
    theta_hat = _wrap(state.theta_hat + (omega_hat - state.omega_nominal) * dt)
    rho = _wrap(theta_hat - theta_poc)
    return replace(state, theta_hat=theta_hat, omega_hat=omega_hat, integ=integ, rho=rho)


# ---------------------------------------------------------------------------
# series line


def line_voltage_drop(v_from: complex, i: complex, r: float, x: float) -> complex:
    return v_from - complex(r, x) * i


# ---------------------------------------------------------------------------
# power flow

Source = Union[InverterState, tuple]


@dataclass
class PowerFlowSolution:
    voltage: np.ndarray          # complex pu, indexed by bus id - 1
    p_inj: np.ndarray            # net injection into the network, pu
    q_inj: np.ndarray
    iterations: int
    converged: bool
    slack_power: complex = 0j    # supplied by the slack (or upstream EMF)
    losses: complex = 0j
    branch_current: np.ndarray | None = None

    @property
    def vm(self) -> np.ndarray:
        return np.abs(self.voltage)

    @property
    def va(self) -> np.ndarray:
        return np.angle(self.voltage)


def _injections(n, vm, loads, sources):
    s = np.zeros(n, dtype=complex)
    for i, load in loads:
        p, q = load_power(load, vm[i])
        s[i] -= complex(p, q)
    for i, src in sources:
        if isinstance(src, InverterState):
            p, q = inverter_power(src.i_d, src.i_q, vm[i], src.pll.rho)
        else:
            p, q = src
        s[i] += complex(p, q)
    return s


def _branch_currents(feeder, v, s):
    # j[i]: current flowing from parent(i) into i; j[slack]: total feeder draw
    j = -np.conj(s / v)
    parent = feeder.parent
    for i in reversed(feeder.order[1:]):
        j[parent[i]] += j[i]
    return j


def solve_power_flow(feeder: Feeder, slack_voltage: complex,
                     loads: Iterable[tuple[int, ExponentialLoad]] = (),
                     sources: Iterable[tuple[int, Source]] = (),
                     source_impedance: complex = 0j,
                     tol: float = 1e-8, max_iter: int = 50,
                     v_init: np.ndarray | None = None) -> PowerFlowSolution:
    """Backward/forward sweep on a radial feeder.

    ``loads`` and ``sources`` are ``(bus_id, device)`` pairs.  A source is an
    :class:`InverterState` (evaluated through its dq currents at each iterate)
    or a constant ``(p, q)`` tuple.  With a nonzero ``source_impedance`` the
    slack voltage is the EMF of an upstream Thevenin source feeding the slack
    bus, so the head voltage itself responds to feeder loading.
    """
    slack_voltage = complex(slack_voltage)
    if not abs(slack_voltage) > 0:
        raise DomainError("slack voltage magnitude must be positive")
    n = feeder.n_bus
    loads = [(feeder.index(b), d) for b, d in loads]
    sources = [(feeder.index(b), d) for b, d in sources]
    order, parent, z = feeder.order, feeder.parent, feeder.z
    slack = feeder.slack
    zs = complex(source_impedance)

    if v_init is None:
        v = np.full(n, slack_voltage, dtype=complex)
    else:
        v = np.array(v_init, dtype=complex)
    converged = False
    it = 0
    with np.errstate(all="ignore"):
        while it < max_iter:
            it += 1
            try:
                s = _injections(n, np.abs(v), loads, sources)
            except DomainError:
                break
            j = _branch_currents(feeder, v, s)
            v_new = np.empty_like(v)
            v_new[slack] = slack_voltage - zs * j[slack]
            for i in order[1:]:
                v_new[i] = v_new[parent[i]] - z[i] * j[i]
            dv = np.max(np.abs(v_new - v))
            v = v_new
            if not np.all(np.isfinite(v)):
                break
            if dv < tol:
                converged = True
                break

    vm = np.abs(v)
    if converged:
        s = _injections(n, vm, loads, sources)
        j = _branch_currents(feeder, v, s)
        branch = np.arange(n) != slack
        losses = np.sum(np.abs(j[branch]) ** 2 * z[branch]) + abs(j[slack]) ** 2 * zs
        slack_power = slack_voltage * np.conj(j[slack])
    else:
        s = np.full(n, np.nan + 0j)
        j = None
        losses = complex("nan")
        slack_power = complex("nan")
    sol = PowerFlowSolution(voltage=v, p_inj=s.real.copy(), q_inj=s.imag.copy(),
                            iterations=it, converged=converged, slack_power=complex(slack_power),
                            losses=complex(losses), branch_current=j)
    if not converged:
        raise PowerFlowDiverged(f"power flow did not converge in {it} iterations", solution=sol)
    return sol


# ---------------------------------------------------------------------------
# aggregate frequency


@dataclass(frozen=True)
class FrequencyState:
    f_sys: float
    f_node: np.ndarray
    t_f: float = 2.0
    k_f: float = 0.5
    tau_pll: float = 0.1
    f_nominal: float = 50.0

    @classmethod
    def nominal(cls, n_bus: int, f_nominal: float = 50.0, **kw) -> "FrequencyState":
        return cls(f_sys=f_nominal, f_node=np.full(n_bus, float(f_nominal)),
                   f_nominal=f_nominal, **kw)


def frequency_step(state: FrequencyState, imbalance: float, dt: float) -> FrequencyState:
    """First-order system-frequency response plus per-node measurement lag.

    ``imbalance`` is net demand minus generation in pu; a positive value
    pulls frequency below nominal by ``k_f`` Hz per pu in steady state.
    """
    if not dt > 0:
        raise ConfigurationError("frequency step dt must be positive")
    f_sys = state.f_sys + dt / state.t_f * (state.f_nominal - state.k_f * imbalance - state.f_sys)
    f_node = state.f_node + dt / state.tau_pll * (f_sys - state.f_node)
    return replace(state, f_sys=f_sys, f_node=f_node)
