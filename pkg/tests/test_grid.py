import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twingrid import grid
from twingrid.errors import (ConfigurationError, DomainError, PowerFlowDiverged, TopologyError,
                             UnderVoltageError)

from oracles import nodal_power_flow, two_bus_quadratic

finite = st.floats(-50, 50, allow_nan=False)


def chain(n, r=0.01, x=0.02):
    buses = [grid.Bus(1, "slack")] + [grid.Bus(i) for i in range(2, n + 1)]
    lines = [grid.LineSegment(i, i + 1, r, x) for i in range(1, n)]
    return grid.Feeder(buses, lines)


def random_radial(rng, n):
    buses = [grid.Bus(1, "slack")] + [grid.Bus(i) for i in range(2, n + 1)]
    lines = [grid.LineSegment(int(rng.integers(1, k)), k, rng.uniform(0.002, 0.02), rng.uniform(0.002, 0.02))
             for k in range(2, n + 1)]
    return grid.Feeder(buses, lines)


# -- load model ---------------------------------------------------------------

@pytest.mark.parametrize("n_p, v, expected", [(2, 1.0, 1.0), (2, 0.95, 0.9025), (1, 1.1, 1.1)])
def test_load_power_examples(n_p, v, expected):
    p, _ = grid.load_power(grid.ExponentialLoad(p0=1.0, v0=1.0, n_p=n_p), v)
    assert p == expected


def test_load_power_rejects_collapsed_voltage():
    with pytest.raises(DomainError):
        grid.load_power(grid.ExponentialLoad(p0=1.0), 0.0)


def test_load_exponent_range():
    grid.ExponentialLoad(n_p=0, n_q=3)
    with pytest.raises(ConfigurationError):
        grid.ExponentialLoad(n_p=3.5)


@given(st.floats(0.01, 3), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.01, 5))
def test_load_power_monotone_in_voltage(n_p, v1, dv, p0):
    load = grid.ExponentialLoad(p0=p0, n_p=n_p)
    v2 = v1 + dv
    assert grid.load_power(load, v2)[0] > grid.load_power(load, v1)[0]


def test_with_reference_sets_nominal_powers():
    ld = grid.ExponentialLoad(n_p=1.5).with_reference(0.4, 0.1)
    assert (ld.p0, ld.q0, ld.p_ref, ld.q_ref) == (0.4, 0.1, 0.4, 0.1)


# -- inverter -------------------------------------------------------------------

@pytest.mark.parametrize("args, expected", [
    ((10, 0, 1, 0), (10, 0)),
    ((0, 5, 1, 0), (0, -5)),
    ((10, 0, 1, math.pi / 2), (0, 10)),
])
def test_inverter_power_examples(args, expected):
    p, q = grid.inverter_power(*args)
    assert p == pytest.approx(expected[0], abs=1e-12)
    assert q == pytest.approx(expected[1], abs=1e-12)


@given(finite, finite, st.floats(0, 2), st.floats(-10, 10))
def test_inverter_power_circle(i_d, i_q, v, rho):
    p, q = grid.inverter_power(i_d, i_q, v, rho)
    lhs = p * p + q * q
    rhs = (i_d * i_d + i_q * i_q) * v * v
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, rhs)


@pytest.mark.parametrize("args, expected", [
    ((1, 0, 1), (1, 0)),
    ((0, 1, 1), (0, -1)),
])
def test_current_refs_examples(args, expected):
    assert grid.current_refs_from_power(*args) == expected


def test_current_refs_limited_proportionally():
    # (3, -4) has magnitude 5, so the limiter scales it by 2.5 / 5
    i_d, i_q = grid.current_refs_from_power(3, 4, 1, i_max=2.5)
    assert (i_d, i_q) == pytest.approx((1.5, -2.0), abs=1e-15)
    assert math.hypot(i_d, i_q) == pytest.approx(2.5, abs=1e-15)


def test_current_refs_refused_below_v_min():
    with pytest.raises(UnderVoltageError):
        grid.current_refs_from_power(1, 0, 0.05)


@given(finite, finite, st.floats(0.01, 10))
def test_limiter_never_grows_and_keeps_ratio(i_d, i_q, i_max):
    a, b = grid.limit_current(i_d, i_q, i_max)
    assert math.hypot(a, b) <= max(i_max, math.hypot(i_d, i_q)) * (1 + 1e-12)
    assert math.hypot(a, b) <= math.hypot(i_d, i_q) * (1 + 1e-12)
    assert a * i_q == pytest.approx(b * i_d, abs=1e-9)


def test_current_loop_single_step():
    s = grid.InverterState(i_d=0.0, i_d_ref=1.0, tau_i=0.02)
    assert grid.current_loop_step(s, 0.01).i_d == 0.5


def test_current_loop_fixed_point():
    s = grid.InverterState(i_d=1.0, i_d_ref=1.0)
    assert grid.current_loop_step(s, 0.003).i_d == 1.0


def test_current_loop_settles_within_exponential_bound():
    s = grid.InverterState(i_d=0.0, i_d_ref=1.0, tau_i=0.02)
    dt = 0.001
    for _ in range(int(round(10 * 0.02 / dt))):
        s = grid.current_loop_step(s, dt)
    assert abs(s.i_d - 1.0) < 0.01 * 1.0


def test_current_loop_rejects_unstable_dt():
    with pytest.raises(ConfigurationError):
        grid.current_loop_step(grid.InverterState(tau_i=0.02), 0.011)
    with pytest.raises(ConfigurationError):
        grid.current_loop_step(grid.InverterState(tau_i=0.02), 0.0)


@given(finite, finite, finite, finite, st.floats(0.1, 3))
def test_current_loop_respects_limit(i_d, i_q, rd, rq, i_max):
    s = grid.InverterState(i_d=i_d, i_q=i_q, i_d_ref=rd, i_q_ref=rq, i_max=i_max)
    out = grid.current_loop_step(s, 0.01)
    assert math.hypot(out.i_d, out.i_q) <= i_max * (1 + 1e-12)


# -- PLL ------------------------------------------------------------------------

def test_pll_stays_locked_on_nominal_ramp():
    st_ = grid.PllState()
    for _ in range(1000):
        st_ = grid.pll_step(st_, 0.0, 0.001)
        assert st_.rho == 0.0


def test_pll_angle_step_settles():
    kp = 100.0
    st_ = grid.PllState(kp=kp, ki=100.0)
    dt = 1e-4
    for _ in range(int(5 / kp / dt)):
        st_ = grid.pll_step(st_, 0.1, dt)
    assert abs(st_.rho) < 0.01 * 0.1


def test_pll_type1_offset_proportional_to_frequency_error():
    # with ki = 0 the loop tracks a frequency offset dw with a constant
    # angle error dw / kp
    kp, dt = 50.0, 1e-4
    offsets = []
    for dw in (1.0, 2.0):
        st_ = grid.PllState(kp=kp, ki=0.0)
        theta = 0.0
        for _ in range(20000):
            theta = grid._wrap(theta + dw * dt)
            st_ = grid.pll_step(st_, theta, dt)
        offsets.append(-st_.rho)
    assert offsets[0] == pytest.approx(1.0 / kp, rel=1e-2)
    assert offsets[1] / offsets[0] == pytest.approx(2.0, rel=1e-6)


@given(st.floats(-100, 100))
def test_wrap_range(a):
    w = grid.wrap_angle(a)
    assert -math.pi < w <= math.pi + 1e-12
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


# -- line model -------------------------------------------------------------------

def test_line_voltage_drop_examples():
    assert grid.line_voltage_drop(1 + 0j, 0j, 0.01, 0.02) == 1 + 0j
    assert grid.line_voltage_drop(1 + 0j, 1 + 0j, 0.01, 0.0) == pytest.approx(0.99)
    assert grid.line_voltage_drop(1 + 0j, 1 + 0j, 0.01, 0.02) == pytest.approx(0.99 - 0.02j)


# -- topology -----------------------------------------------------------------

def test_feeder_rejects_mesh_and_bad_ids():
    b = [grid.Bus(1, "slack"), grid.Bus(2), grid.Bus(3)]
    with pytest.raises(TopologyError):
        grid.Feeder(b, [grid.LineSegment(1, 2, 0.01, 0.01), grid.LineSegment(2, 3, 0.01, 0.01),
                        grid.LineSegment(1, 3, 0.01, 0.01)])
    with pytest.raises(TopologyError):
        grid.Feeder([grid.Bus(1, "slack"), grid.Bus(3)], [grid.LineSegment(1, 3, 0.01, 0.01)])
    with pytest.raises(TopologyError):
        grid.Feeder([grid.Bus(1), grid.Bus(2)], [grid.LineSegment(1, 2, 0.01, 0.01)])


# -- power flow ---------------------------------------------------------------

def test_flat_no_load_solution():
    sol = grid.solve_power_flow(chain(4), 1.02 + 0j)
    assert sol.iterations == 1
    assert np.all(sol.voltage == 1.02)


def test_two_bus_matches_oracles():
    f = chain(2)
    sol = grid.solve_power_flow(f, 1.0, loads=[(2, grid.ExponentialLoad(0.5, 0.2, n_p=0, n_q=0))])
    v = nodal_power_flow(2, [(0, 1, 0.01, 0.02)], 1 + 0j, [0, -(0.5 + 0.2j)])
    assert np.max(np.abs(sol.voltage - v)) < 1e-8
    assert abs(sol.vm[1] - two_bus_quadratic(0.5, 0.2, 0.01, 0.02)) < 1e-8
    # frozen value of the closed-form root
    assert sol.vm[1] == pytest.approx(0.9908846148516472, abs=1e-8)


def test_three_bus_reverse_flow_raises_voltage():
    f = chain(3)
    sol = grid.solve_power_flow(f, 1.0, loads=[(2, grid.ExponentialLoad(0.1, 0.02, n_p=0, n_q=0))],
                                sources=[(3, (0.3, 0.0))])
    v = nodal_power_flow(3, [(0, 1, 0.01, 0.02), (1, 2, 0.01, 0.02)], 1 + 0j,
                         [0, -(0.1 + 0.02j), 0.3])
    assert np.max(np.abs(sol.voltage - v)) < 1e-8
    assert sol.vm[2] > sol.vm[1]


def test_voltage_dependent_loads_match_oracle(rng):
    lines = [(0, 1, 0.02, 0.03), (1, 2, 0.01, 0.015)]
    f = chain(3)
    f = grid.Feeder([grid.Bus(1, "slack"), grid.Bus(2), grid.Bus(3)],
                    [grid.LineSegment(a + 1, b + 1, r, x) for a, b, r, x in lines])
    for _ in range(5):
        npw, nqw = rng.uniform(0, 3, size=2)
        p0, q0 = rng.uniform(0.05, 0.4), rng.uniform(0.0, 0.2)
        sol = grid.solve_power_flow(f, 1.0, loads=[(3, grid.ExponentialLoad(p0, q0, n_p=npw, n_q=nqw))])
        v = nodal_power_flow(3, lines, 1 + 0j, [0, 0, 0],
                             load_exponents=[(0, 0, 0, 0), (0, 0, 0, 0), (npw, nqw, p0, q0)])
        assert np.max(np.abs(sol.voltage - v)) < 1e-8


def test_power_balance_random_feeders(rng):
    for _ in range(100):
        n = int(rng.integers(2, 21))
        f = random_radial(rng, n)
        loads = [(b, grid.ExponentialLoad(rng.uniform(0, 0.1), rng.uniform(0, 0.05),
                                          n_p=rng.uniform(0, 3), n_q=rng.uniform(0, 3)))
                 for b in range(2, n + 1) if rng.random() < 0.7]
        sources = [(b, (rng.uniform(0, 0.1), rng.uniform(-0.02, 0.02)))
                   for b in range(2, n + 1) if rng.random() < 0.3]
        sol = grid.solve_power_flow(f, 1.0, loads, sources)
        assert sol.converged
        assert abs(sol.slack_power + complex(sol.p_inj.sum(), sol.q_inj.sum()) - sol.losses) < 1e-6


def test_thevenin_source_drops_head_voltage():
    f = chain(2)
    ld = [(2, grid.ExponentialLoad(0.5, 0.2, n_p=0, n_q=0))]
    stiff = grid.solve_power_flow(f, 1.0, ld)
    weak = grid.solve_power_flow(f, 1.0, ld, source_impedance=0.01 + 0.04j)
    assert stiff.vm[0] == 1.0
    assert weak.vm[0] < 1.0
    assert abs(weak.slack_power + complex(weak.p_inj.sum(), weak.q_inj.sum()) - weak.losses) < 1e-9


def test_divergence_carries_last_iterate():
    f = chain(2, r=0.5, x=0.5)
    with pytest.raises(PowerFlowDiverged) as info:
        grid.solve_power_flow(f, 1.0, [(2, grid.ExponentialLoad(5.0, 5.0, n_p=0, n_q=0))], max_iter=20)
    assert info.value.solution is not None
    assert not info.value.solution.converged


def test_power_flow_is_deterministic():
    f = chain(5)
    ld = [(3, grid.ExponentialLoad(0.2, 0.1, n_p=1.2)), (5, grid.ExponentialLoad(0.1, 0.03, n_q=2))]
    a = grid.solve_power_flow(f, 1.0, ld, [(4, (0.05, 0.0))])
    b = grid.solve_power_flow(f, 1.0, ld, [(4, (0.05, 0.0))])
    assert a.voltage.tobytes() == b.voltage.tobytes()


# -- frequency ----------------------------------------------------------------

def test_frequency_equilibrium_and_steady_offset():
    fs = grid.FrequencyState.nominal(3)
    for _ in range(int(10 * fs.t_f / 0.01)):
        fs = grid.frequency_step(fs, 0.0, 0.01)
    assert abs(fs.f_sys - 50.0) < 1e-9
    for _ in range(int(20 * fs.t_f / 0.01)):
        fs = grid.frequency_step(fs, 0.1, 0.01)
    assert fs.f_sys == pytest.approx(50.0 - 0.05, abs=1e-6)


def test_node_frequency_first_order_lag():
    # freeze f_sys with a huge t_f so the node filter sees a pure step
    tau, dt = 0.1, 0.001
    fs = grid.FrequencyState(f_sys=50.5, f_node=np.array([50.0]), t_f=1e12, tau_pll=tau,
                             f_nominal=50.5)
    t = 0.0
    for _ in range(300):
        fs = grid.frequency_step(fs, 0.0, dt)
        t += dt
    # explicit Euler of a first-order lag: (1 - dt/tau)^k, close to exp(-t/tau)
    exact = 50.5 - 0.5 * (1 - dt / tau) ** 300
    assert fs.f_node[0] == pytest.approx(exact, abs=1e-12)
    assert fs.f_node[0] == pytest.approx(50.5 - 0.5 * math.exp(-t / tau), abs=2e-3)
