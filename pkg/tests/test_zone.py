import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besfem import scenario, walls
from besfem.model import EnvelopePart, HeatGain, Layer, Material, WallConstruction, ZoneConfig
from besfem.zone import (
    HourInputs,
    ZoneError,
    ZoneInputs,
    ZoneIntegrator,
    ZoneNetwork,
    ZoneState,
    build_network,
    coupling_coefficient,
    simulate_zone,
    solve_x_node,
    zone_step,
)

from oracles import rk4_zone


def bare_network(L_xa=40.0, L_v=0.0, C_a=1e5, branches=(), parts=()):
    return ZoneNetwork(L_xa, L_v, C_a, walls.BranchNetwork(tuple(branches) or ((0, 0), (0, 0))), tuple(parts))


def constant_inputs(net, N, T_b, T_y, gains=()):
    return ZoneInputs(np.arange(N), np.full(N, T_b), np.full((N, len(net.parts)), T_y), gains)


def test_coupling_coefficient():
    assert coupling_coefficient(8.64, 3.0, 5.5) == pytest.approx(40.06, abs=5e-3)
    assert coupling_coefficient(2.0, 4.0, 4.0) == pytest.approx(2 * 2.0 * 4.0)
    assert coupling_coefficient(8.64, 1e-12, 5.5) < 1e-10


def test_x_node_balances():
    net = bare_network()
    assert solve_x_node(net, 20.0, [], [], []) == 20.0
    assert solve_x_node(net, 20.0, [], [], [], phi_r=100.0) == pytest.approx(22.5)


def test_x_node_equilibrium(default_network):
    net = default_network
    P = len(net.parts)
    hist = [rf.history_gain * 0.0 for _, rf in net.parts]
    assert solve_x_node(net, 20.0, [20.0, 20.0], [20.0] * P, hist) == pytest.approx(20.0, abs=1e-12)


def test_isolated_x_node_rejected():
    with pytest.raises(ZoneError, match="isolated x-node"):
        solve_x_node(bare_network(L_xa=0.0), 20.0, [], [], [])


def test_isolated_air_node_ramp():
    net = bare_network()
    inputs = constant_inputs(net, 1, 0.0, 0.0, gains=[HeatGain(np.array([100.0]), 1.0)])
    out = simulate_zone(net, 10.0, inputs)
    assert out.T_a[0] - 10.0 == pytest.approx(3.6, abs=1e-12)


def test_ventilation_only_matches_rc_decay():
    net = bare_network(L_v=20.0, C_a=1e5)
    out = simulate_zone(net, 30.0, constant_inputs(net, 10, 5.0, 0.0))
    t = 3600.0 * np.arange(1, 11)
    np.testing.assert_allclose(out.T_a, 5.0 + 25.0 * np.exp(-20.0 * t / 1e5), rtol=0, atol=1e-12)


def test_steady_state(default_network):
    out = simulate_zone(default_network, 20.0, constant_inputs(default_network, 1000, 7.5, 7.5))
    assert abs(out.T_a[-1] - 7.5) < 1e-6


def test_equilibrium_stays_constant(default_network):
    out = simulate_zone(default_network, 4.0, constant_inputs(default_network, 48, 4.0, 4.0))
    np.testing.assert_allclose(out.T_a, 4.0, atol=1e-12)


def test_adiabatic_box_without_gains_is_frozen(default_cfg):
    z = default_cfg.zone
    parts = tuple(EnvelopePart(p.id, p.area, p.construction, p.tilt, p.azimuth, "adiabatic") for p in z.envelope)
    cfg = ZoneConfig(z.air_volume, z.total_surface_area, parts, z.surface_coeffs)
    net = build_network(cfg)
    assert np.all(net.cross_conductances == 0)
    out = simulate_zone(net, 12.0, constant_inputs(net, 200, -10.0, 40.0))
    np.testing.assert_allclose(out.T_a, 12.0, atol=1e-12)


def test_matches_fine_step_oracle(default_cfg, default_network, month_weather):
    w = month_weather.head(24)
    inputs = scenario.zone_inputs(default_cfg, w)
    out = simulate_zone(default_network, float(w.T_e[0]), inputs)
    ref = rk4_zone(default_network, float(w.T_e[0]), inputs.T_b, inputs.T_y)
    assert np.max(np.abs(out.T_a - ref)) < 1e-3


def test_constant_hold_matches_its_oracle(default_cfg, default_network, month_weather):
    w = month_weather.head(12)
    inputs = scenario.zone_inputs(default_cfg, w)
    out = simulate_zone(default_network, float(w.T_e[0]), inputs, history_hold="constant")
    ref = rk4_zone(default_network, float(w.T_e[0]), inputs.T_b, inputs.T_y, substep=2.0, hold="constant")
    assert np.max(np.abs(out.T_a - ref)) < 1e-3


def _inputs_from(seed, net, N):
    g = np.random.default_rng(seed)
    return ZoneInputs(np.arange(N), g.normal(0, 5, N), g.normal(0, 5, (N, len(net.parts))),
                      [HeatGain(g.uniform(0, 50, N), 0.5)])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_superposition(default_network, s1, s2):
    net = default_network
    N = 48
    a, b = _inputs_from(s1, net, N), _inputs_from(s2, net, N)
    both = ZoneInputs(a.hours, a.T_b + b.T_b, a.T_y + b.T_y,
                      [HeatGain(a.gains[0].series + b.gains[0].series, 0.5)])
    ya = simulate_zone(net, 0.0, a).T_a
    yb = simulate_zone(net, 0.0, b).T_a
    yab = simulate_zone(net, 0.0, both).T_a
    np.testing.assert_allclose(yab, ya + yb, atol=1e-9)


def test_time_invariance(default_network, rng):
    net = default_network
    N, k = 60, 5
    # both runs start from rest so the initial histories agree
    T_b = np.concatenate([np.zeros(k + 1), rng.normal(0, 3, N - k - 1)])
    T_y = np.concatenate([np.zeros((k + 1, len(net.parts))), rng.normal(0, 3, (N - k - 1, len(net.parts)))])
    early = simulate_zone(net, 0.0, ZoneInputs(np.arange(N - k), T_b[k:], T_y[k:])).T_a
    late = simulate_zone(net, 0.0, ZoneInputs(np.arange(N), T_b, T_y)).T_a
    np.testing.assert_array_equal(late[:k], 0.0)
    np.testing.assert_allclose(late[k:], early, atol=1e-12)


def test_gain_split_against_network():
    # one branch-free zone: air node plus x-node tied to air and a fixed wall
    wall = EnvelopePart("w", 1.0, WallConstruction((Layer(Material("f", 1.0, 1e-30, 1e-30), 0.1),)))
    rf = walls.ResponseFactors(L_yx=10.0)
    net = bare_network(L_xa=30.0, C_a=1e4, parts=[(wall, rf)])
    N = 200
    for f in (1.0, 0.0):
        out = simulate_zone(net, 0.0, constant_inputs(net, N, 0.0, 0.0, [HeatGain(np.full(N, 60.0), f)]))
        # f = 1: air -> x (30) -> wall (10) in series; f = 0: x-node feeds wall directly
        T_a = 60.0 * (1 / 30.0 + 1 / 10.0) if f == 1.0 else 60.0 / 10.0
        T_x = 60.0 / 10.0
        assert out.T_a[-1] == pytest.approx(T_a, rel=1e-9)
        assert out.T_x[-1] == pytest.approx(T_x, rel=1e-9)


def test_energy_bookkeeping(default_cfg, default_network, month_weather):
    # stored energy change equals boundary flows over a window in periodic regime
    w = month_weather.head(240)
    inputs = scenario.zone_inputs(default_cfg, w)
    out = simulate_zone(default_network, float(w.T_e[0]), inputs)
    win = slice(120, 240)
    stored = out.stored[win].sum()
    delivered = out.energy_in[win].sum()
    assert stored == pytest.approx(delivered, rel=1e-6, abs=1e-6 * np.abs(out.energy_in[win]).sum())


def test_gaps_rejected(default_network):
    net = default_network
    inputs = ZoneInputs(np.array([0, 1, 3, 4]), np.zeros(4), np.zeros((4, len(net.parts))))
    with pytest.raises(ZoneError, match=r"missing hours \[2\]"):
        simulate_zone(net, 0.0, inputs)


def test_warmup_discard(default_network):
    out = simulate_zone(default_network, 0.0, constant_inputs(default_network, 10, 1.0, 1.0), warmup=4)
    assert len(out.T_a) == 6 and out.hour[0] == 5


def test_heating_setpoint_holds_air(default_network):
    net = default_network
    integ = ZoneIntegrator(net)
    state = integ.initial_state(0.0, np.zeros(len(net.parts)))
    inp = HourInputs(0.0, np.zeros(len(net.parts)))
    for _ in range(24):
        state, res = integ.step(state, inp, setpoints=(18.0, None))
        assert res.T_a == pytest.approx(18.0, abs=1e-9)
        assert res.P_heat > 0


def test_zone_step_matches_integrator(default_network):
    net = default_network
    integ = ZoneIntegrator(net)
    state = integ.initial_state(5.0, np.full(len(net.parts), 5.0))
    inp = HourInputs(2.0, np.full(len(net.parts), 8.0), 10.0, 5.0)
    s1, r1 = zone_step(net, state, inp)
    s2, r2 = integ.step(state, inp)
    assert r1.T_a == r2.T_a and r1.T_x == r2.T_x


def test_initial_state_is_steady(default_network):
    integ = ZoneIntegrator(default_network)
    st_ = integ.initial_state(3.0, np.full(len(default_network.parts), 3.0))
    assert isinstance(st_, ZoneState)
    assert st_.T_a == 3.0 and np.all(st_.T_c == 3.0)
    assert all(h.dP1 == 0.0 for h in st_.history)


def test_bad_hold_rejected(default_network):
    with pytest.raises(ValueError):
        ZoneIntegrator(default_network, history_hold="cubic")
