import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besfem import walls
from besfem.model import EnvelopePart, Glazing, Layer, Material, WallConstruction
from besfem.validation import default_corpus, stability_corpus

W24 = walls.OMEGA_24
W1 = walls.OMEGA_1
H_E = 25.0

# 40-digit complex evaluation of the slab formulas, rounded to 17 digits
CONCRETE_24H = np.array([
    [0.95360416988022021 + 0.5261543674466131j, 0.059443085836577484 + 0.010541751347433166j],
    [-3.0910029349795249 + 17.429623098617269j, 0.95360416988022021 + 0.5261543674466131j],
])
# 0.1 m concrete (interior) + 0.05 m mineral wool, 1 h period
TWO_LAYER_1H = np.array([
    [-7.9711704660247914 - 15.046240559462466j, -12.209289259713529 - 4.7795750392443613j],
    [415.30246081638912 - 1359.5330554543943j, -440.37824233984088 - 1002.1020274724023j],
])
# default box face (1.44 m2, 0.12 m concrete, exterior film 1/25), 24 h period
BOX_FACE_24H = walls.AdmittanceTriple(
    Y_x=3.0178635552631208 + 17.074776508897055j,
    Y_y=1.6550767365320445 + 7.2282170933921521j,
    Y_xy=13.356593753303012 - 4.3233832731038102j,
    omega=W24,
)


materials = st.builds(
    Material,
    name=st.just("m"),
    conductivity=st.floats(0.03, 3.0),
    density=st.floats(20.0, 2600.0),
    specific_heat=st.floats(500.0, 2000.0),
)
layers = st.builds(Layer, material=materials, thickness=st.floats(0.01, 0.2))


def test_zero_frequency_limit(concrete):
    M = walls.layer_matrix(Layer(concrete, 0.12), 0.0)
    np.testing.assert_array_equal(M, [[1, 0.06], [0, 1]])


def test_wall_zero_frequency_adds_resistances(concrete, wool):
    wall = WallConstruction((Layer(concrete, 0.1), Layer(wool, 0.05)))
    np.testing.assert_allclose(walls.wall_matrix(wall, 0.0), [[1, 0.05 + 1.25], [0, 1]], atol=1e-15)


def test_composition(concrete):
    half = walls.layer_matrix(Layer(concrete, 0.06), W24)
    full = walls.layer_matrix(Layer(concrete, 0.12), W24)
    np.testing.assert_allclose(half @ half, full, rtol=0, atol=1e-12)


def test_single_layer_against_oracle():
    m = Material("concrete", 2.0, 2400.0, 840.0)
    np.testing.assert_allclose(walls.layer_matrix(Layer(m, 0.12), W24), CONCRETE_24H, rtol=1e-13)


def test_two_layer_wall_against_oracle(concrete, wool):
    wall = WallConstruction((Layer(concrete, 0.1), Layer(wool, 0.05)))
    np.testing.assert_allclose(walls.wall_matrix(wall, W1), TWO_LAYER_1H, rtol=1e-12)


def test_single_layer_wall_equals_layer(concrete):
    lay = Layer(concrete, 0.2)
    np.testing.assert_array_equal(walls.wall_matrix(WallConstruction((lay,)), W1),
                                  walls.layer_matrix(lay, W1))


def test_negative_frequency_rejected(concrete):
    with pytest.raises(ValueError):
        walls.layer_matrix(Layer(concrete, 0.1), -1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(layers, min_size=1, max_size=4), st.floats(1.0, 24.0))
def test_determinant_is_one(wall_layers, period_h):
    M = walls.wall_matrix(WallConstruction(tuple(wall_layers)), 2 * np.pi / (period_h * 3600))
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    scale = max(abs(M[0, 0] * M[1, 1]), 1.0)
    assert abs(det - 1.0) / scale <= 1e-10


def test_box_face_admittances(box_wall):
    a = walls.admittances(box_wall, W24, H_E)
    for name in ("Y_x", "Y_y", "Y_xy"):
        assert getattr(a, name) == pytest.approx(getattr(BOX_FACE_24H, name), rel=1e-13)


def test_interior_flux_decomposition(box_wall):
    # with T_y = 0 the interior gain is -(Y_x + Y_xy) T_x
    M = walls.wall_matrix(box_wall.construction, W24, H_E)
    T_x = 1.7
    q_y = T_x / M[0, 1]
    q_x = M[1, 1] * q_y
    a = walls.admittances(box_wall, W24, H_E)
    assert -box_wall.area * q_x == pytest.approx(-(a.Y_x + a.Y_xy) * T_x, rel=1e-13)


def test_massless_wall_is_resistive():
    light = Material("foil", 0.5, 1e-30, 1e-30)
    part = EnvelopePart("w", 2.0, WallConstruction((Layer(light, 0.1),)))
    for w in (W24, W1):
        a = walls.admittances(part, w)
        assert a.Y_xy == pytest.approx(2.0 / 0.2, rel=1e-12)
        assert abs(a.Y_x) < 1e-12


def test_low_frequency_limits(box_wall):
    a = walls.admittances(box_wall, 1e-9, H_E)
    AU = box_wall.area * box_wall.u_value(H_E)
    assert a.Y_xy.real == pytest.approx(AU, rel=1e-6)
    assert abs(a.Y_x.real) < 1e-6 * AU
    # the imaginary parts are storage, i omega C, and vanish linearly
    C = box_wall.area * 2400 * 840 * 0.12
    assert abs(a.Y_x) < 1e-9 * C


def test_glazing_has_no_admittance():
    with pytest.raises(ValueError, match="glazing"):
        walls.admittances(EnvelopePart("g", 1.0, Glazing(1.4)), W24)


def test_single_material_phase_within_quadrant():
    for part in stability_corpus():
        if len(part.construction.layers) == 1:
            for a in walls.admittance_sweep(part, range(1, 25), H_E):
                assert 0.0 <= np.angle(a.Y_x) <= np.pi / 2


# -- response factors --------------------------------------------------------------

def test_default_wall_coefficients(box_wall):
    rf = walls.fit_response_factors(box_wall, H_E)
    expected = (2.010770486326103, 8.945207775497204, -0.41839832466585447, 0.31175627657713684, 0.0)
    np.testing.assert_allclose([rf.L_yx, rf.a1, rf.a2, rf.b1, rf.b2], expected, rtol=1e-6, atol=1e-9)


def test_numerator_independent_solve(box_wall):
    # complex least squares on G(1) and G(z24) for the fitted denominator
    rf = walls.fit_response_factors(box_wall, H_E)
    AU = box_wall.area * box_wall.u_value(H_E)
    Y24 = walls.admittances(box_wall, W24, H_E).Y_xy
    rows, rhs = [], []
    for z, Y in ((1.0, AU), (np.exp(1j * W24 * 3600), Y24)):
        den = 1 - rf.b1 / z - rf.b2 / z**2
        rows.append([1.0, 1 / (z * den), 1 / (z**2 * den)])
        rhs.append(Y)
    A = np.array(rows, dtype=complex)
    A = np.vstack([A.real, A.imag])
    b = np.concatenate([np.real(rhs), np.imag(rhs)])
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    np.testing.assert_allclose(sol, [rf.L_yx, rf.a1, rf.a2], rtol=1e-9)


def test_fit_reproduces_dc_and_24h(box_wall):
    rf = walls.fit_response_factors(box_wall, H_E)
    AU = box_wall.area * box_wall.u_value(H_E)
    assert walls.steady_gain_residual(rf, AU) <= 1e-10
    assert rf.transfer(0.0) == pytest.approx(AU, rel=1e-12)
    assert rf.transfer(W24) == pytest.approx(walls.admittances(box_wall, W24, H_E).Y_xy, rel=1e-10)


def test_corpus_fits_satisfy_identity_and_stability():
    for part in stability_corpus():
        rf = walls.fit_response_factors(part, H_E)
        AU = part.area * part.u_value(H_E)
        assert walls.steady_gain_residual(rf, AU) <= 1e-10, part.id
        assert np.all(rf.pole_moduli() < 1.0), part.id


def test_massless_wall_fit_is_pure_conductance():
    light = Material("foil", 0.5, 1e-30, 1e-30)
    part = EnvelopePart("w", 2.0, WallConstruction((Layer(light, 0.1),)))
    rf = walls.fit_response_factors(part, 25.0)
    assert rf.L_yx == pytest.approx(2.0 / (0.2 + 0.04))
    assert rf.a1 == rf.a2 == rf.b1 == rf.b2 == 0.0


def test_glazing_fit_skips_solve():
    rf = walls.fit_response_factors(EnvelopePart("g", 3.0, Glazing(1.2)), H_E)
    assert rf.L_yx == pytest.approx(3.6, rel=1e-15)
    assert rf.a1 == rf.a2 == rf.b1 == rf.b2 == 0.0


def test_unstable_poles_are_reported():
    rf = walls.ResponseFactors(1.0, 0.1, 0.0, 1.5, -0.2)
    with pytest.raises(walls.UnstablePolesError) as exc:
        walls.check_stable(rf)
    assert max(exc.value.moduli) > 1.0


def test_interpolation_band_on_light_walls():
    # parts of the default corpus where a second-order model is adequate
    for part in default_corpus():
        if part.id not in ("aerated_0.1", "concrete_int_insulated_ext"):
            continue
        rf = walls.fit_response_factors(part, H_E)
        for p in (3, 6, 12):
            w = 2 * np.pi / (p * 3600)
            assert abs(rf.transfer(w) / walls.admittances(part, w, H_E).Y_xy - 1) < 0.05


# -- cross-flow recursion ----------------------------------------------------------

def test_glazing_cross_flow():
    rf = walls.fit_response_factors(EnvelopePart("g", 2.0, Glazing(1.4)), H_E)
    phi, _ = walls.cross_flow_step(rf, walls.CrossFlowState(), 5.0)
    assert phi == 5.0 * 2.0 * 1.4


def test_zero_input_stays_zero(box_wall):
    rf = walls.fit_response_factors(box_wall, H_E)
    state = walls.CrossFlowState()
    for _ in range(50):
        phi, state = walls.cross_flow_step(rf, state, 0.0)
        assert phi == 0.0


def test_step_response_reaches_u_value(box_wall):
    rf = walls.fit_response_factors(box_wall, H_E)
    state = walls.CrossFlowState()
    for _ in range(10_000):
        phi, state = walls.cross_flow_step(rf, state, 1.0)
    assert phi == pytest.approx(box_wall.area * box_wall.u_value(H_E), rel=1e-6)


def test_steady_history_is_a_fixed_point(box_wall):
    rf = walls.fit_response_factors(box_wall, H_E)
    state = walls.CrossFlowState.steady(rf, 3.0)
    phi, new = walls.cross_flow_step(rf, state, 3.0)
    assert phi == pytest.approx(3.0 * rf.steady_conductance, rel=1e-12)
    assert new == pytest.approx(state)


def test_recursion_matches_transfer_function(box_wall):
    # sinusoidal steady state of the recursion equals G(exp(i w dt))
    rf = walls.fit_response_factors(box_wall, H_E)
    w = 2 * np.pi / (8 * 3600)
    n = np.arange(2000)
    u = np.exp(1j * w * 3600 * n)
    dT1 = dT2 = dP1 = dP2 = 0j
    out = np.empty(len(n), dtype=complex)
    for i, x in enumerate(u):
        dP = rf.a1 * dT1 + rf.a2 * dT2 + rf.b1 * dP1 + rf.b2 * dP2
        out[i] = rf.L_yx * x + dP
        dT2, dT1, dP2, dP1 = dT1, x, dP1, dP
    assert out[-1] / u[-1] == pytest.approx(rf.transfer(w), rel=1e-10)


# -- branch network ---------------------------------------------------------------

def test_branch_round_trip():
    net = walls.BranchNetwork(((10.0, 1e6), (40.0, 5e4)))
    fit = walls.fit_branch_network(*net.admittance([W24, W1]))
    np.testing.assert_allclose(np.array(fit.branches), np.array(net.branches), rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(1e5, 1e7), st.floats(1.0, 500.0), st.floats(1e3, 5e4))
def test_branch_targets_reproduced(L1, C1, L2, C2):
    net = walls.BranchNetwork(((L1, C1), (L2, C2)))
    targets = net.admittance([W24, W1])
    fit = walls.fit_branch_network(*targets)
    np.testing.assert_allclose(fit.admittance([W24, W1]), targets, rtol=1e-8)


def test_default_box_branches(default_cfg):
    env = default_cfg.zone.envelope
    targets = (walls.zone_storage_admittance(env, H_E, W24), walls.zone_storage_admittance(env, H_E, W1))
    net = walls.fit_branch_network(*targets)
    np.testing.assert_allclose(net.admittance([W24, W1]), targets, rtol=1e-8)
    assert all(L > 0 and C > 0 for L, C in net.branches)


def test_zero_targets_give_empty_network():
    net = walls.fit_branch_network(0j, 0j)
    assert net.active == ()
    assert net.admittance(W24) == 0


def test_phase_outside_quadrant_rejected():
    with pytest.raises(walls.FitError, match="pi/2"):
        walls.fit_branch_network(-1 + 1j, 1 + 1j)


def test_branches_block_dc():
    net = walls.BranchNetwork(((10.0, 1e6), (40.0, 5e4)))
    Y = complex(net.admittance(1e-9))
    assert abs(Y.real) < 1e-6
    assert Y.imag == pytest.approx(1e-9 * (1e6 + 5e4), rel=1e-6)


def test_adiabatic_storage_admittance(concrete):
    part = EnvelopePart("floor", 1.0, WallConstruction((Layer(concrete, 0.1),)), boundary="adiabatic")
    M = walls.layer_matrix(Layer(concrete, 0.1), W24)
    assert walls.storage_admittance(part, W24, H_E) == pytest.approx(M[1, 0] / M[0, 0])


def test_branch_fit_with_close_time_constants():
    net = walls.BranchNetwork(((87.0, 1e5), (1.0, 1e3)))
    targets = net.admittance([W24, W1])
    fit = walls.fit_branch_network(*targets)
    np.testing.assert_allclose(fit.admittance([W24, W1]), targets, rtol=1e-8)


def test_rational_start_is_exact():
    net = walls.BranchNetwork(((10.0, 1e6), (40.0, 5e4)))
    q = walls._rational_branches(*net.admittance([W24, W1]), W24, W1)
    np.testing.assert_allclose(np.exp(q), [10.0, 1e6, 40.0, 5e4], rtol=1e-9)
