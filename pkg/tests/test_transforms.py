"""Jet algebra, transformed-equation identities, and run-mode residuals."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkg2d.grid import InitialProfile, bump4, initial_data, l2_flat, make_grid
from wkg2d.models import ModelSpec, PAB_PRESETS
from wkg2d.testfuncs import CATALOG, SmoothField, cone_points, derivative_keys
from wkg2d.transforms import (
    double_null_residual,
    hessian_eta_square,
    jet_combine,
    jet_mul,
    jet_q0,
    jet_shift,
    kg_operator,
    model1_v,
    model2_vhat,
    model2_vtilde,
    q0_self_grid,
    q0_value,
    residual_double_null_transform,
    residual_gradient_square_transform,
    residual_kg_square_transform,
    residual_product_transform,
    transformed_kg_residual,
    wave_operator,
    wave_operator_jet1,
)

KEYS3 = derivative_keys(3)


def random_jet(rng, lo=-2.0, hi=2.0):
    return {k: float(rng.uniform(lo, hi)) for k in KEYS3}


def jets_strategy():
    return st.integers(0, 2**31 - 1).map(
        lambda seed: tuple(random_jet(np.random.default_rng(seed))
                           for _ in range(2)))


# ---------------------------------------------------------------------------
# Jet algebra against hand values.  f = t^2 x1 gives easy exact entries.


def hand_jet_t2x1(t, x1, x2):
    j = {k: 0.0 for k in KEYS3}
    j[""] = t * t * x1
    j["t"] = 2 * t * x1
    j["1"] = t * t
    j["tt"] = 2 * x1
    j["t1"] = 2 * t
    j["ttt"] = 0.0
    j["tt1"] = 2.0
    return j


def test_jet_shift_drops_an_order():
    j = hand_jet_t2x1(3.0, 0.5, 0.0)
    jt = jet_shift(j, "t", 2)
    assert jt[""] == j["t"]
    assert jt["t"] == j["tt"]
    assert jt["1"] == j["t1"]
    assert set(jt) == set(derivative_keys(2))


def test_jet_mul_matches_product_function():
    # (t^2 x1) * (t^2 x1) = t^4 x1^2: check a few product entries exactly
    t, x1 = 2.0, 0.7
    j = hand_jet_t2x1(t, x1, 0.0)
    p = jet_mul(j, j, 2)
    assert np.isclose(p[""], t**4 * x1**2)
    assert np.isclose(p["t"], 4 * t**3 * x1**2)
    assert np.isclose(p["1"], 2 * t**4 * x1)
    assert np.isclose(p["tt"], 12 * t**2 * x1**2)
    assert np.isclose(p["t1"], 8 * t**3 * x1)
    assert np.isclose(p["11"], 2 * t**4)


def test_jet_combine_is_linear():
    rng = np.random.default_rng(1)
    ja, jb = random_jet(rng), random_jet(rng)
    out = jet_combine(2.0, ja, -0.5, jb, 3)
    for k in KEYS3:
        assert out[k] == 2.0 * ja[k] - 0.5 * jb[k]


def test_jet_q0_value_entry():
    rng = np.random.default_rng(2)
    jf, jg = random_jet(rng), random_jet(rng)
    q = jet_q0(jf, jg, 2)
    want = -jf["t"] * jg["t"] + jf["1"] * jg["1"] + jf["2"] * jg["2"]
    assert np.isclose(q[""], want, rtol=1e-13)
    assert np.isclose(q[""], q0_value(jf, jg), rtol=1e-13)


def test_wave_and_kg_operator_entries():
    j = hand_jet_t2x1(3.0, 0.5, 0.0)
    # box(t^2 x1) with d_tt positive = 2 x1
    assert wave_operator(j) == 2 * 0.5
    assert kg_operator(j) == 2 * 0.5 + 9.0 * 0.5
    j1 = wave_operator_jet1(j)
    assert j1[""] == wave_operator(j)
    assert j1["t"] == j["ttt"] - j["t11"] - j["t22"]
    assert j1["1"] == j["tt1"] - j["111"] - j["122"]


def test_hessian_eta_square_hand_value():
    j = {k: 0.0 for k in KEYS3}
    j["tt"], j["11"], j["22"], j["t1"] = 1.0, 2.0, 3.0, 4.0
    # eta weights: (--) -> +, (-+) -> -, (++) -> +
    want = 1.0 + 4.0 + 9.0 - 2 * 16.0
    assert hessian_eta_square(j) == want


# ---------------------------------------------------------------------------
# The five transformed-equation identities hold for ARBITRARY symmetric
# jet entries, not only jets of genuine functions: every step in their
# derivation is Leibniz algebra on named slots.  Random dicts are the
# strongest probe of a missing defect term.


@given(jets_strategy())
@settings(max_examples=60, deadline=None)
def test_product_transform_identity_random_jets(jets):
    jf, jg = jets
    assert abs(residual_product_transform(jf, jg)) < 1e-10


@given(jets_strategy())
@settings(max_examples=60, deadline=None)
def test_kg_square_identity_random_jets(jets):
    jf, jg = jets
    assert abs(residual_kg_square_transform(jf, jg)) < 1e-10
    assert abs(residual_kg_square_transform(jf, jg,
                                            pa=(1.0, -0.4, 0.7))) < 1e-10


@given(jets_strategy())
@settings(max_examples=60, deadline=None)
def test_gradient_square_identity_random_jets(jets):
    jf, jg = jets
    for pab in (PAB_PRESETS["time-squared"], PAB_PRESETS["null-q0"]):
        assert abs(residual_gradient_square_transform(jf, jg, pab)) < 1e-10


@given(jets_strategy())
@settings(max_examples=60, deadline=None)
def test_double_null_identity_random_jets(jets):
    jf, jg = jets
    assert abs(residual_double_null_transform(jf, jg, (1.0, 0.0, 0.0))) < 1e-9
    assert abs(residual_double_null_transform(jf, jg, (0.3, -1.2, 0.7))) < 1e-9


def test_identities_on_catalog_fields():
    f = SmoothField("osc-kg", CATALOG["osc-kg"])
    g = SmoothField("drift-bump", CATALOG["drift-bump"])
    t, x1, x2 = cone_points(20, seed=99)
    jf = f.jet(t, x1, x2, 3)
    jg = g.jet(t, x1, x2, 3)
    for i in range(len(t)):
        a = {k: jf[k][i] for k in KEYS3}
        b = {k: jg[k][i] for k in KEYS3}
        assert abs(residual_product_transform(a, b)) < 1e-9
        assert abs(residual_double_null_transform(a, b, (1.0, 0.0, 0.0))) < 1e-8


# ---------------------------------------------------------------------------
# Grid-mode combinations.


@pytest.fixture(scope="module")
def small_state():
    grid = make_grid(L=6.0, n=129)
    state = initial_data(grid, InitialProfile("bump4", 0.6),
                         InitialProfile("bump4", 0.4), t0=4.0)
    state.u_w = 0.6 * bump4(grid.r / 2.0)
    state.u_v = 0.4 * bump4(grid.r / 1.7)
    state.p_w = 0.25 * bump4(grid.r / 1.9)
    state.p_v = -0.15 * bump4(grid.r / 2.1)
    return grid, state


def test_model1_v_combination(small_state):
    grid, state = small_state
    got = model1_v(state, grid, PAB_PRESETS["time-squared"])
    np.testing.assert_allclose(got, state.u_v - state.p_w**2, atol=1e-15)


def test_model2_vtilde_combination(small_state):
    _, state = small_state
    np.testing.assert_array_equal(model2_vtilde(state),
                                  state.u_v - state.u_w**2)


def test_model2_vhat_subtracts_null_form(small_state):
    grid, state = small_state
    vt, vh = model2_vhat(state, grid)
    np.testing.assert_array_equal(vt, model2_vtilde(state))
    np.testing.assert_allclose(vh, vt - q0_self_grid(state, grid), atol=1e-15)


def test_q0_self_grid_sign(small_state):
    grid, state = small_state
    q = q0_self_grid(state, grid)
    mid = grid.n // 2
    # at the center the gradients vanish by symmetry, leaving -(p_w)^2
    assert np.isclose(q[mid, mid], -state.p_w[mid, mid] ** 2, atol=1e-12)


# ---------------------------------------------------------------------------
# Run-mode residuals: two exact routes through the same derivative data
# differ only by stencil truncation, so the norm must fall at the
# configured order under h-halving.


def synthetic_state(grid, t=4.0):
    state = initial_data(grid, InitialProfile("bump4", 0.5),
                         InitialProfile("bump4", 0.3), t0=t)
    state.u_w = 0.5 * bump4(grid.r / 2.0)
    state.u_v = 0.3 * bump4(grid.r / 1.6)
    state.p_w = 0.2 * bump4(grid.r / 1.8)
    state.p_v = -0.1 * bump4(grid.r / 2.2)
    return state


@pytest.mark.slow
@pytest.mark.parametrize("kind,extractor", [
    ("model-i", transformed_kg_residual),
    ("model-ii", transformed_kg_residual),
    ("model-ii", double_null_residual),
])
def test_run_mode_residual_halving(kind, extractor):
    spec = ModelSpec(kind)
    norms = []
    for n in (257, 513):
        grid = make_grid(L=6.0, n=n)
        state = synthetic_state(grid)
        res = extractor(spec, grid, state)
        norms.append(l2_flat(res, grid))
    ratio = norms[0] / norms[1]
    assert 3.0 <= ratio <= 5.0, (norms, ratio)
