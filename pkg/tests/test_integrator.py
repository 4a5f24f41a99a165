"""Time integration: step accuracy, conservation, reversal, blow-up
detection, and the run loop's bookkeeping."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from wkg2d.grid import InitialProfile, initial_data, make_grid
from wkg2d.integrator import (
    BlowupReport,
    StepControl,
    detect_blowup,
    flat_energy,
    make_aux_start,
    reconstruction_residual,
    run,
    run_riccati,
    step_rk4,
)
from wkg2d.models import ModelSpec


def small_setup(model_kind="hom-wave", n=65, L=8.0, amp=0.01, amp_v=None,
                order=2):
    grid = make_grid(L, n, stencil_order=order)
    model = ModelSpec(model_kind)
    if amp_v is None:
        amp_v = amp
    state = initial_data(grid,
                         InitialProfile("bump4", amp),
                         InitialProfile("bump4", amp_v))
    return grid, model, state


def test_rk4_time_convergence_is_fourth_order():
    # same grid throughout, so halving dt isolates the time error of the
    # shared semi-discrete system
    grid, model, state = small_setup("model-i", amp=0.5)
    t_max = 3.0

    def final(cfl):
        res = run(model, grid, state.copy(), StepControl(t_max=t_max, cfl=cfl),
                  sampler=None)
        assert res.ok
        return res.final_state.u_w

    ref = final(0.025)
    errs = [np.max(np.abs(final(cfl) - ref)) for cfl in (0.4, 0.2)]
    ratio = errs[0] / errs[1]
    assert 12.0 <= ratio <= 20.0


def test_linearity_of_homogeneous_flow():
    grid, model, s1 = small_setup("hom-wave", amp=0.01)
    _, _, s2 = small_setup("hom-wave", amp=0.02)
    r1 = run(model, grid, s1, StepControl(t_max=4.0))
    r2 = run(model, grid, s2, StepControl(t_max=4.0))
    np.testing.assert_allclose(r2.final_state.u_w, 2.0 * r1.final_state.u_w,
                               atol=1e-14)


def test_flat_energy_conserved_on_wave_flow():
    # the forward-difference quadratic form is invariant under the exact
    # semi-discrete flow; RK4 adds only O(dt^4) dissipation per unit time
    grid, model, state = small_setup("hom-wave", n=129, L=12.0)

    def drift(cfl):
        st = state.copy()
        res = run(model, grid, st, StepControl(t_max=8.0, cfl=cfl))
        en = np.asarray(res.flat["en_w"])
        return np.max(np.abs(en - en[0])) / en[0]

    d_coarse = drift(0.25)
    assert d_coarse < 1e-3
    # refining the step shrinks the loss at the RK4 rate or better
    assert drift(0.125) < d_coarse / 8.0


def test_time_reversal_returns_to_start():
    grid, model, state = small_setup("hom-wave", n=65, L=8.0)
    fwd = run(model, grid, state.copy(), StepControl(t_max=4.0))
    turned = fwd.final_state.copy()
    turned.p_w = -turned.p_w
    turned.p_v = -turned.p_v
    back = run(model, grid, turned, StepControl(t_max=6.0))
    err = np.max(np.abs(back.final_state.u_w - state.u_w))
    assert err < 1e-5  # ~1e-3 of the amplitude after ~350 steps


def test_run_reaches_t_max_exactly():
    grid, model, state = small_setup()
    res = run(model, grid, state, StepControl(t_max=3.0))
    assert res.ok and not res.blowup.detected
    assert res.t_end == pytest.approx(3.0, abs=1e-12)
    assert res.flat["t"][0] == 2.0
    assert res.flat["t"][-1] == pytest.approx(3.0, abs=1e-12)


def test_record_stride_thins_series_but_keeps_last():
    grid, model, state = small_setup()
    dense = run(model, grid, state.copy(), StepControl(t_max=3.0, record_stride=1))
    thin = run(model, grid, state.copy(), StepControl(t_max=3.0, record_stride=8))
    assert len(thin.flat["t"]) < len(dense.flat["t"])
    assert thin.flat["t"][-1] == dense.flat["t"][-1]
    assert len(thin.sources["t"]) == len(thin.flat["t"])


def test_on_step_called_each_step():
    grid, model, state = small_setup()
    seen = []
    res = run(model, grid, state, StepControl(t_max=2.5),
              on_step=lambda st, k: seen.append((k, st.t)))
    assert len(seen) == res.steps + 1
    assert seen[0][0] == 0 and seen[-1][0] == res.steps


def test_detect_blowup_reports():
    grid, _, state = small_setup()
    assert not detect_blowup(state, 1e6).detected
    bad = state.copy()
    bad.u_w[3, 3] = np.inf
    rep = detect_blowup(bad, 1e6)
    assert rep.detected and rep.trigger == "NonFinite"
    big = state.copy()
    big.p_v[2, 2] = 2e6
    rep = detect_blowup(big, 1e6)
    assert rep.detected and rep.trigger == "SupNorm" and rep.t_star == big.t


def test_swapped_blowup_detected_and_amplitude_ordering():
    # the swapped coupling feeds the wave square back into itself; at
    # O(1) amplitude the sup passes the threshold in finite time
    grid = make_grid(8.0, 65)
    model = ModelSpec("swapped-ii")
    stars = []
    for amp in (4.0, 6.0):
        state = initial_data(grid, InitialProfile("bump4", amp),
                             InitialProfile("bump4", amp))
        res = run(model, grid, state, StepControl(t_max=12.0, blowup_factor=1e4))
        assert res.blowup.detected
        assert res.blowup.trigger in ("SupNorm", "NonFinite")
        # a detected blow-up is a finding, not an abort: the run stays ok
        assert res.ok
        stars.append(res.blowup.t_star)
    assert stars[1] <= stars[0]


def test_boundary_leak_aborts_run():
    # domain too small for the horizon: the outgoing front reaches the
    # edge band and the guard must stop the run
    grid, model, state = small_setup("hom-wave", n=65, L=4.0)
    res = run(model, grid, state, StepControl(t_max=12.0))
    assert res.blowup.detected
    assert res.blowup.trigger == "BoundaryLeak"
    assert not res.ok
    assert res.t_end < 12.0


def test_band_check_can_be_disabled():
    grid, model, state = small_setup("hom-wave", n=65, L=4.0)
    res = run(model, grid, state, StepControl(t_max=6.0, band_check=False))
    assert res.blowup.trigger != "BoundaryLeak"


def test_aux_start_compensates_velocity():
    grid, model, state = small_setup("model-ii", amp=0.3, amp_v=0.2)
    aux = make_aux_start(model, state)
    np.testing.assert_array_equal(aux.u0, state.u_w)
    np.testing.assert_allclose(aux.p0, state.p_w - state.u_v**2, atol=1e-15)
    assert np.all(aux.uW == 0.0) and np.all(aux.pW == 0.0)
    res = reconstruction_residual(model, grid, state, aux)
    np.testing.assert_allclose(res, 0.0, atol=1e-15)


def test_coevolved_reconstruction_stays_small():
    grid, model, state = small_setup("model-ii", amp=0.05, amp_v=0.05)
    res = run(model, grid, state, StepControl(t_max=5.0), coevolve=True)
    assert res.ok
    t = np.asarray(res.aux_series["t"])
    rl2 = np.asarray(res.aux_series["recon_l2"])
    # centered residuals exist only where both neighbours do
    assert t[0] > 2.0 and t[-1] < res.t_end
    # defect is pure discretization error, far below the field scale
    assert np.max(rl2) < 2e-4 * state.sup()
    # the conjugate-momentum route satisfies the identity to the
    # integrator floor, well under the centered-difference defect
    mom = reconstruction_residual(model, grid, res.final_state,
                                  res.final_aux)
    mom_l2 = math.sqrt(grid.h**2 * np.sum(mom * mom))
    assert mom_l2 < 0.1 * np.max(rl2)


def test_riccati_blowup_matches_quadrature_oracle():
    # u'' = u^2 from (1, 1): the travel time to infinity is
    # sqrt(3) * int_1^inf (2u^3 + 1)^{-1/2} du
    oracle, err = quad(lambda u: (2.0 * u**3 + 1.0) ** -0.5, 1.0, np.inf)
    oracle *= math.sqrt(3.0)
    assert err < 1e-9
    rep = run_riccati(dt=1e-3, t0=2.0)
    assert rep.detected
    # the sup threshold trips at u ~ 1.1e4 (the velocity crosses first),
    # which undershoots the singular time by sqrt(6/u) ~ 0.023
    under = oracle - (rep.t_star - 2.0)
    assert 0.0 < under < 0.03


def test_run_determinism():
    grid, model, s1 = small_setup("model-i", amp=0.4)
    _, _, s2 = small_setup("model-i", amp=0.4)
    r1 = run(model, grid, s1, StepControl(t_max=3.0))
    r2 = run(model, grid, s2, StepControl(t_max=3.0))
    assert np.array_equal(r1.final_state.u_w, r2.final_state.u_w)
    assert r1.flat["sup_w"] == r2.flat["sup_w"]
    assert r1.flat["en_v"] == r2.flat["en_v"]
