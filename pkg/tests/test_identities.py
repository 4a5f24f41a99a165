"""Analytic identity suite: all checks at machine precision, plus the
discrete energy-inequality ledger on synthetic data."""

import numpy as np
import pytest

from wkg2d.identities import (
    ANALYTIC_TOL,
    check_energy_inequalities,
    run_analytic_suite,
)
from wkg2d.operators import OPERATORS, frame_matrix, inverse_frame_matrix, q0


@pytest.fixture(scope="module")
def suite():
    return run_analytic_suite(n_points=400, seed=20240817)


def test_every_check_passes(suite):
    failed = [r.name for r in suite if not r.passed]
    assert failed == [], failed


def test_residuals_at_machine_precision(suite):
    worst = max(r.max_residual for r in suite)
    assert worst <= ANALYTIC_TOL
    # an exact identity evaluated in double precision should do far
    # better than the certification threshold
    assert worst < 1e-12


def test_suite_covers_expected_families(suite):
    names = {r.name for r in suite}
    for needed in (
        "frame-duality",
        "wave-operator-decomposition",
        "q0-scaling-form",
        "q0-frame-form",
        "q-rotation-form",
        "q-boost-form",
        "frame-derivative-identities",
        "commutator-coefficients",
        "commutator-application",
        "commutator-multipliers",
        "q0-leibniz",
        "ghost-weight-identity",
        "ghost-weight-outgoing-cancellation",
        "energy-form-equivalence",
        "transform-product-wave",
        "transform-kg-square",
        "transform-kg-gradient-square",
        "transform-kg-square-sourced",
        "transform-double-null",
    ):
        assert needed in names, needed


def test_suite_is_deterministic():
    a = run_analytic_suite(n_points=60, seed=12345)
    b = run_analytic_suite(n_points=60, seed=12345)
    for ra, rb in zip(a, b):
        assert ra.name == rb.name
        assert ra.max_residual == rb.max_residual


# ---------------------------------------------------------------------------
# Worked spot values, checked by hand once and pinned here.


def test_frame_matrix_worked_point():
    phi = frame_matrix(2.0, 1.0, 0.0)
    psi = inverse_frame_matrix(2.0, 1.0, 0.0)
    np.testing.assert_allclose(phi[1], [0.5, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(psi[1], [-0.5, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(phi @ psi, np.eye(3), atol=1e-15)


def test_q0_worked_values():
    # f = g = t: only time slots, signature gives -1
    jt = {"t": 1.0, "1": 0.0, "2": 0.0}
    assert q0(jt, jt) == -1.0
    # f = t + x1, g = t - x1: -1*1 + 1*(-1) = -2
    jp = {"t": 1.0, "1": 1.0, "2": 0.0}
    jm = {"t": 1.0, "1": -1.0, "2": 0.0}
    assert q0(jp, jm) == -2.0


def test_scaling_field_euler_identity():
    # L0 on the degree-2 polynomial t^2 - r^2 doubles it: at (3,(1,0)),
    # value 8 -> 16
    jet = {"t": 2 * 3.0, "1": -2 * 1.0, "2": 0.0}
    got = OPERATORS["L0"].apply(jet, 3.0, 1.0, 0.0)
    assert got == 16.0


def test_boost_on_time_coordinate():
    # L1 t = x1
    jet = {"t": 1.0, "1": 0.0, "2": 0.0}
    assert OPERATORS["L1"].apply(jet, 2.0, 1.0, 0.0) == 1.0


# ---------------------------------------------------------------------------
# Discrete energy-inequality ledger.


def ladder(n=15, s0=2.0, ds=0.5):
    return np.arange(n) * ds + s0


def test_inequalities_hold_on_constant_energy():
    s = ladder()
    e = np.full_like(s, 4.0)
    z = np.zeros_like(s)
    rep = check_energy_inequalities(s, e, e, e, z, z)
    assert rep["all_held"]
    assert all(not r["violated"] for r in rep["rows"])


def test_inequalities_flag_unsourced_growth():
    s = ladder()
    e = np.full_like(s, 1.0)
    e[s >= 6.0] = 1.3  # +30% jump in E, +14% in the square root
    z = np.zeros_like(s)
    rep = check_energy_inequalities(s, e, np.ones_like(s), np.ones_like(s), z, z)
    assert not rep["all_held"]
    bad = [r for r in rep["rows"] if r["violated"]]
    assert bad and all(r["check"] == "energy-wave" for r in bad)
    assert min(r["s"] for r in bad) == 6.0


def test_inequalities_accept_sourced_growth():
    # E^{1/2} growing exactly like the integral of the source norm
    s = ladder()
    src = np.full_like(s, 0.1)
    e_half = 1.0 + 0.1 * (s - 3.0)
    e = e_half**2
    ones = np.ones_like(s)
    rep = check_energy_inequalities(s, e, ones, ones, src, src)
    assert rep["all_held"]


def test_inequalities_ignore_early_slices():
    # a wild value at s=2.5 must not poison the ledger: the disk there is
    # a handful of cells at any affordable resolution
    s = ladder()
    e = np.full_like(s, 1.0)
    e[s < 3.0] = 5.0
    z = np.zeros_like(s)
    rep = check_energy_inequalities(s, e, e, e, z, z)
    assert rep["all_held"]
    assert all(r["s"] >= 3.0 for r in rep["rows"])
    assert rep["start_s"] == 3.0


def test_inequalities_vacuous_on_short_ladders():
    s = np.array([2.0, 2.5])
    e = np.array([1.0, 2.0])
    z = np.zeros(2)
    rep = check_energy_inequalities(s, e, e, e, z, z)
    assert rep["all_held"] and rep["rows"] == []


def test_conformal_rhs_uses_s_weighted_source():
    # conformal bound carries 2 * integral of tau * source; make the wave
    # source just large enough to cover the growth only when weighted
    s = ladder()
    src = np.full_like(s, 0.05)
    # E_con^{1/2}(s) = 1 + 2*0.05*(s^2 - 9)/2 matches 2*trapz(tau*src)
    e_con_half = 1.0 + 0.05 * (s**2 - 9.0)
    ones = np.ones_like(s)
    rep = check_energy_inequalities(s, ones, ones, e_con_half**2, src,
                                    np.zeros_like(s))
    con = [r for r in rep["rows"] if r["check"] == "conformal-wave"]
    assert con and all(not r["violated"] for r in con)
    # the plain energy bound with the same source would NOT cover it
    rep2 = check_energy_inequalities(s, e_con_half**2, ones, ones, src,
                                     np.zeros_like(s))
    wave = [r for r in rep2["rows"] if r["check"] == "energy-wave"]
    assert any(r["violated"] for r in wave)
