"""Power-law fitting, boundedness verdicts, criticality classification,
and blow-up scan bookkeeping on synthetic series."""

import numpy as np
import pytest

from wkg2d.decay import (
    BOUNDED_EXP_TOL,
    blowup_table,
    boundedness,
    criticality_probe,
    decay_suite,
    fit_power_law,
    tracker_table,
)
from wkg2d.grid import make_grid
from wkg2d.hyperboloid import _new_record, weighted_sup


def test_fit_recovers_exact_power_law():
    t = np.linspace(2.0, 80.0, 200)
    fit = fit_power_law(t, 3.0 * t**-0.5, window=(15.0, 60.0))
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.valid
    assert fit.n_dropped == 0
    # only window samples enter
    assert fit.n_used == int(np.sum((t >= 15.0) & (t <= 60.0)))


def test_fit_growing_series():
    s = np.linspace(2.0, 12.0, 60)
    fit = fit_power_law(s, 0.2 * s**1.25, window=(3.0, 10.0))
    assert fit.exponent == pytest.approx(1.25, abs=1e-12)


def test_fit_drops_nonpositive_and_flags_excess():
    t = np.linspace(10.0, 60.0, 50)
    v = t**-1.0
    v[::3] = -1.0  # a third of the samples unusable
    fit = fit_power_law(t, v, window=(10.0, 60.0))
    assert fit.n_dropped > 0
    assert not fit.valid


def test_fit_needs_enough_samples():
    t = np.linspace(15.0, 60.0, 5)
    with pytest.raises(ValueError, match="at least"):
        fit_power_law(t, t**-1.0)


def test_fit_shape_mismatch():
    with pytest.raises(ValueError, match="align"):
        fit_power_law(np.arange(10.0), np.arange(9.0))


def test_boundedness_flat_series():
    s = np.linspace(2.0, 11.0, 40)
    rep = boundedness(s, np.full_like(s, 0.7), "const")
    assert rep["bounded"]
    assert abs(rep["fit"]["exponent"]) < 1e-12
    assert rep["ratio"] == pytest.approx(1.0)


def test_boundedness_rejects_growth():
    s = np.linspace(2.0, 11.0, 40)
    rep = boundedness(s, 0.1 * s**0.3, "grows")
    assert not rep["bounded"]
    assert rep["fit"]["exponent"] > BOUNDED_EXP_TOL


def test_boundedness_rejects_large_swing():
    s = np.linspace(3.0, 10.0, 80)
    # exponent ~ 0 but the spread over the window is 6x
    v = 1.0 + 5.0 * np.sin(np.linspace(0.0, 40.0, 80)) ** 2
    rep = boundedness(s, v, "swing")
    assert rep["ratio"] > 3.0
    assert not rep["bounded"]


def test_boundedness_all_zero_is_trivial():
    s = np.linspace(2.0, 11.0, 40)
    rep = boundedness(s, np.zeros_like(s), "silent")
    assert rep["trivially_bounded"] and rep["bounded"]


def test_decay_suite_shapes():
    s = np.linspace(2.0, 11.0, 40)
    trackers = {"sup_tv": np.full_like(s, 0.9),
                "sup_w_thm": 0.5 + 0.01 * np.log(s)}
    halves = {"E1_v_half": 2.0 * s**0.02}
    rep = decay_suite(s, trackers, halves)
    assert set(rep["trackers"]) == {"sup_tv", "sup_w_thm"}
    assert rep["all_bounded"]
    assert rep["energy_growth"]["E1_v_half"]["exponent"] == pytest.approx(
        0.02, abs=1e-10)


# ---------------------------------------------------------------------------
# Criticality classification on synthetic integrands.


def test_integrable_source_classified_above():
    t = np.linspace(2.0, 1000.0, 6000)
    v = criticality_probe(t, t**-2.0, "F")
    assert v.verdict == "above"
    assert v.evidence["tail_ratio"] < 0.02


def test_log_growth_classified_critical():
    t = np.linspace(2.0, 1000.0, 6000)
    v = criticality_probe(t, 1.0 / t, "F")
    assert v.verdict == "critical"
    assert v.evidence["r2_log"] > 0.98


def test_half_power_classified_below_with_exponent():
    t = np.linspace(2.0, 1000.0, 6000)
    v = criticality_probe(t, t**-0.5, "F")
    assert v.verdict == "below"
    assert 0.35 <= v.evidence["power_fit"]["exponent"] <= 0.65


def test_below_detection_inside_desk_window():
    # same classification must come out of the short window real runs use
    t = np.linspace(2.0, 60.0, 1200)
    v = criticality_probe(t, 0.3 * t**-0.5, "F")
    assert v.verdict == "below"
    assert 0.35 <= v.evidence["power_fit"]["exponent"] <= 0.65


def test_critical_detection_inside_desk_window():
    t = np.linspace(2.0, 60.0, 1200)
    v = criticality_probe(t, 0.3 / t, "F")
    assert v.verdict == "critical"


def test_zero_source_is_above():
    t = np.linspace(2.0, 60.0, 600)
    v = criticality_probe(t, np.zeros_like(t), "F")
    assert v.verdict == "above"
    assert v.evidence["integral"] == 0.0


def test_probe_needs_samples():
    with pytest.raises(ValueError, match="too few"):
        criticality_probe(np.arange(4.0) + 2.0, np.ones(4), "F")


# ---------------------------------------------------------------------------
# Blow-up scan bookkeeping.


def test_blowup_table_monotone():
    rows = [
        {"eps": 2.0, "t_star": 5.0, "reason": "SupNorm"},
        {"eps": 0.5, "t_star": None, "reason": None},
        {"eps": 1.0, "t_star": 9.0, "reason": "SupNorm"},
    ]
    table = blowup_table(rows)
    assert [r["eps"] for r in table["rows"]] == [0.5, 1.0, 2.0]
    assert table["detections"] == 2
    assert table["t_star_nonincreasing"]


def test_blowup_table_flags_inversion():
    rows = [
        {"eps": 1.0, "t_star": 5.0, "reason": "SupNorm"},
        {"eps": 2.0, "t_star": 8.0, "reason": "SupNorm"},
    ]
    assert not blowup_table(rows)["t_star_nonincreasing"]


# ---------------------------------------------------------------------------
# Tracker extraction from records.


def test_tracker_table_matches_weighted_sup():
    grid = make_grid(10.0, 65)
    rng = np.random.default_rng(3)
    records = []
    for s in (3.0, 4.0):
        rec = _new_record(grid, s)
        for c in ("w", "v"):
            for key in ("phi", "dt", "d1", "d2"):
                rec.fields[c][key] = rng.standard_normal(rec.n_nodes)
        rec.filled = rec.n_nodes
        records.append(rec)
    t1 = tracker_table(records, "Thm1")
    assert set(t1) == {"s", "sup_tv", "sup_w_thm", "sup_dw_thm"}
    np.testing.assert_array_equal(t1["s"], [3.0, 4.0])
    assert t1["sup_tv"][0] == weighted_sup(records[0], "v", "phi", 1.0, 0.0)
    assert t1["sup_dw_thm"][1] == weighted_sup(records[1], "w", "dphi", 0.5, 0.5)
    # the softened interior weight differs between the two tables
    t2 = tracker_table(records, "Thm2")
    assert t2["sup_w_thm"][0] == weighted_sup(records[0], "w", "phi", 0.5, 0.4)
    assert t1["sup_w_thm"][0] == weighted_sup(records[0], "w", "phi", 0.5, -0.5)
