"""Exponent fits, boundedness trackers, and source criticality verdicts.

Everything here consumes recorded series (curved-slice sup-norms,
energies, flat-slice source norms); nothing re-runs physics.  Fits are
ordinary least squares on log-log samples.  Boundedness of a tracked
quantity means its fitted exponent sits inside a small band around zero
and its spread over the fit window is mild; the bands absorb the slack
that the underlying estimates hide in unspecified constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import integrate, optimize

from .hyperboloid import weighted_sup

FIT_WINDOW_S = (3.0, 10.0)
FIT_WINDOW_T = (15.0, 60.0)
MIN_SAMPLES = 8
DROP_FRACTION = 0.2

# tracker -> (component, target, power of t, power of (t - r))
THM1_TRACKERS = {
    "sup_tv": ("v", "phi", 1.0, 0.0),
    "sup_w_thm": ("w", "phi", 0.5, -0.5),
    "sup_dw_thm": ("w", "dphi", 0.5, 0.5),
}
# same layout with the softened interior weight (delta' = 0.1) on the
# wave component
THM2_TRACKERS = {
    "sup_tv": ("v", "phi", 1.0, 0.0),
    "sup_w_thm": ("w", "phi", 0.5, 0.4),
    "sup_dw_thm": ("w", "dphi", 0.5, 0.5),
}

BOUNDED_EXP_TOL = 0.15
BOUNDED_RATIO_TOL = 3.0


@dataclass
class DecayFit:
    quantity: str
    exponent: float
    intercept: float
    r_squared: float
    window: tuple
    n_used: int
    n_dropped: int
    valid: bool

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def _linear_fit(x, y):
    """Least-squares line; returns (slope, intercept, r_squared)."""
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def fit_power_law(abscissa, values, window=None,
                  quantity: str = "series") -> DecayFit:
    """Slope of log(value) against log(abscissa) over the window.

    Non-positive samples cannot enter the log fit; they are dropped and
    counted, and the fit is marked invalid when they exceed a fifth of
    the window.
    """
    a = np.asarray(abscissa, dtype=float)
    v = np.asarray(values, dtype=float)
    if a.shape != v.shape:
        raise ValueError("abscissa and values must align")
    if window is None:
        window = (float(a.min()), float(a.max()))
    lo, hi = window
    inside = (a >= lo) & (a <= hi)
    a, v = a[inside], v[inside]
    positive = v > 0.0
    n_dropped = int(np.sum(~positive))
    a, v = a[positive], v[positive]
    if a.size < MIN_SAMPLES:
        raise ValueError(
            f"need at least {MIN_SAMPLES} positive samples in "
            f"[{lo}, {hi}], have {a.size}")
    slope, intercept, r2 = _linear_fit(np.log(a), np.log(v))
    total = a.size + n_dropped
    valid = n_dropped <= DROP_FRACTION * total
    return DecayFit(quantity, slope, intercept, r2, (lo, hi),
                    int(a.size), n_dropped, valid)


def tracker_table(records, theorem: str) -> dict:
    """Weighted sup-norms per curved slice for one theorem's bands."""
    table = {"Thm1": THM1_TRACKERS, "Thm2": THM2_TRACKERS}[theorem]
    out = {"s": np.array([rec.s for rec in records])}
    for name, (comp, target, t_pow, tr_pow) in table.items():
        out[name] = np.array([
            weighted_sup(rec, comp, target, t_pow, tr_pow)
            for rec in records])
    return out


def boundedness(s, values, quantity: str, window=FIT_WINDOW_S,
                exp_tol: float = BOUNDED_EXP_TOL,
                ratio_tol: float = BOUNDED_RATIO_TOL) -> dict:
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    inside = (s >= window[0]) & (s <= window[1])
    vw = v[inside]
    if vw.size and np.max(np.abs(vw)) == 0.0:
        return {"quantity": quantity, "trivially_bounded": True,
                "bounded": True, "fit": None, "ratio": 0.0,
                "window": list(window)}
    try:
        fit = fit_power_law(s, v, window, quantity)
    except ValueError as exc:
        return {"quantity": quantity, "trivially_bounded": False,
                "bounded": False, "fit": None, "ratio": None,
                "window": list(window), "note": str(exc)}
    pos = vw[vw > 0.0]
    ratio = float(np.max(pos) / np.min(pos)) if pos.size else math.inf
    bounded = (fit.valid and abs(fit.exponent) <= exp_tol
               and ratio <= ratio_tol)
    return {"quantity": quantity, "trivially_bounded": False,
            "bounded": bounded, "fit": fit.to_dict(), "ratio": ratio,
            "window": list(window)}


def decay_suite(s, trackers: dict, energy_halves: dict | None = None,
                window=FIT_WINDOW_S) -> dict:
    """Boundedness verdicts for sup-norm trackers plus growth fits for
    square-root energies."""
    report = {"window": list(window), "trackers": {}, "energy_growth": {}}
    for name, series in trackers.items():
        report["trackers"][name] = boundedness(s, series, name, window)
    for name, series in (energy_halves or {}).items():
        try:
            fit = fit_power_law(s, series, window, name)
            report["energy_growth"][name] = fit.to_dict()
        except ValueError:
            report["energy_growth"][name] = {"quantity": name,
                                             "valid": False,
                                             "note": "all zero"}
    report["all_bounded"] = all(
        entry["bounded"] for entry in report["trackers"].values())
    return report


# ---------------------------------------------------------------------------
# Criticality of integrated source norms.

TAIL_TOL = 0.02
LOG_R2_MIN = 0.98
BELOW_EXPONENT_MIN = 0.2
CRIT_FIT_T_MIN = 15.0


@dataclass
class CriticalityVerdict:
    source: str
    verdict: str
    evidence: dict

    def to_dict(self):
        return asdict(self)


def _offset_power_fit(t, cum):
    """Fit I(t) = c0 + c1 t^p; the offset keeps the exponent honest for
    integrals that start mid-growth."""

    def shape(tt, c0, c1, p):
        return c0 + c1 * np.power(tt, p)

    p0 = (0.0, max(float(cum[-1]), 1.0), 0.5)
    bounds = ([-np.inf, -np.inf, 1e-3], [np.inf, np.inf, 3.0])
    try:
        popt, _ = optimize.curve_fit(shape, t, cum, p0=p0, bounds=bounds,
                                     maxfev=20000)
    except RuntimeError:
        return None
    pred = shape(t, *popt)
    ss_res = float(np.sum((cum - pred) ** 2))
    ss_tot = float(np.sum((cum - np.mean(cum)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"c0": float(popt[0]), "c1": float(popt[1]),
            "exponent": float(popt[2]), "r_squared": r2}


def criticality_probe(t, norms, source: str = "F",
                      fit_t_min: float = CRIT_FIT_T_MIN) -> CriticalityVerdict:
    """Classify a source by the growth of its integrated flat L^2 norm.

    above: the integral has effectively converged (the last half-decade
    adds under 2%).  critical: the integral is linear in log t.  below:
    an offset power law with exponent >= 0.2 fits.  Anything else is
    reported ambiguous rather than forced.
    """
    t = np.asarray(t, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if t.size < MIN_SAMPLES:
        raise ValueError("too few samples for a verdict")
    cum = integrate.cumulative_trapezoid(norms, t, initial=0.0)
    i_end = float(cum[-1])
    t_half = t[-1] / math.sqrt(10.0)
    i_half = float(np.interp(t_half, t, cum))
    tail_ratio = (i_end - i_half) / i_end if i_end > 0 else 0.0
    evidence = {"integral": i_end, "tail_ratio": tail_ratio,
                "tail_window": [t_half, float(t[-1])]}
    if i_end <= 0 or tail_ratio < TAIL_TOL:
        return CriticalityVerdict(source, "above", evidence)
    sel = t >= fit_t_min
    if np.sum(sel) < MIN_SAMPLES:
        sel = np.ones_like(t, dtype=bool)
    tf, cf = t[sel], cum[sel]
    _, _, r2_log = _linear_fit(np.log(tf), cf)
    _, _, r2_pow01 = _linear_fit(tf**0.1, cf)
    evidence["r2_log"] = r2_log
    evidence["r2_t01"] = r2_pow01
    power = _offset_power_fit(tf, cf)
    evidence["power_fit"] = power
    if r2_log >= LOG_R2_MIN and r2_log > r2_pow01:
        return CriticalityVerdict(source, "critical", evidence)
    if power is not None and power["exponent"] >= BELOW_EXPONENT_MIN:
        return CriticalityVerdict(source, "below", evidence)
    return CriticalityVerdict(source, "ambiguous", evidence)


# ---------------------------------------------------------------------------
# Blow-up scan bookkeeping.

def blowup_table(rows: list) -> dict:
    """Assemble scan rows {eps, t_star, reason} and check that detected
    blow-up times do not increase with amplitude."""
    rows = sorted(rows, key=lambda r: r["eps"])
    detected = [(r["eps"], r["t_star"]) for r in rows
                if r.get("t_star") is not None]
    monotone = all(b[1] <= a[1] + 1e-12
                   for a, b in zip(detected, detected[1:]))
    return {
        "rows": rows,
        "detections": len(detected),
        "t_star_nonincreasing": monotone,
    }
