"""Figure and report assembly from a single run directory.

The reporter copies numbers out of the artifacts; it never refits or
integrates anything.  Slopes and verdicts come from fits.json and
criticality.json, series come from the CSVs, and the provenance footer
records the artifact behind every number the report states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .artifacts import MissingArtifactError, load_csv, load_json  # noqa: E402

plt.rcParams["svg.hashsalt"] = "wkg2d-reporter"

ZERO_NOTE = "all quantities identically zero"

# target bands per theorem: quantity -> (description, predicate)
TRACKER_BAND = "|exp| <= 0.15, ratio <= 3"
BASELINE_BANDS = {
    "sup_w_flat": (-0.65, -0.35),
    "sup_v_flat": (-1.15, -0.85),
}
ENERGY_BANDS_THM1 = {"E1_v_half": 0.1, "E0_w_half": 0.15}
BANDED_TRACKERS = {
    "Thm1": ("sup_tv", "sup_dw_thm"),
    "Thm2": ("sup_tv", "sup_w_thm"),
}


def fmt(x) -> str:
    """The one formatting rule: two decimals, matching report and figures."""
    return f"{float(x):.2f}"


@dataclass
class RenderResult:
    report: Path
    figures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


class _Report:
    def __init__(self) -> None:
        self.lines = []
        self.provenance = {}

    def add(self, *lines) -> None:
        self.lines.extend(lines)

    def note_source(self, label: str, source: str) -> None:
        self.provenance[label] = source

    def text(self) -> str:
        out = list(self.lines)
        out.append("")
        out.append("## Provenance")
        out.append("")
        out.append("| value | artifact |")
        out.append("| --- | --- |")
        for label in sorted(self.provenance):
            out.append(f"| {label} | `{self.provenance[label]}` |")
        out.append("")
        return "\n".join(out)


def _positive(t, y):
    mask = (np.asarray(y) > 0) & (np.asarray(t) > 0)
    return np.asarray(t)[mask], np.asarray(y)[mask]


def _save(fig, out_dir: Path, stem: str, figures: list) -> None:
    for ext in ("svg", "png"):
        path = out_dir / f"{stem}.{ext}"
        fig.savefig(path, metadata={"Date": None} if ext == "svg" else None)
        figures.append(str(path.name))
    plt.close(fig)


def _empty_figure(title: str):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.set_title(title)
    ax.text(0.5, 0.5, ZERO_NOTE, ha="center", va="center",
            transform=ax.transAxes)
    ax.set_xticks([])
    ax.set_yticks([])
    return fig


def _fig_flat(flat, fits, out_dir, figures):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    drew = False
    for col, label in (("sup_w", "sup |w|"), ("sup_v", "sup |v|")):
        t, y = _positive(flat["t"], flat[col])
        if t.size == 0:
            continue
        entry = fits.get("baselines", {}).get(col + "_flat", {})
        slope = entry.get("exponent")
        tag = f"{label}" + (f", slope {fmt(slope)}" if entry.get("valid")
                            else "")
        ax.loglog(t, y, label=tag)
        drew = True
    if not drew:
        plt.close(fig)
        fig = _empty_figure("flat-slice sup norms")
    else:
        ax.set_xlabel("t")
        ax.set_ylabel("sup norm")
        ax.set_title("flat-slice sup norms")
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, out_dir, "fig_flat_decay", figures)


def _fig_trackers(pointwise, fits, out_dir, figures):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    drew = False
    trackers = fits.get("decay", {}).get("trackers", {})
    for col in ("sup_tv", "sup_w_thm", "sup_dw_thm"):
        s, y = _positive(pointwise["s"], pointwise[col])
        if s.size == 0:
            continue
        entry = trackers.get(col, {})
        exp = (entry.get("fit") or {}).get("exponent")
        tag = col + (f", slope {fmt(exp)}" if exp is not None else "")
        ax.loglog(s, y, marker=".", label=tag)
        drew = True
    if not drew:
        plt.close(fig)
        fig = _empty_figure("weighted hyperboloidal sup norms")
    else:
        ax.set_xlabel("s")
        ax.set_ylabel("weighted sup")
        ax.set_title("weighted hyperboloidal sup norms")
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, out_dir, "fig_trackers", figures)


def _fig_energies(energies, fits, out_dir, figures, *,
                  cols=("E0_w", "E1_v", "Econ_w"), stem="fig_energies",
                  title="slice energies"):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    growth = fits.get("decay", {}).get("energy_growth", {})
    drew = False
    for col in cols:
        s, y = _positive(energies["s"], energies[col])
        if s.size == 0:
            continue
        entry = growth.get(col + "_half", {})
        tag = col + (f", sqrt growth {fmt(entry['exponent'])}"
                     if entry.get("valid") else "")
        ax.semilogy(s, y, marker=".", label=tag)
        drew = True
    if not drew:
        plt.close(fig)
        fig = _empty_figure(title)
    else:
        ax.set_xlabel("s")
        ax.set_ylabel("energy")
        ax.set_title(title)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
    _save(fig, out_dir, stem, figures)


def _fig_criticality(sources, crit, out_dir, figures):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    drew = False
    for col, key in (("l2_Fw", "wave"), ("l2_Fv", "kg")):
        t, y = _positive(sources["t"], sources[col])
        if t.size == 0:
            continue
        entry = (crit or {}).get("sources", {}).get(key, {})
        verdict = entry.get("verdict", "?")
        ax.loglog(t, y, label=f"{key} source, verdict: {verdict}")
        drew = True
    if not drew:
        plt.close(fig)
        fig = _empty_figure("source norms")
    else:
        ax.set_xlabel("t")
        ax.set_ylabel("flat L2 of source")
        ax.set_title("source norms")
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, out_dir, "fig_criticality", figures)


def _fig_blowup(blowup, out_dir, figures):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    rows = blowup["rows"]
    eps = [r["eps"] for r in rows if r.get("t_star") is not None]
    tstar = [r["t_star"] for r in rows if r.get("t_star") is not None]
    if eps:
        ax.plot(eps, tstar, marker="o")
        ax.set_xlabel("amplitude")
        ax.set_ylabel("t_star")
        mono = blowup.get("t_star_nonincreasing")
        ax.set_title(f"blow-up times (nonincreasing: {mono})")
        ax.grid(True, alpha=0.3)
    else:
        plt.close(fig)
        fig = _empty_figure("blow-up times (none detected)")
    _save(fig, out_dir, "fig_blowup", figures)


def _fig_recon(recon, out_dir, figures):
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    t, y = _positive(recon["t"], recon["recon_l2"])
    if t.size:
        ax.semilogy(t, y, label="L2 residual")
        t2, y2 = _positive(recon["t"], recon["recon_sup"])
        if t2.size:
            ax.semilogy(t2, y2, label="sup residual")
        ax.set_xlabel("t")
        ax.set_title("reconstruction residual")
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
    else:
        plt.close(fig)
        fig = _empty_figure("reconstruction residual")
    _save(fig, out_dir, "fig_reconstruction", figures)


def _within_tracker(entry) -> str:
    fit = entry.get("fit") or {}
    exp = fit.get("exponent")
    if exp is None:
        return "n/a"
    ok = abs(exp) <= 0.15 and entry.get("ratio", np.inf) <= 3.0
    return "yes" if ok else "no"


def _fits_table(report: _Report, fits: dict) -> None:
    theorem = fits.get("theorem", "Thm1")
    banded = BANDED_TRACKERS.get(theorem, ())
    report.add("## Fits vs target bands", "",
               "| quantity | exponent | ratio | target band | within |",
               "| --- | --- | --- | --- | --- |")
    decay_part = fits.get("decay", {})
    for name, entry in sorted(decay_part.get("trackers", {}).items()):
        fit = entry.get("fit") or {}
        exp = fit.get("exponent")
        band = TRACKER_BAND if name in banded else "(informational)"
        within = _within_tracker(entry) if name in banded else "-"
        report.add(f"| {name} | {fmt(exp) if exp is not None else '-'} | "
                   f"{fmt(entry.get('ratio', float('nan')))} | {band} | "
                   f"{within} |")
        if exp is not None:
            report.note_source(f"{name} exponent {fmt(exp)}",
                               f"fits.json#decay.trackers.{name}")
    for name, entry in sorted(decay_part.get("energy_growth", {}).items()):
        if not entry.get("valid"):
            continue
        exp = entry["exponent"]
        bound = ENERGY_BANDS_THM1.get(name) if theorem == "Thm1" else None
        band = f"growth <= {bound}" if bound is not None \
            else "(informational)"
        within = ("yes" if exp <= bound else "no") if bound is not None \
            else "-"
        report.add(f"| {name} | {fmt(exp)} | - | {band} | {within} |")
        report.note_source(f"{name} exponent {fmt(exp)}",
                           f"fits.json#decay.energy_growth.{name}")
    for name, entry in sorted(fits.get("baselines", {}).items()):
        if not entry.get("valid"):
            report.add(f"| {name} | - | - | "
                       f"{BASELINE_BANDS.get(name, ('?', '?'))} | n/a |")
            continue
        exp = entry["exponent"]
        lo, hi = BASELINE_BANDS[name]
        within = "yes" if lo <= exp <= hi else "no"
        report.add(f"| {name} | {fmt(exp)} | - | [{lo}, {hi}] | {within} |")
        report.note_source(f"{name} exponent {fmt(exp)}",
                           f"fits.json#baselines.{name}")
    report.add("")


def render_report(run_dir, out_dir) -> RenderResult:
    """Read one run directory, write figures plus report.md into out_dir."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = load_json(run_dir, "manifest.json")
    fits = load_json(run_dir, "fits.json")
    flat = load_csv(run_dir, "flat_series.csv")

    warnings: list = []
    figures: list = []
    report = _Report()

    grid = manifest.get("grid", {})
    blowup_info = manifest.get("blowup", {})
    report.add(f"# Run report: {manifest['model']}", "",
               f"- grid: n={grid.get('n')}, L={grid.get('L')}, "
               f"order={grid.get('order')}, h={grid.get('h')}",
               f"- horizon: t_max={manifest['t_max']}, "
               f"reached t_end={manifest['t_end']}, ok={manifest['ok']}",
               f"- blow-up: detected={blowup_info.get('detected')}, "
               f"t_star={blowup_info.get('t_star')}",
               f"- artifact version: {manifest.get('version', '?')}", "")
    report.note_source("run summary", "manifest.json")

    all_zero = not np.any(np.abs(flat["sup_w"]) > 0) and \
        not np.any(np.abs(flat["sup_v"]) > 0)
    if all_zero:
        report.add(f"Note: {ZERO_NOTE}.", "")

    _fig_flat(flat, fits, out_dir, figures)

    def optional(loader, name):
        try:
            return loader(run_dir, name)
        except MissingArtifactError as exc:
            warnings.append(str(exc))
            return None

    pointwise = optional(load_csv, "pointwise.csv")
    if pointwise is not None:
        _fig_trackers(pointwise, fits, out_dir, figures)

    energies = optional(load_csv, "energies.csv")
    if energies is not None:
        _fig_energies(energies, fits, out_dir, figures)
        _fig_energies(energies, {}, out_dir, figures,
                      cols=("Ewt_g2_w", "Ewt_g05_w"),
                      stem="fig_weighted_energies",
                      title="ghost-weighted energies")

    sources = optional(load_csv, "sources_l2.csv")
    crit = optional(load_json, "criticality.json")
    if sources is not None:
        _fig_criticality(sources, crit, out_dir, figures)

    blowup = optional(load_json, "blowup.json")
    if blowup is not None:
        _fig_blowup(blowup, out_dir, figures)

    if (run_dir / "recon.csv").exists():
        _fig_recon(load_csv(run_dir, "recon.csv"), out_dir, figures)

    _fits_table(report, fits)

    ineq = fits.get("energy_inequalities", {})
    if "all_held" in ineq:
        report.add("## Energy inequalities", "",
                   f"- held within {100 * ineq.get('tol', 0.02):g}% "
                   f"tolerance: **{ineq['all_held']}** "
                   f"({len(ineq.get('rows', []))} ledger rows, "
                   f"s >= {ineq.get('start_s')})", "")
        report.note_source("energy inequality verdict",
                           "fits.json#energy_inequalities.all_held")

    if crit is not None:
        report.add("## Criticality", "")
        for key, entry in sorted(crit.get("sources", {}).items()):
            report.add(f"- {key} source: verdict **{entry.get('verdict')}**")
            report.note_source(f"{key} source verdict",
                               f"criticality.json#sources.{key}.verdict")
        report.add("")

    if blowup is not None:
        report.add("## Blow-up scan", "",
                   "| amplitude | t_star |", "| --- | --- |")
        for row in blowup["rows"]:
            star = "-" if row.get("t_star") is None else fmt(row["t_star"])
            report.add(f"| {row['eps']:g} | {star} |")
            if row.get("t_star") is not None:
                report.note_source(f"t_star({row['eps']:g}) = {star}",
                                   "blowup.json#rows")
        report.add("",
                   f"t_star nonincreasing with amplitude: "
                   f"**{blowup['t_star_nonincreasing']}**", "")
        report.note_source("t_star monotonicity",
                           "blowup.json#t_star_nonincreasing")

    recon_fit = fits.get("reconstruction")
    if recon_fit:
        report.add("## Reconstruction residual", "",
                   f"- final L2: {recon_fit['final_l2']:.3e} "
                   f"(max {recon_fit['max_l2']:.3e})", "")
        report.note_source("reconstruction residual",
                           "fits.json#reconstruction")

    if figures:
        report.add("## Figures", "")
        for name in figures:
            if name.endswith(".svg"):
                report.add(f"![{Path(name).stem}]({name})")
        report.add("")

    if warnings:
        report.add("## Warnings", "")
        for w in warnings:
            report.add(f"- {w}")
        report.add("")

    report_path = out_dir / "report.md"
    report_path.write_text(report.text(), encoding="utf-8")
    return RenderResult(report=report_path, figures=figures,
                        warnings=warnings, provenance=report.provenance)
