"""Run orchestration and artifact persistence.

A run directory is the unit of exchange with every downstream consumer:

    manifest.json     resolved config, grid, version, wall time, blow-up
    energies.csv      curved-slice energies and L2f norms per s
    pointwise.csv     theorem-weighted sup-norms per s
    sources_l2.csv    flat-slice L2 norms of the quadratic sources per t
    flat_series.csv   flat-slice sup norms and discrete energies per t
    recon.csv         decomposition residual per t (co-evolved runs)
    fits.json         every exponent fit, boundedness verdict, inequality
    criticality.json  verdicts for the integrated source norms
    monitors.json     constant-free monitored ratios (run time only)
    snapshots/        raw field dumps at requested times

All CSV/JSON numbers are written with shortest round-trip decimals, so a
rerun with the same config reproduces the bytes exactly; fits.json and
criticality.json are always derived from the on-disk CSV values, which
makes the standalone fit command idempotent by construction.

Wall time in the manifest is the one intentionally nondeterministic
field; byte-level comparisons must drop it.
"""

from __future__ import annotations

import json
import math
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import decay, identities
from ._version import __version__
from .config import T0, RunConfig
from .grid import GridSpec, SystemState, l2_flat, make_grid
from .hyperboloid import (HyperboloidSampler, energy_conformal, energy_em,
                          energy_weighted, l2f_norm)
from .integrator import StepControl, run
from .models import ModelSpec, mms_exact, mms_initial_state

SNAPSHOT_MAGIC = b"WKG1"

ENERGY_COLUMNS = ("s", "E0_w", "E1_v", "Econ_w", "Ewt_g2_w", "Ewt_g05_w",
                  "l2f_v", "l2f_sv_dv", "l2f_dw_st",
                  "l2f_src_wave", "l2f_src_kg")
POINTWISE_COLUMNS = ("s", "sup_tv", "sup_w_thm", "sup_dw_thm")
SOURCES_COLUMNS = ("t", "l2_Fw", "l2_Fv")
FLAT_COLUMNS = ("t", "sup_w", "sup_v", "en_w", "en_v")
RECON_COLUMNS = ("t", "recon_l2", "recon_sup")


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path, columns) -> None:
    """columns: ordered (name, array) pairs; shortest round-trip floats."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(arr, dtype=float) for _, arr in columns]
    n = arrays[0].size if arrays else 0
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(_fmt(arr[i]) for arr in arrays))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path) -> dict:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    names = text[0].split(",")
    rows = [line.split(",") for line in text[1:]]
    out = {}
    for j, name in enumerate(names):
        out[name] = np.array([float(r[j]) for r in rows])
    return out


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_snapshot(path, state: SystemState, grid: GridSpec) -> None:
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", grid.n))
        fh.write(struct.pack("<d", grid.L))
        fh.write(struct.pack("<d", state.t))
        for arr in state.fields():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path):
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad snapshot magic {raw[:4]!r}")
    n = struct.unpack_from("<I", raw, 4)[0]
    L, t = struct.unpack_from("<dd", raw, 8)
    block = n * n * 8
    fields = []
    off = 24
    for _ in range(4):
        arr = np.frombuffer(raw, dtype="<f8", count=n * n, offset=off)
        fields.append(arr.reshape(n, n).copy())
        off += block
    return t, L, n, SystemState(t, *fields)


# ---------------------------------------------------------------------------
# Table assembly.

def energy_table(model: ModelSpec, records) -> dict:
    cols = {name: [] for name in ENERGY_COLUMNS}
    for rec in records:
        cols["s"].append(rec.s)
        cols["E0_w"].append(energy_em(rec, "w", 0.0))
        cols["E1_v"].append(energy_em(rec, "v", 1.0))
        cols["Econ_w"].append(energy_conformal(rec, "w"))
        cols["Ewt_g2_w"].append(energy_weighted(rec, "w", 2.0))
        cols["Ewt_g05_w"].append(energy_weighted(rec, "w", 0.5))
        cols["l2f_v"].append(l2f_norm(rec, "v", "phi"))
        cols["l2f_sv_dv"].append(l2f_norm(rec, "v", "st_dphi"))
        cols["l2f_dw_st"].append(l2f_norm(rec, "w", "st_dphi"))
        try:
            src = identities.record_source_norms(model, rec)
        except ValueError:
            src = {"wave": 0.0, "kg": 0.0}
        cols["l2f_src_wave"].append(src["wave"])
        cols["l2f_src_kg"].append(src["kg"])
    return {k: np.array(v) for k, v in cols.items()}


def theorem_for(kind: str) -> str:
    return "Thm2" if kind in ("model-ii", "swapped-ii") else "Thm1"


def pointwise_table(records, theorem: str) -> dict:
    table = decay.tracker_table(records, theorem)
    return {
        "s": table["s"],
        "sup_tv": table["sup_tv"],
        "sup_w_thm": table["sup_w_thm"],
        "sup_dw_thm": table["sup_dw_thm"],
    }


def fits_payload(energies: dict, pointwise: dict, flat: dict,
                 recon: Optional[dict], theorem: str) -> dict:
    payload = {"theorem": theorem, "version": __version__}
    s = pointwise["s"]
    trackers = {k: pointwise[k] for k in
                ("sup_tv", "sup_w_thm", "sup_dw_thm")}
    halves = {}
    for col in ("E0_w", "E1_v", "Econ_w"):
        halves[col + "_half"] = np.sqrt(np.maximum(energies[col], 0.0))
    if s.size:
        payload["decay"] = decay.decay_suite(s, trackers, halves,
                                             decay.FIT_WINDOW_S)
    else:
        payload["decay"] = {"note": "no complete curved slices"}
    baselines = {}
    for col in ("sup_w", "sup_v"):
        try:
            fit = decay.fit_power_law(flat["t"], flat[col],
                                      decay.FIT_WINDOW_T, col + "_flat")
            baselines[col + "_flat"] = fit.to_dict()
        except ValueError as exc:
            baselines[col + "_flat"] = {"quantity": col + "_flat",
                                        "valid": False, "note": str(exc)}
    payload["baselines"] = baselines
    if s.size >= 2:
        payload["energy_inequalities"] = identities.check_energy_inequalities(
            energies["s"], energies["E0_w"], energies["E1_v"],
            energies["Econ_w"], energies["l2f_src_wave"],
            energies["l2f_src_kg"])
    else:
        payload["energy_inequalities"] = {
            "note": "needs at least two curved slices"}
    if recon is not None and len(recon["t"]):
        payload["reconstruction"] = {
            "final_l2": float(recon["recon_l2"][-1]),
            "max_l2": float(np.max(recon["recon_l2"])),
            "final_sup": float(recon["recon_sup"][-1]),
        }
    return payload


def criticality_payload(sources: dict, kind: str) -> dict:
    payload = {"model": kind, "sources": {}}
    for key, col in (("wave", "l2_Fw"), ("kg", "l2_Fv")):
        norms = np.asarray(sources[col] if col in sources
                           else sources["l2_fw" if key == "wave" else "l2_fv"],
                           dtype=float)
        t = np.asarray(sources["t"], dtype=float)
        if norms.size < decay.MIN_SAMPLES or float(np.max(norms)) == 0.0:
            payload["sources"][key] = {"verdict": "none",
                                       "note": "source absent or too short"}
            continue
        verdict = decay.criticality_probe(t, norms, source=key)
        payload["sources"][key] = verdict.to_dict()
    return payload


def monitors_payload(model: ModelSpec, grid, records, energies: dict,
                     final_state) -> dict:
    payload = {"ks": [], "conformal_l2": [], "run_mode_residuals": None}
    for rec in records:
        entry = identities.klainerman_sobolev_monitor(rec, "v")
        payload["ks"].append(entry)
    if records and energies["s"].size == len(records):
        payload["conformal_l2"] = identities.conformal_l2_monitor(
            records, "w", energies["Econ_w"])
    if final_state is not None:
        try:
            payload["run_mode_residuals"] = identities.grid_residual_norms(
                model, grid, final_state)
        except ValueError:
            pass
    return payload


# ---------------------------------------------------------------------------
# The run itself.

@dataclass
class RunOutput:
    config: RunConfig
    result: object
    energies: dict
    pointwise: dict
    fits: dict
    criticality: dict
    monitors: dict
    manifest: dict
    out_dir: Optional[Path] = None
    skipped_records: int = 0


def execute_run(cfg: RunConfig, out_dir=None, *, with_records: bool = True,
                with_monitors: bool = True) -> RunOutput:
    t_start = time.perf_counter()
    grid = cfg.make_grid()
    model = cfg.model_spec()
    state = cfg.initial_state(grid)
    control = cfg.control()
    sampler = HyperboloidSampler(grid, cfg.s_values()) if with_records else None

    snap_dir = None
    pending = sorted(float(ts) for ts in cfg.snapshot_times)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if pending:
            snap_dir = out_dir / "snapshots"
            snap_dir.mkdir(exist_ok=True)

    def on_step(st, step):
        while pending and st.t >= pending[0] - 1e-9:
            pending.pop(0)
            if snap_dir is not None:
                write_snapshot(snap_dir / f"t_{st.t:.2f}.bin", st, grid)

    result = run(model, grid, state, control, sampler=sampler,
                 coevolve=cfg.coevolve,
                 on_step=on_step if (pending and snap_dir is not None) else None)

    records = [rec for rec in result.records if rec.complete]
    skipped = len(result.records) - len(records)
    energies = energy_table(model, records)
    theorem = theorem_for(cfg.model)
    pointwise = pointwise_table(records, theorem)
    recon = result.aux_series if cfg.coevolve else None

    if out_dir is not None:
        write_csv(out_dir / "energies.csv",
                  [(c, energies[c]) for c in ENERGY_COLUMNS])
        write_csv(out_dir / "pointwise.csv",
                  [(c, pointwise[c]) for c in POINTWISE_COLUMNS])
        write_csv(out_dir / "sources_l2.csv",
                  [("t", result.sources["t"]),
                   ("l2_Fw", result.sources["l2_fw"]),
                   ("l2_Fv", result.sources["l2_fv"])])
        write_csv(out_dir / "flat_series.csv",
                  [(c, result.flat[c]) for c in FLAT_COLUMNS])
        if recon is not None:
            write_csv(out_dir / "recon.csv",
                      [("t", recon["t"]),
                       ("recon_l2", recon["recon_l2"]),
                       ("recon_sup", recon["recon_sup"])])
        # always derive fits from the persisted bytes
        fits, crit = recompute_fits(out_dir, theorem=theorem,
                                    kind=cfg.model)
    else:
        fits = fits_payload(energies, pointwise, result.flat, recon, theorem)
        crit = criticality_payload(result.sources, cfg.model)

    monitors = {}
    if with_monitors and with_records:
        monitors = monitors_payload(model, grid, records, energies,
                                    result.final_state if result.ok else None)
        if out_dir is not None:
            write_json(out_dir / "monitors.json", monitors)

    manifest = {
        "config": cfg.resolved(),
        "model": cfg.model,
        "grid": {"n": grid.n, "L": grid.L, "order": grid.stencil_order,
                 "h": grid.h},
        "eps": {"eps": cfg.eps, "amp": cfg.amp,
                "amplitude": cfg.eps * cfg.amp},
        "t0": T0,
        "t_max": cfg.t_max,
        "dt": control.dt(grid),
        "s_grid": list(cfg.s_values()),
        "version": __version__,
        "steps": result.steps,
        "t_end": result.t_end,
        "ok": result.ok,
        "blowup": {"detected": result.blowup.detected,
                   "t_star": result.blowup.t_star,
                   "trigger": result.blowup.trigger},
        "records_complete": len(records),
        "records_skipped": skipped,
        "wall_time_s": time.perf_counter() - t_start,
    }
    if out_dir is not None:
        manifest["artifacts"] = sorted(
            str(p.relative_to(out_dir)) for p in out_dir.rglob("*")
            if p.is_file() and p.name != "manifest.json")
        write_json(out_dir / "manifest.json", manifest)

    return RunOutput(config=cfg, result=result, energies=energies,
                     pointwise=pointwise, fits=fits, criticality=crit,
                     monitors=monitors, manifest=manifest, out_dir=out_dir,
                     skipped_records=skipped)


def recompute_fits(run_dir, theorem: Optional[str] = None,
                   kind: Optional[str] = None):
    """Rebuild fits.json and criticality.json from a run directory's CSVs.

    Reading the shortest round-trip decimals restores the exact float64
    values, so rerunning this command is byte-stable.
    """
    run_dir = Path(run_dir)
    if theorem is None or kind is None:
        with open(run_dir / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        kind = kind or manifest["model"]
        theorem = theorem or theorem_for(kind)
    energies = read_csv(run_dir / "energies.csv")
    pointwise = read_csv(run_dir / "pointwise.csv")
    flat = read_csv(run_dir / "flat_series.csv")
    sources = read_csv(run_dir / "sources_l2.csv")
    recon_path = run_dir / "recon.csv"
    recon = read_csv(recon_path) if recon_path.exists() else None
    fits = fits_payload(energies, pointwise, flat, recon, theorem)
    crit = criticality_payload(sources, kind)
    write_json(run_dir / "fits.json", fits)
    write_json(run_dir / "criticality.json", crit)
    return fits, crit


# ---------------------------------------------------------------------------
# Scans and ladders.

def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("WKG_THREADS")
    if env:
        cap = max(1, int(env))
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_jobs, cap))


def blowup_scan(kind: str, amps, *, eps: float = 1.0, t_max: float = 50.0,
                n: int = 513, L: Optional[float] = None, order: int = 2,
                out_path=None) -> dict:
    """Run one amplitude ladder to blow-up or t_max; no curved slices.

    Rows are assembled in amplitude order whatever the worker schedule,
    so the artifact is byte-stable under WKG_THREADS.
    """
    amps = sorted(float(a) for a in amps)
    if L is None:
        L = t_max + 2.0

    def one(amp: float) -> dict:
        cfg = RunConfig(
            model=kind, eps=eps, amp=amp, t_max=t_max,
            grid_n=n, grid_l=L, grid_order=order,
            pab="time-squared", pa=[1.0, 0.0, 0.0],
            s_step=0.5, cfl=0.25, record_stride=8,
            snapshot_times=[], coevolve=False)
        out = execute_run(cfg, None, with_records=False,
                          with_monitors=False)
        rep = out.result.blowup
        return {
            "eps": eps * amp,
            "t_star": rep.t_star if rep.detected else None,
            "trigger": rep.trigger,
            "t_end": out.result.t_end,
        }

    workers = _worker_count(len(amps))
    if workers == 1 or len(amps) == 1:
        rows = [one(a) for a in amps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, amps))
    table = decay.blowup_table(rows)
    table.update({"model": kind, "t_max": t_max, "base_eps": eps,
                  "grid": {"n": n, "L": L, "order": order}})
    if out_path is not None:
        write_json(out_path, table)
    return table


def mms_convergence(kind: str, ns=(129, 257, 513), *, L: float = 8.0,
                    t_end: float = 4.0, order: int = 2) -> dict:
    """Grid ladder against the manufactured solution; observed order is
    log2 of consecutive flat L^2 error ratios."""
    errors = []
    for n in ns:
        grid = make_grid(L, int(n), order)
        model = ModelSpec(kind)
        state = mms_initial_state(kind, grid, T0)
        control = StepControl(t_max=t_end)
        result = run(model, grid, state, control)
        comp = "w" if kind == "mms-wave" else "v"
        u_num = result.final_state.u_w if comp == "w" \
            else result.final_state.u_v
        u_exact, _ = mms_exact(kind, result.t_end, grid)
        errors.append(l2_flat(u_num - u_exact, grid))
    orders = [float(np.log2(errors[i] / errors[i + 1]))
              for i in range(len(errors) - 1)]
    return {"kind": kind, "ns": [int(n) for n in ns],
            "errors": errors, "orders": orders,
            "L": L, "t_end": t_end, "stencil_order": order}
