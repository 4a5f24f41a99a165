"""Finite-difference laboratory for coupled wave/Klein-Gordon systems
on 2d grids, with curved-slice energy diagnostics, exact-identity
verification, decay-exponent fits and blow-up scans."""

from ._version import __version__
from .config import RunConfig, from_dict, parse_config
from .decay import (CriticalityVerdict, DecayFit, blowup_table,
                    criticality_probe, decay_suite, fit_power_law,
                    tracker_table)
from .grid import (GridSpec, InitialProfile, SystemState, bump4,
                   initial_data, l2_flat, make_grid)
from .hyperboloid import (HyperboloidRecord, HyperboloidSampler,
                          energy_conformal, energy_em, energy_weighted,
                          l2f_norm, s_ladder, weighted_sup)
from .identities import (check_energy_inequalities, run_analytic_suite,
                         report_dict)
from .integrator import (AuxPair, BlowupReport, RunResult, StepControl,
                         detect_blowup, flat_energy, make_aux_start,
                         reconstruction_residual, run, run_riccati, step_rk4)
from .models import (HAS_KG, KINDS, PAB_PRESETS, ModelSpec, eval_rhs,
                     mms_exact, mms_forcing, mms_initial_state)
from .runner import (blowup_scan, execute_run, mms_convergence,
                     read_snapshot, recompute_fits, write_snapshot)

__all__ = [
    "__version__",
    "AuxPair", "BlowupReport", "CriticalityVerdict", "DecayFit",
    "GridSpec", "HAS_KG", "HyperboloidRecord", "HyperboloidSampler",
    "InitialProfile", "KINDS", "ModelSpec", "PAB_PRESETS", "RunConfig",
    "RunResult", "StepControl", "SystemState",
    "blowup_scan", "blowup_table", "bump4", "check_energy_inequalities",
    "criticality_probe", "decay_suite", "detect_blowup", "energy_conformal",
    "energy_em", "energy_weighted", "eval_rhs", "execute_run",
    "fit_power_law", "flat_energy", "from_dict", "initial_data", "l2_flat",
    "l2f_norm", "make_aux_start", "make_grid", "mms_convergence",
    "mms_exact", "mms_forcing", "mms_initial_state", "parse_config",
    "read_snapshot", "recompute_fits", "reconstruction_residual",
    "report_dict", "run", "run_analytic_suite", "run_riccati", "s_ladder",
    "step_rk4", "tracker_table", "weighted_sup", "write_snapshot",
]
