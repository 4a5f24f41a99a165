"""Run configuration: JSON documents validated against fixed defaults.

Unknown keys are rejected rather than ignored, so a typo cannot silently
fall back to a default.  The resolved configuration is echoed verbatim
into the run manifest; re-parsing that echo must reproduce the run.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, InitialProfile, initial_data, make_grid
from .hyperboloid import s_ladder
from .integrator import StepControl
from .models import HAS_KG, KINDS, PAB_PRESETS, ModelSpec, mms_initial_state

T0 = 2.0

DEFAULTS = {
    "model": "model-i",
    "eps": 0.01,
    "amp": 1.0,
    "t_max": 60.0,
    "grid": {"n": 513, "L": 62.0, "order": 2},
    "pab": "time-squared",
    "pa": [1.0, 0.0, 0.0],
    "s_step": 0.5,
    "cfl": 0.25,
    "record_stride": 1,
    "snapshot_times": [],
    "coevolve": None,
}


class ConfigError(ValueError):
    code = "ConfigError"


class MalformedConfig(ConfigError):
    code = "MalformedConfig"


class UnknownKey(ConfigError):
    code = "UnknownKey"


class OddGridRequired(ConfigError):
    code = "OddGridRequired"


class DomainTooSmall(ConfigError):
    code = "DomainTooSmall"


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    out = {}
    for key, default in defaults.items():
        if key in given and isinstance(default, dict):
            if not isinstance(given[key], dict):
                raise ConfigError(f"config key {path + key!r} must be an object")
            out[key] = _merge(default, given[key], path + key + ".")
        elif key in given:
            out[key] = copy.deepcopy(given[key])
        else:
            out[key] = copy.deepcopy(default)
    for key in given:
        if key not in defaults:
            raise UnknownKey(f"unknown config key {path + key!r}")
    return out


@dataclass
class RunConfig:
    model: str
    eps: float
    amp: float
    t_max: float
    grid_n: int
    grid_l: float
    grid_order: int
    pab: object
    pa: list
    s_step: float
    cfl: float
    record_stride: int
    snapshot_times: list
    coevolve: bool

    def make_grid(self) -> GridSpec:
        return make_grid(self.grid_l, self.grid_n, self.grid_order)

    def model_spec(self) -> ModelSpec:
        pab = PAB_PRESETS[self.pab] if isinstance(self.pab, str) \
            else np.asarray(self.pab, dtype=float)
        return ModelSpec(kind=self.model, pab=pab,
                         pa=np.asarray(self.pa, dtype=float))

    def initial_state(self, grid: GridSpec):
        if self.model in ("mms-wave", "mms-kg"):
            return mms_initial_state(self.model, grid, T0)
        a = self.eps * self.amp
        wave_kind = "zero" if self.model == "hom-kg" else "bump4"
        kg_kind = "bump4" if self.model in HAS_KG else "zero"
        return initial_data(grid,
                            InitialProfile(wave_kind, a),
                            InitialProfile(kg_kind, a), T0)

    def control(self) -> StepControl:
        return StepControl(t_max=self.t_max, cfl=self.cfl,
                           record_stride=self.record_stride)

    def s_values(self):
        return s_ladder(self.t_max, T0, self.s_step)

    def resolved(self) -> dict:
        return {
            "model": self.model,
            "eps": self.eps,
            "amp": self.amp,
            "t_max": self.t_max,
            "grid": {"n": self.grid_n, "L": self.grid_l,
                     "order": self.grid_order},
            "pab": self.pab if isinstance(self.pab, str)
            else [list(row) for row in self.pab],
            "pa": list(self.pa),
            "s_step": self.s_step,
            "cfl": self.cfl,
            "record_stride": self.record_stride,
            "snapshot_times": list(self.snapshot_times),
            "coevolve": self.coevolve,
        }


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise MalformedConfig("config root must be a JSON object")
    merged = _merge(DEFAULTS, data)

    model = merged["model"]
    if model not in KINDS:
        raise ConfigError(
            f"unknown model {model!r}; choose one of {', '.join(KINDS)}")

    grid = merged["grid"]
    n = grid["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError(f"grid.n must be an integer, got {n!r}")
    if n % 2 == 0:
        raise OddGridRequired(
            f"grid.n must be odd so the origin is a node, got {n}")
    if grid["order"] not in (2, 4):
        raise ConfigError(f"grid.order must be 2 or 4, got {grid['order']!r}")

    t_max = float(merged["t_max"])
    if t_max <= T0:
        raise ConfigError(f"t_max must exceed the start time {T0}, got {t_max}")
    L = float(grid["L"])
    if L < t_max + 1.0:
        raise DomainTooSmall(
            f"domain half-width L={L:g} cannot hold the light cone up to "
            f"t_max={t_max:g}; fix: choose L >= t_max + 1")

    eps = float(merged["eps"])
    amp = float(merged["amp"])
    if eps < 0.0 or amp < 0.0:
        raise ConfigError("eps and amp must be nonnegative")
    s_step = float(merged["s_step"])
    if s_step <= 0.0:
        raise ConfigError(f"s_step must be positive, got {s_step}")
    cfl = float(merged["cfl"])
    if not 0.0 < cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfl}")
    stride = merged["record_stride"]
    if not isinstance(stride, int) or isinstance(stride, bool) or stride < 1:
        raise ConfigError(f"record_stride must be a positive integer, got {stride!r}")

    pab = merged["pab"]
    if isinstance(pab, str):
        if pab not in PAB_PRESETS:
            raise ConfigError(
                f"unknown pab preset {pab!r}; presets: "
                f"{', '.join(sorted(PAB_PRESETS))}")
    else:
        arr = np.asarray(pab, dtype=float)
        if arr.shape != (3, 3):
            raise ConfigError("pab must be a preset name or a 3x3 matrix")
    pa = merged["pa"]
    if np.asarray(pa, dtype=float).shape != (3,):
        raise ConfigError("pa must be a 3-vector over (t, x1, x2)")

    snaps = merged["snapshot_times"]
    if not isinstance(snaps, list):
        raise ConfigError("snapshot_times must be a list of times")
    for ts in snaps:
        if not T0 <= float(ts) <= t_max:
            raise ConfigError(
                f"snapshot time {ts} outside [{T0}, {t_max}]")

    coevolve = merged["coevolve"]
    if coevolve is None:
        coevolve = model == "model-ii"
    if not isinstance(coevolve, bool):
        raise ConfigError("coevolve must be true, false or null")

    return RunConfig(
        model=model, eps=eps, amp=amp, t_max=t_max,
        grid_n=n, grid_l=L, grid_order=grid["order"],
        pab=pab, pa=[float(c) for c in pa],
        s_step=s_step, cfl=cfl, record_stride=stride,
        snapshot_times=[float(ts) for ts in snaps],
        coevolve=coevolve,
    )


def parse_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedConfig(f"config {path}: {exc}") from exc
    return from_dict(data)
