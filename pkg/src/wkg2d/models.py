"""Model kinds and their quadratic sources.

Every system here is a pair of second-order equations written with the
d'Alembertian on the left in the signature (-,+,+) convention, so the time
stepper always sees

    dt u = p,        dt p = Lap u - m^2 u + F,

with m = 0 for the wave-type component `w` and m = 1 for the Klein-Gordon
component `v`.  ``eval_rhs`` returns the pair (F_w, F_v) for a state; the
linear part is applied by the integrator.

Source catalog (time index 0, spatial indices 1, 2; d0 = p, da = stencil):

  model-i      F_w = v^2                   F_v = P^{ab} da w db w
  swapped-i    F_w = P^{ab} da w db w      F_v = v^2
  model-ii     F_w = 2 v P^a da v          F_v = w^2
  swapped-ii   F_w = w^2                   F_v = 2 v P^a da v
  nullform-2d  F_w = (dt w)^2 - |grad w|^2 (single wave equation)
  hom-wave, hom-kg                         no sources
  mms-wave, mms-kg                         prescribed forcing on one side

The swapped kinds exchange the two sources of the parent system nodewise;
the quadratic undifferentiated wave source w^2 of swapped-ii is the
classical finite-time blow-up driver in two space dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, SystemState, partial_x

KINDS = (
    "hom-wave", "hom-kg",
    "model-i", "model-ii",
    "swapped-i", "swapped-ii",
    "nullform-2d",
    "mms-wave", "mms-kg",
)

# Kinds whose Klein-Gordon component actually carries data / sources.
HAS_KG = {"hom-kg", "model-i", "model-ii", "swapped-i", "swapped-ii", "mms-kg"}

PAB_PRESETS = {
    # generic non-null choice: picks out (dt w)^2
    "time-squared": np.diag([1.0, 0.0, 0.0]),
    # metric contraction: P^{ab} da w db w equals the null form Q0(w, w)
    "null-q0": np.diag([-1.0, 1.0, 1.0]),
}

MMS_OMEGA = 2.0
MMS_AMP = 1.0


@dataclass
class ModelSpec:
    """A model kind plus its quadratic-form coefficients.

    ``pab`` (symmetric 3x3) feeds the wave-gradient source of model-i and
    swapped-i; ``pa`` (3-vector) feeds the differentiated Klein-Gordon
    source of model-ii and swapped-ii.  Masses are fixed: 0 on the wave
    side, 1 wherever a Klein-Gordon component exists.
    """

    kind: str
    pab: np.ndarray = field(default_factory=lambda: PAB_PRESETS["time-squared"].copy())
    pa: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    mass_w: float = 0.0
    mass_v: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        self.pab = np.asarray(self.pab, dtype=float)
        self.pa = np.asarray(self.pa, dtype=float)
        if self.pab.shape != (3, 3):
            raise ValueError("pab must be a 3x3 matrix over (t, x1, x2)")
        if not np.array_equal(self.pab, self.pab.T):
            raise ValueError("pab must be symmetric")
        if self.pa.shape != (3,):
            raise ValueError("pa must be a 3-vector over (t, x1, x2)")

    @property
    def forced_component(self):
        if self.kind == "mms-wave":
            return "w"
        if self.kind == "mms-kg":
            return "v"
        return None


@dataclass
class RhsOutput:
    f_w: np.ndarray
    f_v: np.ndarray


def _zeros(grid: GridSpec) -> np.ndarray:
    return np.zeros(grid.shape)


def gradient_square(pab, u, p, grid):
    """P^{ab} da u db u with d0 u = p and spatial stencils elsewhere."""
    d = [p, None, None]
    need_spatial = np.any(pab[1:, :] != 0.0) or np.any(pab[:, 1:] != 0.0)
    if need_spatial:
        d[1] = partial_x(u, grid, 1)
        d[2] = partial_x(u, grid, 2)
    out = _zeros(grid)
    for a in range(3):
        for b in range(a, 3):
            c = pab[a, b]
            if c == 0.0:
                continue
            w = c if a == b else 2.0 * c
            out = out + w * d[a] * d[b]
    return out


def derivative_source(pa, u, p, grid):
    """P^a da(u^2) = 2 u (P^0 p + P^1 d1 u + P^2 d2 u)."""
    acc = pa[0] * p
    if pa[1] != 0.0:
        acc = acc + pa[1] * partial_x(u, grid, 1)
    if pa[2] != 0.0:
        acc = acc + pa[2] * partial_x(u, grid, 2)
    return 2.0 * u * acc


def mms_exact(kind: str, t: float, grid: GridSpec):
    """Closed-form target field cos(w t) exp(-r^2) and its time derivative."""
    if kind not in ("mms-wave", "mms-kg"):
        raise ValueError(f"not a forced kind: {kind!r}")
    envelope = MMS_AMP * np.exp(-grid.r**2)
    u = np.cos(MMS_OMEGA * t) * envelope
    ut = -MMS_OMEGA * np.sin(MMS_OMEGA * t) * envelope
    return u, ut


def mms_forcing(kind: str, t: float, grid: GridSpec) -> np.ndarray:
    """Forcing that makes the target an exact solution.

    With u* = cos(w t) exp(-r^2) and Lap u* = (4 r^2 - 4) u*, the residual
    dt^2 u* - Lap u* + m^2 u* equals (-w^2 + m^2 + 4 - 4 r^2) u*.
    """
    if kind == "mms-wave":
        m2 = 0.0
    elif kind == "mms-kg":
        m2 = 1.0
    else:
        raise ValueError(f"not a forced kind: {kind!r}")
    r2 = grid.r**2
    coeff = -MMS_OMEGA**2 + m2 + 4.0 - 4.0 * r2
    return coeff * MMS_AMP * np.cos(MMS_OMEGA * t) * np.exp(-r2)


def eval_rhs(model: ModelSpec, state: SystemState, grid: GridSpec) -> RhsOutput:
    """Quadratic sources (F_w, F_v) for the given state."""
    kind = model.kind
    if kind in ("hom-wave", "hom-kg"):
        return RhsOutput(_zeros(grid), _zeros(grid))
    if kind == "model-i":
        return RhsOutput(
            state.u_v * state.u_v,
            gradient_square(model.pab, state.u_w, state.p_w, grid),
        )
    if kind == "swapped-i":
        return RhsOutput(
            gradient_square(model.pab, state.u_w, state.p_w, grid),
            state.u_v * state.u_v,
        )
    if kind == "model-ii":
        return RhsOutput(
            derivative_source(model.pa, state.u_v, state.p_v, grid),
            state.u_w * state.u_w,
        )
    if kind == "swapped-ii":
        return RhsOutput(
            state.u_w * state.u_w,
            derivative_source(model.pa, state.u_v, state.p_v, grid),
        )
    if kind == "nullform-2d":
        d1 = partial_x(state.u_w, grid, 1)
        d2 = partial_x(state.u_w, grid, 2)
        return RhsOutput(state.p_w * state.p_w - d1 * d1 - d2 * d2, _zeros(grid))
    if kind == "mms-wave":
        return RhsOutput(mms_forcing(kind, state.t, grid), _zeros(grid))
    if kind == "mms-kg":
        return RhsOutput(_zeros(grid), mms_forcing(kind, state.t, grid))
    raise ValueError(f"unknown model kind {kind!r}")


def _gradient_square_values(pab, d):
    out = np.zeros_like(d[0])
    for a in range(3):
        for b in range(a, 3):
            c = pab[a, b]
            if c == 0.0:
                continue
            w = c if a == b else 2.0 * c
            out = out + w * d[a] * d[b]
    return out


def source_values(model: ModelSpec, fields_w: dict, fields_v: dict):
    """Sources evaluated from sampled derivative values.

    ``fields_*`` carry nodewise arrays under keys phi/dt/d1/d2, as stored
    on a curved-slice record; no stencils are taken, so this works on
    scattered samples.  Forced kinds are rejected: their sources depend
    on position explicitly, not on the fields.
    """
    kind = model.kind
    zero = np.zeros_like(fields_w["phi"])
    dw = (fields_w["dt"], fields_w["d1"], fields_w["d2"])
    dv = (fields_v["dt"], fields_v["d1"], fields_v["d2"])
    v = fields_v["phi"]
    w = fields_w["phi"]
    if kind in ("hom-wave", "hom-kg"):
        return zero, zero
    if kind == "model-i":
        return v * v, _gradient_square_values(model.pab, dw)
    if kind == "swapped-i":
        return _gradient_square_values(model.pab, dw), v * v
    deriv = 2.0 * v * (model.pa[0] * dv[0] + model.pa[1] * dv[1]
                       + model.pa[2] * dv[2])
    if kind == "model-ii":
        return deriv, w * w
    if kind == "swapped-ii":
        return w * w, deriv
    if kind == "nullform-2d":
        return dw[0] * dw[0] - dw[1] * dw[1] - dw[2] * dw[2], zero
    raise ValueError(f"no field-local source for kind {kind!r}")


def mms_initial_state(kind: str, grid: GridSpec, t0: float = 2.0) -> SystemState:
    """Exact-solution data for a forced run; the idle component is zero."""
    u, ut = mms_exact(kind, t0, grid)
    z = _zeros(grid)
    if kind == "mms-wave":
        return SystemState(t=float(t0), u_w=u, p_w=ut, u_v=z.copy(), p_v=z.copy())
    return SystemState(t=float(t0), u_w=z.copy(), p_w=z.copy(), u_v=u, p_v=ut)
