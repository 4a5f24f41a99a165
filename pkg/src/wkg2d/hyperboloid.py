"""Sampling on hyperboloids t^2 - r^2 = s^2 and the energies living there.

A slice of constant hyperboloidal time s crosses the cone {r < t - 1}
over the disk r < (s^2 - 1)/2, where the crossing time is
t_h(x) = sqrt(s^2 + r^2).  The run never stops to interpolate a whole
hyperboloid; instead each node is filled the moment the time integration
passes its crossing time, by cubic Hermite interpolation between the two
buffered slices (value and time-derivative endpoints are available for
the field, its velocity, and its first spatial derivatives).  The error
of this reconstruction is O(dt^4) and refines with the step.

A record for s is complete once t reaches (s^2 + 1)/2, the crossing time
at the cone edge; the largest fully covered s for a run ending at t_max
is sqrt(2 t_max - 1).

Energies evaluated on a record use true-time weights s/t_h and x^a/t_h
nodewise and plain h^2 quadrature; integrands vanish smoothly toward the
mask edge for cone-supported fields, so no partial-cell weighting is
needed.

Once a record is complete its first-derivative channels are rebuilt from
the in-slice gradient of the recorded values (see
rebuild_ambient_gradients); the hyperboloid stretches outgoing fronts by
a factor of t in x, so that route stays accurate where stencils on time
slices lose the tangential cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, det_sum, partial_x

COMPONENTS = ("w", "v")
FIELD_KEYS = ("phi", "dt", "d1", "d2")


def s_ladder(t_max: float, start: float = 2.0, step: float = 0.5) -> list:
    """Hyperboloidal times whose cone patch is fully covered by t_max."""
    s_max = math.sqrt(2.0 * t_max - 1.0)
    out = []
    s = start
    while s <= s_max + 1e-12:
        out.append(round(s, 12))
        s += step
    return out


@dataclass
class HyperboloidRecord:
    """Fields interpolated onto one hyperboloid, restricted to the cone.

    Arrays are indexed by masked-node ordinal in row-major grid order;
    ``idx`` maps ordinals back to flat grid indices.
    """

    s: float
    grid: GridSpec
    idx: np.ndarray
    t_h: np.ndarray
    r: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    fields: dict
    filled: int = 0
    # crossing bookkeeping (sorted by t_h)
    order: np.ndarray = None
    t_sorted: np.ndarray = None
    gradients_rebuilt: bool = False

    @property
    def n_nodes(self) -> int:
        return int(self.idx.size)

    @property
    def complete(self) -> bool:
        return self.filled >= self.n_nodes

    def comp(self, name: str) -> dict:
        return self.fields[name]


def _new_record(grid: GridSpec, s: float) -> HyperboloidRecord:
    radius = 0.5 * (s * s - 1.0)
    mask = grid.r < radius
    idx = np.flatnonzero(mask.ravel())
    r = grid.r.ravel()[idx]
    t_h = np.sqrt(s * s + r * r)
    order = np.argsort(t_h, kind="stable")
    fields = {
        c: {k: np.zeros(idx.size) for k in FIELD_KEYS} for c in COMPONENTS
    }
    return HyperboloidRecord(
        s=s, grid=grid, idx=idx, t_h=t_h, r=r,
        x1=grid.X1.ravel()[idx], x2=grid.X2.ravel()[idx],
        fields=fields, order=order, t_sorted=t_h[order],
    )


def _hermite(theta, f0, f1, g0, g1, dt):
    th2 = theta * theta
    th3 = th2 * theta
    h00 = 2.0 * th3 - 3.0 * th2 + 1.0
    h01 = -2.0 * th3 + 3.0 * th2
    h10 = th3 - 2.0 * th2 + theta
    h11 = th3 - th2
    return h00 * f0 + h01 * f1 + dt * (h10 * g0 + h11 * g1)


# endpoint (value, slope) pairs for each stored field of a component slice
_PAIRS = {
    "phi": ("u", "p"),
    "dt": ("p", "dtp"),
    "d1": ("d1u", "d1p"),
    "d2": ("d2u", "d2p"),
}


def rebuild_ambient_gradients(rec: HyperboloidRecord) -> None:
    """Replace the d1/d2 channels of a complete record with values derived
    from the in-slice gradient of phi.

    By the chain rule through t_h, the in-slice derivative of the recorded
    field equals (x^a/t)*dt + d_a, the tangential combination every energy
    here is built from.  For an outgoing front the restricted field varies
    over O(t) cells in x even when the ambient field varies over a few, so
    stenciling the recorded values resolves the tangential derivative where
    stencils taken on time slices cannot; the ambient gradient follows by
    removing the velocity part.  Downstream recombination then recovers the
    in-slice value to rounding instead of amplifying front truncation error
    under t^2-weighted integrands.

    Nodes outside the mask are treated as zero, exact for cone-supported
    fields up to the scheme's tiny exterior tails.
    """
    if rec.gradients_rebuilt or not rec.complete:
        return
    grid = rec.grid
    ratio1 = rec.x1 / rec.t_h
    ratio2 = rec.x2 / rec.t_h
    for cname in COMPONENTS:
        comp = rec.fields[cname]
        full = np.zeros(grid.n * grid.n)
        full[rec.idx] = comp["phi"]
        full = full.reshape(grid.n, grid.n)
        tang1 = partial_x(full, grid, 1).ravel()[rec.idx]
        tang2 = partial_x(full, grid, 2).ravel()[rec.idx]
        comp["d1"] = tang1 - ratio1 * comp["dt"]
        comp["d2"] = tang2 - ratio2 * comp["dt"]
    rec.gradients_rebuilt = True


class HyperboloidSampler:
    """Accumulates hyperboloid records while a run advances."""

    def __init__(self, grid: GridSpec, s_values):
        self.grid = grid
        self.records = [_new_record(grid, float(s)) for s in s_values]

    def begin(self, slice0):
        """Fill nodes whose crossing time coincides with the start slice."""
        for rec in self.records:
            k = int(np.searchsorted(rec.t_sorted, slice0.t, side="right"))
            if k <= rec.filled:
                continue
            ordi = rec.order[rec.filled:k]
            flat = rec.idx[ordi]
            for cname in COMPONENTS:
                cs = getattr(slice0, cname)
                rec.fields[cname]["phi"][ordi] = cs.u.ravel()[flat]
                rec.fields[cname]["dt"][ordi] = cs.p.ravel()[flat]
                rec.fields[cname]["d1"][ordi] = cs.d1u.ravel()[flat]
                rec.fields[cname]["d2"][ordi] = cs.d2u.ravel()[flat]
            rec.filled = k
            if rec.complete:
                rebuild_ambient_gradients(rec)

    def advance(self, slice_a, slice_b):
        """Interpolate nodes crossed during (slice_a.t, slice_b.t]."""
        t1, t2 = slice_a.t, slice_b.t
        dt = t2 - t1
        if dt <= 0:
            return
        for rec in self.records:
            if rec.complete:
                continue
            k = int(np.searchsorted(rec.t_sorted, t2, side="right"))
            if k <= rec.filled:
                continue
            ordi = rec.order[rec.filled:k]
            flat = rec.idx[ordi]
            theta = (rec.t_h[ordi] - t1) / dt
            for cname in COMPONENTS:
                ca = getattr(slice_a, cname)
                cb = getattr(slice_b, cname)
                for key, (vk, sk) in _PAIRS.items():
                    f0 = getattr(ca, vk).ravel()[flat]
                    f1 = getattr(cb, vk).ravel()[flat]
                    g0 = getattr(ca, sk).ravel()[flat]
                    g1 = getattr(cb, sk).ravel()[flat]
                    rec.fields[cname][key][ordi] = _hermite(theta, f0, f1, g0, g1, dt)
            rec.filled = k
            if rec.complete:
                rebuild_ambient_gradients(rec)


# ---------------------------------------------------------------------------
# Energies and norms on a record.  All integrals are h^2 times a
# deterministic sum over masked nodes.

class IncompleteRecordError(ValueError):
    """Raised when an energy is requested on a partially filled record."""


def _quad(record: HyperboloidRecord, values: np.ndarray) -> float:
    if not record.complete:
        raise IncompleteRecordError(
            f"record s={record.s} has {record.filled}/{record.n_nodes} "
            "nodes filled")
    h = record.grid.h
    return h * h * det_sum(values)


def _boosted_grad_sq(record: HyperboloidRecord, comp: dict):
    """Sum over a of ((x^a/t) dt phi + da phi)^2, the squared
    hyperboloid-tangential derivatives."""
    t = record.t_h
    b1 = (record.x1 / t) * comp["dt"] + comp["d1"]
    b2 = (record.x2 / t) * comp["dt"] + comp["d2"]
    return b1 * b1 + b2 * b2


def energy_em(record: HyperboloidRecord, component: str, mass: float) -> float:
    """Hyperboloidal energy: ((s/t) dt phi)^2 + tangential gradients
    + (m phi)^2, integrated with the flat measure."""
    comp = record.comp(component)
    t = record.t_h
    core = ((record.s / t) * comp["dt"]) ** 2 + _boosted_grad_sq(record, comp)
    if mass:
        core = core + (mass * comp["phi"]) ** 2
    return _quad(record, core)


def energy_conformal(record: HyperboloidRecord, component: str) -> float:
    """Conformal energy: (s * tangential gradient)^2 + (K phi + phi)^2,
    with K = (t + r^2/t) dt + 2 x^a da realized in true-time variables."""
    comp = record.comp(component)
    t = record.t_h
    s = record.s
    tang = _boosted_grad_sq(record, comp)
    kphi = (t + record.r**2 / t) * comp["dt"] \
        + 2.0 * (record.x1 * comp["d1"] + record.x2 * comp["d2"])
    return _quad(record, s * s * tang + (kphi + comp["phi"]) ** 2)


def energy_weighted(record: HyperboloidRecord, component: str, gamma: float,
                    mass: float = 0.0) -> float:
    """Ghost-weighted energy with weight (t - r)^(-gamma); the gamma -> 0
    limit is the plain hyperboloidal energy."""
    comp = record.comp(component)
    t = record.t_h
    core = ((record.s / t) * comp["dt"]) ** 2 + _boosted_grad_sq(record, comp)
    if mass:
        core = core + (mass * comp["phi"]) ** 2
    return _quad(record, (t - record.r) ** (-gamma) * core)


L2F_EXPRESSIONS = ("phi", "dphi", "st_dphi", "phi_sq")


def l2f_norm(record: HyperboloidRecord, component: str, expression: str) -> float:
    """Flat-measure L^2 norm of a cataloged expression on the record."""
    comp = record.comp(component)
    if expression == "phi":
        vals = comp["phi"] ** 2
    elif expression == "dphi":
        vals = comp["dt"] ** 2 + comp["d1"] ** 2 + comp["d2"] ** 2
    elif expression == "st_dphi":
        st2 = (record.s / record.t_h) ** 2
        vals = st2 * (comp["dt"] ** 2 + comp["d1"] ** 2 + comp["d2"] ** 2)
    elif expression == "phi_sq":
        vals = comp["phi"] ** 4
    else:
        raise ValueError(f"unknown expression id {expression!r}; "
                         f"known: {L2F_EXPRESSIONS}")
    return math.sqrt(_quad(record, vals))


def l2f_of_values(record: HyperboloidRecord, values: np.ndarray) -> float:
    """Flat L^2 norm of an arbitrary nodewise expression on the record."""
    return math.sqrt(_quad(record, np.asarray(values) ** 2))


def weighted_sup(record: HyperboloidRecord, component: str, target: str,
                 t_pow: float, tr_pow: float) -> float:
    """sup over the record of t^t_pow (t-r)^tr_pow |target|, target being
    the field value or the euclidean size of its first derivatives."""
    if not record.complete:
        raise IncompleteRecordError(
            f"record s={record.s} has {record.filled}/{record.n_nodes} "
            "nodes filled")
    comp = record.comp(component)
    if target == "phi":
        mag = np.abs(comp["phi"])
    elif target == "dphi":
        mag = np.sqrt(comp["dt"] ** 2 + comp["d1"] ** 2 + comp["d2"] ** 2)
    else:
        raise ValueError(f"unknown target {target!r}; use 'phi' or 'dphi'")
    if mag.size == 0:
        return 0.0
    t = record.t_h
    weight = t ** t_pow * (t - record.r) ** tr_pow
    return float(np.max(weight * mag))
