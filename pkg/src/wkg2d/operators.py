"""First-order vector fields of the flat cone geometry.

Every operator here is X = c^t dt + c^1 d1 + c^2 d2 with coefficients
that are explicit functions of (t, x1, x2).  Coefficients are kept
symbolic so that commutators can be formed exactly (the commutator of
two first-order operators is again first-order, with coefficients
X(c_Y) - Y(c_X)) and only lambdified at the point of numeric use.

Registry:

    dt, d1, d2      coordinate derivatives
    L1, L2          Lorentz boosts x^a dt + t da
    L0              scaling t dt + x^a da
    omega12         rotation x1 d2 - x2 d1
    K               (t + r^2/t) dt + 2 x^a da
    dperp           dt + (x^a/t) da
    under1, under2  (x^a/t) dt + da, tangent to the hyperboloids

Inside the cone s^2 = t^2 - r^2 > 0, so coefficients with s in them are
written through t and r directly.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .testfuncs import T, X1, X2, canonical_key

_VARS = {"t": T, "1": X1, "2": X2}
_S2 = T**2 - X1**2 - X2**2


def _lambdify(expr):
    return sp.lambdify((T, X1, X2), expr, modules="numpy")


def _broadcast(value, t, x1, x2):
    out = np.asarray(value, dtype=float)
    shape = np.broadcast_shapes(np.shape(t), np.shape(x1), np.shape(x2))
    if out.shape != shape:
        out = np.broadcast_to(out, shape).copy()
    return out


class FirstOrderOp:
    """c^t dt + c^1 d1 + c^2 d2 with symbolic coefficients."""

    def __init__(self, name: str, ct, c1, c2):
        self.name = name
        self.coeffs = (sp.sympify(ct), sp.sympify(c1), sp.sympify(c2))
        self._fns = {}

    def __repr__(self):
        return f"FirstOrderOp({self.name})"

    def _fn(self, slot: int, dkey: str = ""):
        tag = (slot, dkey)
        if tag not in self._fns:
            e = self.coeffs[slot]
            for c in dkey:
                e = sp.diff(e, _VARS[c])
            self._fns[tag] = _lambdify(e)
        return self._fns[tag]

    def coeff_values(self, t, x1, x2, dkey: str = ""):
        return tuple(
            _broadcast(self._fn(i, dkey)(t, x1, x2), t, x1, x2)
            for i in range(3)
        )

    def apply(self, jet: dict, t, x1, x2):
        """X f from a first-order (or higher) jet of f."""
        ct, c1, c2 = self.coeff_values(t, x1, x2)
        return ct * jet["t"] + c1 * jet["1"] + c2 * jet["2"]

    def apply_jet1(self, jet: dict, t, x1, x2) -> dict:
        """First-order jet of X f; needs f's jet to second order."""
        out = {"": self.apply(jet, t, x1, x2)}
        for v in ("t", "1", "2"):
            ct, c1, c2 = self.coeff_values(t, x1, x2)
            dct, dc1, dc2 = self.coeff_values(t, x1, x2, dkey=v)
            out[v] = (
                dct * jet["t"] + dc1 * jet["1"] + dc2 * jet["2"]
                + ct * jet[canonical_key(v + "t")]
                + c1 * jet[canonical_key(v + "1")]
                + c2 * jet[canonical_key(v + "2")]
            )
        return out

    def scaled(self, factor, name: str = "") -> "FirstOrderOp":
        f = sp.sympify(factor)
        return FirstOrderOp(name or f"({factor})*{self.name}",
                            *(f * c for c in self.coeffs))

    def plus(self, other: "FirstOrderOp", name: str = "") -> "FirstOrderOp":
        return FirstOrderOp(name or f"{self.name}+{other.name}",
                            *(a + b for a, b in zip(self.coeffs, other.coeffs)))


def commutator(x: FirstOrderOp, y: FirstOrderOp) -> FirstOrderOp:
    """[X, Y] as a first-order operator, formed symbolically."""
    coeffs = []
    for i in range(3):
        e = sp.S.Zero
        for a, var in enumerate((T, X1, X2)):
            e += x.coeffs[a] * sp.diff(y.coeffs[i], var)
            e -= y.coeffs[a] * sp.diff(x.coeffs[i], var)
        coeffs.append(sp.simplify(e))
    return FirstOrderOp(f"[{x.name},{y.name}]", *coeffs)


OPERATORS = {
    "dt": FirstOrderOp("dt", 1, 0, 0),
    "d1": FirstOrderOp("d1", 0, 1, 0),
    "d2": FirstOrderOp("d2", 0, 0, 1),
    "L1": FirstOrderOp("L1", X1, T, 0),
    "L2": FirstOrderOp("L2", X2, 0, T),
    "L0": FirstOrderOp("L0", T, X1, X2),
    "omega12": FirstOrderOp("omega12", 0, -X2, X1),
    "K": FirstOrderOp("K", T + (X1**2 + X2**2) / T, 2 * X1, 2 * X2),
    "dperp": FirstOrderOp("dperp", 1, X1 / T, X2 / T),
    "under1": FirstOrderOp("under1", X1 / T, 1, 0),
    "under2": FirstOrderOp("under2", X2 / T, 0, 1),
}

ZERO_OP = FirstOrderOp("0", 0, 0, 0)

# Expected commutators among the registry fields.  Pairs not listed are
# not part of the verified algebra.
COMMUTATOR_TABLE = {
    ("dt", "L1"): OPERATORS["d1"],
    ("dt", "L2"): OPERATORS["d2"],
    ("d1", "L1"): OPERATORS["dt"],
    ("d2", "L2"): OPERATORS["dt"],
    ("d1", "L2"): ZERO_OP,
    ("d2", "L1"): ZERO_OP,
    ("L1", "L2"): OPERATORS["omega12"],
    ("dt", "L0"): OPERATORS["dt"],
    ("d1", "L0"): OPERATORS["d1"],
    ("d2", "L0"): OPERATORS["d2"],
    ("L1", "L0"): ZERO_OP,
    ("L2", "L0"): ZERO_OP,
    ("dt", "K"): OPERATORS["dt"].scaled(_S2 / T**2),
    ("d1", "K"): OPERATORS["L1"].scaled(2 / T),
    ("d2", "K"): OPERATORS["L2"].scaled(2 / T),
    ("L1", "K"): OPERATORS["L1"].scaled(_S2 / T**2),
    ("L2", "K"): OPERATORS["L2"].scaled(_S2 / T**2),
}


# ---------------------------------------------------------------------------
# Frames.  Rows of the matrix give the frame fields in the coordinate
# basis: under_alpha = Phi_alpha^beta d_beta with under_0 = dt.

def frame_matrix(t, x1, x2) -> np.ndarray:
    t, x1, x2 = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(x1, float), np.asarray(x2, float))
    phi = np.zeros(t.shape + (3, 3))
    phi[..., 0, 0] = 1.0
    phi[..., 1, 0] = x1 / t
    phi[..., 1, 1] = 1.0
    phi[..., 2, 0] = x2 / t
    phi[..., 2, 2] = 1.0
    return phi


def inverse_frame_matrix(t, x1, x2) -> np.ndarray:
    t, x1, x2 = np.broadcast_arrays(
        np.asarray(t, float), np.asarray(x1, float), np.asarray(x2, float))
    psi = np.zeros(t.shape + (3, 3))
    psi[..., 0, 0] = 1.0
    psi[..., 1, 0] = -x1 / t
    psi[..., 1, 1] = 1.0
    psi[..., 2, 0] = -x2 / t
    psi[..., 2, 2] = 1.0
    return psi


# ---------------------------------------------------------------------------
# Null forms on first-order jets, metric signature (-, +, +).

def q0(jf: dict, jg: dict):
    return -jf["t"] * jg["t"] + jf["1"] * jg["1"] + jf["2"] * jg["2"]


def q_alpha_beta(jf: dict, jg: dict, a: str, b: str):
    """Antisymmetric form da f db g - db f da g for a, b in t/1/2."""
    return jf[a] * jg[b] - jf[b] * jg[a]
