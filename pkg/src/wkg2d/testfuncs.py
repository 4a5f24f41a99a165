"""Catalog of smooth space-time fields with exact derivative jets.

The pointwise identity checks need scalar fields phi(t, x1, x2) that are
smooth inside the light cone together with every derivative up to third
order.  Hand-coding sixty partial derivatives invites sign slips, so the
catalog stores symbolic expressions and differentiates them with sympy;
numeric callables are lambdified lazily and cached.

Derivative keys name the variables differentiated against, in the fixed
order t, 1, 2: "t1" is d/dt d/dx1, "22" is the second x2 derivative, ""
is the field itself.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import sympy as sp

T, X1, X2 = sp.symbols("t x1 x2", real=True)
_VARS = {"t": T, "1": X1, "2": X2}
_R = sp.sqrt(X1**2 + X2**2)

CATALOG = {
    "drift-bump": sp.exp(-((X1 - T / 5) ** 2 + (X2 + T / 7) ** 2) / 6)
    * (1 + sp.sin(T / 2) / 3),
    "osc-kg": sp.cos(T + X1 / 2 - X2 / 3) * sp.exp(-(X1**2 + X2**2) / (2 * T)),
    "rational": (T * X1 - X2**2) / (T**2 + X1**2 + X2**2 + 5),
    "radial-chirp": sp.sin(T - sp.sqrt(1 + X1**2 + X2**2)) / sp.sqrt(T),
    "poly-mix": X1**2 * X2 / (1 + T**2) + sp.sin(X1) * sp.cos(X2) / T,
    "outgoing": sp.exp(-((T - _R - 3) ** 2) / 2),
}


def derivative_keys(max_order: int = 3) -> tuple:
    keys = [""]
    for order in range(1, max_order + 1):
        keys.extend(
            "".join(c) for c in combinations_with_replacement("t12", order)
        )
    return tuple(keys)


ALL_KEYS = derivative_keys(3)


def canonical_key(key: str) -> str:
    """Sort a derivative key into t-before-1-before-2 order."""
    rank = {"t": 0, "1": 1, "2": 2}
    return "".join(sorted(key, key=rank.__getitem__))


class SmoothField:
    """One catalog entry; evaluates the field and its derivatives."""

    def __init__(self, name: str, expr: sp.Expr):
        self.name = name
        self.expr = expr
        self._fns = {}

    def _fn(self, key: str):
        key = canonical_key(key)
        if key not in self._fns:
            e = self.expr
            for c in key:
                e = sp.diff(e, _VARS[c])
            self._fns[key] = sp.lambdify((T, X1, X2), e, modules="numpy")
        return self._fns[key]

    def d(self, key, t, x1, x2):
        out = np.asarray(self._fn(key)(t, x1, x2), dtype=float)
        shape = np.broadcast_shapes(np.shape(t), np.shape(x1), np.shape(x2))
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    def __call__(self, t, x1, x2):
        return self.d("", t, x1, x2)

    def jet(self, t, x1, x2, max_order: int = 3) -> dict:
        """All derivatives up to max_order, keyed canonically."""
        return {
            k: self.d(k, t, x1, x2) for k in derivative_keys(max_order)
        }


@lru_cache(maxsize=None)
def get_field(name: str) -> SmoothField:
    if name not in CATALOG:
        raise KeyError(f"no catalog field {name!r}; have {sorted(CATALOG)}")
    return SmoothField(name, CATALOG[name])


def catalog_names(generic_only: bool = False) -> tuple:
    names = tuple(CATALOG)
    if generic_only:
        # "outgoing" has a built-in null structure; identity sweeps that
        # must not be satisfied trivially use the generic entries.
        names = tuple(n for n in names if n != "outgoing")
    return names


def cone_points(n: int, seed: int, t_range=(2.0, 50.0),
                rho_range=(0.05, 0.95)):
    """Random points strictly inside the cone r < t - 1.

    rho is the radius as a fraction of the cone width t - 1; keeping it
    away from 0 and 1 avoids both the axis (where polar frames
    degenerate) and the cone boundary (where ghost weights blow up).
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(*t_range, size=n)
    rho = rng.uniform(*rho_range, size=n)
    ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = rho * (t - 1.0)
    return t, r * np.cos(ang), r * np.sin(ang)
