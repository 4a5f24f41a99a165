"""Nonlinear variable changes and the exact equations they satisfy.

Two modes share this module.

Analytic mode works on derivative jets (dicts keyed as in testfuncs) of
arbitrary smooth fields f, g standing for the wave and Klein-Gordon
components.  Each transformed-variable equation is checked as an
unconditional algebraic identity: the left side is built by Leibniz
assembly of the transformed variable's jet, the right side is the
source-form display plus defect terms proportional to how far (f, g)
are from actually solving the model equations.  When (f, g) do solve
them the defects vanish and the display is recovered; on catalog fields
the defects are O(1) and the identity still holds to rounding.

Run mode works on grid states.  Second and third time derivatives are
obtained by substituting the evolution equations (d_tt u = lap u - m^2 u
+ F and its time derivative), never by one-sided time stencils.  The
residuals compare a derivative route through the assembled composite
grid (stencil Laplacian of the product) with the route through
component-derivative products, so they measure truncation error and
shrink at the stencil order.
"""

from __future__ import annotations

from math import comb

import numpy as np

from . import grid as gridmod
from .models import ModelSpec, derivative_source, eval_rhs, gradient_square
from .testfuncs import canonical_key, derivative_keys

ETA = (-1.0, 1.0, 1.0)
_CHARS = ("t", "1", "2")


# ---------------------------------------------------------------------------
# Jet algebra.

def jet_shift(jet: dict, c: str, max_order: int) -> dict:
    """Jet of the c-derivative, one order lower than the source jet."""
    return {k: jet[canonical_key(k + c)] for k in derivative_keys(max_order)}


def jet_combine(a: float, jf: dict, b: float, jg: dict, max_order: int) -> dict:
    return {k: a * jf[k] + b * jg[k] for k in derivative_keys(max_order)}


def jet_mul(jf: dict, jg: dict, max_order: int) -> dict:
    """Jet of the product, by the Leibniz rule on multi-indices."""
    out = {}
    for key in derivative_keys(max_order):
        nt, n1, n2 = key.count("t"), key.count("1"), key.count("2")
        acc = 0.0
        for it in range(nt + 1):
            for i1 in range(n1 + 1):
                for i2 in range(n2 + 1):
                    c = comb(nt, it) * comb(n1, i1) * comb(n2, i2)
                    kf = "t" * it + "1" * i1 + "2" * i2
                    kg = "t" * (nt - it) + "1" * (n1 - i1) + "2" * (n2 - i2)
                    acc = acc + c * jf[kf] * jg[kg]
        out[key] = acc
    return out


def jet_q0(jf: dict, jg: dict, max_order: int) -> dict:
    """Jet of Q0(f, g); source jets must extend one order further."""
    out = None
    for sign, c in zip(ETA, _CHARS):
        term = jet_mul(jet_shift(jf, c, max_order),
                       jet_shift(jg, c, max_order), max_order)
        if out is None:
            out = {k: sign * v for k, v in term.items()}
        else:
            out = {k: out[k] + sign * term[k] for k in out}
    return out


def pab_gradient_square_jet(pab, jf: dict, max_order: int) -> dict:
    """Jet of P^{ab} da f db f for a symmetric coefficient matrix."""
    pab = np.asarray(pab, dtype=float)
    out = {k: 0.0 for k in derivative_keys(max_order)}
    for i, ci in enumerate(_CHARS):
        for j in range(i, 3):
            c = pab[i, j] if i == j else 2.0 * pab[i, j]
            if c == 0.0:
                continue
            term = jet_mul(jet_shift(jf, ci, max_order),
                           jet_shift(jf, _CHARS[j], max_order), max_order)
            out = {k: out[k] + c * term[k] for k in out}
    return out


def wave_operator(jet: dict):
    """(d_tt - laplace) f, the sign convention with d_tt positive."""
    return jet["tt"] - jet["11"] - jet["22"]


def kg_operator(jet: dict):
    return wave_operator(jet) + jet[""]


def wave_operator_jet1(jet: dict) -> dict:
    """First-order jet of (d_tt - laplace) f from a third-order jet."""
    return {
        "": jet["tt"] - jet["11"] - jet["22"],
        "t": jet["ttt"] - jet["t11"] - jet["t22"],
        "1": jet["tt1"] - jet["111"] - jet["122"],
        "2": jet["tt2"] - jet["112"] - jet["222"],
    }


def q0_value(jf: dict, jg: dict):
    return -jf["t"] * jg["t"] + jf["1"] * jg["1"] + jf["2"] * jg["2"]


def hessian_eta_square(jet: dict):
    """eta^{ab} eta^{cd} (dc da f)(dd db f), a curvature-like square of
    the Hessian that appears when the wave operator hits Q0(f, f)."""
    acc = 0.0
    for si, ci in zip(ETA, _CHARS):
        for sj, cj in zip(ETA, _CHARS):
            acc = acc + si * sj * jet[canonical_key(ci + cj)] ** 2
    return acc


# ---------------------------------------------------------------------------
# Transformed-equation identities on jets.  Each returns route-A minus
# route-B; both are exact, so the difference is rounding noise.

def residual_product_transform(jf: dict, jg: dict):
    """W = f + f g: (d_tt - lap) W against its cubic/null source form.

    The displayed sources assume (d_tt - lap) f = f g and the KG operator
    value as the g source; defect terms restore exactness for arbitrary
    jets.
    """
    w2 = jet_combine(1.0, jf, 1.0, jet_mul(jf, jg, 2), 2)
    route_a = wave_operator(w2)
    f, g = jf[""], jg[""]
    displayed = f * g * g + f * kg_operator(jg) - 2.0 * q0_value(jf, jg)
    defect = (1.0 + g) * (wave_operator(jf) - f * g)
    return route_a - (displayed + defect)


def residual_kg_square_transform(jf: dict, jg: dict, pa=None):
    """V = g - f^2: KG operator of V against -2 f F_w + 2 Q0(f, f).

    With pa given, the wave source is pinned to the derivative form
    P^a da(g^2) and its mismatch joins the defect; otherwise the wave
    operator value of f itself plays the source.
    """
    v2 = jet_combine(1.0, jg, -1.0, jet_mul(jf, jf, 2), 2)
    route_a = kg_operator(v2)
    f, g = jf[""], jg[""]
    box_f = wave_operator(jf)
    defect = kg_operator(jg) - f * f
    if pa is None:
        source = box_f
    else:
        pa = np.asarray(pa, dtype=float)
        source = 2.0 * g * (pa[0] * jg["t"] + pa[1] * jg["1"] + pa[2] * jg["2"])
        defect = defect - 2.0 * f * (box_f - source)
    displayed = -2.0 * f * source + 2.0 * q0_value(jf, jf)
    return route_a - (displayed + defect)


def residual_gradient_square_transform(jf: dict, jg: dict, pab):
    """V = g - P^{ab} da f db f against its null/cubic source form."""
    pab = np.asarray(pab, dtype=float)
    v2 = jet_combine(1.0, jg, -1.0, pab_gradient_square_jet(pab, jf, 2), 2)
    route_a = kg_operator(v2)
    g = jg[""]
    box1 = wave_operator_jet1(jf)
    shifts_f = [jet_shift(jf, c, 1) for c in _CHARS]
    shifts_g = [jet_shift(jg, c, 1) for c in _CHARS]
    displayed = 0.0
    pinned = 0.0
    grad_sq = 0.0
    for i in range(3):
        for j in range(3):
            p = pab[i, j]
            if p == 0.0:
                continue
            fi, fj = shifts_f[i], shifts_f[j]
            displayed = displayed + 2.0 * p * q0_value(fi, fj) \
                - 2.0 * g * p * (shifts_g[i][""] * fj[""] + fi[""] * shifts_g[j][""])
            # wave-source mismatch enters through da(box f - g^2)
            pinned = pinned + 2.0 * p * fi[""] * (box1[_CHARS[j]]
                                                  - 2.0 * g * shifts_g[j][""])
            grad_sq = grad_sq + p * fi[""] * fj[""]
    defect = (kg_operator(jg) - grad_sq) - pinned
    return route_a - (displayed + defect)


def residual_double_null_transform(jf: dict, jg: dict, pa):
    """Vhat = g - f^2 - Q0(f, f) against its second-level source form."""
    pa = np.asarray(pa, dtype=float)
    v2 = jet_combine(1.0, jet_combine(1.0, jg, -1.0, jet_mul(jf, jf, 2), 2),
                     -1.0, jet_q0(jf, jf, 2), 2)
    route_a = kg_operator(v2)
    f, g = jf[""], jg[""]
    box1 = wave_operator_jet1(jf)
    # F = P^a da(g^2) and its first-order jet
    source = {"": 2.0 * g * (pa[0] * jg["t"] + pa[1] * jg["1"] + pa[2] * jg["2"])}
    for c in _CHARS:
        source[c] = 2.0 * sum(
            pa[i] * (jg[c] * jg[ci] + g * jg[canonical_key(c + ci)])
            for i, ci in enumerate(_CHARS)
        )
    displayed = (
        q0_value(jf, jf)
        + 2.0 * hessian_eta_square(jf)
        - 2.0 * f * source[""]
        - 2.0 * q0_value(jf, source)
    )
    box_minus_src = {k: box1[k] - source[k] for k in ("", "t", "1", "2")}
    defect = (
        (kg_operator(jg) - f * f)
        - 2.0 * f * box_minus_src[""]
        - 2.0 * q0_value(jf, box_minus_src)
    )
    return route_a - (displayed + defect)


# ---------------------------------------------------------------------------
# Grid-mode transforms.

def model1_v(state, grid, pab) -> np.ndarray:
    """V = v - P^{ab} da w db w on the grid."""
    return state.u_v - gradient_square(pab, state.u_w, state.p_w, grid)


def model2_vtilde(state) -> np.ndarray:
    return state.u_v - state.u_w**2


def q0_self_grid(state, grid) -> np.ndarray:
    """Q0(w, w) = -(dt w)^2 + |grad w|^2 from stored velocity and stencils."""
    d1 = gridmod.partial_x(state.u_w, grid, 1)
    d2 = gridmod.partial_x(state.u_w, grid, 2)
    return -state.p_w**2 + d1 * d1 + d2 * d2


def model2_vhat(state, grid) -> tuple:
    vt = model2_vtilde(state)
    return vt, vt - q0_self_grid(state, grid)


class GridJet:
    """Named grid derivatives of the evolved components.

    Time derivatives beyond the stored velocity come from the evolution
    equations: d_tt u = lap u - m^2 u + F and d_ttt u = lap p - m^2 p
    + dt F, with dt F expanded per model.  Spatial and mixed entries use
    the configured stencils.  Entries are cached on first request.
    """

    def __init__(self, model: ModelSpec, grid, state):
        self.model = model
        self.grid = grid
        self.state = state
        self.rhs = eval_rhs(model, state, grid)
        self._cache = {}

    def _base(self, comp: str, key: str):
        st, g = self.state, self.grid
        u = st.u_w if comp == "w" else st.u_v
        p = st.p_w if comp == "w" else st.p_v
        m2 = self.model.mass_w**2 if comp == "w" else self.model.mass_v**2
        f = self.rhs.f_w if comp == "w" else self.rhs.f_v
        if key == "":
            return u
        if key == "t":
            return p
        if key in ("1", "2"):
            return gridmod.partial_x(u, g, int(key))
        if key in ("t1", "t2"):
            return gridmod.partial_x(p, g, int(key[1]))
        if key in ("11", "22"):
            return gridmod.second_x(u, g, int(key[0]))
        if key == "12":
            return gridmod.partial_x(self.get(comp, "1"), g, 2)
        if key == "tt":
            return gridmod.laplacian(u, g) - m2 * u + f
        if key == "ttt":
            return gridmod.laplacian(p, g) - m2 * p + self._source_dt(comp)
        if key in ("tt1", "tt2"):
            return gridmod.partial_x(self.get(comp, "tt"), g, int(key[2]))
        raise KeyError(f"no jet entry {key!r}")

    def get(self, comp: str, key: str):
        tag = (comp, canonical_key(key))
        if tag not in self._cache:
            self._cache[tag] = self._base(comp, canonical_key(key))
        return self._cache[tag]

    def _source_dt(self, comp: str):
        """dt of the component's nonlinear source, by the chain rule."""
        kind = self.model.kind
        st = self.state
        if kind in ("hom-wave", "hom-kg"):
            return 0.0
        if kind in ("mms-wave", "mms-kg"):
            raise ValueError("third time derivatives are not available "
                             "for externally forced runs")
        w_t = {c: self.get("w", canonical_key("t" + c)) for c in _CHARS}
        if kind == "nullform-2d":
            if comp != "w":
                return 0.0
            return 2.0 * (st.p_w * w_t["t"]
                          - self.get("w", "1") * w_t["1"]
                          - self.get("w", "2") * w_t["2"])
        wave_kind = comp == "w"
        pab_side = ("model-i", "swapped-i")
        if kind in pab_side:
            pab_on_wave = kind == "swapped-i"
            if wave_kind == pab_on_wave:
                # d/dt of P^{ab} da w db w
                pab = self.model.pab
                acc = 0.0
                grads = [st.p_w, self.get("w", "1"), self.get("w", "2")]
                for i, ci in enumerate(_CHARS):
                    for j in range(3):
                        if pab[i, j]:
                            acc = acc + 2.0 * pab[i, j] * grads[j] * w_t[ci]
                return acc
            return 2.0 * st.u_v * st.p_v
        # model-ii / swapped-ii: derivative source on one side, square on the other
        deriv_on_wave = kind == "model-ii"
        if wave_kind == deriv_on_wave:
            pa = self.model.pa
            v_t = {c: self.get("v", canonical_key("t" + c)) for c in _CHARS}
            v_g = [st.p_v, self.get("v", "1"), self.get("v", "2")]
            acc = 0.0
            for i, ci in enumerate(_CHARS):
                if pa[i]:
                    acc = acc + 2.0 * pa[i] * (st.p_v * v_g[i]
                                               + st.u_v * v_t[ci])
            return acc
        return 2.0 * st.u_w * st.p_w


def _q0_grid_pair(jet: GridJet, comp: str, ka: str, kb: str):
    """Q0 of two derivative fields da phi, db phi from a GridJet."""
    acc = None
    for sign, c in zip(ETA, _CHARS):
        term = sign * jet.get(comp, canonical_key(c + ka)) \
            * jet.get(comp, canonical_key(c + kb))
        acc = term if acc is None else acc + term
    return acc


def transformed_kg_residual(model: ModelSpec, grid, state) -> np.ndarray:
    """Grid residual of the first-level transformed KG equation.

    The composite's Laplacian is taken by stencil on the assembled grid
    while its time derivatives come from component jets, so the residual
    is O(h^2) rather than identically zero.
    """
    jet = GridJet(model, grid, state)
    if model.kind == "model-i":
        pab = model.pab
        v_field = model1_v(state, grid, pab)
        # d_tt of P^{ab} da w db w
        grads = {c: jet.get("w", c) for c in _CHARS}
        tgrads = {c: jet.get("w", canonical_key("t" + c)) for c in _CHARS}
        ttgrads = {
            "t": jet.get("w", "ttt"),
            "1": jet.get("w", "tt1"),
            "2": jet.get("w", "tt2"),
        }
        dtt_q = 0.0
        for i, ci in enumerate(_CHARS):
            for j, cj in enumerate(_CHARS):
                if pab[i, j]:
                    dtt_q = dtt_q + 2.0 * pab[i, j] * (
                        tgrads[ci] * tgrads[cj] + grads[ci] * ttgrads[cj])
        v_tt = jet.get("v", "tt") - dtt_q
        lhs = v_tt - gridmod.laplacian(v_field, grid) + v_field
        rhs = 0.0
        vg = {c: jet.get("v", c) for c in _CHARS}
        for i, ci in enumerate(_CHARS):
            for j, cj in enumerate(_CHARS):
                if pab[i, j]:
                    rhs = rhs + pab[i, j] * (
                        2.0 * _q0_grid_pair(jet, "w", ci, cj)
                        - 2.0 * state.u_v * (vg[ci] * grads[cj]
                                             + grads[ci] * vg[cj]))
        return lhs - rhs
    if model.kind == "model-ii":
        vt = model2_vtilde(state)
        vt_tt = jet.get("v", "tt") - 2.0 * (
            state.p_w**2 + state.u_w * jet.get("w", "tt"))
        lhs = vt_tt - gridmod.laplacian(vt, grid) + vt
        f_src = derivative_source(model.pa, state.u_v, state.p_v, grid)
        rhs = 2.0 * q0_self_grid(state, grid) - 2.0 * state.u_w * f_src
        return lhs - rhs
    raise ValueError(f"no transformed KG equation for kind {model.kind!r}")


def double_null_residual(model: ModelSpec, grid, state) -> np.ndarray:
    """Grid residual of the second-level (null-subtracted) KG equation."""
    if model.kind != "model-ii":
        raise ValueError("second-level transform applies to the "
                         "derivative-coupled model only")
    jet = GridJet(model, grid, state)
    st = state
    vt, vhat = model2_vhat(state, grid)
    q = vt - vhat
    d1p = jet.get("w", "t1")
    d2p = jet.get("w", "t2")
    w_tt = jet.get("w", "tt")
    q_tt = (
        -2.0 * (w_tt**2 + st.p_w * jet.get("w", "ttt"))
        + 2.0 * (d1p**2 + jet.get("w", "1") * jet.get("w", "tt1"))
        + 2.0 * (d2p**2 + jet.get("w", "2") * jet.get("w", "tt2"))
    )
    vt_tt = jet.get("v", "tt") - 2.0 * (st.p_w**2 + st.u_w * w_tt)
    vhat_tt = vt_tt - q_tt
    lhs = vhat_tt - gridmod.laplacian(vhat, grid) + vhat
    f_src = derivative_source(model.pa, st.u_v, st.p_v, grid)
    f_t = jet._source_dt("w")
    f_1 = gridmod.partial_x(f_src, grid, 1)
    f_2 = gridmod.partial_x(f_src, grid, 2)
    hess = (
        w_tt**2 - 2.0 * d1p**2 - 2.0 * d2p**2
        + jet.get("w", "11") ** 2 + 2.0 * jet.get("w", "12") ** 2
        + jet.get("w", "22") ** 2
    )
    q0_wf = -st.p_w * f_t + jet.get("w", "1") * f_1 + jet.get("w", "2") * f_2
    rhs = q + 2.0 * hess - 2.0 * st.u_w * f_src - 2.0 * q0_wf
    return lhs - rhs
