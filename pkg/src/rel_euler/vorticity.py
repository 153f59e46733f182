"""Modified vorticity w, its curl W, G = vort W, and the auxiliary Gamma, F, E.

Everything is computed from a :class:`FluidState` holding the log-enthalpy h
and the four-velocity u as :class:`~rel_euler.algebra.Field` objects, so the
same definitions serve Taylor jets and grids.  Index conventions: derivative
axes come first (``du[m, a]`` is the derivative along m of u^a), signature
(-,+,+,+), epsilon_{0123} = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import eos
from .algebra import EPS_LO, EPS_UP, ETA, Field, const, ein, grad, max_abs, stack

# epsilon with the first index lowered and the rest raised, and
# epsilon with the second index raised and the rest lowered
EPS_M0 = np.einsum("dx,xemn->demn", ETA, EPS_UP)
EPS_M1 = np.einsum("ax,kxgd->kagd", ETA, EPS_LO)

SP = np.diag([0.0, 1.0, 1.0, 1.0])  # projector onto spatial indices

CONSTANTS = {"SP": SP, "ETA": ETA, "EPS_UP": EPS_UP, "EPS_LO": EPS_LO, "EPS_M0": EPS_M0, "EPS_M1": EPS_M1}


def vort(ul: Field, dAl: Field) -> Field:
    """vort^a(A) = -eps^{abgd} u_b d_g A_d for a lowered one-form with gradient dAl[g, d]."""
    return -ein("abgd,b,gd->a", EPS_UP, ul, dAl)


def lower(x: Field, axis: int = 0) -> Field:
    letters = "abcdefgh"[: len(x.lead)]
    out = letters.replace(letters[axis], "z")
    return ein(f"z{letters[axis]},{letters}->{out}", ETA, x)


raise_ = lower  # the Minkowski metric is its own inverse


class FluidState:
    """Lazy kinematic bundle built from (h, u); optional u_minus for split identities."""

    def __init__(self, h: Field, u: Field, vartheta: float, u_minus: Field | None = None,
                 metric_inv: Field | None = None, extra: dict | None = None):
        self.h = h
        self.u = u
        self.vartheta = float(vartheta)
        self._um = u_minus
        self._ginv = metric_inv
        self.extra = dict(extra or {})

    # ---------------------------------------------------------- operand lookup
    def operand(self, name: str):
        if name in CONSTANTS:
            return CONSTANTS[name]
        if name in self.extra:
            return self.extra[name]
        return getattr(self, name)

    # ---------------------------------------------------------- thermodynamics
    @cached_property
    def rho(self):
        return eos.density_from_enthalpy(self.h, self.vartheta)

    @cached_property
    def cs2(self):
        return eos.sound_speed_sq(self.rho, self.vartheta)

    @cached_property
    def cm2(self):
        return self.cs2.recip()

    @cached_property
    def cs2p1(self):
        return self.cs2 + 1.0

    @cached_property
    def cm2p2(self):
        return self.cm2 + 2.0

    @cached_property
    def dcs2(self):
        """d(c_s^2)/dh."""
        return eos.dcs2_dh(self.rho, self.vartheta)

    @cached_property
    def cm1cp(self):
        """c_s^{-1} c_s' with ' = d/dh; equals (dc_s^2/dh) / (2 c_s^2)."""
        return self.dcs2 * self.cm2 * 0.5

    @cached_property
    def cm3cp(self):
        """c_s^{-3} c_s'."""
        return self.cm1cp * self.cm2

    @cached_property
    def eh(self):
        return self.h.exp()

    @cached_property
    def emh(self):
        return (-self.h).exp()

    @cached_property
    def Om(self):
        u0sq = self.u[0] * self.u[0]
        return (self.cs2 + (1.0 - self.cs2) * u0sq).recip()

    @cached_property
    def ginv(self):
        if self._ginv is not None:
            return self._ginv
        uu = ein("a,b->ab", self.u, self.u)
        return self.Om * (const(ETA, self.h) * self.cs2 + uu * (self.cs2 - 1.0))

    # ---------------------------------------------------------- velocity
    @cached_property
    def ul(self):
        return lower(self.u)

    @cached_property
    def du(self):
        return grad(self.u)

    @cached_property
    def dul(self):
        return grad(self.ul)

    @cached_property
    def ddu(self):
        return grad(self.du)

    @cached_property
    def ddul(self):
        return grad(self.dul)

    @cached_property
    def divu(self):
        return ein("kk->", self.du)

    @cached_property
    def ddivu(self):
        return grad(self.divu)

    @cached_property
    def dh(self):
        return grad(self.h)

    @cached_property
    def ddh(self):
        return grad(self.dh)

    @cached_property
    def dcs2_field(self):
        """Space-time gradient of c_s^2."""
        return grad(self.cs2)

    @cached_property
    def proj(self):
        """m^{ak} + u^a u^k."""
        return ein("a,k->ak", self.u, self.u) + ETA

    @cached_property
    def u0inv(self):
        return self.u[0].recip()

    # ---------------------------------------------------------- vorticity
    @cached_property
    def w(self):
        return -ein("abgd,b,gd->a", EPS_UP, self.ul, self.dul) * self.eh

    @cached_property
    def w_via_vort(self):
        """w from vort(e^h u) with the product differentiated explicitly."""
        Hul = self.ul * self.eh
        return vort(self.ul, grad(Hul))

    @cached_property
    def wl(self):
        return lower(self.w)

    @cached_property
    def dw(self):
        return grad(self.w)

    @cached_property
    def dwl(self):
        return grad(self.wl)

    @cached_property
    def ddw(self):
        return grad(self.dw)

    @cached_property
    def ddwl(self):
        return grad(self.dwl)

    @cached_property
    def vortw(self):
        return vort(self.ul, self.dwl)

    @cached_property
    def vwl(self):
        return lower(self.vortw)

    @cached_property
    def dvwl(self):
        return grad(self.vwl)

    @cached_property
    def W(self):
        return (-ein("abgd,b,gd->a", EPS_UP, self.ul, self.dwl)
                + ein("abgd,b,d,g->a", EPS_UP, self.ul, self.wl, self.dh) * self.cm2)

    @cached_property
    def Wl(self):
        return lower(self.W)

    @cached_property
    def dW(self):
        return grad(self.W)

    @cached_property
    def dWl(self):
        return grad(self.Wl)

    @cached_property
    def vortW(self):
        return vort(self.ul, self.dWl)

    @cached_property
    def G(self):
        return self.vortW

    @cached_property
    def vortu(self):
        return vort(self.ul, self.dul)

    # ---------------------------------------------------------- split velocity
    @property
    def um(self):
        if self._um is None:
            raise ValueError("this identity needs u_minus")
        return self._um

    @cached_property
    def dum(self):
        return grad(self.um)

    @cached_property
    def ddum(self):
        return grad(self.dum)

    @cached_property
    def up(self):
        return self.u - self.um

    @cached_property
    def ddup(self):
        return grad(grad(self.up))

    @cached_property
    def Pmat(self):
        """Coefficients m^{bg} + 2 u^b u^g of the space-time elliptic operator."""
        return ein("a,b->ab", self.u, self.u) * 2.0 + ETA

    @cached_property
    def Tvec(self):
        """Components u^k / u^0 of the transport operator T."""
        return self.u * self.u0inv

    @cached_property
    def Tum(self):
        return ein("k,ka->a", self.Tvec, self.dum)

    # ---------------------------------------------------------- Gamma, F, E
    @cached_property
    def Gamma(self):
        return sum_terms(evaluate_terms(GAMMA_TERMS, self))

    @cached_property
    def F(self):
        return sum_terms(evaluate_terms(F_TERMS, self))

    @cached_property
    def E(self):
        return sum_terms(evaluate_terms(E_TERMS, self))


# ------------------------------------------------------------------ term tables


@dataclass(frozen=True)
class Term:
    """coef * (product of scalar operands) * ein(subs, *ops), or a custom callable."""

    label: str
    coef: float = 1.0
    scalars: tuple = ()
    subs: str | None = None
    ops: tuple = ()
    fn: Callable | None = None

    def evaluate(self, s: FluidState) -> Field:
        if self.fn is not None:
            val = self.fn(s)
        elif self.subs is None:
            val = s.operand(self.ops[0])
        else:
            val = ein(self.subs, *[s.operand(o) for o in self.ops])
        for name in self.scalars:
            val = val * s.operand(name)
        return val * self.coef if self.coef != 1.0 else val


def T(label, coef, scalars, subs, *ops) -> Term:
    if isinstance(scalars, str):
        scalars = (scalars,) if scalars else ()
    return Term(label=label, coef=float(coef), scalars=tuple(scalars), subs=subs, ops=tuple(ops))


def C(label, fn, coef=1.0) -> Term:
    return Term(label=label, coef=float(coef), fn=fn)


def evaluate_terms(terms: Sequence[Term], s: FluidState, skip: set | None = None):
    return [(t.label, t.evaluate(s)) for t in terms if not skip or t.label not in skip]


def sum_terms(pairs):
    it = iter(pairs)
    total = next(it)[1]
    for _, v in it:
        total = total + v
    return total


GAMMA_TERMS_PRINTED = [
    T("Gamma.1", -2, "", "gm,mk,gk->", "ETA", "dw", "dul"),
    T("Gamma.2", 2, "", "l,l->", "w", "vwl"),
    T("Gamma.3", -1, "emh", "k,k->", "wl", "W"),
]

# vort(vort u) = vort(e^{-h} w) carries e^{-h}, and the W.w gradient enters with +
GAMMA_TERMS = [
    T("Gamma.1", -2, "", "gm,mk,gk->", "ETA", "dw", "dul"),
    T("Gamma.2", -2, "emh", "l,l->", "w", "vwl"),
    T("Gamma.3", 1, "emh", "k,k->", "wl", "W"),
]

F_TERMS = [
    T("F.1", -2, "cm2", "abgd,b,g,d->a", "EPS_UP", "ul", "dh", "Wl"),
    T("F.2", -2, "", "a,gm,ml,gl->a", "u", "ETA", "dw", "dul"),
    T("F.3", 2, "divu", "l,am,ml->a", "ul", "ETA", "dw"),
    T("F.4", -2, "cm2", "l,am,ml->a", "dh", "ETA", "dw"),
]

E_TERMS_PRINTED = [
    T("E.1", 1, "", "abgd,b,gk,kd->a", "EPS_UP", "ul", "du", "dWl"),
    T("E.2", -1, "", "abgd,k,kb,gd->a", "EPS_UP", "u", "dul", "dWl"),
    T("E.3", 2, "cm2", "abgd,k,kb,g,d->a", "EPS_UP", "u", "dul", "dh", "Wl"),
    T("E.4", 2, "cm2", "abgd,b,k,g,kd->a", "EPS_UP", "ul", "u", "dh", "dWl"),
    T("E.5", 2, "divu", "abgd,b,gd->a", "EPS_UP", "ul", "dWl"),
    T("E.6", -1, "", "abgd,b,kd,gk->a", "EPS_UP", "ul", "dul", "dW"),
    T("E.7a", -1, "emh", "k,k,g,ga->a", "W", "ul", "u", "dw"),
    T("E.7b", 1, "emh", "k,k,g,am,mg->a", "W", "ul", "u", "ETA", "dwl"),
    T("E.7c", 1, "emh", "k,a,g,gk->a", "W", "u", "u", "dwl"),
    T("E.7d", -1, "emh", "k,a,g,kg->a", "W", "u", "u", "dwl"),
    T("E.8", 1, "emh", "k,k,am,m->a", "wl", "W", "ETA", "dh"),
    T("E.9", -1, "emh", "k,am,mk->a", "wl", "ETA", "dW"),
    T("E.10", -1, ("cm2", "emh"), "kagd,dbmn,g,b,n,k,m->a", "EPS_M1", "EPS_UP", "u", "ul", "wl", "W", "dh"),
    T("E.11", 1, "", "abgd,k,kb,gd->a", "EPS_UP", "W", "dul", "dul"),
    T("E.12", -2, "emh", "a,k,k->a", "w", "W", "dh"),
    T("E.13", -1, "", "abgd,b,kd,gk->a", "EPS_UP", "ul", "dul", "dW"),
    T("E.14", 1, "", "abgd,k,kb,gd->a", "EPS_UP", "W", "dul", "dul"),
    T("E.15", 4, "", "gm,mk,an,ngk->a", "ETA", "dul", "ETA", "ddw"),
    T("E.16", 2, "", "b,gm,mk,ba,gk->a", "u", "ETA", "dw", "du", "dul"),
    T("E.17", -2, "", "b,ga,gm,mk,bn,nk->a", "ul", "du", "ETA", "dw", "ETA", "dul"),
    T("E.18", -2, "", "b,a,gm,gmk,bn,nk->a", "ul", "u", "ETA", "ddw", "ETA", "dul"),
    T("E.19", -2, "", "b,a,gk,gm,bmk->a", "u", "u", "dul", "ETA", "ddw"),
    T("E.20", 2, "", "b,ga,bm,mk,gn,nk->a", "ul", "du", "ETA", "dw", "ETA", "dul"),
    T("E.21", 2, "", "b,a,gm,mk,bn,gnk->a", "ul", "u", "ETA", "dul", "ETA", "ddw"),
    T("E.22", -2, "", "a,k,l,l,gm,gmk->a", "u", "u", "w", "dh", "ETA", "ddul"),
    T("E.23", 2, "", "a,l,lk,gm,gmk->a", "u", "w", "du", "ETA", "ddul"),
    T("E.24", -2, "divu", "a,k,gm,gmk->a", "u", "w", "ETA", "ddul"),
    T("E.25a", 4, "", "b,gl,bm,mg,an,nl->a", "ul", "dul", "ETA", "du", "ETA", "dw"),
    T("E.25b", -4, "divu", "b,bm,ml,an,nl->a", "ul", "ETA", "dul", "ETA", "dw"),
    T("E.25c", -2, "", "l,gb,gm,mb,an,nl->a", "ul", "dul", "ETA", "du", "ETA", "dw"),
    T("E.25d", 2, "", "g,gb,lb,an,nl->a", "u", "dul", "du", "ETA", "dw"),
    T("E.26", -2, "cm2", "lk,k,an,nl->a", "du", "dh", "ETA", "dw"),
    T("E.27", 6, ("cm1cp", "divu"), "l,an,nl->a", "dh", "ETA", "dw"),
    T("E.28", 2, "cm2", "k,l,an,knl->a", "u", "dh", "ETA", "ddw"),
    T("E.29", -2, "", "l,an,nl->a", "w", "ETA", "dvwl"),
    T("E.30a", 2, "", "k,g,gl,an,knl->a", "u", "u", "dul", "ETA", "ddw"),
    T("E.30b", -2, "divu", "k,l,an,knl->a", "u", "ul", "ETA", "ddw"),
    T("E.31", -2, "", "an,nk,gm,gmk->a", "ETA", "dul", "ETA", "ddw"),
    T("E.32", -2, "divu", "b,bm,mk,an,nk->a", "ul", "ETA", "dw", "ETA", "dul"),
    T("E.33", -2, "", "b,g,an,nk,bm,mgk->a", "ul", "u", "ETA", "dul", "ETA", "ddw"),
    T("E.34", 2, "", "k,g,l,l,an,gnk->a", "u", "u", "w", "dh", "ETA", "ddul"),
    T("E.35", -2, "", "g,l,lk,an,gnk->a", "u", "w", "du", "ETA", "ddul"),
    T("E.36", 2, "divu", "g,k,an,gnk->a", "u", "w", "ETA", "ddul"),
    T("E.37", -2, "", "k,kg,gb,an,nb->a", "u", "du", "dul", "ETA", "dw"),
    T("E.38", 2, "", "b,g,an,ngk,bm,mk->a", "ul", "u", "ETA", "ddw", "ETA", "dul"),
    T("E.39", -2, "", "k,g,gb,an,nkb->a", "u", "u", "dul", "ETA", "ddw"),
    T("E.40", 2, "divu", "b,an,nk,bm,mk->a", "ul", "ETA", "dw", "ETA", "dul"),
    T("E.41", -2, "cm3cp", "abgd,demn,b,e,n,g,mk,k->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "dh", "du", "dh"),
    T("E.42", 1, "cm2", "abgd,demn,b,ge,n,mk,k->a", "EPS_UP", "EPS_M0", "ul", "dul", "wl", "du", "dh"),
    T("E.43", 1, "cm2", "abgd,demn,b,e,gn,mk,k->a", "EPS_UP", "EPS_M0", "ul", "ul", "dwl", "du", "dh"),
    T("E.44", 1, "cm2", "abgd,demn,b,e,n,k,gmk->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "dh", "ddu"),
    T("E.45", 1, "cm2", "abgd,demn,b,e,n,mk,gk->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "du", "ddh"),
    T("E.46", -2, "emh", "abgd,b,d,k,k,g->a", "EPS_UP", "ul", "wl", "w", "dh", "dh"),
    T("E.47", 2, "emh", "abgd,b,k,gd,k->a", "EPS_UP", "ul", "w", "dwl", "dh"),
    T("E.48", 2, "emh", "abgd,b,d,gk,k->a", "EPS_UP", "ul", "wl", "dw", "dh"),
    T("E.49", 2, "emh", "abgd,b,d,k,gk->a", "EPS_UP", "ul", "wl", "w", "ddh"),
    T("E.50", -2, "cm3cp", "abgd,kemn,b,e,n,g,m,kd->a", "EPS_UP", "EPS_UP", "ul", "ul", "wl", "dh", "dh", "dul"),
    T("E.51", 1, "cm2", "abgd,kemn,b,n,ge,m,kd->a", "EPS_UP", "EPS_UP", "ul", "wl", "dul", "dh", "dul"),
    T("E.52", 1, "cm2", "abgd,kemn,e,b,gn,m,kd->a", "EPS_UP", "EPS_UP", "ul", "ul", "dwl", "dh", "dul"),
    T("E.53", 1, "cm2", "abgd,kemn,b,e,n,kd,gm->a", "EPS_UP", "EPS_UP", "ul", "ul", "wl", "dul", "ddh"),
    T("E.54", 1, "cm2", "abgd,kemn,b,e,n,m,gkd->a", "EPS_UP", "EPS_UP", "ul", "ul", "wl", "dh", "ddul"),
    T("E.55", 2, ("cm3cp", "divu"), "abgd,demn,b,e,n,g,m->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "dh", "dh"),
    T("E.56", -1, ("cm2", "divu"), "abgd,demn,b,ge,n,m->a", "EPS_UP", "EPS_M0", "ul", "dul", "wl", "dh"),
    T("E.57", -1, ("cm2", "divu"), "abgd,demn,b,e,gn,m->a", "EPS_UP", "EPS_M0", "ul", "ul", "dwl", "dh"),
    T("E.58", -1, ("cm2", "divu"), "abgd,demn,b,e,n,gm->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "ddh"),
    T("E.59", -1, "cm2", "abgd,demn,b,e,n,m,g->a", "EPS_UP", "EPS_M0", "ul", "ul", "wl", "dh", "ddivu"),
    T("E.60", 2, "cm3cp", "abgd,demn,b,e,k,g,nk,m->a", "EPS_UP", "EPS_M0", "ul", "ul", "w", "dh", "dul", "dh"),
    T("E.61", -1, "cm2p2", "abgd,demn,b,k,ge,nk,m->a", "EPS_UP", "EPS_M0", "ul", "w", "dul", "dul", "dh"),
    T("E.62", -1, "cm2p2", "abgd,demn,e,b,gk,nk,m->a", "EPS_UP", "EPS_M0", "ul", "ul", "dw", "dul", "dh"),
    T("E.63", -1, "cm2p2", "abgd,demn,b,e,k,m,gnk->a", "EPS_UP", "EPS_M0", "ul", "ul", "w", "dh", "ddul"),
    T("E.64", -1, "cm2p2", "abgd,demn,b,e,k,nk,gm->a", "EPS_UP", "EPS_M0", "ul", "ul", "w", "dul", "ddh"),
]


# Corrected E: drops the duplicated E.13/E.14 and the c_s' term E.27 (its two
# contributions cancel), flips E.19 and E.25c/d, puts e^{-h} on the vort(vort u)
# pieces and restores the product-rule term lost from the div u * W expansion.
_E_DROP = {"E.13", "E.14", "E.27", "E.29"}
_E_FLIP = {"E.19", "E.25c", "E.25d"}


def _flipped(t: Term) -> Term:
    return Term(label=t.label, coef=-t.coef, scalars=t.scalars, subs=t.subs, ops=t.ops, fn=t.fn)


E_TERMS = [_flipped(t) if t.label in _E_FLIP else t for t in E_TERMS_PRINTED if t.label not in _E_DROP] + [
    T("E.29", 2, "emh", "l,an,nl->a", "w", "ETA", "dvwl"),
    T("E.65", -2, "cm2", "abgd,b,gk,k,d->a", "EPS_UP", "ul", "du", "dh", "Wl"),
    T("E.66", -2, "emh", "l,l,am,m->a", "w", "vwl", "ETA", "dh"),
    T("E.67", -2, "emh", "an,nl,lbgd,b,g,d->a", "ETA", "dw", "EPS_M0", "ul", "dh", "wl"),
]


def sde_terms(variant: str = "corrected"):
    """(Gamma, F, E) term tables for the G transport law."""
    if variant == "printed":
        return GAMMA_TERMS_PRINTED, F_TERMS, E_TERMS_PRINTED
    if variant != "corrected":
        raise ValueError(f"unknown variant {variant!r}")
    return GAMMA_TERMS, F_TERMS, E_TERMS


# ------------------------------------------------------------------ convenience


def modified_vorticity(s: FluidState) -> Field:
    return s.w


def fluid_W(s: FluidState) -> Field:
    return s.W


def fluid_G(s: FluidState) -> Field:
    return s.G


def assemble_gamma_F_E(s: FluidState, with_terms: bool = False):
    """(Gamma, F, E); with_terms=True also returns the labelled term lists."""
    if not with_terms:
        return s.Gamma, s.F, s.E
    terms = {
        "Gamma": evaluate_terms(GAMMA_TERMS, s),
        "F": evaluate_terms(F_TERMS, s),
        "E": evaluate_terms(E_TERMS, s),
    }
    return s.Gamma, s.F, s.E, terms


def orthogonality(s: FluidState) -> dict:
    """max |u_a w^a| and max |u_a W^a|."""
    return {
        "u.w": max_abs(ein("a,a->", s.ul, s.w)),
        "u.W": max_abs(ein("a,a->", s.ul, s.W)),
    }


def w0_from_spatial(s: FluidState) -> Field:
    """w^0 recovered from u_k w^k = 0 as (u^0)^{-1} u^i w_i."""
    return ein("i,i->", s.u[1:], s.wl[1:]) * s.u0inv


def W0_from_spatial(s: FluidState) -> Field:
    """W^0 recovered as -(u_0)^{-1} u^i W_i = (u^0)^{-1} u^i W_i."""
    return ein("i,i->", s.u[1:], s.Wl[1:]) * s.u0inv


# ------------------------------------------------------------------ grid residual wrappers


TRANSPORT_IDENTITIES = ("CEQ", "CEQ0", "CEQ1", "SDe")
DIVCURL_IDENTITIES = ("HDe", "OEe", "c2", "d5")


def _residuals(s: FluidState, names, variant):
    from .identities import get_identity, residual

    return {n: residual(get_identity(n, variant), s) for n in names}


def transport_residuals(s: FluidState, names=TRANSPORT_IDENTITIES, variant: str = "corrected") -> dict:
    """Relative residuals of the transport identities on a state with time data.

    The state's fields must carry enough time information: a jet or grid
    Taylor series of order >= depth, or a trajectory window.
    """
    return _residuals(s, names, variant)


def divcurl_residuals(s: FluidState, names=DIVCURL_IDENTITIES, variant: str = "corrected") -> dict:
    return _residuals(s, names, variant)


def d17_ratio(s: FluidState, grid, s0: float = 2.25) -> dict:
    """||grad W_spatial||_{H^{s0-2}} against the sum of the product norms bounding it.

    Products are taken as full outer products of the listed factors.
    """
    from .analysis import ResolutionWarning, sobolev_norm
    import warnings

    def nrm(x):
        arr = x.values() if isinstance(x, Field) else x
        return float(sobolev_norm(arr.reshape((-1,) + arr.shape[-3:]), s0 - 2, grid, homogeneous=True))

    def outer(*fs):
        arrs = [f.values() if isinstance(f, Field) else f for f in fs]
        out = arrs[0]
        for a in arrs[1:]:
            out = np.einsum("i...,j...->ij...", out.reshape((-1,) + out.shape[-3:]), a.reshape((-1,) + a.shape[-3:]))
        return out

    dudh = np.concatenate([s.du.values().reshape((-1,) + s.h.values().shape), s.dh.values()])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        lhs = nrm(s.dW.values()[1:, 1:])
        terms = {
            "vort W": nrm(s.vortW),
            "W.(du,dh)": nrm(outer(s.W, dudh)),
            "dw.(du,dh)": nrm(outer(s.dw, dudh)),
            "w.du.dh": nrm(outer(s.w, s.du, s.dh)),
            "w.w.dh": nrm(outer(s.w, s.w, s.dh)),
        }
    rhs = sum(terms.values())
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0, "terms": terms}


__all__ = [
    "transport_residuals", "divcurl_residuals", "d17_ratio", "TRANSPORT_IDENTITIES", "DIVCURL_IDENTITIES",
    "FluidState", "Term", "vort", "lower", "raise_", "stack",
    "GAMMA_TERMS", "F_TERMS", "E_TERMS", "GAMMA_TERMS_PRINTED", "E_TERMS_PRINTED",
    "sde_terms", "assemble_gamma_F_E",
]
