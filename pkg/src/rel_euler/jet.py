"""Formal solution jets: Cauchy-Kovalevskaya completion in truncated Taylor algebra.

Spatial Taylor data for U = (p, u^1, u^2, u^3) at a point is completed to a
space-time jet by solving the first-order symmetric system for the time
derivative, one time degree at a time.  Identities from
:mod:`rel_euler.identities` are then evaluated on the jet, where they must
vanish up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from . import eos
from .algebra import Field, TaylorRep, const, ein, grad, stack, taylor_rep
from .identities import JET_IDENTITIES, Residual, get_identity, residual
from .vorticity import FluidState

MAX_ORDER = 4


class JetOrderError(ValueError):
    """Raised when a jet is too short for the requested identity."""


# ------------------------------------------------------------------ flux matrices


def flux_matrices(U: Field, vartheta: float) -> Field:
    """A^alpha(U) as a Field with lead shape (4, 4, 4): [alpha, row, col]."""
    p = U[0]
    ui = [U[1], U[2], U[3]]
    u0 = (sum((x * x for x in ui[1:]), ui[0] * ui[0]) + 1.0).sqrt()
    rho = eos.density_from_pressure(p, vartheta)
    e_inv = (rho + p).recip()
    cs2 = eos.sound_speed_sq(rho, vartheta)
    a00 = e_inv * e_inv * cs2.recip()
    u = [u0] + ui
    zero = const(0.0, p)
    inv_u0sq = (u0 * u0).recip()
    mats = []
    for a in range(4):
        rows = [[None] * 4 for _ in range(4)]
        rows[0][0] = a00 * u[a]
        for j in range(1, 4):
            if a == 0:
                v = e_inv * u[j] / u0
            else:
                v = e_inv if a == j else zero
            rows[0][j] = v
            rows[j][0] = v
            for k in range(1, 4):
                proj = (1.0 if j == k else 0.0) - u[j] * u[k] * inv_u0sq
                rows[j][k] = u[a] * proj
        mats.append(stack([stack(r) for r in rows]))
    return stack(mats)


def jet_solve(M: Field, b: Field) -> Field:
    """Solve M x = b in truncated Taylor algebra by nilpotent fixed-point iteration."""
    rep = M.rep
    M0 = rep.base(M.c)
    if M0.ndim == 2:
        M0inv = np.linalg.inv(M0)
        N = M - const(M0, M)
    else:
        # one 4x4 inverse per grid point, carried as a time-constant field
        M0inv = np.moveaxis(np.linalg.inv(np.moveaxis(M0, (0, 1), (-2, -1))), (-2, -1), (0, 1))
        c = np.zeros_like(M.c)
        rep.base(c)[...] = M0
        N = M - Field(c, rep, M.order)
        c = np.zeros_like(M.c)
        rep.base(c)[...] = M0inv
        M0inv = Field(c, rep, M.order)
    x = ein("ij,j->i", M0inv, b)
    for _ in range(M.order + 1):
        x = ein("ij,j->i", M0inv, b - ein("ij,j->i", N, x))
    return x


def time_derivative_jet(U: Field, vartheta: float) -> Field:
    """-(A^0)^{-1} A^i d_i U in the jet algebra."""
    A = flux_matrices(U, vartheta)

    dU = grad(U)
    flux = ein("iab,ib->a", A[1:], dU[1:])
    return -jet_solve(A[0], flux)


# ------------------------------------------------------------------ jets


@dataclass
class SpaceTimeJet:
    """Truncated Taylor data of a formal solution at the origin."""

    U: Field  # (p, u^1, u^2, u^3)
    vartheta: float
    order: int
    u0_override: Field | None = None

    @cached_property
    def p(self) -> Field:
        return self.U[0]

    @cached_property
    def u(self) -> Field:
        ui = self.U[1:]
        if self.u0_override is not None:
            u0 = self.u0_override
        else:
            u0 = (ein("i,i->", ui, ui) + 1.0).sqrt()
        return stack([u0, ui[0], ui[1], ui[2]])

    @cached_property
    def rho(self) -> Field:
        return eos.density_from_pressure(self.p, self.vartheta)

    @cached_property
    def h(self) -> Field:
        return eos.enthalpy(self.rho, self.vartheta)

    @cached_property
    def cs2(self) -> Field:
        return eos.sound_speed_sq(self.rho, self.vartheta)

    @cached_property
    def Omega(self) -> Field:
        u0 = self.u[0]
        return (self.cs2 + (1.0 - self.cs2) * u0 * u0).recip()

    def state(self, u_minus: Field | None = None, extra: dict | None = None) -> FluidState:
        return FluidState(self.h, self.u, self.vartheta, u_minus=u_minus, extra=extra)

    @property
    def rep(self) -> TaylorRep:
        return self.U.rep

    def coefficient(self, name: str, exponent) -> float:
        """Taylor coefficient of h, p, u0..u3 for a (t, x1, x2, x3) exponent."""
        idx = self.rep.index[tuple(exponent)]
        f = {"p": self.p, "h": self.h}.get(name)
        if f is None:
            f = self.u[int(name[1])]
        return float(f.c[idx])

    def derivative(self, name: str, exponent) -> float:
        """Partial derivative value: coefficient times the multi-factorial."""
        return self.coefficient(name, exponent) * float(np.prod([factorial(k) for k in exponent]))


def _check_order(N: int) -> None:
    if not 1 <= N <= MAX_ORDER:
        raise JetOrderError(f"jet order must lie in 1..{MAX_ORDER}, got {N}")


def _time_slots(rep: TaylorRep, m: int):
    """Indices of t-degree m coefficients and of their t-degree m-1 sources."""
    dst, src = [], []
    for i, e in enumerate(rep.exps):
        if e[0] == m:
            dst.append(i)
            src.append(rep.index[(m - 1,) + tuple(e[1:])])
    return np.array(dst, dtype=np.int64), np.array(src, dtype=np.int64)


def _check_base(U0: np.ndarray, vartheta: float) -> None:
    p = float(U0[0])
    if not p > 0.0:
        raise eos.EOSDomainError(f"base pressure must be positive, got {p}")
    eos.from_pressure(p, vartheta)


def complete_jet(spatial: np.ndarray, vartheta: float, N: int) -> SpaceTimeJet:
    """Fill every time coefficient of U from its spatial Taylor data.

    ``spatial`` has shape (4, ncoef) in the ordering of ``taylor_rep(N)``;
    any coefficient with a positive time degree is ignored.
    """
    _check_order(N)
    rep = taylor_rep(N)
    c = np.array(spatial, dtype=float)
    if c.shape != (4, rep.ncoef):
        raise ValueError(f"spatial data must have shape (4, {rep.ncoef})")
    c[:, rep.exps[:, 0] > 0] = 0.0
    _check_base(c[:, 0], vartheta)
    for m in range(1, N + 1):
        U = Field(c, rep, N)
        dt = time_derivative_jet(U, vartheta)
        dst, src = _time_slots(rep, m)
        c[:, dst] = dt.c[:, src] / m
    return SpaceTimeJet(Field(c, rep, N), vartheta, N)


def _spatial_scale(rep: TaylorRep) -> np.ndarray:
    return np.array([1.0 / np.prod([factorial(k) for k in e]) for e in rep.exps])


def _draw(rng, rep: TaylorRep, amplitude: float, base: np.ndarray, time_part: bool) -> np.ndarray:
    scale = _spatial_scale(rep)
    draw = rng.uniform(-amplitude, amplitude, size=(4, rep.ncoef)) * scale
    mask = rep.exps[:, 0] > 0 if time_part else rep.exps[:, 0] == 0
    c = np.where(mask[None, :], draw, 0.0)
    if not time_part:
        c[0] *= base[0]  # pressure perturbations are relative
        c[:, 0] += base
    return c


def base_state(rho: float, vartheta: float) -> np.ndarray:
    return np.array([eos.pressure(rho, vartheta), 0.0, 0.0, 0.0])


def random_constrained_jet(seed: int, N: int, amplitude: float, vartheta: float = 2.0,
                           rho0: float = 0.25, max_tries: int = 20) -> SpaceTimeJet:
    """Random spatial data (coefficients uniform in +-amplitude / beta!) completed in time."""
    _check_order(N)
    rep = taylor_rep(N)
    rng = np.random.default_rng(seed)
    base = base_state(rho0, vartheta)
    for _ in range(max_tries):
        c = _draw(rng, rep, amplitude, base, time_part=False)
        try:
            return complete_jet(c, vartheta, N)
        except eos.EOSDomainError:
            continue
    raise eos.EOSDomainError("could not draw an admissible base point; lower the amplitude")


def random_unconstrained_jet(seed: int, N: int, amplitude: float, vartheta: float = 2.0,
                             rho0: float = 0.25) -> SpaceTimeJet:
    """Negative control: the same spatial draw with random time coefficients.

    The time part of u^0 is randomized as well, which breaks the
    normalization of u away from t = 0.
    """
    _check_order(N)
    rep = taylor_rep(N)
    rng = np.random.default_rng(seed)
    base = base_state(rho0, vartheta)
    c = _draw(rng, rep, amplitude, base, time_part=False)
    _check_base(c[:, 0], vartheta)
    tpart = _draw(rng, rep, amplitude, base, time_part=True)
    tpart[0] *= base[0]
    c = c + tpart
    U = Field(c, rep, N)
    ui = U[1:]
    u0 = (ein("i,i->", ui, ui) + 1.0).sqrt()
    u0c = u0.c.copy()
    t_mask = rep.exps[:, 0] > 0
    u0c[t_mask] = rng.uniform(-amplitude, amplitude, size=int(t_mask.sum())) * _spatial_scale(rep)[t_mask]
    return SpaceTimeJet(U, vartheta, N, u0_override=Field(u0c, rep, N))


def euler_residual_jet(jet: SpaceTimeJet) -> tuple[Field, Field]:
    """Residuals of the primitive (h, u) equations on a jet."""
    s = jet.state()
    r_h = ein("k,k->", s.u, s.dh) + s.cs2 * s.divu
    r_u = ein("k,ka->a", s.u, s.du) + ein("ak,k->a", s.proj, s.dh)
    return r_h, r_u


# ------------------------------------------------------------------ split velocity


def elliptic_minus_jet(jet: SpaceTimeJet, seed: int, amplitude: float = 0.1) -> Field:
    """Jet of u_minus solving P u_minus = e^{-h} W, with free data at time degree 0 and 1."""
    rep = jet.rep
    N = jet.order
    rng = np.random.default_rng(seed)
    scale = _spatial_scale(rep)
    c = rng.uniform(-amplitude, amplitude, size=(4, rep.ncoef)) * scale
    c[:, rep.exps[:, 0] >= 2] = 0.0
    s0 = jet.state()
    target = s0.W * s0.emh
    u0 = float(rep.base(jet.u.c)[0])
    P00 = -1.0 + 2.0 * u0 * u0
    for _ in range(N + 2):
        for k in range(2, N + 1):
            s = FluidState(jet.h, jet.u, jet.vartheta, u_minus=Field(c, rep, N))
            res = (s.um - ein("bg,bga->a", s.Pmat, s.ddum)) - target
            dst, _ = _time_slots(rep, k)
            src = np.array([rep.index[(k - 2,) + tuple(rep.exps[i][1:])] for i in dst])
            # -P00 * k (k-1) c[k] is the leading contribution of the residual at t-degree k-2
            c[:, dst] += res.c[:, src] / (P00 * k * (k - 1))
    return Field(c, rep, N)


# ------------------------------------------------------------------ evaluation


def _random_oneform(seed: int, rep: TaylorRep, N: int) -> Field:
    rng = np.random.default_rng(seed + 7919)
    return Field(rng.uniform(-1, 1, size=(4, rep.ncoef)) * _spatial_scale(rep), rep, N)


def eval_identity(jet: SpaceTimeJet, name: str, variant: str = "corrected", seed: int = 0,
                  keep_terms: bool = False) -> Residual:
    """Relative residual of an identity on a jet (all valid coefficients)."""
    ident = get_identity(name, variant)
    if jet.order < ident.depth:
        raise JetOrderError(f"{name} needs jet order >= {ident.depth}, got {jet.order}")
    um = None
    extra = None
    if ident.requires == "split":
        um = elliptic_minus_jet(jet, seed)
    elif ident.requires == "oneform":
        extra = {"Al": _random_oneform(seed, jet.rep, jet.order)}
    return residual(ident, jet.state(u_minus=um, extra=extra), keep_terms=keep_terms)


# ------------------------------------------------------------------ suite

# default tolerance by the jet order an identity is checked at
ORDER_TOLERANCE = {1: 1e-9, 2: 1e-9, 3: 1e-8, 4: 1e-7}

# identity groups and jet counts of the standard suite
SUITE_GROUPS = (
    (2, 100, ("WTe-h", "WTe-u", "CEQ", "CEQ0", "HDe", "OE00", "cr04", "cra0", "cra1")),
    (3, 100, ("CEQ1", "c2", "d5")),
    (4, 25, ("SDe",)),
)


def run_jet_suite(names, order: int, count: int, amplitude: float = 0.1, seed: int = 0,
                  vartheta: float = 2.0, rho0: float = 0.25, tolerance: float | None = None,
                  control: bool = False, variant: str = "corrected") -> dict:
    """Evaluate identities on ``count`` random jets of one order.

    Returns a dict keyed by identity name with worst-case residuals and the
    per-jet list.  With ``control=True`` the jets carry random time data and
    the report adds the median residual instead of a pass flag.
    """
    _check_order(order)
    idents = [get_identity(n, variant) for n in names]
    for ident in idents:
        if ident.depth > order:
            raise JetOrderError(f"{ident.name} needs jet order >= {ident.depth}, got {order}")
    tol = ORDER_TOLERANCE[order] if tolerance is None else float(tolerance)
    per = {n: [] for n in names}
    npts = {}
    for k in range(count):
        js = seed * 1_000_003 + k
        if control:
            jet = random_unconstrained_jet(js, order, amplitude, vartheta, rho0)
        else:
            jet = random_constrained_jet(js, order, amplitude, vartheta, rho0)
        for n in names:
            r = eval_identity(jet, n, variant, seed=js)
            per[n].append(r.max_rel)
            npts[n] = r.n_points
    out = {}
    for ident in idents:
        vals = np.array(per[ident.name])
        entry = {
            "anchor": ident.anchor,
            "max_rel_residual": float(vals.max()),
            "l2_rel_residual": float(np.sqrt(np.mean(vals**2))),
            "median_rel_residual": float(np.median(vals)),
            "n_points": int(npts[ident.name]),
            "jet_order": order,
            "count": count,
        }
        if not control:
            entry["tolerance"] = tol
            entry["pass"] = bool(vals.max() <= tol)
        out[ident.name] = entry
    return out


__all__ = [
    "ORDER_TOLERANCE", "SUITE_GROUPS", "run_jet_suite",
    "MAX_ORDER", "JetOrderError", "SpaceTimeJet", "flux_matrices", "jet_solve", "complete_jet",
    "random_constrained_jet", "random_unconstrained_jet", "euler_residual_jet",
    "elliptic_minus_jet", "eval_identity", "JET_IDENTITIES",
]
