"""Littlewood-Paley blocks, Sobolev/Besov/Hoelder norms, energies and probes.

Dyadic blocks use zeta_j(xi) = eta(|xi| / 2^j) - eta(|xi| / 2^(j-1)) with a
C-infinity radial cutoff eta (1 on |xi| <= 1, 0 on |xi| >= 2), so the
blocks telescope and reconstruct every nonzero resolvable frequency exactly.
The zero mode is kept as a separate "mean" block.
"""
from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import lambertw

from .fields import Grid, gradient
from .geometry import smooth_step


class ResolutionWarning(UserWarning):
    pass


class NormValue(float):
    """A float carrying an under-resolution flag."""

    under_resolved: bool = False

    def __new__(cls, value, under_resolved: bool = False):
        obj = super().__new__(cls, value)
        obj.under_resolved = under_resolved
        return obj


def eta(r):
    """Radial cutoff: 1 for r <= 1, 0 for r >= 2, smooth in between."""
    return 1.0 - smooth_step(np.asarray(r, dtype=float) - 1.0)


def zeta(r):
    """Shell function eta(r) - eta(2r), supported in 1/2 <= r <= 2."""
    return eta(r) - eta(2.0 * np.asarray(r, dtype=float))


# ------------------------------------------------------------------ blocks


def dyadic_range(grid: Grid) -> range:
    kmin = 2 * np.pi / grid.L
    kmax = float(np.max(grid.kmag()))
    return range(int(math.floor(math.log2(kmin))), int(math.ceil(math.log2(kmax))) + 1)


def _fft(f):
    return np.fft.fftn(f, axes=(-3, -2, -1))


def _ifft(fh):
    return np.real(np.fft.ifftn(fh, axes=(-3, -2, -1)))


@lru_cache(maxsize=256)
def lp_multiplier(grid: Grid, j: int) -> np.ndarray:
    k = grid.kmag()
    out = eta(k / 2.0**j) - eta(k / 2.0 ** (j - 1))
    out.setflags(write=False)
    return out


def lp_project(f: np.ndarray, j: int, grid: Grid) -> np.ndarray:
    return _ifft(_fft(f) * lp_multiplier(grid, j))


def lp_blocks(f: np.ndarray, grid: Grid) -> dict:
    """{"mean": zero mode, j: P_j f} over the resolvable dyadic range."""
    fh = _fft(f)
    out = {"mean": np.broadcast_to(np.real(fh[..., :1, :1, :1]) / grid.npoints, f.shape).copy()}
    for j in dyadic_range(grid):
        out[j] = _ifft(fh * lp_multiplier(grid, j))
    return out


def partition_defect(grid: Grid) -> float:
    """max over nonzero modes of |sum_j zeta_j - 1|."""
    k = grid.kmag()
    total = sum(lp_multiplier(grid, j) for j in dyadic_range(grid))
    return float(np.max(np.abs(total[k > 0] - 1.0)))


# ------------------------------------------------------------------ norms


def l2(f: np.ndarray, grid: Grid) -> float:
    return grid.l2(f)


def lp_norm(f: np.ndarray, p: float, grid: Grid) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(f)))
    return float((np.sum(np.abs(f) ** p) * grid.cell_volume) ** (1.0 / p))


def _vector_norm(fn, f: np.ndarray, *args) -> float:
    """Euclidean combination of the norms of the components of a stacked field."""
    f = np.asarray(f, dtype=float)
    if f.ndim == 3:
        return fn(f, *args)
    flat = f.reshape((-1,) + f.shape[-3:])
    return float(math.sqrt(sum(fn(c, *args) ** 2 for c in flat)))


def _top_block_share(weights, total_sq) -> bool:
    return bool(total_sq > 0 and weights[-1] > 1e-3 * total_sq)


def sobolev_norm(f: np.ndarray, s: float, grid: Grid, homogeneous: bool = False) -> NormValue:
    """LP form ||f||_{L2} + (sum_j 2^{2js} ||P_j f||_{L2}^2)^{1/2} (homogeneous part only if asked)."""
    def one(c):
        fh = _fft(c)
        terms = [2.0 ** (2 * j * s) * grid.l2(_ifft(fh * lp_multiplier(grid, j))) ** 2 for j in dyadic_range(grid)]
        hom = math.sqrt(sum(terms))
        one.flag = one.flag or _top_block_share(terms, sum(terms))
        return hom if homogeneous else grid.l2(c) + hom
    one.flag = False
    val = _vector_norm(one, f)
    if one.flag:
        warnings.warn("highest dyadic block carries a visible share of the norm", ResolutionWarning, stacklevel=2)
    return NormValue(val, one.flag)


def sobolev_norm_weighted(f: np.ndarray, s: float, grid: Grid, homogeneous: bool = True) -> float:
    """(sum w(xi) |fhat|^2 dV / N)^{1/2} with w = |xi|^{2s} or (1 + |xi|^2)^s."""
    k = grid.kmag()
    if homogeneous:
        w = np.where(k > 0, k, 1.0) ** (2 * s) * (k > 0)
    else:
        w = (1.0 + k**2) ** s

    def one(c):
        fh = _fft(c)
        return math.sqrt(float(np.sum(w * np.abs(fh) ** 2)) * grid.cell_volume / grid.npoints)

    return _vector_norm(one, f)


def besov_norm(f: np.ndarray, s: float, grid: Grid) -> NormValue:
    """Homogeneous B^s_{inf,2}: (sum_j 2^{2js} ||P_j f||_inf^2)^{1/2}."""
    def one(c):
        fh = _fft(c)
        terms = [2.0 ** (2 * j * s) * float(np.max(np.abs(_ifft(fh * lp_multiplier(grid, j))))) ** 2
                 for j in dyadic_range(grid)]
        one.flag = one.flag or _top_block_share(terms, sum(terms))
        return math.sqrt(sum(terms))
    one.flag = False
    return NormValue(_vector_norm(one, f), one.flag)


def holder_seminorm(f: np.ndarray, delta: float, grid: Grid) -> float:
    """max |f(x + h e_i) - f(x)| / h^delta over dyadic shifts h = 2^k dx < L/2.

    A lower bound for the continuum seminorm.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    best = 0.0
    for ax in range(grid.dim):
        shift = 1
        while shift < grid.n // 2 + 1:
            h = shift * grid.dx
            diff = np.abs(np.roll(f, -shift, axis=ax - 3) - f)
            best = max(best, float(np.max(diff)) / h**delta)
            shift *= 2
    return best


def fractional_laplacian(f: np.ndarray, a: float, grid: Grid) -> np.ndarray:
    """Lambda^a f with Lambda = (-Delta)^{1/2}; the zero mode is sent to 0."""
    k = grid.kmag()
    mult = np.where(k > 0, np.where(k > 0, k, 1.0) ** a, 0.0)
    return _ifft(_fft(f) * mult)


def sobolev_equivalence(f: np.ndarray, s: float, grid: Grid) -> float:
    """Ratio of the LP homogeneous norm to the |xi|^s-weighted norm."""
    w = sobolev_norm_weighted(f, s, grid, homogeneous=True)
    return float(sobolev_norm(f, s, grid, homogeneous=True)) / w if w > 0 else float("nan")


# ------------------------------------------------------------------ energies


@dataclass
class EnergyRecord:
    t: float
    E_s: float
    Etilde_s: float
    Ebb: float
    M: float
    Linf_du: float
    Linf_dh: float
    besov_du: float

    @property
    def integrand(self) -> float:
        return max(self.Linf_du, self.Linf_dh) + self.besov_du


ENERGY_COLUMNS = ("t", "E_s", "Etilde_s", "Ebb", "M", "Linf_du", "Linf_dh", "besov_du")


@dataclass
class EnergyParams:
    s: float = 2.5
    s0: float = 2.25
    s_star: float = 2.25
    h_ref: float = 0.0


def _state_energies(h, u, w, grid: Grid, prm: EnergyParams):
    hh = h - prm.h_ref
    vel = np.concatenate([u[1:], (u[0] - 1.0)[None]])
    E_s = sobolev_norm(hh, prm.s, grid) ** 2 + sobolev_norm(vel, prm.s, grid) ** 2 + sobolev_norm(w, prm.s0, grid) ** 2
    Et = (sobolev_norm(hh, prm.s, grid) ** 2 + sobolev_norm(u[0] - 1.0, prm.s, grid) ** 2
          + sobolev_norm(u[1:], prm.s, grid) ** 2 + sobolev_norm(w, 2.0, grid) ** 2)
    allf = np.concatenate([hh[None], (u[0] - 1.0)[None], u[1:]])
    Ebb = sobolev_norm(allf, prm.s_star + 1, grid) ** 2 + sobolev_norm(w, 3.0, grid) ** 2
    return float(E_s), float(Et), float(Ebb)


def energy_record(U: np.ndarray, grid: Grid, vartheta: float, t: float, prm: EnergyParams,
                  M: float = 0.0) -> EnergyRecord:
    """Energies of one state; d_t comes from the semi-discrete equations."""
    from .dynamics import grid_jet

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        jet = grid_jet(U, grid, vartheta, 1)
        s = jet.state()
        h = s.h.values()
        u = s.u.values()
        w = s.w.values()
        du = s.du.values()  # [m, a] space-time derivatives
        dh = s.dh.values()
        E_s, Et, Ebb = _state_energies(h, u, w, grid, prm)
        besov = besov_norm(np.concatenate([du.reshape((-1,) + grid.shape), dh]), prm.s0 - 2, grid)
    return EnergyRecord(t, E_s, Et, Ebb, M, float(np.max(np.abs(du))), float(np.max(np.abs(dh))), float(besov))


def energy_functionals(times, states, grid: Grid, vartheta: float, prm: EnergyParams | None = None) -> list:
    """EnergyRecord per snapshot with M(t) accumulated by the trapezoid rule."""
    prm = prm or EnergyParams()
    out = []
    M = 0.0
    for i, (t, U) in enumerate(zip(times, states)):
        rec = energy_record(U, grid, vartheta, t, prm)
        if i:
            M += 0.5 * (t - out[-1].t) * (rec.integrand + out[-1].integrand)
        rec.M = M
        out.append(rec)
    return out


def write_energy_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENERGY_COLUMNS)
        for r in records:
            w.writerow([repr(float(getattr(r, c))) for c in ENERGY_COLUMNS])


@dataclass
class GronwallResult:
    K: float
    bounded: bool
    skipped: bool = False
    note: str = ""
    per_sample: list = field(default_factory=list)


def gronwall_diagnostic(records, K_ceiling: float = 1e3) -> GronwallResult:
    """Smallest K >= 0 with log(E(t)/E(0)) <= K M(t) exp(K M(t)) at every sample."""
    if len(records) < 2:
        raise ValueError("need at least two energy records")
    E0 = records[0].E_s
    if E0 == 0.0:
        return GronwallResult(0.0, True, skipped=True, note="E_s(0) = 0; diagnostic skipped")
    K = 0.0
    per = []
    for r in records[1:]:
        ratio = math.log(r.E_s / E0) if r.E_s > 0 else -math.inf
        if ratio <= 0.0:
            per.append(0.0)
            continue
        if r.M <= 0.0:
            return GronwallResult(math.inf, False, note=f"growth at t={r.t} with M = 0", per_sample=per)
        k = float(np.real(lambertw(ratio))) / r.M
        per.append(k)
        K = max(K, k)
    return GronwallResult(K, K <= K_ceiling, per_sample=per)


# ------------------------------------------------------------------ inequality probes


def _random_band(grid: Grid, rng, band: int, decay: float = 1.0, low: int = 0) -> np.ndarray:
    """Band-limited field whose draw order depends only on the band, not on n."""
    ranges = [range(-band, band + 1) if ax < grid.dim else [0] for ax in range(3)]
    spec = np.zeros(grid.shape, dtype=complex)
    for k in itertools.product(*ranges):
        mag = math.sqrt(sum(v * v for v in k))
        a, b = rng.normal(size=2)
        if mag < low:
            continue
        amp = (1.0 + mag) ** (-decay)
        spec[tuple(v % n for v, n in zip(k, grid.shape))] += amp * (a - 1j * b)
    f = np.real(np.fft.ifftn(spec, axes=(-3, -2, -1)))
    return f / np.max(np.abs(f))


def kato_ponce_sides(f1, f2, grid: Grid, a: float = 1.5, p: float = 4.0):
    """Commutator ||L^a(f1 f2) - (L^a f1) f2||_2 against its product bound (q from 1/p + 1/q = 1/2)."""
    q = 1.0 / (0.5 - 1.0 / p)
    lhs = grid.l2(fractional_laplacian(f1 * f2, a, grid) - fractional_laplacian(f1, a, grid) * f2)
    grad2 = float(np.max(np.sqrt(np.sum(gradient(f2, grid) ** 2, axis=0))))
    rhs = (grid.l2(fractional_laplacian(f1, a - 1, grid)) * grad2
           + lp_norm(f1, p, grid) * lp_norm(fractional_laplacian(f2, a, grid), q, grid))
    return lhs, rhs


def lp_product_sides(f1, f2, grid: Grid, a: float = 0.5):
    """||L^a(f1 f2)||_2 against ||f1||_{B^a_{inf,2}} ||f2||_2 + ||f1||_inf ||f2||_{H^a}."""
    lhs = grid.l2(fractional_laplacian(f1 * f2, a, grid))
    rhs = (float(besov_norm(f1, a, grid)) * grid.l2(f2)
           + float(np.max(np.abs(f1))) * float(sobolev_norm(f2, a, grid, homogeneous=True)))
    return lhs, rhs


def inequality_probe(kind: str, seed: int, count: int, n: int = 128, dim: int = 2, band: int = 12,
                     adversarial: bool = False, a: float | None = None) -> float:
    """Max LHS/RHS over ``count`` random band-limited pairs."""
    grid = Grid(dim, n)
    rng = np.random.default_rng(seed)
    best = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        for _ in range(count):
            if adversarial:
                f1 = _random_band(grid, rng, band, decay=0.0, low=band // 2)
                f2 = _random_band(grid, rng, band, decay=0.0, low=band // 2)
            else:
                f1 = _random_band(grid, rng, band)
                f2 = _random_band(grid, rng, band)
            if kind == "kato_ponce_commutator":
                lhs, rhs = kato_ponce_sides(f1, f2, grid, **({"a": a} if a is not None else {}))
            elif kind == "lp_product":
                lhs, rhs = lp_product_sides(f1, f2, grid, **({"a": a} if a is not None else {}))
            else:
                raise ValueError(f"unknown probe {kind!r}")
            if rhs > 0:
                best = max(best, lhs / rhs)
    return best


__all__ = [
    "NormValue", "ResolutionWarning", "eta", "zeta", "dyadic_range", "lp_multiplier", "lp_project",
    "lp_blocks", "partition_defect", "lp_norm", "sobolev_norm", "sobolev_norm_weighted", "besov_norm",
    "holder_seminorm", "fractional_laplacian", "sobolev_equivalence", "EnergyRecord", "EnergyParams",
    "ENERGY_COLUMNS", "energy_record", "energy_functionals", "write_energy_csv", "GronwallResult",
    "gronwall_diagnostic", "kato_ponce_sides", "lp_product_sides", "inequality_probe",
]
