"""Acoustic metric, the space-time elliptic split, linear waves and null frames.

Wave operators follow the non-covariant convention box_g f = g^{ab} d_a d_b f
(no Christoffel terms).  Metric arrays are stored as [alpha, beta, ...grid].
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import eos
from ._backend import max_threads
from .algebra import ETA, fd_time, spectral_diff
from .fields import FieldSet, Grid, gradient, normalize_velocity, spectral_derivative


# ------------------------------------------------------------------ metric


@dataclass
class AcousticMetric:
    g_up: np.ndarray  # g^{ab}
    g_dn: np.ndarray  # g_{ab}
    Omega: np.ndarray

    def check(self, tol: float = 1e-10) -> dict:
        eye = np.einsum("ab...,bc...->ac...", self.g_up, self.g_dn)
        ident = np.eye(4).reshape((4, 4) + (1,) * (eye.ndim - 2))
        spatial = np.moveaxis(self.g_up[1:, 1:], (0, 1), (-2, -1))
        det = np.linalg.det(np.moveaxis(self.g_up, (0, 1), (-2, -1)))
        return {
            "g00_defect": float(np.max(np.abs(self.g_up[0, 0] + 1.0))),
            "inverse_defect": float(np.max(np.abs(eye - ident))),
            "spatial_min_eig": float(np.min(np.linalg.eigvalsh(spatial))),
            "max_det": float(np.max(det)),
        }

    def is_lorentzian(self) -> bool:
        c = self.check()
        return c["spatial_min_eig"] > 0 and c["max_det"] < 0


def metric_from_state(h, u, vartheta: float) -> AcousticMetric:
    """g^{ab} = Omega (c^2 m^{ab} + (c^2 - 1) u^a u^b) and its inverse in closed form."""
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    rho = eos.density_from_enthalpy(h, vartheta)
    cs2 = eos.sound_speed_sq(rho, vartheta)
    Om = 1.0 / (cs2 + (1.0 - cs2) * u[0] ** 2)
    uu = np.einsum("a...,b...->ab...", u, u)
    eta = ETA.reshape((4, 4) + (1,) * h.ndim)
    g_up = Om * (cs2 * eta + (cs2 - 1.0) * uu)
    ul = u * np.array([-1.0, 1.0, 1.0, 1.0]).reshape((4,) + (1,) * h.ndim)
    ulul = np.einsum("a...,b...->ab...", ul, ul)
    g_dn = (1.0 / Om) * (eta / cs2 + (1.0 / cs2 - 1.0) * ulul)
    return AcousticMetric(g_up, g_dn, Om)


def acoustic_metric(F: FieldSet) -> AcousticMetric:
    return metric_from_state(F.h, F.u, F.vartheta)


def rest_metric(cs2: float, shape=()) -> AcousticMetric:
    g_up = np.diag([-1.0, cs2, cs2, cs2]).reshape((4, 4) + (1,) * len(shape)) * np.ones(shape)
    g_dn = np.diag([-1.0, 1 / cs2, 1 / cs2, 1 / cs2]).reshape((4, 4) + (1,) * len(shape)) * np.ones(shape)
    return AcousticMetric(g_up, g_dn, np.ones(shape))


def _invert(g_up: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.linalg.inv(np.moveaxis(g_up, (0, 1), (-2, -1))), (-2, -1), (0, 1))


def truncate_metric(M: AcousticMetric, chi: np.ndarray, background: AcousticMetric) -> AcousticMetric:
    """chi (g - g(0)) + g(0) for a cutoff chi in [0, 1]."""
    chi = np.asarray(chi, dtype=float)
    if np.min(chi) < -1e-14 or np.max(chi) > 1 + 1e-14:
        raise ValueError("cutoff must take values in [0, 1]")
    g_up = chi * (M.g_up - background.g_up) + background.g_up
    Om = chi * (M.Omega - background.Omega) + background.Omega
    return AcousticMetric(g_up, _invert(g_up), Om)


def bump(grid: Grid, center=None, radius: float | None = None) -> np.ndarray:
    """Smooth compactly supported cutoff, 1 on half the radius, 0 outside the radius."""
    center = np.full(3, grid.L / 2) if center is None else np.asarray(center, float)
    radius = 0.4 * grid.L if radius is None else radius
    x = grid.coords()
    r2 = sum((x[a] - center[a]) ** 2 for a in range(grid.dim))
    r = np.sqrt(r2) / radius
    return smooth_step(2.0 - 2.0 * r) * np.ones(grid.shape)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def psi(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a, b = psi(x), psi(1.0 - x)
    return a / (a + b)


# ------------------------------------------------------------------ minors


def minors(u) -> np.ndarray:
    """Closed-form leading principal minors of m^{ab} + 2 u^a u^b."""
    u = np.asarray(u, dtype=float)
    s = u[0] ** 2
    out = [-1.0 + 2.0 * s]
    for i in range(1, 4):
        s = s - u[i] ** 2
        out.append(-1.0 + 2.0 * s)
    return np.array(out)


def minors_det(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    P = ETA + 2.0 * np.outer(u, u)
    return np.array([np.linalg.det(P[:k, :k]) for k in range(1, 5)])


# ------------------------------------------------------------------ space-time elliptic operator


class EllipticSolveError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class SpaceTimeBox:
    """Periodic box in (t, x1, x2, x3); arrays have shape (nt, nx, ny, nz)."""

    shape: tuple
    lengths: tuple

    def wavenumbers(self) -> list[np.ndarray]:
        out = []
        for ax, (n, L) in enumerate(zip(self.shape, self.lengths)):
            shp = [1, 1, 1, 1]
            shp[ax] = n
            k = 2 * np.pi * np.fft.fftfreq(n, d=L / n) if n > 1 else np.zeros(1)
            out.append(k.reshape(shp))
        return out

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for n, L in zip(self.shape, self.lengths)]))

    def coords(self) -> list[np.ndarray]:
        out = []
        for ax, (n, L) in enumerate(zip(self.shape, self.lengths)):
            shp = [1, 1, 1, 1]
            shp[ax] = n
            out.append((np.arange(n) * L / n).reshape(shp))
        return out


class EllipticOperatorP:
    """L v = v - P^{bg} d_b d_g v with P^{bg} = m^{bg} + 2 u^b u^g on a periodic box."""

    def __init__(self, u: np.ndarray, box: SpaceTimeBox):
        self.u = np.asarray(u, dtype=float)
        self.box = box
        self.P = ETA.reshape(4, 4, 1, 1, 1, 1) + 2.0 * np.einsum("a...,b...->ab...", self.u, self.u)
        k = box.wavenumbers()
        self._k = k
        Pbar = self.P.reshape(4, 4, -1).mean(axis=-1)
        sym = np.ones(box.shape)
        for b in range(4):
            for g in range(4):
                sym = sym + Pbar[b, g] * k[b] * k[g]
        self._precond_symbol = sym  # 1 + Pbar k k  (>0 by positivity of P)
        self.Pbar = Pbar

    @property
    def size(self) -> int:
        return int(np.prod(self.box.shape))

    def second_derivatives(self, v: np.ndarray) -> dict:
        vh = np.fft.fftn(v)
        out = {}
        for b in range(4):
            for g in range(b, 4):
                if self.box.shape[b] == 1 or self.box.shape[g] == 1:
                    out[b, g] = np.zeros_like(v)
                    continue
                out[b, g] = np.real(np.fft.ifftn(-self._k[b] * self._k[g] * vh))
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        d2 = self.second_derivatives(v)
        out = np.array(v, dtype=float)
        for (b, g), d in d2.items():
            coef = self.P[b, g] if b == g else 2.0 * self.P[b, g]
            out -= coef * d
        return out

    def precondition(self, r: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifftn(np.fft.fftn(r) / self._precond_symbol))

    def solve(self, f: np.ndarray, tol: float = 1e-12, maxiter: int = 500) -> tuple[np.ndarray, dict]:
        """Preconditioned Krylov solve of L v = f.

        L is not self-adjoint (non-divergence form), so BiCGSTAB is used with
        the constant-coefficient operator at the mean state as preconditioner.
        """
        shape = self.box.shape
        n = self.size
        A = spla.LinearOperator((n, n), matvec=lambda x: self.apply(x.reshape(shape)).ravel(), dtype=float)
        Mp = spla.LinearOperator((n, n), matvec=lambda x: self.precondition(x.reshape(shape)).ravel(), dtype=float)
        history = []
        fnorm = float(np.linalg.norm(f)) or 1.0

        def cb(xk):
            history.append(float(np.linalg.norm(self.apply(xk.reshape(shape)) - f)) / fnorm)

        x0 = self.precondition(f).ravel()
        x, info = spla.bicgstab(A, f.ravel(), x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=Mp, callback=cb)
        v = x.reshape(shape)
        final = float(np.linalg.norm(self.apply(v) - f)) / fnorm
        if info != 0 and final > 10 * tol:
            raise EllipticSolveError(f"BiCGSTAB did not converge (info={info}, residual={final:.3e})", history)
        return v, {"iterations": len(history), "residual": final, "history": history}


def elliptic_split(u: np.ndarray, rhs: np.ndarray, box: SpaceTimeBox, tol: float = 1e-12):
    """Solve P u_minus^a = rhs^a (rhs = e^{-h} W) component-wise; u_plus = u - u_minus."""
    op = EllipticOperatorP(u, box)
    um = np.zeros_like(rhs)
    reports = []
    for a in range(4):
        if not np.any(rhs[a]):
            reports.append({"iterations": 0, "residual": 0.0, "history": []})
            continue
        um[a], rep = op.solve(rhs[a], tol=tol)
        reports.append(rep)
    return um, u - um, reports


def spacetime_velocity(box: SpaceTimeBox, seed: int, amplitude: float = 0.3, kmax: int = 1) -> np.ndarray:
    """Smooth normalized four-velocity periodic in (t, x) for operator tests."""
    rng = np.random.default_rng(seed)
    uvec = np.zeros((3,) + box.shape)
    for i in range(3):
        uvec[i] = amplitude * band_limited(box, rng, kmax)
    return normalize_velocity(uvec)


def band_limited(box: SpaceTimeBox, rng, kmax: int) -> np.ndarray:
    """Random real trigonometric polynomial with |k_a| <= kmax per axis, max-normalized.

    The draw order depends only on kmax, so the same seed gives the same
    function at every resolution.
    """
    ranges = [range(-kmax, kmax + 1) if n > 1 else [0] for n in box.shape]
    spec = np.zeros(box.shape, dtype=complex)
    for k in itertools.product(*ranges):
        a, b = rng.normal(size=2)
        spec[tuple(kk % n for kk, n in zip(k, box.shape))] += a - 1j * b
    acc = np.real(np.fft.ifftn(spec))
    return acc / np.max(np.abs(acc))


def box_sobolev(f: np.ndarray, a: float, box: SpaceTimeBox) -> float:
    k = box.wavenumbers()
    k2 = sum(kk**2 for kk in k)
    fh = np.fft.fftn(f)
    return float(np.sqrt(np.sum((1 + k2) ** a * np.abs(fh) ** 2) * box.cell_volume / f.size))


def ellip_constant(u: np.ndarray, box: SpaceTimeBox, a: float, samples: int = 50, seed: int = 0,
                   kmax: int = 2) -> float:
    """max over random band-limited v of ||v||_{H^a} / ||L v||_{H^{a-2}}."""
    op = EllipticOperatorP(u, box)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        v = band_limited(box, rng, kmax)
        best = max(best, box_sobolev(v, a, box) / box_sobolev(op.apply(v), a - 2, box))
    return best


# ------------------------------------------------------------------ linear waves


class CFLError(RuntimeError):
    pass


def wave_speed_bound(g_up: np.ndarray) -> float:
    shift = np.sqrt(np.sum(g_up[0, 1:] ** 2, axis=0))
    lam = np.linalg.eigvalsh(np.moveaxis(g_up[1:, 1:], (0, 1), (-2, -1)))[..., -1]
    return float(np.max(shift + np.sqrt(shift**2 + lam)))


def _wave_rhs(g_up, grid, f, ft, forcing):
    df = gradient(f, grid)
    dft = gradient(ft, grid)
    ftt = 2.0 * np.einsum("i...,i...->...", g_up[0, 1:], dft)
    for i in range(3):
        if grid.shape[i] == 1:
            continue
        for j in range(3):
            if grid.shape[j] == 1:
                continue
            ftt = ftt + g_up[1 + i, 1 + j] * spectral_derivative(df[j], i + 1, grid)
    if forcing is not None:
        ftt = ftt - forcing
    return ftt


def box_operator(g_up, grid, f, ft, ftt) -> np.ndarray:
    """g^{ab} d_a d_b f given f and its first two time derivatives."""
    out = g_up[0, 0] * ftt + 2.0 * np.einsum("i...,i...->...", g_up[0, 1:], gradient(ft, grid))
    df = gradient(f, grid)
    for i in range(3):
        for j in range(3):
            if grid.shape[i] > 1 and grid.shape[j] > 1:
                out = out + g_up[1 + i, 1 + j] * spectral_derivative(df[j], i + 1, grid)
    return out


@dataclass
class WaveTrajectory:
    times: np.ndarray
    f: list
    ft: list


def linear_wave_solve(g_up: np.ndarray, grid: Grid, f0, f1, T: float, dt: float | None = None,
                      forcing=None, cfl: float = 0.5, t0: float = 0.0) -> WaveTrajectory:
    """RK4 for d_t^2 f = 2 g^{0i} d_i d_t f + g^{ij} d_ij f - forcing on a frozen metric."""
    g_up = np.broadcast_to(np.asarray(g_up, float), (4, 4) + grid.shape)
    if np.max(np.abs(g_up[0, 0] + 1.0)) > 1e-12:
        raise ValueError("the wave solver needs g^{00} = -1")
    speed = wave_speed_bound(g_up)
    limit = 2.8 * grid.dx / (np.pi * speed)  # RK4 reaches 2.83 on the imaginary axis
    if dt is None:
        dt = cfl * grid.dx / speed
        nsteps = max(1, int(math.ceil(T / dt - 1e-12)))
        dt = T / nsteps
    else:
        nsteps = int(round(T / dt))
    if dt > limit:
        raise CFLError(f"dt = {dt:.3e} exceeds the stability limit {limit:.3e}")
    force = (lambda t: None) if forcing is None else forcing

    def rhs(t, y):
        f, ft = y
        return np.stack([ft, _wave_rhs(g_up, grid, f, ft, force(t))])

    y = np.stack([np.broadcast_to(f0, grid.shape), np.broadcast_to(f1, grid.shape)]).astype(float)
    fs, fts, ts = [y[0].copy()], [y[1].copy()], [t0]
    t = t0
    for _ in range(nsteps):
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        fs.append(y[0].copy())
        fts.append(y[1].copy())
        ts.append(t)
    return WaveTrajectory(np.array(ts), fs, fts)


def wave_energy(g_up, grid, f, ft) -> float:
    df = gradient(f, grid)
    dens = ft**2 + np.einsum("ij...,i...,j...->...", g_up[1:, 1:], df, df)
    return float(grid.integrate(dens))


def duhamel_check(g_up: np.ndarray, grid: Grid, F, T: float, nt: int, dF_dt=None,
                  threads: int | None = None) -> dict:
    """Build phi = int_0^t f(t; tau) dtau from homogeneous solves and measure box phi.

    Each f(.; tau) solves box f = 0 with (f, d_t f) = (F(tau), 0) at t = tau;
    the tau integral is a composite trapezoid on the solver's time nodes.
    Returns the corrected residual ||box phi + d_t F - 2 g^{0i} d_i F||, the
    printed-form residual ||box phi - g^{0a} d_a F|| and the data-match errors.
    """
    g_up = np.asarray(g_up, float)
    if g_up.ndim == 2:
        g_up = g_up.reshape(4, 4, 1, 1, 1)
    g_up = np.broadcast_to(g_up, (4, 4) + grid.shape)
    dt = T / nt
    times = np.arange(nt + 1) * dt
    Fs = np.array([np.broadcast_to(F(t), grid.shape) for t in times], dtype=float)
    phi = np.zeros((nt + 1,) + grid.shape)

    def solve_from(k):
        if k == nt:
            return k, [Fs[k]]
        traj = linear_wave_solve(g_up, grid, Fs[k], np.zeros(grid.shape), T - times[k],
                                 dt=dt, t0=times[k])
        return k, traj.f

    workers = threads or max_threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(solve_from, range(nt + 1)))
    for k, fk in results:
        for m, f in enumerate(fk):
            n = k + m
            if n == 0:
                continue
            w = 0.5 if (k == 0 or k == n) else 1.0
            phi[n] += w * dt * f
    phi_t = fd_time(phi, dt, axis=0)
    phi_tt = fd_time(phi_t, dt, axis=0)
    Ft = fd_time(Fs, dt, axis=0) if dF_dt is None else np.array([dF_dt(t) for t in times])
    box = np.array([box_operator(g_up, grid, phi[n], phi_t[n], phi_tt[n]) for n in range(nt + 1)])
    dF = np.array([gradient(Fs[n], grid) for n in range(nt + 1)])  # [n, i, ...]
    shift_dF = np.einsum("i...,ni...->n...", g_up[0, 1:], dF)
    corrected = box - (-Ft + 2.0 * shift_dF)
    printed = box - (g_up[0, 0] * Ft + shift_dF)
    inner = slice(4, nt - 3)  # stay clear of the one-sided stencils of the repeated difference
    scale = math.sqrt(dt * grid.cell_volume)
    return {
        "residual": float(np.sqrt(np.sum(corrected[inner] ** 2)) * scale),
        "residual_printed": float(np.sqrt(np.sum(printed[inner] ** 2)) * scale),
        "phi0_error": float(np.max(np.abs(phi[0]))),
        "phit0_error": float(np.max(np.abs(phi_t[0] - Fs[0]))),
        "nt": nt,
        "dt": dt,
    }


# ------------------------------------------------------------------ null geodesics


class ConstantMetric:
    def __init__(self, g_up):
        self.g = np.asarray(g_up, dtype=float)

    def inv(self, x):
        return self.g

    def dinv(self, x):
        return np.zeros((4, 4, 4))


class SpectralMetric:
    """Static metric g^{ab}(x) on a periodic grid, evaluated by exact Fourier interpolation."""

    def __init__(self, g_up: np.ndarray, grid: Grid):
        self.grid = grid
        self.coef = np.fft.fftn(np.asarray(g_up, float), axes=(-3, -2, -1)) / grid.npoints
        self.k = [k.ravel() for k in grid.wavenumbers()]

    def _phases(self, x):
        return [np.exp(1j * self.k[a] * x[a + 1]) for a in range(3)]

    def inv(self, x):
        e = self._phases(x)
        return np.real(np.einsum("abxyz,x,y,z->ab", self.coef, *e))

    def dinv(self, x):
        e = self._phases(x)
        out = np.zeros((4, 4, 4))
        for a in range(3):
            ee = list(e)
            ee[a] = ee[a] * 1j * self.k[a]
            out[a + 1] = np.real(np.einsum("abxyz,x,y,z->ab", self.coef, *ee))
        return out


@dataclass
class GeodesicTrace:
    s: np.ndarray
    x: np.ndarray  # (nsamples, 4)
    xi: np.ndarray  # (nsamples, 4)
    hamiltonian: np.ndarray
    truncated: bool = False
    projected: bool = False


def hamiltonian(metric, x, xi) -> float:
    return 0.5 * float(xi @ metric.inv(x) @ xi)


def project_null(metric, x, xi):
    """Adjust xi_0 so that g^{ab} xi_a xi_b = 0 (forward root, smaller change)."""
    g = metric.inv(x)
    b = g[0, 1:] @ xi[1:]
    c = xi[1:] @ g[1:, 1:] @ xi[1:]
    roots = np.roots([g[0, 0], 2 * b, c])
    roots = roots[np.isreal(roots)].real
    new = xi.copy()
    new[0] = roots[np.argmin(np.abs(roots - xi[0]))]
    return new


def null_geodesic_trace(metric, x0, xi0, T: float, nsteps: int = 1000, t_window=None,
                        tol: float = 1e-12) -> GeodesicTrace:
    """RK4 for dx^a/ds = g^{ab} xi_b, dxi_a/ds = -1/2 d_a g^{bc} xi_b xi_c."""
    x = np.array(x0, dtype=float)
    xi = np.array(xi0, dtype=float)
    projected = False
    scale = max(1.0, float(np.abs(xi @ metric.inv(x) @ xi)))
    if abs(hamiltonian(metric, x, xi)) > tol * scale:
        warnings.warn("initial covector is not null; projecting", RuntimeWarning, stacklevel=2)
        xi = project_null(metric, x, xi)
        projected = True

    def rhs(y):
        xx, pp = y[:4], y[4:]
        return np.concatenate([metric.inv(xx) @ pp, -0.5 * np.einsum("abc,b,c->a", metric.dinv(xx), pp, pp)])

    ds = T / nsteps
    y = np.concatenate([x, xi])
    out = [y.copy()]
    truncated = False
    for _ in range(nsteps):
        k1 = rhs(y)
        k2 = rhs(y + ds / 2 * k1)
        k3 = rhs(y + ds / 2 * k2)
        k4 = rhs(y + ds * k3)
        y = y + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if t_window is not None and not (t_window[0] <= y[0] <= t_window[1]):
            truncated = True
            break
        out.append(y.copy())
    arr = np.array(out)
    H = np.array([hamiltonian(metric, r[:4], r[4:]) for r in arr])
    return GeodesicTrace(np.arange(len(arr)) * ds, arr[:, :4], arr[:, 4:], H, truncated, projected)


# ------------------------------------------------------------------ null frame


@dataclass
class NullFrame:
    l: np.ndarray
    lbar: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    sigma_normalizer: np.ndarray  # <dt, dx_theta - dphi>_g
    xi: np.ndarray  # the null covector dx_theta - dphi
    reprojected: bool = False

    def relations(self, g_dn: np.ndarray) -> dict:
        """Defects of the frame relations; every entry should vanish."""
        ip = lambda a, b: np.einsum("ab...,a...,b...->...", g_dn, a, b)  # noqa: E731
        e = (self.e1, self.e2)
        out = {
            "<l,l>": np.max(np.abs(ip(self.l, self.l))),
            "<lbar,lbar>": np.max(np.abs(ip(self.lbar, self.lbar))),
            "<l,lbar>-2": np.max(np.abs(ip(self.l, self.lbar) - 2.0)),
            "<e_a,e_b>-delta": max(np.max(np.abs(ip(e[a], e[b]) - (a == b))) for a in range(2) for b in range(2)),
            "<l,e_a>": max(np.max(np.abs(ip(self.l, x))) for x in e),
            "<lbar,e_a>": max(np.max(np.abs(ip(self.lbar, x))) for x in e),
            "dt(l)-1": np.max(np.abs(self.l[0] - 1.0)),
        }
        return {k: float(v) for k, v in out.items()}


def _plane_basis(theta):
    theta = np.asarray(theta, float) / np.linalg.norm(theta)
    helper = np.array([1.0, 0.0, 0.0]) if abs(theta[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    a1 = helper - (helper @ theta) * theta
    a1 /= np.linalg.norm(a1)
    a2 = np.cross(theta, a1)
    return theta, a1, a2


def null_frame(g_up: np.ndarray, dphi_prime, theta=(0.0, 0.0, 1.0), dphi_t=None,
               tol: float = 1e-12) -> NullFrame:
    """Frame (l, lbar, e_1, e_2) adapted to {x_theta = phi(t, x'_theta)}.

    ``dphi_prime`` holds the two tangential derivatives of phi.  When d_t phi
    is absent, or does not make dx_theta - dphi null, it is solved from the
    null condition using the root for a surface moving along +theta.
    """
    g_up = np.asarray(g_up, float)
    extra = g_up.shape[2:]
    g_dn = _invert(g_up) if extra else np.linalg.inv(g_up)
    theta, a1, a2 = _plane_basis(theta)
    dp = [np.broadcast_to(np.asarray(d, float), extra) for d in dphi_prime]
    xs = theta.reshape((3,) + (1,) * len(extra)) - dp[0] * a1.reshape((3,) + (1,) * len(extra)) \
        - dp[1] * a2.reshape((3,) + (1,) * len(extra))
    b = np.einsum("i...,i...->...", g_up[0, 1:], xs)
    c = np.einsum("ij...,i...,j...->...", g_up[1:, 1:], xs, xs)
    root = -b + np.sqrt(b * b + c)  # d_t phi for -phi_t^2 - 2 b phi_t + c = 0
    reprojected = False
    if dphi_t is None:
        phit = root
    else:
        phit = np.broadcast_to(np.asarray(dphi_t, float), extra)
        if np.max(np.abs(-phit**2 - 2 * b * phit + c)) > tol * max(1.0, float(np.max(c))):
            warnings.warn("supplied dphi is not null; re-solving d_t phi", RuntimeWarning, stacklevel=2)
            phit = root
            reprojected = True
    xi = np.concatenate([-np.asarray(phit)[None], xs])
    xi_up = np.einsum("ab...,b...->a...", g_up, xi)
    norm = xi_up[0]  # <dt, xi>_g
    l = xi_up / norm
    dt_up = g_up[0]  # (dt)^*
    lbar = l + 2.0 * dt_up
    ip = lambda x, y: np.einsum("ab...,a...,b...->...", g_dn, x, y)  # noqa: E731
    tang = []
    for a, d in ((a1, dp[0]), (a2, dp[1])):
        v = np.zeros((4,) + extra)
        v[1:] = a.reshape((3,) + (1,) * len(extra)) + d * theta.reshape((3,) + (1,) * len(extra))
        tang.append(v)
    e1 = tang[0] / np.sqrt(ip(tang[0], tang[0]))
    v2 = tang[1] - ip(tang[1], e1) * e1
    e2 = v2 / np.sqrt(ip(v2, v2))
    return NullFrame(l, lbar, e1, e2, norm, xi, reprojected)


@dataclass
class ConnectionCoefficients:
    chi: np.ndarray  # chi_ab = <D_{e_a} l, e_b>
    l_ln_sigma: np.ndarray  # 1/2 <D_l lbar, l>
    mu0: np.ndarray  # mu_0ab = <D_l e_a, e_b>


def christoffel(g_up: np.ndarray, grid: Grid, dt_g_dn: np.ndarray | None = None) -> np.ndarray:
    """Gamma^l_{mn} of g on a grid; the metric is static unless d_t g_{ab} is supplied."""
    g_dn = _invert(g_up)
    dg = np.zeros((4,) + g_dn.shape)
    if dt_g_dn is not None:
        dg[0] = dt_g_dn
    dg[1:] = gradient(g_dn, grid)
    # dg[m, s, n] = d_m g_{sn}
    comb = np.einsum("msn...->smn...", dg) + np.einsum("nsm...->smn...", dg) - dg
    return 0.5 * np.einsum("ls...,smn...->lmn...", g_up, comb)


def connection_coefficients(frame: NullFrame, g_up: np.ndarray, grid: Grid,
                            frame_dt: dict | None = None, dt_g_dn: np.ndarray | None = None) -> ConnectionCoefficients:
    """chi_ab, l(ln sigma) and mu_0ab by spectral differentiation of the frame fields.

    ``frame_dt`` may hold d_t of "l", "lbar", "e1", "e2"; they default to zero
    (frozen metric and time-independent surface data).
    """
    g_dn = _invert(g_up)
    Gam = christoffel(g_up, grid, dt_g_dn)
    frame_dt = frame_dt or {}

    def d(vec, name):
        out = np.zeros((4,) + vec.shape)
        if name in frame_dt:
            out[0] = frame_dt[name]
        out[1:] = gradient(vec, grid)
        return out  # [m, l]

    def D(X, Y, name):
        return np.einsum("m...,ml...->l...", X, d(Y, name)) + np.einsum("lmn...,m...,n...->l...", Gam, X, Y)

    ip = lambda x, y: np.einsum("ab...,a...,b...->...", g_dn, x, y)  # noqa: E731
    e = (frame.e1, frame.e2)
    names = ("e1", "e2")
    chi = np.array([[ip(D(e[a], frame.l, "l"), e[b]) for b in range(2)] for a in range(2)])
    lls = 0.5 * ip(D(frame.l, frame.lbar, "lbar"), frame.l)
    mu0 = np.array([[ip(D(frame.l, e[a], names[a]), e[b]) for b in range(2)] for a in range(2)])
    return ConnectionCoefficients(chi, lls, mu0)


__all__ = [
    "AcousticMetric", "acoustic_metric", "metric_from_state", "rest_metric", "truncate_metric", "bump",
    "smooth_step", "minors", "minors_det", "SpaceTimeBox", "EllipticOperatorP", "EllipticSolveError",
    "elliptic_split", "spacetime_velocity", "band_limited", "box_sobolev", "ellip_constant",
    "linear_wave_solve", "wave_energy", "wave_speed_bound", "box_operator", "duhamel_check", "CFLError",
    "ConstantMetric", "SpectralMetric", "GeodesicTrace", "null_geodesic_trace", "project_null",
    "hamiltonian", "NullFrame", "null_frame", "ConnectionCoefficients", "connection_coefficients",
    "christoffel",
]
