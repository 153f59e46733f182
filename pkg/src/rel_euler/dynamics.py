"""Pseudo-spectral method-of-lines solver for the first-order symmetric system.

The evolved variables are U = (p, u^1, u^2, u^3); u^0 is always recomputed
from the spatial velocity, so the unit normalization of u never drifts.
Space derivatives are spectral, time stepping is classical RK4.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import eos
from ._backend import BACKEND, njit, prange
from .algebra import Field, GridTaylorRep, GridWindowRep, ein
from .fields import FieldSet, Grid, dealias, gradient, normalize_velocity
from .jet import SpaceTimeJet, time_derivative_jet
from .vorticity import FluidState


class AdmissibilityError(RuntimeError):
    """The state left 0 < c_s <= 1, p > 0."""


# ------------------------------------------------------------------ point matrices


def assemble_flux_matrices(U_point, vartheta: float) -> np.ndarray:
    """A^alpha(U) at one point as an array [alpha, row, col]."""
    U_point = np.asarray(U_point, dtype=float)
    th = eos.from_pressure(float(U_point[0]), vartheta)
    ui = U_point[1:]
    u = np.concatenate([[math.sqrt(1.0 + ui @ ui)], ui])
    e_inv = 1.0 / (th.rho + th.p)
    A = np.zeros((4, 4, 4))
    proj = np.eye(3) - np.outer(ui, ui) / u[0] ** 2
    for a in range(4):
        A[a, 0, 0] = e_inv**2 / th.cs2 * u[a]
        if a == 0:
            A[a, 0, 1:] = e_inv * ui / u[0]
        else:
            A[a, 0, a] = e_inv
        A[a, 1:, 0] = A[a, 0, 1:]
        A[a, 1:, 1:] = u[a] * proj
    return A


def characteristic_speeds(U_point, direction, vartheta: float) -> np.ndarray:
    """Generalized eigenvalues of (n.A, A^0), sorted ascending."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    A = assemble_flux_matrices(U_point, vartheta)
    nA = np.einsum("i,ijk->jk", n, A[1:])
    try:
        lam = scipy.linalg.eigh(nA, A[0], eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise AdmissibilityError(f"characteristic eigenproblem failed: {exc}") from exc
    return np.sort(lam)


def max_speed_bound(U: np.ndarray, vartheta: float) -> float:
    """Largest characteristic speed over the grid.

    Uses the relativistic velocity addition (|v| + c_s) / (1 + |v| c_s),
    which is the extreme eigenvalue along the flow direction.
    """
    p = U[0]
    ui = U[1:]
    q2 = np.sum(ui**2, axis=0)
    v = np.sqrt(q2 / (1.0 + q2))
    cs = np.sqrt(eos.sound_speed_sq(eos.density_from_pressure(p, vartheta), vartheta))
    return float(np.max((v + cs) / (1.0 + v * cs)))


# ------------------------------------------------------------------ kernels


@njit(cache=True)
def _solve4(A, b):
    M = A.copy()
    x = b.copy()
    for col in range(4):
        piv = col
        for r in range(col + 1, 4):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if M[piv, col] == 0.0:
            return False
        if piv != col:
            for k in range(4):
                tmp = M[col, k]
                M[col, k] = M[piv, k]
                M[piv, k] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        for r in range(col + 1, 4):
            f = M[r, col] / M[col, col]
            for k in range(col, 4):
                M[r, k] -= f * M[col, k]
            x[r] -= f * x[col]
    for r in range(3, -1, -1):
        s = x[r]
        for k in range(r + 1, 4):
            s -= M[r, k] * x[k]
        x[r] = s / M[r, r]
    b[:] = x
    return True


@njit(parallel=True, cache=True)
def _rhs_numba(U, dU, vartheta, out):
    npts = U.shape[1]
    bad = 0
    for idx in prange(npts):
        p = U[0, idx]
        u1 = U[1, idx]
        u2 = U[2, idx]
        u3 = U[3, idx]
        u0 = math.sqrt(1.0 + u1 * u1 + u2 * u2 + u3 * u3)
        rho = p ** (1.0 / vartheta)
        cs2 = vartheta * rho ** (vartheta - 1.0)
        e_inv = 1.0 / (rho + p)
        ui = np.empty(4)
        ui[0] = u0
        ui[1] = u1
        ui[2] = u2
        ui[3] = u3
        A0 = np.empty((4, 4))
        A0[0, 0] = e_inv * e_inv / cs2 * u0
        for j in range(1, 4):
            A0[0, j] = e_inv * ui[j] / u0
            A0[j, 0] = A0[0, j]
            for k in range(1, 4):
                d = 1.0 if j == k else 0.0
                A0[j, k] = u0 * (d - ui[j] * ui[k] / (u0 * u0))
        b = np.zeros(4)
        for i in range(1, 4):
            # A^i d_i U, written out from the block structure of A^i
            a = ui[i]
            b[0] += e_inv * e_inv / cs2 * a * dU[i - 1, 0, idx] + e_inv * dU[i - 1, i, idx]
            b[i] += e_inv * dU[i - 1, 0, idx]
            for j in range(1, 4):
                s = 0.0
                for k in range(1, 4):
                    d = 1.0 if j == k else 0.0
                    s += a * (d - ui[j] * ui[k] / (u0 * u0)) * dU[i - 1, k, idx]
                b[j] += s
        if not _solve4(A0, b):
            bad += 1
        for r in range(4):
            out[r, idx] = -b[r]
    return bad


def _rhs_numpy(U, dU, vartheta, out):
    p = U[0]
    ui = U[1:]
    u0 = np.sqrt(1.0 + np.sum(ui**2, axis=0))
    rho = p ** (1.0 / vartheta)
    cs2 = vartheta * rho ** (vartheta - 1.0)
    e_inv = 1.0 / (rho + p)
    npts = p.size
    proj = np.eye(3)[:, :, None] - ui[:, None] * ui[None, :] / u0**2
    A0 = np.empty((npts, 4, 4))
    A0[:, 0, 0] = e_inv**2 / cs2 * u0
    A0[:, 0, 1:] = (e_inv * ui / u0).T
    A0[:, 1:, 0] = A0[:, 0, 1:]
    A0[:, 1:, 1:] = np.moveaxis(u0 * proj, -1, 0)
    b = np.zeros((4, npts))
    for i in range(3):
        b[0] += e_inv**2 / cs2 * ui[i] * dU[i, 0] + e_inv * dU[i, i + 1]
        b[i + 1] += e_inv * dU[i, 0]
        b[1:] += ui[i] * np.einsum("jkn,kn->jn", proj, dU[i, 1:])
    x = np.linalg.solve(A0, b.T[..., None])[..., 0]
    out[:] = -x.T
    return 0


def rhs_kernel(U: np.ndarray, dU: np.ndarray, vartheta: float, backend: str | None = None) -> np.ndarray:
    """-(A^0)^{-1} A^i d_i U for flattened arrays U[4, N], dU[3, 4, N]."""
    backend = backend or BACKEND
    out = np.empty_like(U)
    if backend == "numba":
        bad = _rhs_numba(np.ascontiguousarray(U), np.ascontiguousarray(dU), float(vartheta), out)
    elif backend == "numpy":
        bad = _rhs_numpy(U, dU, vartheta, out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if bad:
        raise AdmissibilityError(f"singular A^0 at {bad} points")
    return out


# ------------------------------------------------------------------ grid operators


def check_admissible(U: np.ndarray, vartheta: float) -> None:
    p = U[0]
    if not np.all(np.isfinite(U)):
        raise AdmissibilityError("non-finite state")
    if np.min(p) <= 0.0:
        raise AdmissibilityError(f"pressure dropped to {np.min(p):.3e}")
    cs2 = eos.sound_speed_sq(eos.density_from_pressure(p, vartheta), vartheta)
    if np.max(cs2) > 1.0:
        raise AdmissibilityError(f"c_s^2 reached {np.max(cs2):.6f} > 1")


def time_derivative(U: np.ndarray, grid: Grid, vartheta: float, dealiased: bool = False,
                    backend: str | None = None) -> np.ndarray:
    """dU/dt = -(A^0)^{-1} A^i d_i U with spectral d_i."""
    check_admissible(U, vartheta)
    dU = gradient(U, grid)
    npts = int(np.prod(grid.shape))
    out = rhs_kernel(U.reshape(4, npts), dU.reshape(3, 4, npts), vartheta, backend)
    out = out.reshape(U.shape)
    if dealiased:
        out = dealias(out, grid)
    return out


def primitive_from_U(U: np.ndarray, vartheta: float):
    """(h, u) from (p, u^1, u^2, u^3)."""
    rho = eos.density_from_pressure(U[0], vartheta)
    return eos.enthalpy(rho, vartheta), normalize_velocity(U[1:])


def U_from_primitive(h: np.ndarray, u: np.ndarray, vartheta: float) -> np.ndarray:
    rho = eos.density_from_enthalpy(h, vartheta)
    return np.concatenate([eos.pressure(rho, vartheta)[None], u[1:]])


def primitive_rates(U: np.ndarray, dU: np.ndarray, vartheta: float):
    """(d_t h, d_t u) from (U, d_t U)."""
    rho = eos.density_from_pressure(U[0], vartheta)
    cs2 = eos.sound_speed_sq(rho, vartheta)
    h_t = eos.dh_drho(rho, vartheta) / cs2 * dU[0]
    u0 = np.sqrt(1.0 + np.sum(U[1:] ** 2, axis=0))
    u_t = np.concatenate([(np.sum(U[1:] * dU[1:], axis=0) / u0)[None], dU[1:]])
    return h_t, u_t


def to_fieldset(U: np.ndarray, grid: Grid, t: float, vartheta: float) -> FieldSet:
    h, u = primitive_from_U(U, vartheta)
    return FieldSet(grid, h, u, t, vartheta)


def grid_jet(U: np.ndarray, grid: Grid, vartheta: float, time_order: int) -> SpaceTimeJet:
    """Time Taylor completion of grid data: exact time derivatives of the semi-discrete system."""
    rep = GridTaylorRep(time_order, grid.shape, grid.lengths)
    c = np.zeros((4,) + rep.shape)
    c[:, 0] = U
    for m in range(1, time_order + 1):
        dt = time_derivative_jet(Field(c, rep, time_order), vartheta)
        c[:, m] = dt.c[:, m - 1] / m
    return SpaceTimeJet(Field(c, rep, time_order), vartheta, time_order)


def window_jet(states, dt: float, grid: Grid, vartheta: float) -> SpaceTimeJet:
    """Trajectory window (odd number of equally spaced levels) as a jet with
    finite-difference time derivatives; residuals are read at the middle level."""
    c = np.stack(list(states), axis=1)  # [4, level, ...grid]
    rep = GridWindowRep(dt, c.shape[1:], grid.lengths)
    return SpaceTimeJet(Field(c, rep, None), vartheta, None)


def euler_residual(F: FieldSet, h_t: np.ndarray, u_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of u.dh + c_s^2 div u and u.du^a + (m^{ak} + u^a u^k) d_k h."""
    h, u = F.as_fields([h_t], [u_t])
    s = FluidState(h, u, F.vartheta)
    r_h = ein("k,k->", s.u, s.dh) + s.cs2 * s.divu
    r_u = ein("k,ka->a", s.u, s.du) + ein("ak,k->a", s.proj, s.dh)
    return r_h.values(), r_u.values()


def euler_residual_U(U: np.ndarray, grid: Grid, vartheta: float, dU: np.ndarray | None = None):
    if dU is None:
        dU = time_derivative(U, grid, vartheta)
    h_t, u_t = primitive_rates(U, dU, vartheta)
    return euler_residual(to_fieldset(U, grid, 0.0, vartheta), h_t, u_t)


# ------------------------------------------------------------------ initial data


def rest_state(grid: Grid, rho0: float = 0.25, vartheta: float = 2.0) -> np.ndarray:
    U = grid.zeros(4)
    U[0] = eos.from_density(rho0, vartheta).p
    return U


def acoustic_wave(grid: Grid, rho0: float = 0.25, amplitude: float = 1e-3, k: int = 1,
                  vartheta: float = 2.0) -> np.ndarray:
    """Right-moving linear sound wave along x^1: u^1 = a sin(kx), dp = (rho+p) c_s u^1."""
    th = eos.from_density(rho0, vartheta)
    x = grid.mesh()[0]
    s = amplitude * np.sin(2 * np.pi * k * x / grid.L)
    U = rest_state(grid, rho0, vartheta)
    U[0] += (th.rho + th.p) * th.cs * s
    U[1] = s
    return U


def smooth_random_state(grid: Grid, seed: int, amplitude: float = 0.05, rho0: float = 0.25,
                        vartheta: float = 2.0, kmax: int = 2) -> np.ndarray:
    """Band-limited random perturbation of a rest state (vortical when dim >= 2)."""
    rng = np.random.default_rng(seed)
    x = grid.coords()
    U = rest_state(grid, rho0, vartheta)
    p0 = U[0].copy()
    ks = [range(-kmax, kmax + 1) if ax < grid.dim else [0] for ax in range(3)]
    for comp in range(4):
        acc = np.zeros(grid.shape)
        for kv in np.ndindex(*(len(r) for r in ks)):
            kk = [list(ks[a])[kv[a]] for a in range(3)]
            if all(v == 0 for v in kk):
                continue
            phase = 2 * np.pi / grid.L * sum(kk[a] * x[a] for a in range(3))
            a, b = rng.normal(size=2) / (1.0 + sum(v * v for v in kk))
            acc = acc + a * np.cos(phase) + b * np.sin(phase)
        acc = acc / max(np.max(np.abs(acc)), 1e-300)
        U[comp] += amplitude * (p0 * acc if comp == 0 else acc)
    return U


INITIAL_KINDS = ("rest", "acoustic", "random")


def initial_state(kind: str, grid: Grid, vartheta: float = 2.0, rho0: float = 0.25,
                  amplitude: float = 1e-3, k: int = 1, seed: int = 0, kmax: int = 2) -> np.ndarray:
    if kind == "rest":
        return rest_state(grid, rho0, vartheta)
    if kind == "acoustic":
        return acoustic_wave(grid, rho0, amplitude, k, vartheta)
    if kind == "random":
        return smooth_random_state(grid, seed, amplitude, rho0, vartheta, kmax)
    raise ValueError(f"unknown initial state {kind!r}; choose from {', '.join(INITIAL_KINDS)}")


# ------------------------------------------------------------------ runs


@dataclass
class RunConfig:
    dim: int = 1
    n: int = 64
    L: float = 2.0 * np.pi
    cfl: float = 0.5
    t_max: float = 1.0
    dt: float | None = None
    snapshot_every: int = 0
    seed: int = 0
    vartheta: float = 2.0
    dealias: bool = False
    du_ceiling: float = 1e3
    dt_recompute_every: int = 1
    diag_every: int = 1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt_recompute_every < 1:
            raise ValueError("dt_recompute_every must be >= 1")

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.n, self.L)


DIAG_COLUMNS = ("t", "dt", "max_speed", "Linf_du", "Linf_dh", "L2_euler_residual")


@dataclass
class DiagnosticSeries:
    rows: list = field(default_factory=list)

    def append(self, **row) -> None:
        self.rows.append(tuple(float(row[c]) for c in DIAG_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        i = DIAG_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAG_COLUMNS)
            for r in self.rows:
                w.writerow([repr(v) for v in r])

    @classmethod
    def from_csv(cls, path) -> "DiagnosticSeries":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            if header != DIAG_COLUMNS:
                raise ValueError(f"unexpected diagnostic columns {header}")
            return cls([tuple(float(v) for v in row) for row in rd])


@dataclass
class Trajectory:
    grid: Grid
    vartheta: float
    times: list
    states: list  # U arrays at snapshot times
    diagnostics: DiagnosticSeries
    status: str = "completed"
    message: str = ""

    def fieldsets(self) -> list[FieldSet]:
        return [to_fieldset(U, self.grid, t, self.vartheta) for t, U in zip(self.times, self.states)]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _diagnose(U, dU, grid, vartheta, t, dt, speed) -> dict:
    h, u = primitive_from_U(U, vartheta)
    du = gradient(u[1:], grid)
    dh = gradient(h, grid)
    h_t, u_t = primitive_rates(U, dU, vartheta)
    r_h, r_u = euler_residual(FieldSet(grid, h, u, t, vartheta), h_t, u_t)
    l2 = math.sqrt(grid.l2(r_h) ** 2 + grid.l2(r_u) ** 2)
    return dict(t=t, dt=dt, max_speed=speed, Linf_du=float(np.max(np.abs(du))),
                Linf_dh=float(np.max(np.abs(dh))), L2_euler_residual=l2)


def rk4_step(U, dt, grid, vartheta, dealiased=False, backend=None, k1=None):
    f = lambda V: time_derivative(V, grid, vartheta, dealiased, backend)  # noqa: E731
    k1 = f(U) if k1 is None else k1
    k2 = f(U + 0.5 * dt * k1)
    k3 = f(U + 0.5 * dt * k2)
    k4 = f(U + dt * k3)
    return U + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(U0: np.ndarray, config: RunConfig, backend: str | None = None,
             diagnostics: bool = True) -> Trajectory:
    """RK4 integration to t_max; aborts gracefully on admissibility breach."""
    grid = config.grid
    th = config.vartheta
    U = np.array(U0, dtype=float)
    grid.check(U)
    check_admissible(U, th)
    traj = Trajectory(grid, th, [0.0], [U.copy()], DiagnosticSeries())
    t = 0.0
    step = 0
    dt = None
    speed = max_speed_bound(U, th)
    while t < config.t_max * (1 - 1e-14) and step < config.max_steps:
        if config.dt is not None:
            dt = config.dt
        elif dt is None or step % config.dt_recompute_every == 0:
            speed = max_speed_bound(U, th)
            dt = config.cfl * grid.dx / speed
        dt_step = min(dt, config.t_max - t)
        try:
            k1 = time_derivative(U, grid, th, config.dealias, backend)
            if diagnostics and step % config.diag_every == 0:
                traj.diagnostics.append(**_diagnose(U, k1, grid, th, t, dt_step, speed))
                if traj.diagnostics.rows[-1][3] > config.du_ceiling:
                    traj.status, traj.message = "aborted", "gradient ceiling exceeded"
                    break
            U_new = rk4_step(U, dt_step, grid, th, config.dealias, backend, k1=k1)
            check_admissible(U_new, th)
        except AdmissibilityError as exc:
            traj.status, traj.message = "aborted", str(exc)
            if traj.times[-1] != t:
                traj.times.append(t)
                traj.states.append(U.copy())
            return traj
        U = U_new
        t += dt_step
        step += 1
        if config.snapshot_every and step % config.snapshot_every == 0:
            traj.times.append(t)
            traj.states.append(U.copy())
    if traj.times[-1] != t:
        traj.times.append(t)
        traj.states.append(U.copy())
    if diagnostics and traj.status == "completed":
        k1 = time_derivative(U, grid, th, config.dealias, backend)
        traj.diagnostics.append(**_diagnose(U, k1, grid, th, t, 0.0, max_speed_bound(U, th)))
    return traj


def run_fixed_dt(U0: np.ndarray, grid: Grid, vartheta: float, dt: float, nsteps: int,
                 keep_every: int = 1, backend: str | None = None) -> list[np.ndarray]:
    """Plain RK4 with a fixed step; returns every ``keep_every``-th state including the first."""
    U = np.array(U0, dtype=float)
    out = [U.copy()]
    for i in range(1, nsteps + 1):
        U = rk4_step(U, dt, grid, vartheta, backend=backend)
        if i % keep_every == 0:
            out.append(U.copy())
    check_admissible(U, vartheta)
    return out


def self_convergence_order(U0: np.ndarray, grid: Grid, vartheta: float, dt: float, T: float) -> dict:
    """Temporal order from three runs at dt, dt/2, dt/4 (Richardson self-convergence)."""
    finals = []
    for r in (1, 2, 4):
        n = int(round(T / dt)) * r
        finals.append(run_fixed_dt(U0, grid, vartheta, dt / r, n, keep_every=n)[-1])
    e1 = grid.l2(finals[0] - finals[1])
    e2 = grid.l2(finals[1] - finals[2])
    return {"e_coarse": e1, "e_fine": e2, "order": math.log2(e1 / e2)}


def acoustic_phase_speed(U0: np.ndarray, grid: Grid, vartheta: float, k: int, T: float, dt: float) -> float:
    """Phase speed of mode k of u^1 tracked over [0, T] with phase unwrapping."""
    nsteps = int(round(T / dt))
    states = run_fixed_dt(U0, grid, vartheta, dt, nsteps)
    phases = []
    for U in states:
        coef = np.fft.rfft(U[1][:, 0, 0])[k]
        phases.append(np.angle(coef))
    ph = np.unwrap(np.array(phases))
    times = np.arange(len(states)) * dt
    slope = np.polyfit(times, ph, 1)[0]
    kw = 2 * np.pi * k / grid.L
    return float(-slope / kw)


def config_dict(config: RunConfig) -> dict:
    return asdict(config)


__all__ = [
    "AdmissibilityError", "assemble_flux_matrices", "characteristic_speeds", "max_speed_bound",
    "rhs_kernel", "time_derivative", "primitive_from_U", "U_from_primitive", "primitive_rates",
    "to_fieldset", "grid_jet", "window_jet", "euler_residual", "euler_residual_U", "rest_state", "acoustic_wave",
    "smooth_random_state", "initial_state", "INITIAL_KINDS", "RunConfig", "DiagnosticSeries", "DIAG_COLUMNS", "Trajectory", "simulate",
    "rk4_step", "run_fixed_dt", "self_convergence_order", "acoustic_phase_speed",
]
