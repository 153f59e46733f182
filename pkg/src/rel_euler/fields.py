"""Periodic grids, spectral derivatives and Minkowski index algebra.

All grid arrays carry three trailing spatial axes; a grid of dimension 1 or 2
uses trailing axes of length 1, on which every derivative is zero.  This keeps
one code path for 1D, 2D and 3D runs.
"""
from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import EPS_LO, EPS_UP, ETA, Field, GridTaylorRep, spectral_diff, spectral_wavenumbers


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` points per active axis."""

    dim: int
    n: int
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two, got {self.n}")
        if not self.L > 0:
            raise GridError("box length must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return tuple(self.n if i < self.dim else 1 for i in range(3))

    @property
    def lengths(self) -> tuple:
        return (self.L,) * 3

    @property
    def npoints(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays x^1, x^2, x^3 (zeros on inactive axes)."""
        out = []
        for ax in range(3):
            shp = [1, 1, 1]
            shp[ax] = self.shape[ax]
            x = np.arange(self.shape[ax]) * self.dx if ax < self.dim else np.zeros(1)
            out.append(x.reshape(shp))
        return out

    def mesh(self) -> list[np.ndarray]:
        return [np.broadcast_to(x, self.shape) for x in self.coords()]

    def wavenumbers(self) -> list[np.ndarray]:
        """Full-FFT angular wavenumbers per axis, broadcastable."""
        out = []
        for ax in range(3):
            shp = [1, 1, 1]
            shp[ax] = self.shape[ax]
            if ax < self.dim:
                k = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
            else:
                k = np.zeros(1)
            out.append(k.reshape(shp))
        return out

    def kmag(self) -> np.ndarray:
        k = self.wavenumbers()
        return np.sqrt(k[0] ** 2 + k[1] ** 2 + k[2] ** 2)

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in full-FFT layout."""
        kmax = np.pi / self.dx
        m = np.ones(self.shape, dtype=bool)
        for ax, k in enumerate(self.wavenumbers()):
            if ax < self.dim:
                m &= np.abs(k) < (2.0 / 3.0) * kmax
        return m

    def zeros(self, *lead) -> np.ndarray:
        return np.zeros(tuple(lead) + self.shape)

    def check(self, arr: np.ndarray) -> None:
        if tuple(arr.shape[-3:]) != self.shape:
            raise GridError(f"array shape {arr.shape} does not conform to grid {self.shape}")

    def integrate(self, f: np.ndarray) -> np.ndarray:
        return f.sum(axis=(-3, -2, -1)) * self.cell_volume

    def l2(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.asarray(f) ** 2) * self.cell_volume))


# ------------------------------------------------------------------ derivatives


def dealias(f: np.ndarray, grid: Grid) -> np.ndarray:
    fh = np.fft.fftn(f, axes=(-3, -2, -1))
    return np.real(np.fft.ifftn(fh * grid.dealias_mask(), axes=(-3, -2, -1)))


def spectral_derivative(f: np.ndarray, axis: int, grid: Grid, order: int = 1,
                        dealiased: bool = False) -> np.ndarray:
    """d/dx^axis of periodic samples, axis in 1..dim (time derivatives live elsewhere)."""
    if axis == 0:
        raise GridError("time derivatives are supplied by the dynamics or jet modules")
    if not 1 <= axis <= 3:
        raise GridError(f"axis must be 1..3, got {axis}")
    f = np.asarray(f, dtype=float)
    if dealiased:
        f = dealias(f, grid)
    return spectral_diff(f, axis - 4, grid.L, order)


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Spatial gradient with the derivative axis first: out[i-1] = d_i f."""
    return np.stack([spectral_derivative(f, i, grid) for i in (1, 2, 3)])


def fd8_derivative(f: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    """Eighth-order central difference; used as an independent check."""
    w = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    ax = axis - 4
    out = np.zeros_like(f)
    for j, c in enumerate(w):
        if c:
            out += c * np.roll(f, -(j - 4), axis=ax)
    return out / grid.dx


# ------------------------------------------------------------------ kinematics


def normalize_velocity(uvec: np.ndarray) -> np.ndarray:
    """Four-velocity (u^0, u^1, u^2, u^3) with u^0 = sqrt(1 + |u|^2)."""
    uvec = np.asarray(uvec, dtype=float)
    if uvec.shape[0] != 3:
        raise ValueError("spatial velocity needs 3 leading components")
    if not np.all(np.isfinite(uvec)):
        raise ValueError("spatial velocity has non-finite entries")
    u0 = np.sqrt(1.0 + np.sum(uvec**2, axis=0))
    return np.concatenate([u0[None], uvec])


def lower(T: np.ndarray, slot: int = 0) -> np.ndarray:
    """Toggle the variance of one tensor slot with m = diag(-1, 1, 1, 1)."""
    T = np.asarray(T, dtype=float)
    sign = np.ones(4)
    sign[0] = -1.0
    shp = [1] * T.ndim
    shp[slot] = 4
    return T * sign.reshape(shp)


raise_ = lower


@dataclass
class TensorField:
    """Component array plus the variance of each tensor slot ("up" or "down")."""

    data: np.ndarray
    variance: tuple

    def toggle(self, slot: int) -> "TensorField":
        var = list(self.variance)
        var[slot] = "down" if var[slot] == "up" else "up"
        return TensorField(lower(self.data, slot), tuple(var))

    def lowered(self) -> "TensorField":
        out = self
        for i, v in enumerate(self.variance):
            if v == "up":
                out = out.toggle(i)
        return out

    def raised(self) -> "TensorField":
        out = self
        for i, v in enumerate(self.variance):
            if v == "down":
                out = out.toggle(i)
        return out


def vort(Al: np.ndarray, u: np.ndarray, grid: Grid, dAl_dt: np.ndarray | None = None) -> np.ndarray:
    """vort^a(A) = -eps^{abgd} u_b d_g A_d for a one-form with lower components Al.

    ``dAl_dt`` supplies d_t A_d; without it A is taken to be time independent.
    """
    Al = np.asarray(Al, dtype=float)
    dt = np.zeros_like(Al) if dAl_dt is None else np.asarray(dAl_dt, dtype=float)
    dA = np.concatenate([dt[None], gradient(Al, grid)])  # [g, d, ...]
    ul = lower(u)
    return -np.einsum("abgd,b...,gd...->a...", EPS_UP, ul, dA)


# ------------------------------------------------------------------ epsilon contractions


def generalized_delta(k: int) -> np.ndarray:
    """delta^{a1..ak}_{b1..bk} as a 2k-index array (determinant of Kronecker deltas)."""
    I = np.eye(4)
    out = np.zeros((4,) * (2 * k))
    for perm in itertools.permutations(range(k)):
        sign = np.linalg.det(np.eye(k)[list(perm)])
        subs = ",".join(f"{chr(97 + i)}{chr(110 + perm[i])}" for i in range(k))
        outs = "".join(chr(97 + i) for i in range(k)) + "".join(chr(110 + i) for i in range(k))
        out += sign * np.einsum(f"{subs}->{outs}", *([I] * k))
    return out


def eps_eps_direct() -> np.ndarray:
    """eps^{abgd} eps_{dhmn} summed over d, as a 6-index array [a,b,g,h,m,n]."""
    return np.einsum("abgd,dhmn->abghmn", EPS_UP, EPS_LO)


def eps_eps_delta() -> np.ndarray:
    """The same contraction through the Lorentzian delta expansion.

    eps^{abgd} eps_{hmnd} = -delta^{abg}_{hmn}; moving d to the front of the
    lower epsilon costs a sign, so the two minus signs cancel.
    """
    return generalized_delta(3)


# ------------------------------------------------------------------ field sets


@dataclass
class FieldSet:
    """Grid samples of (h, u) at time t."""

    grid: Grid
    h: np.ndarray
    u: np.ndarray
    t: float = 0.0
    vartheta: float = 2.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.grid.check(self.h)
        self.grid.check(self.u)
        if self.u.shape[0] != 4:
            raise GridError("u needs 4 components")

    @classmethod
    def from_spatial_velocity(cls, grid: Grid, h, uvec, t=0.0, vartheta=2.0) -> "FieldSet":
        return cls(grid, np.broadcast_to(h, grid.shape).copy(), normalize_velocity(
            np.broadcast_to(uvec, (3,) + grid.shape)), t, vartheta)

    def normalization_defect(self) -> float:
        return float(np.max(np.abs(np.einsum("a...,a...->...", lower(self.u), self.u) + 1.0)))

    def validate(self, tol: float = 1e-10) -> None:
        if self.normalization_defect() > tol:
            raise GridError("u is not unit time-like")
        if np.min(self.u[0]) < 1.0 - tol:
            raise GridError("u^0 < 1")

    def rep(self, time_order: int = 0) -> GridTaylorRep:
        return GridTaylorRep(time_order, self.grid.shape, self.grid.lengths)

    def as_fields(self, h_t=None, u_t=None):
        """(h, u) as Fields carrying a Taylor series in time.

        ``h_t`` and ``u_t`` are arrays of time Taylor coefficients of degree
        1, 2, ... stacked on the first axis (h_t[k-1] is the degree-k
        coefficient).  Without them the fields only carry their values.
        """
        K = 0 if h_t is None else len(h_t)
        rep = self.rep(K)
        hc = np.zeros(rep.shape)
        uc = np.zeros((4,) + rep.shape)
        hc[0], uc[:, 0] = self.h, self.u
        for k in range(K):
            hc[k + 1] = h_t[k]
            uc[:, k + 1] = u_t[k]
        return Field(hc, rep, K), Field(uc, rep, K)


# ------------------------------------------------------------------ snapshots


def write_snapshot(path, grid: Grid, t: float, fields: dict[str, np.ndarray]) -> None:
    """JSON header line followed by raw little-endian float64 data."""
    names = list(fields)
    header = {"dims": [grid.n] * grid.dim, "L": grid.L, "t": float(t), "fields": names,
              "dtype": "f64le", "order": "C"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        for name in names:
            arr = np.asarray(fields[name], dtype="<f8").reshape([grid.n] * grid.dim)
            fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def read_snapshot(path) -> tuple[Grid, float, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    dims = header["dims"]
    if header.get("dtype") != "f64le" or header.get("order") != "C":
        raise ValueError("unsupported snapshot encoding")
    grid = Grid(len(dims), int(dims[0]), float(header["L"]))
    buf = io.BytesIO(raw[nl + 1:])
    count = int(np.prod(dims))
    out = {}
    for name in header["fields"]:
        data = np.frombuffer(buf.read(8 * count), dtype="<f8")
        if data.size != count:
            raise ValueError(f"snapshot truncated while reading {name!r}")
        out[name] = data.reshape(dims).reshape(grid.shape).copy()
    return grid, float(header["t"]), out


def parseval_sides(f: np.ndarray, grid: Grid) -> tuple[float, float]:
    """(sum f^2 dV, sum |fhat|^2 dV / N) -- equal by Parseval."""
    fh = np.fft.fftn(f, axes=(-3, -2, -1))
    return float(np.sum(f**2) * grid.cell_volume), float(np.sum(np.abs(fh) ** 2) * grid.cell_volume / grid.npoints)


__all__ = [
    "Grid", "GridError", "FieldSet", "TensorField", "spectral_derivative", "gradient", "dealias",
    "fd8_derivative", "normalize_velocity", "lower", "raise_", "vort", "generalized_delta",
    "eps_eps_direct", "eps_eps_delta", "write_snapshot", "read_snapshot", "parseval_sides",
    "spectral_wavenumbers",
]
