"""Tensor-valued fields over interchangeable representations.

A :class:`Field` stores an array whose leading axes are tensor indices and
whose trailing axes belong to a representation:

* :class:`TaylorRep` -- truncated Taylor coefficients in (t, x1, x2, x3) at a
  point.  Products are truncated Cauchy products, derivatives shift
  coefficients, and every field tracks the order through which its
  coefficients are exact.
* :class:`GridTaylorRep` -- periodic grid samples in space carrying a
  truncated Taylor series in time (time derivatives are exact for the
  semi-discrete system).
* :class:`GridWindowRep` -- periodic grid samples on a short window of time
  levels; time derivatives come from finite differences.

Identity code is written once against :func:`ein`, :func:`grad` and the
arithmetic operators and then runs on any representation.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from math import factorial

import numpy as np

NVAR = 4
ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


def _levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        p = list(perm)
        sign = 1
        for i in range(4):
            while p[i] != i:
                j = p[i]
                p[i], p[j] = p[j], p[i]
                sign = -sign
        eps[perm] = sign
    return eps


EPS_LO = _levi_civita()  # epsilon_{0123} = +1
EPS_UP = np.einsum("ai,bj,ck,dl,ijkl->abcd", ETA, ETA, ETA, ETA, EPS_LO)  # epsilon^{0123} = -1


# ---------------------------------------------------------------- representations


def _multi_indices(order: int, nvar: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        block = [e for e in itertools.product(range(deg + 1), repeat=nvar) if sum(e) == deg]
        out.extend(sorted(block, reverse=True))
    return out


class TaylorRep:
    """Truncated multivariate Taylor coefficients c_e = d^e f / e! at a point."""

    tdim = 1
    kind = "taylor"

    def __init__(self, order: int, nvar: int = NVAR):
        self.max_order = order
        self.nvar = nvar
        self.exps = np.array(_multi_indices(order, nvar), dtype=np.int64).reshape(-1, nvar)
        self.deg = self.exps.sum(axis=1)
        self.ncoef = len(self.exps)
        self.index = {tuple(e): i for i, e in enumerate(self.exps)}
        # product tables restricted by result degree
        self._pairs = {}
        for o in range(order + 1):
            I, J, K = [], [], []
            for i, ei in enumerate(self.exps):
                for j, ej in enumerate(self.exps):
                    if self.deg[i] + self.deg[j] <= o:
                        I.append(i)
                        J.append(j)
                        K.append(self.index[tuple(ei + ej)])
            S = np.zeros((len(K), self.ncoef))
            S[np.arange(len(K)), K] = 1.0
            self._pairs[o] = (np.array(I), np.array(J), S)
        # derivative gather tables; index ncoef points at an appended zero
        self._dsrc = np.full((nvar, self.ncoef), self.ncoef, dtype=np.int64)
        self._dfac = np.zeros((nvar, self.ncoef))
        for mu in range(nvar):
            for t, e in enumerate(self.exps):
                src = tuple(e + np.eye(nvar, dtype=np.int64)[mu])
                if src in self.index:
                    self._dsrc[mu, t] = self.index[src]
                    self._dfac[mu, t] = e[mu] + 1
        self._masks = {o: (self.deg <= o).astype(float) for o in range(-1, order + 1)}

    # -- core hooks
    def lift(self, x):
        x = np.asarray(x, dtype=float)
        c = np.zeros(x.shape + (self.ncoef,))
        c[..., 0] = x
        return c

    def expand(self, x):
        return np.asarray(x)[..., None]

    def base(self, c):
        return c[..., 0]

    def strip_base(self, c):
        c = c.copy()
        c[..., 0] = 0.0
        return c

    def mask(self, c, order):
        if order is None or order >= self.max_order:
            return c
        return c * self._masks[max(order, -1)]

    def mul(self, a, b, order):
        I, J, S = self._pairs[max(order, 0)]
        return (a[..., I] * b[..., J]) @ S

    def ein2(self, sa, a, sb, b, so, order):
        I, J, S = self._pairs[max(order, 0)]
        prod = np.einsum(f"{sa}...,{sb}...->{so}...", a[..., I], b[..., J])
        return prod @ S

    def grad(self, c):
        padded = np.concatenate([c, np.zeros(c.shape[:-1] + (1,))], axis=-1)
        return np.stack([padded[..., self._dsrc[mu]] * self._dfac[mu] for mu in range(self.nvar)])

    def grad_order(self, order):
        return order - 1

    def values(self, c, order):
        return c[..., self.deg <= max(order, 0)] if order >= 0 else c[..., :0]


@lru_cache(maxsize=None)
def taylor_rep(order: int) -> TaylorRep:
    return TaylorRep(order)


def spectral_wavenumbers(n: int, length: float) -> np.ndarray:
    """Angular wavenumbers for an rfft of length n on a box of side length."""
    return 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)


def spectral_diff(c: np.ndarray, axis: int, length: float, order: int = 1) -> np.ndarray:
    """Fourier derivative of real samples along axis (Nyquist mode dropped for odd order)."""
    n = c.shape[axis]
    if n == 1:
        return np.zeros_like(c)
    k = spectral_wavenumbers(n, length)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * c.ndim
    shape[axis] = len(k)
    fc = np.fft.rfft(c, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(fc, n=n, axis=axis)


class _GridBase:
    tdim = 4

    def __init__(self, lengths):
        self.lengths = tuple(float(x) for x in lengths)

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(x.reshape(x.shape + (1, 1, 1, 1)), x.shape + self.shape).copy()

    def expand(self, x):
        return np.asarray(x)[..., None, :, :, :]

    def base(self, c):
        return c[..., 0, :, :, :]

    def strip_base(self, c):
        c = c.copy()
        c[..., 0, :, :, :] = 0.0
        return c

    def _space_grad(self, c):
        return [spectral_diff(c, ax, L) for ax, L in zip((-3, -2, -1), self.lengths)]


class GridTaylorRep(_GridBase):
    """Periodic grid in space times a truncated Taylor series in time."""

    kind = "grid_taylor"

    def __init__(self, time_order: int, spatial_shape, lengths):
        super().__init__(lengths)
        self.max_order = time_order
        self.shape = (time_order + 1,) + tuple(spatial_shape)

    def lift(self, x):
        # constants live in the zeroth time coefficient only
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + self.shape)
        out[..., 0, :, :, :] = x.reshape(x.shape + (1, 1, 1))
        return out

    def mask(self, c, order):
        if order is None or order >= self.max_order:
            return c
        c = c.copy()
        c[..., max(order, -1) + 1:, :, :, :] = 0.0
        return c

    def mul(self, a, b, order):
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        for i in range(order + 1):
            for j in range(order + 1 - i):
                out[..., i + j, :, :, :] += a[..., i, :, :, :] * b[..., j, :, :, :]
        return out

    def ein2(self, sa, a, sb, b, so, order):
        out = None
        for i in range(order + 1):
            for j in range(order + 1 - i):
                term = np.einsum(f"{sa}...,{sb}...->{so}...", a[..., i, :, :, :], b[..., j, :, :, :])
                if out is None:
                    out = np.zeros(term.shape[:-3] + self.shape)
                out[..., i + j, :, :, :] += term
        return out

    def grad(self, c):
        k = np.arange(1, self.max_order + 1, dtype=float)
        dt = np.zeros_like(c)
        dt[..., :-1, :, :, :] = c[..., 1:, :, :, :] * k.reshape(-1, 1, 1, 1)
        return np.stack([dt] + self._space_grad(c))

    def grad_order(self, order):
        return order - 1

    def values(self, c, order):
        return c[..., 0, :, :, :]


class GridWindowRep(_GridBase):
    """Periodic grid on a window of equally spaced time levels."""

    kind = "grid_window"
    max_order = None

    def __init__(self, dt: float, shape, lengths):
        super().__init__(lengths)
        self.dt = float(dt)
        self.shape = tuple(shape)
        if self.shape[0] < 5:
            raise ValueError("a time window needs at least 5 levels")

    def mask(self, c, order):
        return c

    def mul(self, a, b, order):
        return a * b

    def ein2(self, sa, a, sb, b, so, order):
        return np.einsum(f"{sa}...,{sb}...->{so}...", a, b)

    def grad(self, c):
        return np.stack([fd_time(c, self.dt, axis=-4)] + self._space_grad(c))

    def grad_order(self, order):
        return None

    def values(self, c, order):
        return c[..., self.shape[0] // 2, :, :, :]


def fd_time(c: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """Fourth-order finite-difference derivative along axis (one-sided at the ends)."""
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0]
    out = np.empty_like(c)
    out[2:-2] = (c[:-4] - 8 * c[1:-3] + 8 * c[3:-1] - c[4:]) / (12 * dt)
    for i in (0, 1):
        # shifted one-sided stencils, fourth order
        w = _fd_weights(np.arange(5) - i)
        out[i] = np.tensordot(w, c[:5], axes=(0, 0)) / dt
        w = _fd_weights(np.arange(-4, 1) + i)
        out[n - 1 - i] = np.tensordot(w, c[n - 5:], axes=(0, 0)) / dt
    return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=None)
def _fd_weights_cached(nodes: tuple) -> np.ndarray:
    x = np.array(nodes, dtype=float)
    m = len(x)
    A = np.vander(x, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def _fd_weights(nodes) -> np.ndarray:
    return _fd_weights_cached(tuple(int(v) for v in nodes))


# ---------------------------------------------------------------- fields


class Field:
    """Tensor field: leading axes are indices, trailing axes belong to ``rep``."""

    __slots__ = ("c", "rep", "order")
    __array_priority__ = 100

    def __init__(self, c, rep, order=None):
        self.c = np.asarray(c, dtype=float)
        self.rep = rep
        if order is None:
            order = rep.max_order
        self.order = order

    # -- structure
    @property
    def lead(self) -> tuple:
        return self.c.shape[: self.c.ndim - self.rep.tdim]

    def __len__(self):
        return self.lead[0]

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        if len(key) > len(self.lead) or any(k is Ellipsis for k in key):
            raise IndexError("Field indexing only addresses tensor axes")
        return Field(self.c[key], self.rep, self.order)

    def __repr__(self):
        return f"Field(lead={self.lead}, rep={self.rep.kind}, order={self.order})"

    def values(self) -> np.ndarray:
        """Samples used for residual measurement (valid jet coefficients, or grid values)."""
        return self.rep.values(self.c, self.order)

    # -- arithmetic
    def _coerce(self, other):
        if isinstance(other, Field):
            return other
        return Field(self.rep.lift(other), self.rep, self.rep.max_order)

    def _min_order(self, other):
        if self.order is None or other.order is None:
            return None
        return min(self.order, other.order)

    def __add__(self, other):
        o = self._coerce(other)
        return Field(self.c + o.c, self.rep, self._min_order(o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Field(self.c - o.c, self.rep, self._min_order(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        return Field(o.c - self.c, self.rep, self._min_order(o))

    def __neg__(self):
        return Field(-self.c, self.rep, self.order)

    def __mul__(self, other):
        if isinstance(other, Field):
            order = self._min_order(other)
            return Field(self.rep.mul(self.c, other.c, order), self.rep, order)
        x = np.asarray(other, dtype=float)
        return Field(self.c * self.rep.expand(x) if x.ndim else self.c * x, self.rep, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Field):
            return self * other.recip()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, r):
        return self.power(r)

    # -- analytic functions through the nilpotent expansion
    def _compose(self, derivs):
        """f(a) given derivs(a0, k) -> d^k f / dx^k at the base values."""
        rep = self.rep
        a0 = rep.base(self.c)
        if self.order is None:  # window representation: plain pointwise evaluation
            return Field(derivs(self.c, 0), rep, None)
        nil = Field(rep.strip_base(self.c), rep, self.order)
        out_c = rep.strip_base(np.zeros_like(self.c))
        rep.base(out_c)[...] = derivs(a0, 0)
        power = nil
        for k in range(1, self.order + 1):
            out_c = out_c + power.c * rep.expand(derivs(a0, k) / factorial(k))
            if k < self.order:
                power = power * nil
        return Field(out_c, rep, self.order)

    def exp(self):
        return self._compose(lambda x, k: np.exp(x))

    def log(self):
        def d(x, k):
            if k == 0:
                return np.log(x)
            return (-1.0) ** (k - 1) * factorial(k - 1) / x**k
        return self._compose(d)

    def power(self, r: float):
        def d(x, k):
            coef = 1.0
            for i in range(k):
                coef *= r - i
            return coef * x ** (r - k)
        return self._compose(d)

    def sqrt(self):
        return self.power(0.5)

    def recip(self):
        return self.power(-1.0)

    def compose(self, derivs):
        """Apply a scalar function given as derivs(x, k) = f^(k)(x)."""
        return self._compose(derivs)


def const(x, like: Field) -> Field:
    return Field(like.rep.lift(x), like.rep, like.rep.max_order)


def stack(fields, axis: int = 0) -> Field:
    fields = list(fields)
    rep = fields[0].rep
    orders = [f.order for f in fields]
    order = None if any(o is None for o in orders) else min(orders)
    shape = np.broadcast_shapes(*[f.c.shape for f in fields])
    return Field(np.stack([np.broadcast_to(f.c, shape) for f in fields], axis=axis), rep, order)


def grad(f: Field) -> Field:
    """Space-time gradient; the new derivative index is the first axis."""
    order = f.rep.grad_order(f.order)
    c = f.rep.grad(f.c)
    return Field(f.rep.mask(c, order), f.rep, order)


def _parse(subs: str):
    if "->" not in subs:
        raise ValueError("ein subscripts need an explicit output")
    ins, out = subs.replace(" ", "").split("->")
    return ins.split(","), out


def _ein2(sa, a, sb, b, so):
    fa, fb = isinstance(a, Field), isinstance(b, Field)
    if not fa and not fb:
        return np.einsum(f"{sa},{sb}->{so}", np.asarray(a, float), np.asarray(b, float))
    if fa and fb:
        order = a._min_order(b)
        return Field(a.rep.ein2(sa, a.c, sb, b.c, so, order), a.rep, order)
    if fb:
        a, b, sa, sb = b, a, sb, sa
    return Field(np.einsum(f"{sa}...,{sb}->{so}...", a.c, np.asarray(b, float)), a.rep, a.order)


def ein(subs: str, *ops):
    """Einstein summation over tensor axes with representation-aware products.

    Operands are :class:`Field` objects or constant arrays (e.g. ``ETA`` and
    ``EPS_UP``).  Operands are combined left to right, keeping only the
    indices still needed, so put constants next to the field they contract
    with.
    """
    ins, out = _parse(subs)
    if len(ins) != len(ops):
        raise ValueError("operand count does not match subscripts")
    for sub, op in zip(ins, ops):
        rank = len(op.lead) if isinstance(op, Field) else np.ndim(op)
        if len(sub) != rank:
            raise ValueError(f"subscript {sub!r} does not match an operand of rank {rank}")
    acc_s, acc = ins[0], ops[0]
    if len(ops) == 1:
        if isinstance(acc, Field):
            return Field(np.einsum(f"{acc_s}...->{out}...", acc.c), acc.rep, acc.order)
        return np.einsum(f"{acc_s}->{out}", acc)
    for k in range(1, len(ops)):
        s = ins[k]
        if k == len(ops) - 1:
            so = out
        else:
            later = set("".join(ins[k + 1:])) | set(out)
            so = "".join(ch for ch in dict.fromkeys(acc_s + s) if ch in later)
        acc = _ein2(acc_s, acc, s, ops[k], so)
        acc_s = so
    return acc


def max_abs(f) -> float:
    if isinstance(f, Field):
        v = f.values()
        return float(np.max(np.abs(v))) if v.size else 0.0
    return float(np.max(np.abs(f))) if np.size(f) else 0.0
