"""Polytropic equation of state p = rho**vartheta and its enthalpy relations.

The log-enthalpy is normalized by H = 1 at vacuum, which gives the closed form

    h(rho) = vartheta / (vartheta - 1) * log(1 + rho**(vartheta - 1))

for the integral of c_s^2 / (p + rho) d(rho).  The functions below accept
floats, numpy arrays or :class:`~rel_euler.algebra.Field` objects, so the same
code feeds the grid solver and the Taylor jets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Field


class EOSDomainError(ValueError):
    """Raised for states outside 0 < c_s <= 1, rho > 0."""


def _pow(x, r):
    return x.power(r) if isinstance(x, Field) else np.power(x, r)


def _log(x):
    return x.log() if isinstance(x, Field) else np.log(x)


def _exp(x):
    return x.exp() if isinstance(x, Field) else np.exp(x)


# log(1 + x) and exp(x) - 1 without cancellation near vacuum
def _log1p(x):
    return (1.0 + x).log() if isinstance(x, Field) else np.log1p(x)


def _expm1(x):
    return x.exp() - 1.0 if isinstance(x, Field) else np.expm1(x)


def _check_vartheta(vartheta: float) -> None:
    if not vartheta > 1.0:
        raise EOSDomainError(f"vartheta must exceed 1, got {vartheta}")


def pressure(rho, vartheta: float):
    return _pow(rho, vartheta)


def density_from_pressure(p, vartheta: float):
    return _pow(p, 1.0 / vartheta)


def sound_speed_sq(rho, vartheta: float):
    return vartheta * _pow(rho, vartheta - 1.0)


def enthalpy(rho, vartheta: float):
    """Log-enthalpy h(rho) with h(0) = 0."""
    return (vartheta / (vartheta - 1.0)) * _log1p(_pow(rho, vartheta - 1.0))


def density_from_enthalpy(h, vartheta: float):
    return _pow(_expm1(h * ((vartheta - 1.0) / vartheta)), 1.0 / (vartheta - 1.0))


def dcs2_dh(rho, vartheta: float):
    """Derivative of c_s^2 with respect to h, expressed through rho."""
    return (vartheta - 1.0) * (1.0 + _pow(rho, vartheta - 1.0))


def dh_drho(rho, vartheta: float):
    """Integrand of the enthalpy integral: vartheta rho^(vartheta-1) / (rho^vartheta + rho)."""
    return vartheta * _pow(rho, vartheta - 1.0) / (_pow(rho, vartheta) + rho)


def max_density(vartheta: float) -> float:
    """Largest density with c_s <= 1."""
    _check_vartheta(vartheta)
    return (1.0 / vartheta) ** (1.0 / (vartheta - 1.0))


@dataclass(frozen=True)
class ThermoState:
    rho: float
    p: float
    cs2: float
    h: float
    q: float
    H: float
    vartheta: float
    vacuum: bool = False

    @property
    def dcs2_dh(self) -> float:
        if self.vacuum:
            return self.vartheta - 1.0
        return float(dcs2_dh(self.rho, self.vartheta))

    @property
    def cs(self) -> float:
        return float(np.sqrt(self.cs2))


def _vacuum(vartheta: float) -> ThermoState:
    return ThermoState(rho=0.0, p=0.0, cs2=0.0, h=0.0, q=1.0, H=1.0, vartheta=vartheta, vacuum=True)


def from_density(rho: float, vartheta: float) -> ThermoState:
    _check_vartheta(vartheta)
    rho = float(rho)
    if not rho > 0.0:
        raise EOSDomainError(f"density must be positive, got {rho}")
    cs2 = float(sound_speed_sq(rho, vartheta))
    if cs2 > 1.0 + 1e-15:
        raise EOSDomainError(f"c_s^2 = {cs2} exceeds 1 at rho = {rho}")
    p = float(pressure(rho, vartheta))
    h = float(enthalpy(rho, vartheta))
    H = float(np.exp(h))
    return ThermoState(rho=rho, p=p, cs2=cs2, h=h, q=(p + rho) / H, H=H, vartheta=vartheta)


def from_enthalpy(h: float, vartheta: float) -> ThermoState:
    _check_vartheta(vartheta)
    h = float(h)
    if h < 0.0:
        raise EOSDomainError(f"log-enthalpy must be nonnegative, got {h}")
    if h == 0.0:
        return _vacuum(vartheta)
    rho = float(density_from_enthalpy(h, vartheta))
    if rho > max_density(vartheta) * (1 + 1e-14):
        raise EOSDomainError(f"h = {h} maps to rho = {rho} beyond the subluminal range")
    return from_density(rho, vartheta)


def from_pressure(p: float, vartheta: float) -> ThermoState:
    _check_vartheta(vartheta)
    if not p > 0.0:
        raise EOSDomainError(f"pressure must be positive, got {p}")
    return from_density(float(density_from_pressure(float(p), vartheta)), vartheta)
