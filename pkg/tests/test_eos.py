import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from rel_euler import eos
from rel_euler.algebra import Field, taylor_rep

varthetas = st.floats(1.2, 4.0)


def test_reference_state_values():
    # rho = 1/4, vartheta = 2: p = 1/16, c_s^2 = 1/2, h = 2 log(5/4)
    th = eos.from_density(0.25, 2.0)
    assert th.p == pytest.approx(0.0625, rel=1e-15)
    assert th.cs2 == pytest.approx(0.5, rel=1e-15)
    assert th.h == pytest.approx(2.0 * math.log(1.25), rel=1e-15)
    assert th.H == pytest.approx(1.25**2, rel=1e-14)
    assert th.q == pytest.approx((0.0625 + 0.25) / 1.5625, rel=1e-14)


def test_max_density():
    assert eos.max_density(2.0) == pytest.approx(0.5)
    assert eos.from_density(eos.max_density(3.0), 3.0).cs2 == pytest.approx(1.0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@given(th=varthetas, frac=st.floats(1e-3, 1.0))
def test_enthalpy_matches_quadrature(th, frac):
    rho = frac * eos.max_density(th)
    integral, _ = quad(lambda r: eos.sound_speed_sq(r, th) / (r + eos.pressure(r, th)), 0.0, rho,
                       epsabs=1e-14, epsrel=1e-13, limit=200)
    assert eos.enthalpy(rho, th) == pytest.approx(integral, rel=1e-10, abs=1e-14)


@given(th=varthetas, frac=st.floats(1e-3, 1.0))
def test_inverse_matches_bracketed_root(th, frac):
    rho = frac * eos.max_density(th)
    h = eos.enthalpy(rho, th)
    # h ~ rho^(vartheta-1) near vacuum, so match log h to keep the root well conditioned
    root = brentq(lambda r: math.log(eos.enthalpy(r, th)) - math.log(h), 0.5 * rho, eos.max_density(th) * 1.01,
                  xtol=1e-300, rtol=1e-14)
    assert eos.density_from_enthalpy(h, th) == pytest.approx(root, rel=1e-11)
    assert eos.from_enthalpy(h, th).rho == pytest.approx(rho, rel=1e-11)


@given(th=varthetas, frac=st.floats(0.05, 0.95))
def test_dcs2_dh_by_finite_difference(th, frac):
    rho = frac * eos.max_density(th)
    h = eos.enthalpy(rho, th)
    eps = 1e-6
    fd = (eos.sound_speed_sq(eos.density_from_enthalpy(h + eps, th), th)
          - eos.sound_speed_sq(eos.density_from_enthalpy(h - eps, th), th)) / (2 * eps)
    assert eos.dcs2_dh(rho, th) == pytest.approx(fd, rel=1e-6)


@given(th=varthetas, frac=st.floats(1e-3, 1.0))
def test_pressure_roundtrip(th, frac):
    rho = frac * eos.max_density(th)
    assert eos.from_pressure(eos.pressure(rho, th), th).rho == pytest.approx(rho, rel=1e-13)


def test_sound_speed_monotone_in_density():
    rho = np.linspace(1e-3, 0.5, 200)
    assert np.all(np.diff(eos.sound_speed_sq(rho, 2.0)) > 0)


@pytest.mark.parametrize("call", [
    lambda: eos.from_density(0.6, 2.0),  # c_s^2 = 1.2
    lambda: eos.from_density(0.0, 2.0),
    lambda: eos.from_density(-1.0, 2.0),
    lambda: eos.from_density(0.1, 1.0),
    lambda: eos.from_enthalpy(-0.1, 2.0),
    lambda: eos.from_enthalpy(10.0, 2.0),
    lambda: eos.from_pressure(0.0, 2.0),
])
def test_domain_errors(call):
    with pytest.raises(eos.EOSDomainError):
        call()


def test_vacuum_state():
    v = eos.from_enthalpy(0.0, 2.0)
    assert v.vacuum and v.rho == 0.0 and v.H == 1.0
    assert v.dcs2_dh == pytest.approx(1.0)


def test_works_on_arrays_and_jets():
    rho = np.array([0.1, 0.2, 0.3])
    np.testing.assert_allclose(eos.density_from_enthalpy(eos.enthalpy(rho, 2.0), 2.0), rho, rtol=1e-13)
    rep = taylor_rep(2)
    c = np.zeros(rep.ncoef)
    c[0] = 0.25
    c[rep.index[(0, 1, 0, 0)]] = 0.01
    h = eos.enthalpy(Field(c, rep, 2), 2.0)
    # dh/dx = h'(rho) drho/dx
    assert h.c[rep.index[(0, 1, 0, 0)]] == pytest.approx(eos.dh_drho(0.25, 2.0) * 0.01, rel=1e-13)
