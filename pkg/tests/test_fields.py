import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rel_euler.algebra import EPS_LO, EPS_UP, ETA
from rel_euler.fields import (FieldSet, Grid, GridError, TensorField, dealias, eps_eps_delta, eps_eps_direct,
                              fd8_derivative, generalized_delta, gradient, lower, normalize_velocity,
                              parseval_sides, raise_, read_snapshot, spectral_derivative, vort, write_snapshot)


def test_grid_shapes_and_checks():
    g = Grid(2, 16)
    assert g.shape == (16, 16, 1)
    assert g.npoints == 256
    assert g.dx == pytest.approx(2 * np.pi / 16)
    with pytest.raises(GridError):
        Grid(2, 12)
    with pytest.raises(GridError):
        Grid(4, 16)
    with pytest.raises(GridError):
        g.check(np.zeros((16, 8, 1)))


@pytest.mark.parametrize("k", [1, 3, 7])
def test_spectral_derivative_exact_on_modes(k):
    g = Grid(2, 16)
    x, y, _ = g.mesh()
    f = np.sin(k * x) * np.cos(2 * y)
    np.testing.assert_allclose(spectral_derivative(f, 1, g), k * np.cos(k * x) * np.cos(2 * y), atol=1e-12)
    np.testing.assert_allclose(spectral_derivative(f, 2, g, order=2), -4 * f, atol=1e-12)


def test_time_axis_rejected():
    g = Grid(1, 8)
    with pytest.raises(GridError):
        spectral_derivative(np.zeros(g.shape), 0, g)


def test_fd8_is_eighth_order():
    errs = []
    for n in (16, 32):
        g = Grid(1, n)
        x = g.mesh()[0]
        f = np.exp(np.sin(x))
        errs.append(np.max(np.abs(fd8_derivative(f, 1, g) - np.cos(x) * f)))
    assert math.log2(errs[0] / errs[1]) > 7.0


def test_dealias_removes_top_third():
    g = Grid(1, 32)
    x = g.mesh()[0]
    f = np.sin(3 * x) + np.sin(14 * x)
    np.testing.assert_allclose(dealias(f, g), np.sin(3 * x), atol=1e-13)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_normalize_velocity(ui):
    u = normalize_velocity(np.array(ui).reshape(3, 1, 1, 1))
    assert np.einsum("ab,a...,b...->...", ETA, u, u).item() == pytest.approx(-1.0, abs=1e-12)
    assert u[0].item() >= 1.0


def test_lower_raise_and_tensor_toggle():
    rng = np.random.default_rng(0)
    T = rng.normal(size=(4, 4, 2, 1, 1))
    np.testing.assert_allclose(raise_(lower(T, 1), 1), T)
    tf = TensorField(T, ("up", "up"))
    lo = tf.lowered()
    assert lo.variance == ("down", "down")
    np.testing.assert_allclose(lo.raised().data, T)
    np.testing.assert_allclose(lo.data[0, 1], -T[0, 1])


def test_vort_of_gradient_vanishes_and_is_orthogonal():
    g = Grid(3, 16)
    x, y, z = g.mesh()
    rng = np.random.default_rng(1)
    u = normalize_velocity(0.2 * np.stack([np.sin(x + y), np.cos(z), np.sin(y - z)]))
    phi = np.sin(x) * np.cos(y) + np.sin(2 * z)
    A = np.concatenate([np.zeros((1,) + g.shape), gradient(phi, g)])
    assert np.max(np.abs(vort(A, u, g, dAl_dt=np.zeros_like(A)))) < 1e-12
    B = rng.normal(size=(4, 1, 1, 1)) * np.stack([np.sin(y), np.cos(x), np.sin(z), np.cos(y + z)])
    w = vort(B, u, g, dAl_dt=np.zeros_like(B))
    ul = lower(u)
    assert np.max(np.abs(np.einsum("a...,a...->...", ul, w))) < 1e-12


def test_epsilon_contraction_identity():
    np.testing.assert_allclose(eps_eps_direct(), eps_eps_delta(), atol=1e-14)
    # full contraction picks up one Lorentzian sign: -4!
    assert np.einsum("abcd,abcd->", EPS_UP, EPS_LO) == pytest.approx(-24.0)
    np.testing.assert_allclose(generalized_delta(1), np.eye(4))
    d2 = generalized_delta(2)
    assert d2[0, 1, 0, 1] == 1.0 and d2[0, 1, 1, 0] == -1.0


def test_snapshot_roundtrip_is_bit_exact(tmp_path):
    g = Grid(2, 8)
    rng = np.random.default_rng(2)
    fields = {"p": rng.random(g.shape), "u1": rng.normal(size=g.shape)}
    path = tmp_path / "snap.bin"
    write_snapshot(path, g, 0.125, fields)
    header = json.loads(path.read_bytes().split(b"\n", 1)[0])
    assert header["dtype"] == "f64le" and header["order"] == "C"
    g2, t, out = read_snapshot(path)
    assert (g2.dim, g2.n, t) == (2, 8, 0.125)
    for k in fields:
        assert out[k].tobytes() == fields[k].tobytes()


def test_parseval():
    g = Grid(2, 16)
    x, y, _ = g.mesh()
    a, b = parseval_sides(np.sin(x) + np.cos(3 * y), g)
    assert a == pytest.approx(b, rel=1e-13)
    assert a == pytest.approx(4 * np.pi**2, rel=1e-13)


def test_fieldset_validation():
    g = Grid(1, 8)
    h = np.full(g.shape, 0.4)
    F = FieldSet.from_spatial_velocity(g, h, 0.1 * np.ones((3,) + g.shape))
    F.validate()
    bad = FieldSet(g, h, np.ones((4,) + g.shape))
    with pytest.raises(GridError):
        bad.validate()
