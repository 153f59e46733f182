import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rel_euler import eos
from rel_euler.fields import Grid
from rel_euler.geometry import (CFLError, ConstantMetric, EllipticOperatorP, SpaceTimeBox, SpectralMetric,
                                band_limited, christoffel, duhamel_check, ellip_constant, elliptic_split,
                                linear_wave_solve, metric_from_state, minors, minors_det, null_frame,
                                null_geodesic_trace, project_null, rest_metric, smooth_step, spacetime_velocity,
                                truncate_metric, wave_energy)

TH = 2.0
H0 = float(eos.from_density(0.25, TH).h)


def moving_metric(grid, amp=0.1):
    x = grid.mesh()[0]
    h = H0 + 0.05 * np.sin(x)
    ui = amp * np.stack([np.cos(x), np.sin(x), 0 * x])
    u = np.concatenate([np.sqrt(1 + np.sum(ui**2, axis=0))[None], ui])
    return metric_from_state(h, u, TH)


def test_metric_inverse_and_signature():
    M = moving_metric(Grid(1, 16))
    c = M.check()
    assert c["g00_defect"] < 1e-14
    assert c["inverse_defect"] < 1e-13
    assert M.is_lorentzian()


def test_rest_metric_values():
    M = metric_from_state(np.array(H0), np.array([1.0, 0, 0, 0]), TH)
    np.testing.assert_allclose(M.g_up, np.diag([-1.0, 0.5, 0.5, 0.5]), atol=1e-14)
    np.testing.assert_allclose(M.g_up, rest_metric(0.5).g_up, atol=1e-14)
    np.testing.assert_allclose(M.g_dn, rest_metric(0.5).g_dn, atol=1e-13)


@given(q=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_minors_at_least_one(q):
    q = np.array(q)
    u = np.concatenate([[math.sqrt(1 + q @ q)], q])
    m = minors(u)
    assert np.all(m >= 1.0 - 1e-9)
    np.testing.assert_allclose(m, minors_det(u), rtol=1e-9, atol=1e-9)


def test_elliptic_manufactured_solution():
    box = SpaceTimeBox((8, 8, 8, 1), (2 * np.pi,) * 4)
    u = spacetime_velocity(box, 1)
    op = EllipticOperatorP(u, box)
    v_true = band_limited(box, np.random.default_rng(2), 2)
    v, rep = op.solve(op.apply(v_true))
    assert rep["residual"] < 1e-11
    assert np.max(np.abs(v - v_true)) < 1e-9


def test_elliptic_split_recombines():
    box = SpaceTimeBox((8, 8, 1, 1), (2 * np.pi,) * 4)
    u = spacetime_velocity(box, 3)
    rhs = np.stack([band_limited(box, np.random.default_rng(k), 1) for k in range(4)])
    um, up, reports = elliptic_split(u, rhs, box)
    np.testing.assert_allclose(um + up, u)
    op = EllipticOperatorP(u, box)
    for a in range(4):
        assert np.max(np.abs(op.apply(um[a]) - rhs[a])) < 1e-9


def test_ellip_constant_positive():
    box = SpaceTimeBox((8, 8, 8, 1), (2 * np.pi,) * 4)
    C = ellip_constant(spacetime_velocity(box, 0), box, 1.0, samples=5)
    assert 0 < C < 10


def test_null_frame_constant_metric():
    g = rest_metric(0.5).g_up
    fr = null_frame(g, (0.0, 0.0))
    assert max(fr.relations(np.linalg.inv(g)).values()) < 1e-13


def test_null_frame_perturbed_metric():
    grid = Grid(2, 16)
    M = moving_metric(grid)
    x, y, _ = grid.mesh()
    fr = null_frame(M.g_up, (0.1 * np.sin(x), 0.1 * np.cos(x + y)), theta=(1.0, 1.0, 0.0))
    assert max(fr.relations(M.g_dn).values()) < 1e-12


def test_null_frame_reprojects_bad_time_derivative():
    g = rest_metric(0.5).g_up
    with pytest.warns(RuntimeWarning):
        fr = null_frame(g, (0.0, 0.0), dphi_t=3.0)
    assert fr.reprojected
    # a surface moving along +x^3 at the sound speed
    assert -fr.xi[0] == pytest.approx(math.sqrt(0.5))


def test_flat_geodesic_is_straight():
    met = ConstantMetric(rest_metric(0.5).g_up)
    xi = np.array([-math.sqrt(0.5), 1.0, 0.0, 0.0])
    tr = null_geodesic_trace(met, np.zeros(4), xi, 2.0, 200)
    dx = tr.x[-1] - tr.x[0]
    assert dx[1] / dx[0] == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert np.max(np.abs(tr.hamiltonian)) < 1e-15


def test_hamiltonian_conserved_on_varying_metric():
    grid = Grid(2, 16)
    met = SpectralMetric(moving_metric(grid).g_up, grid)
    xi0 = project_null(met, np.zeros(4), np.array([-1.0, 1.0, 0.3, 0.0]))
    tr = null_geodesic_trace(met, np.zeros(4), xi0, 5.0, 1000)
    assert np.max(np.abs(tr.hamiltonian)) < 1e-8
    assert not tr.projected


def test_non_null_start_is_projected():
    met = ConstantMetric(rest_metric(0.5).g_up)
    with pytest.warns(RuntimeWarning):
        tr = null_geodesic_trace(met, np.zeros(4), np.array([-2.0, 1.0, 0.0, 0.0]), 1.0, 10)
    assert tr.projected and abs(tr.hamiltonian[0]) < 1e-14


def test_wave_matches_dalembert():
    g = Grid(1, 32)
    x = g.mesh()[0]
    c = math.sqrt(0.5)
    T = 1.0
    tr = linear_wave_solve(rest_metric(0.5).g_up.reshape(4, 4, 1, 1, 1), g, np.sin(x), 0 * x, T, cfl=0.3)
    exact = 0.5 * (np.sin(x - c * T) + np.sin(x + c * T))
    assert np.max(np.abs(tr.f[-1] - exact)) < 1e-6


def test_wave_energy_conserved_for_constant_metric():
    g = Grid(1, 32)
    x = g.mesh()[0]
    gu = np.broadcast_to(rest_metric(0.5).g_up.reshape(4, 4, 1, 1, 1), (4, 4) + g.shape)
    tr = linear_wave_solve(gu, g, np.exp(np.sin(x)), np.cos(2 * x), 2.0, cfl=0.3)
    E = [wave_energy(gu, g, f, ft) for f, ft in zip(tr.f, tr.ft)]
    assert abs(E[-1] - E[0]) / E[0] < 1e-6


def test_wave_cfl_violation():
    g = Grid(1, 32)
    with pytest.raises(CFLError):
        linear_wave_solve(rest_metric(0.5).g_up.reshape(4, 4, 1, 1, 1), g, np.zeros(g.shape), np.zeros(g.shape),
                          1.0, dt=1.0)


def test_duhamel_constant_forcing_exact():
    g = Grid(1, 16)
    out = duhamel_check(rest_metric(0.5).g_up, g, lambda t: np.ones(g.shape), 1.0, 20)
    assert out["residual"] < 1e-12
    assert out["phi0_error"] == 0.0


def test_duhamel_flat_second_order():
    g = Grid(1, 16)
    x = g.mesh()[0]
    F = lambda t: np.sin(x) * np.cos(t)  # noqa: E731
    r = [duhamel_check(rest_metric(0.5).g_up, g, F, 1.0, nt)["residual"] for nt in (40, 80)]
    assert 1.6 < math.log2(r[0] / r[1]) < 2.4


def test_christoffel_vanishes_for_constant_metric():
    g = Grid(1, 8)
    gu = np.broadcast_to(rest_metric(0.5).g_up.reshape(4, 4, 1, 1, 1), (4, 4) + g.shape).copy()
    assert np.max(np.abs(christoffel(gu, g))) < 1e-14


def test_christoffel_symmetric():
    g = Grid(1, 16)
    G = christoffel(moving_metric(g).g_up, g)
    np.testing.assert_allclose(G, np.swapaxes(G, 1, 2), atol=1e-14)


def test_smooth_step_and_truncation():
    s = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(s, [0, 0, 0.5, 1, 1])
    g = Grid(1, 16)
    M = moving_metric(g)
    bg = rest_metric(0.5, g.shape)
    np.testing.assert_allclose(truncate_metric(M, np.ones(g.shape), bg).g_up, M.g_up)
    np.testing.assert_allclose(truncate_metric(M, np.zeros(g.shape), bg).g_up, bg.g_up)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        T = truncate_metric(M, 0.5 * np.ones(g.shape), bg)
    assert T.is_lorentzian()
    with pytest.raises(ValueError):
        truncate_metric(M, 2 * np.ones(g.shape), bg)
