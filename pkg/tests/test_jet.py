import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rel_euler import dynamics as D
from rel_euler import eos
from rel_euler.algebra import max_abs, taylor_rep
from rel_euler.jet import (JetOrderError, complete_jet, euler_residual_jet, eval_identity, flux_matrices,
                           random_constrained_jet, random_unconstrained_jet, run_jet_suite)


def test_base_flux_matrices_match_point_assembly():
    jet = random_constrained_jet(3, 2, 0.1)
    A = flux_matrices(jet.U, 2.0)
    U0 = jet.rep.base(jet.U.c)
    np.testing.assert_allclose(jet.rep.base(A.c), D.assemble_flux_matrices(U0, 2.0), atol=1e-13)


@given(seed=st.integers(0, 100_000), N=st.integers(1, 3))
@settings(max_examples=20)
def test_completed_jet_solves_equations(seed, N):
    jet = random_constrained_jet(seed, N, 0.1)
    r_h, r_u = euler_residual_jet(jet)
    assert max_abs(r_h) < 1e-14 and max_abs(r_u) < 1e-14


def test_unconstrained_jet_breaks_equations():
    r_h, r_u = euler_residual_jet(random_unconstrained_jet(3, 2, 0.1))
    assert max(max_abs(r_h), max_abs(r_u)) > 1e-3


def test_time_coefficients_match_grid_solver():
    # a single Fourier mode has closed-form spatial Taylor data at x = 0
    rep = taylor_rep(2)
    a, k = 1e-3, 1.0
    c = np.zeros((4, rep.ncoef))
    c[:, 0] = [eos.pressure(0.25, 2.0), 0, 0, 0]
    c[1, rep.index[(0, 1, 0, 0)]] = a * k  # u^1 = a sin(k x)
    jet = complete_jet(c, 2.0, 2)
    from rel_euler.fields import Grid

    g = Grid(1, 64)
    U = D.rest_state(g)
    U[1] = a * np.sin(k * g.mesh()[0])
    dU = D.time_derivative(U, g, 2.0)
    assert jet.coefficient("p", (1, 0, 0, 0)) == pytest.approx(dU[0, 0, 0, 0], rel=1e-10)


def test_order_limits():
    with pytest.raises(JetOrderError):
        random_constrained_jet(0, 5, 0.1)
    with pytest.raises(JetOrderError):
        eval_identity(random_constrained_jet(0, 2, 0.1), "SDe")


def test_bad_base_point():
    rep = taylor_rep(1)
    c = np.zeros((4, rep.ncoef))
    with pytest.raises(eos.EOSDomainError):
        complete_jet(c, 2.0, 1)


def test_jets_are_reproducible():
    a = random_constrained_jet(42, 3, 0.1)
    b = random_constrained_jet(42, 3, 0.1)
    assert np.array_equal(a.U.c, b.U.c)


def test_suite_report_fields():
    rep = run_jet_suite(["WTe-h", "CEQ"], 2, 5, seed=7)
    for name, r in rep.items():
        assert r["pass"]
        assert set(r) >= {"anchor", "max_rel_residual", "l2_rel_residual", "n_points", "jet_order"}
        assert r["jet_order"] == 2
        assert "(" not in r["anchor"]


def test_suite_rejects_shallow_order():
    with pytest.raises(JetOrderError):
        run_jet_suite(["CEQ1"], 2, 1)


def test_control_suite_fails_identities():
    rep = run_jet_suite(["WTe-h", "HDe"], 2, 10, control=True)
    for r in rep.values():
        assert r["median_rel_residual"] > 1e-3
        assert "pass" not in r


@pytest.mark.parametrize("name", ["OE", "elliptic", "fd-um-local"])
def test_auxiliary_identities(name):
    jet = random_constrained_jet(5, 3, 0.1)
    assert eval_identity(jet, name, seed=5).max_rel < 1e-9


@pytest.mark.parametrize("name", ["fdr", "tue"])
def test_split_identities_order_four(name):
    jet = random_constrained_jet(6, 4, 0.1)
    assert eval_identity(jet, name, seed=6).max_rel < 1e-8
