import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorineq.calculus import BoundaryPartition, Grid, ScalarField, TensorField, VectorField, div_vector
from tensorineq.stokes import (
    IncompatibleDataError,
    StokesProblem,
    auxiliary_bounds,
    coercivity_eigenvalue,
    divergence_potential,
    ls_functional,
    manufactured_errors,
    manufactured_problem,
    manufactured_solution,
    solve_ls,
)


@pytest.fixture(scope="module")
def small():
    return StokesProblem.homogeneous(Grid.box(3, 4))


def _random_admissible(prob, rng):
    y = rng.standard_normal(prob.basis.shape[1])
    return prob.split(prob.basis @ y)


def test_problem_validation():
    g = Grid.box(3, 4)
    with pytest.raises(ValueError, match="positive"):
        StokesProblem.homogeneous(g, mu=0.0)
    with pytest.raises(ValueError, match="3D"):
        StokesProblem.homogeneous(Grid.box(2, 4))
    other = VectorField.zeros(Grid.box(3, 5))
    with pytest.raises(ValueError, match="grids differ"):
        StokesProblem(g, 1.0, other, BoundaryPartition.from_tau(g, ["x1=0"]))


def test_functional_zero(small):
    val, grad = ls_functional(TensorField.zeros(small.grid), VectorField.zeros(small.grid), small)
    assert val == 0.0 and not grad.any()


def test_functional_grid_mismatch(small):
    g = Grid.box(3, 5)
    with pytest.raises(ValueError):
        ls_functional(TensorField.zeros(g), VectorField.zeros(g), small)


def test_gradient_against_finite_differences(rng):
    g = Grid.box(3, 4)
    f = VectorField(g, rng.standard_normal(g.shape + (3,)))
    prob = StokesProblem.homogeneous(g, mu=1.7, f=f)
    s = TensorField(g, rng.standard_normal(g.shape + (3, 3)))
    u = VectorField(g, rng.standard_normal(g.shape + (3,)))
    _, grad = ls_functional(s, u, prob)
    x = np.concatenate([s.flat(), u.flat()])
    h = 1e-5
    for idx in rng.choice(x.size, 25, replace=False):
        e = np.zeros_like(x)
        e[idx] = h
        sp_, up = prob.split(x + e)
        sm, um = prob.split(x - e)
        fd = (ls_functional(sp_, up, prob)[0] - ls_functional(sm, um, prob)[0]) / (2 * h)
        assert abs(fd - grad[idx]) <= 1e-6 * max(1.0, abs(grad[idx]))


def test_functional_vanishes_on_consistent_fields():
    # divergence-free u, sigma = mu dev sym Grad u + spherical, f = Div sigma by the same stencil
    g = Grid.box(3, 5)
    mu = 0.7
    x = g.coords
    u = VectorField(g, np.stack([x[..., 1] ** 2, x[..., 0] * x[..., 2], x[..., 0] * x[..., 1]], -1))
    prob0 = StokesProblem.homogeneous(g, mu)
    from tensorineq.algebra import dev, sym
    from tensorineq.calculus import div_tensor, grad_vector

    sig = TensorField(g, mu * dev(sym(grad_vector(u).values)) + x[..., 0, None, None] * np.eye(3))
    prob = StokesProblem(g, mu, div_tensor(sig), prob0.part)
    val, _ = ls_functional(sig, u, prob)
    assert val <= 1e-24


def test_zero_data_gives_zero_solution(small):
    sol = solve_ls(small)
    assert np.abs(sol.sigma.values).max() == 0.0 and np.abs(sol.u.values).max() == 0.0
    assert sol.functional_value == 0.0


def test_coercivity_dense_matches_iterative(small):
    lam_d = coercivity_eigenvalue(small, "dense")
    lam_i = coercivity_eigenvalue(small, "iterative")
    assert lam_d > 0
    assert abs(lam_i - lam_d) <= 1e-8 * lam_d


def test_mu_scaling_invariance(rng):
    g = Grid.box(3, 4)
    p1 = StokesProblem.homogeneous(g, 1.3)
    p2 = StokesProblem.homogeneous(g, 2.6)
    y = rng.standard_normal(p1.basis.shape[1])
    ns = p1.basis.shape[1] - int(np.sum(p1.basis[9 * g.num_nodes:].getnnz(axis=0) > 0))
    y2 = y.copy()
    y2[:ns] *= 2.0
    q1 = (y @ p1.ls_form @ y) / (y @ p1.norm_form @ y)
    q2 = (y2 @ p2.ls_form @ y2) / (y2 @ p2.norm_form @ y2)
    assert np.isclose(q1, q2, rtol=1e-12)
    assert np.isclose(coercivity_eigenvalue(p1, "dense"), coercivity_eigenvalue(p2, "dense"), rtol=1e-8)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_auxiliary_bounds_random_fields(seed, mu):
    rng = np.random.default_rng(seed)
    g = Grid.box(3, 4)
    s = TensorField(g, rng.standard_normal(g.shape + (3, 3)))
    u = VectorField(g, rng.standard_normal(g.shape + (3,)))
    b = auxiliary_bounds(s, u, mu)
    assert b["skew"] <= b["residual"] * (1 + 1e-12)
    assert b["mu_div"] <= np.sqrt(3) * b["residual"] * (1 + 1e-12)


def test_manufactured_solution_against_finite_differences():
    ms = manufactured_solution(1.5)
    pt = np.array([0.3, 0.7, 0.2])
    # velocity vanishes on x1 = 0 and is divergence free
    assert np.allclose(ms.u(np.array([[0.0, 0.4, 0.9]])), 0.0)
    h = 1e-6
    div = sum((ms.u(pt + h * e)[k] - ms.u(pt - h * e)[k]) / (2 * h) for k, e in enumerate(np.eye(3)))
    assert abs(div) <= 1e-8
    # pressure recovered from the trace
    assert np.isclose(-np.trace(ms.sigma(pt)) / 3, ms.p(pt))
    # f = Div sigma by central differences of sigma
    fd = sum((ms.sigma(pt + h * e)[:, k] - ms.sigma(pt - h * e)[:, k]) / (2 * h) for k, e in enumerate(np.eye(3)))
    assert np.allclose(fd, ms.f(pt), atol=1e-7)


def test_manufactured_convergence():
    errs = []
    for res in (6, 12):
        prob, ms = manufactured_problem(res)
        sol = solve_ls(prob, check_coercivity=False)
        assert sol.gradient_norm <= 1e-6
        errs.append(manufactured_errors(sol, ms))
    for key in ("u", "sigma", "p"):
        assert errs[0][key] / errs[1][key] >= 3.0


def test_solution_pressure_is_trace():
    prob, ms = manufactured_problem(5)
    sol = solve_ls(prob)
    assert np.allclose(sol.pressure.values, -np.trace(sol.sigma.values, axis1=-2, axis2=-1) / 3)


# -- divergence potential --------------------------------------------------


def test_potential_for_constant_data():
    g = Grid.box(2, 16)
    part = BoundaryPartition.from_tau(g, ["x1=0"])
    res = divergence_potential(ScalarField(g, np.ones(g.shape)), part)
    assert res.residual <= 1e-10
    assert np.isfinite(res.ratio)
    assert np.allclose(res.v.values[g.face_mask("x1=0")], 0.0)
    assert np.allclose(div_vector(res.v).values, 1.0, atol=1e-8)


def test_potential_zero_data():
    g = Grid.box(2, 8)
    res = divergence_potential(ScalarField.zeros(g), BoundaryPartition.from_tau(g, ["x1=0"]))
    assert not res.v.values.any()


def test_potential_incompatible():
    g = Grid.box(2, 8)
    with pytest.raises(IncompatibleDataError, match="Gamma_nu"):
        divergence_potential(ScalarField(g, np.ones(g.shape)), BoundaryPartition.from_tau(g, g.faces))


def test_potential_closed_boundary_mean_free():
    # Gamma_nu empty is allowed once the data has zero mean
    g = Grid.box(2, 12)
    x = g.coords
    data = np.cos(np.pi * x[..., 0]) * (1 + x[..., 1])
    data = data - np.sum(g.weights * data) / g.weights.sum()
    res = divergence_potential(ScalarField(g, data), BoundaryPartition.from_tau(g, g.faces))
    assert np.isfinite(res.ratio) and res.ratio > 0


def test_potential_3d():
    g = Grid.box(3, 6)
    res = divergence_potential(ScalarField(g, np.ones(g.shape)), BoundaryPartition.from_tau(g, ["x1=0"]))
    assert res.residual <= 1e-8
