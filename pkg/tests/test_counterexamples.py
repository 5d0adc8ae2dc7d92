import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorineq import algebra as alg
from tensorineq.calculus import Grid, ScalarField, UnsupportedDimensionError, VectorField, curl_tensor, lq_norm
from tensorineq.counterexamples import (
    bump,
    curl_of_skew,
    curl_of_spherical,
    devsym_devcurl_kernel_chain,
    pompe_closed_forms,
    pompe_field,
    pompe_gradient,
    pompe_quadrature_check,
    pompe_table,
    skew_field,
    spherical_field,
    witness_no_devsym_devsymcurl,
    witness_no_sym_div,
)


# -- half-disk sequence ----------------------------------------------------


@pytest.mark.parametrize("n,point,expected", [(1, (1, 0), (1, 0)), (2, (1, 0), (1, 0)), (3, (0, 0.7), (0, 0))])
def test_pompe_field_values(n, point, expected):
    assert np.allclose(pompe_field(n, point), expected)


def test_pompe_field_outside_domain():
    with pytest.raises(ValueError, match="outside"):
        pompe_field(1, (-0.5, 0.0))
    with pytest.raises(ValueError, match="outside"):
        pompe_field(1, (0.9, 0.9))


@pytest.mark.parametrize(
    "n,expected", [(1, [[2, 0], [0, 1]]), (2, [[3, 0], [0, 2]])]
)
def test_pompe_gradient_at_one(n, expected):
    assert np.allclose(pompe_gradient(n, 1.0, 0.0), expected)


def test_pompe_gradient_vanishes_at_origin():
    for n in range(1, 6):
        assert np.allclose(pompe_gradient(n, 0.0, 0.3), 0.0)


def test_pompe_gradient_out_of_range():
    with pytest.raises(ValueError):
        pompe_gradient(2, 1.5, 0.0)
    with pytest.raises(ValueError):
        pompe_gradient(2, 0.5, 2.0)


@given(st.integers(1, 8), st.floats(0.05, 1.0), st.floats(-1.5, 1.5))
def test_pompe_gradient_matches_complex_derivative(n, r, t):
    # oracle: u = x z^n with d/dx = z^n + n x z^(n-1), d/dy = i n x z^(n-1)
    x, y = r * np.cos(t), r * np.sin(t)
    z = complex(x, y)
    dx = z**n + n * x * z ** (n - 1)
    dy = 1j * n * x * z ** (n - 1)
    oracle = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
    G = pompe_gradient(n, r, t)
    assert np.allclose(G, oracle, atol=1e-12)
    # squared norm identity r^{2n} (1 + 2(n^2 + n) cos^2 t)
    assert np.isclose(np.sum(G**2), r ** (2 * n) * (1 + 2 * (n * n + n) * np.cos(t) ** 2))


def test_closed_forms_from_formulas():
    c1 = pompe_closed_forms(1)
    assert np.isclose(c1.grad_norm_sq, 3 * np.pi / 4)
    assert np.isclose(c1.dev2_norm_sq, np.pi / 8)
    assert c1.dev3_lower_bound is None
    c2 = pompe_closed_forms(2)
    assert np.isclose(c2.grad_norm_sq, 7 * np.pi / 6)
    assert np.isclose(c2.dev2_norm_sq, np.pi / 12)
    assert np.isclose(pompe_closed_forms(3).dev3_lower_bound, 3 * np.pi / 16)


@given(st.integers(1, 50))
def test_closed_form_ratio(n):
    c = pompe_closed_forms(n)
    assert np.isclose(c.grad_norm_sq / c.dev2_norm_sq, 2 * (n * n + n + 1))


def test_quadrature_examples():
    r1 = pompe_quadrature_check(1, 400).values
    assert abs(r1["grad_norm_sq_num"] - 2.356) <= 0.003
    r4 = pompe_quadrature_check(4, 400).values
    assert abs(r4["dev2_norm_sq_num"] - np.pi / 20) <= 1e-3
    assert r4["dev3_norm_sq_num"] >= 16 * np.pi / 60


def test_quadrature_resolution_guard():
    with pytest.raises(ValueError):
        pompe_quadrature_check(1, 20)


def test_table_passes_and_ratio_grows():
    table = pompe_table(8, 200)
    assert all(r.passed for r in table)
    ratios = [r.values["ratio_num"] for r in table]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    d = table[0].to_dict()
    assert d["name"] == "pompe_quadrature" and d["pass"] is True


# -- closed-form curls -----------------------------------------------------


def test_curl_of_spherical_linear():
    g = Grid.box(3, 4)
    u = ScalarField(g, g.coords[..., 0])
    assert np.allclose(curl_of_spherical(u).values, [[0, 0, 0], [0, 0, 1], [0, -1, 0]])
    assert np.allclose(curl_of_spherical(ScalarField(g, np.full(g.shape, 2.0))).values, 0)


def test_curl_of_skew_linear():
    g = Grid.box(3, 4)
    vals = np.zeros(g.shape + (3,))
    vals[..., 2] = g.coords[..., 0]
    assert np.allclose(curl_of_skew(VectorField(g, vals)).values, [[0, 0, -1], [0, 0, 0], [0, 0, 0]])
    assert np.allclose(curl_of_skew(VectorField(g, np.ones(g.shape + (3,)))).values, 0)


def test_closed_forms_match_stencil_on_quadratics(rng):
    g = Grid.box(3, 6)
    x = g.coords
    Q = rng.standard_normal((3, 3))
    u = ScalarField(g, np.einsum("...i,ij,...j->...", x, Q, x) + x[..., 1])
    assert np.allclose(curl_tensor(spherical_field(u)).values, curl_of_spherical(u).values, atol=1e-12)
    a = VectorField(g, np.einsum("ij,...j->...i", Q + Q.T, x))  # gradient of a quadratic
    assert np.allclose(curl_tensor(skew_field(a)).values, curl_of_skew(a).values, atol=1e-12)
    # the spherical curl is pointwise skew
    assert np.abs(alg.sym(curl_of_spherical(u).values)).max() == 0.0


def test_curl_formulas_need_3d():
    g = Grid.box(2, 4)
    with pytest.raises(UnsupportedDimensionError):
        curl_of_spherical(ScalarField.zeros(g))


# -- witnesses -------------------------------------------------------------


def test_witness_devsym_symcurl():
    g = Grid.box(3, 16)
    rep = witness_no_devsym_devsymcurl(bump(g))
    v = rep.values
    assert rep.passed and v["unbounded"]
    assert v["devsym_norm"] <= 1e-12 and v["symcurl_norm"] <= 1e-12
    assert np.isclose(v["T_norm"], np.sqrt(3) * lq_norm(bump(g)))
    assert v["T_norm"] > 0.1


def test_witness_zero_field():
    g = Grid.box(3, 8)
    v = witness_no_devsym_devsymcurl(ScalarField.zeros(g)).values
    assert v["T_norm"] == 0 and not v["unbounded"]


def test_witness_rejects_boundary_support():
    g = Grid.box(3, 8)
    with pytest.raises(ValueError, match="compactly supported"):
        witness_no_devsym_devsymcurl(ScalarField(g, np.ones(g.shape)))


def test_witness_sym_div_discrete_gradient():
    g = Grid.box(3, 16)
    rep = witness_no_sym_div(bump(g))
    assert rep.passed
    assert rep.values["sym_norm"] == 0.0
    assert rep.values["div_norm"] <= 1e-12
    assert rep.values["A_norm"] > 0.1


def test_witness_sym_div_exact_gradient_converges():
    # with the exact gradient, Div A carries the stencil error, O(h^2)
    errs = []
    for res in (17, 33):
        g = Grid.box(3, res)
        x = g.coords
        s = [np.sin(np.pi * x[..., k]) for k in range(3)]
        c = [np.cos(np.pi * x[..., k]) for k in range(3)]
        inside = np.all((x > 0.0) & (x < 1.0), axis=-1)
        u = np.where(inside, (s[0] * s[1] * s[2]) ** 4, 0.0)
        grad = np.stack(
            [4 * np.pi * (s[0] * s[1] * s[2]) ** 3 * c[k] * s[(k + 1) % 3] * s[(k + 2) % 3] for k in range(3)], -1
        )
        # zero out the two outer node layers so the support condition holds
        mask = np.zeros(g.shape, dtype=bool)
        mask[2:-2, 2:-2, 2:-2] = True
        rep = witness_no_sym_div(ScalarField(g, np.where(mask, u, 0.0)), VectorField(g, np.where(mask[..., None], grad, 0.0)))
        errs.append(rep.values["div_norm"])
    assert 3.0 <= errs[0] / errs[1] <= 5.5


# -- kernel chain ----------------------------------------------------------


def test_chain_zero_inputs():
    g = Grid.box(3, 8)
    rep = devsym_devcurl_kernel_chain(ScalarField.zeros(g), VectorField.zeros(g))
    assert rep.values["max_residual"] == 0.0


def test_chain_generic_input_detected():
    g = Grid.box(3, 12)
    x = g.coords
    u = ScalarField(g, np.sin(2 * x[..., 0]) * x[..., 1])
    a = VectorField(g, np.stack([x[..., 1] ** 2, np.cos(x[..., 2]), x[..., 0] * x[..., 2]], -1))
    rep = devsym_devcurl_kernel_chain(u, a)
    assert not rep.passed
    assert rep.values["max_residual"] > 0.1 * rep.values["field_scale"]


def test_chain_diagonal_link():
    g = Grid.box(3, 6)
    y = 0.8
    a = VectorField(g, y * g.coords / 2)
    rep = devsym_devcurl_kernel_chain(ScalarField.zeros(g), a)
    assert rep.values["diagonal"] <= 1e-12
    assert rep.values["div_relation"] <= 1e-12
