"""Self-checks of the discrete calculus: exact identities and convergence orders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg
from .calculus import (
    BOX,
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    curl_tensor,
    curl_vector,
    div_tensor,
    div_vector,
    grad_scalar,
    grad_vector,
    lq_norm,
    observed_order,
)
from .counterexamples import curl_of_skew, curl_of_spherical, skew_field, spherical_field

IDENTITY_TOL = 1e-12


@dataclass
class Check:
    name: str
    residual: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "pass": self.passed}


def random_quadratic(grid: Grid, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Nodal values of a random polynomial of total degree <= 2 for each component."""
    n = grid.n
    m = int(np.prod(shape, dtype=int))
    x = grid.coords.reshape(-1, n)
    c0 = rng.standard_normal(m)
    c1 = rng.standard_normal((m, n))
    c2 = rng.standard_normal((m, n, n))
    vals = c0 + x @ c1.T + np.einsum("gk,gl,pkl->gp", x, x, c2)
    return vals.reshape(grid.shape + shape)


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


def identity_checks(grid: Grid, seed: int = 0) -> list[Check]:
    """Operator identities on random quadratic fields, where the stencil is exact.

    Residuals are max-node absolute values, compared with ``IDENTITY_TOL``
    times the field scale.
    """
    if grid.kind != BOX:
        raise ValueError("the polynomial identity suite needs a Cartesian box grid")
    rng = np.random.default_rng(seed)
    n = grid.n
    u = ScalarField(grid, random_quadratic(grid, (), rng))
    v = VectorField(grid, random_quadratic(grid, (n,), rng))
    T = TensorField(grid, random_quadratic(grid, (n, n), rng))
    scale = max(_max_abs(u.values), _max_abs(v.values), _max_abs(T.values), 1.0)
    out: dict[str, float] = {}
    curl_grad = curl_tensor(grad_vector(v))
    out["curl_grad_vector"] = _max_abs(curl_grad.values)
    if n == 3:
        out["div_curl_tensor"] = _max_abs(div_tensor(curl_tensor(T)).values)
        out["curl_grad_scalar"] = _max_abs(curl_vector(grad_scalar(u)).values)
        out["div_curl_vector"] = _max_abs(div_vector(curl_vector(v)).values)
        out["curl_spherical_closed_form"] = _max_abs(
            curl_tensor(spherical_field(u)).values - curl_of_spherical(u).values
        )
        out["curl_skew_closed_form"] = _max_abs(curl_tensor(skew_field(v)).values - curl_of_skew(v).values)
    out["div_trace_of_grad"] = _max_abs(div_vector(v).values - alg.trace(grad_vector(v).values))
    parts = alg.cartan_decompose(T.values)
    out["cartan_sum"] = _max_abs(sum(parts) - T.values)
    out["cartan_orthogonality"] = max(
        _max_abs(alg.frobenius_inner(parts[i], parts[j])) for i, j in ((0, 1), (0, 2), (1, 2))
    )
    s, k = alg.decompose_sym_skew(T.values)
    out["sym_skew_sum"] = _max_abs(s + k - T.values)
    out["dev_trace_free"] = _max_abs(alg.trace(alg.dev(T.values)))
    tol = IDENTITY_TOL * scale
    return [Check(name, res, res <= tol) for name, res in out.items()]


def analytic_errors(grid: Grid) -> dict[str, float]:
    """L2 errors of Grad and Div on a smooth (non-polynomial) field against exact derivatives."""
    x = grid.coords
    n = grid.n
    k = np.arange(1, n + 1, dtype=float)
    phase = x @ k
    v = np.stack([np.sin(phase + j) for j in range(n)], axis=-1)
    J = np.stack([np.cos(phase + j)[..., None] * k for j in range(n)], axis=-2)
    grad_err = lq_norm(grad_vector(VectorField(grid, v)) - TensorField(grid, J))
    div_err = lq_norm(div_vector(VectorField(grid, v)) - ScalarField(grid, np.trace(J, axis1=-2, axis2=-1)))
    return {"grad": grad_err, "div": div_err}


def convergence_orders(n: int, resolutions=(16, 32), domain: str = BOX) -> dict[str, float]:
    """Observed orders of Grad and Div between successive resolutions (minimum over levels)."""
    grids = [Grid.box(n, r) if domain == BOX else Grid.half_disk(r) for r in resolutions]
    errs = [analytic_errors(g) for g in grids]
    h = [max(g.spacing) for g in grids]
    return {key: float(np.min(observed_order([e[key] for e in errs], h))) for key in errs[0]}
