"""First-order Stokes system in pseudostress-velocity form, solved by least squares.

Unknowns are the (non-symmetric) pseudostress ``sigma`` and the velocity
``u``; the pressure never appears and is recovered as ``p = -tr(sigma) / 3``.
The functional is

    J(sigma, u) = |dev sigma - mu sym Grad u|^2 + |Div sigma - f|^2

with ``sigma nu = 0`` on Gamma_nu and ``u = 0`` on Gamma_tau (or prescribed
boundary data lifted into the constrained components).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import algebra as alg
from .calculus import (
    BOX,
    BoundaryPartition,
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    bc_basis,
    div_matrix,
    div_vector,
    grad_matrix,
    grad_vector,
    lq_norm,
    pointwise_matrix_field,
    weight_matrix,
)
from .spectra import ConvergenceError, EstimateOptions, smallest_eigenpair_iterative, smallest_eigenvalue_dense

log = logging.getLogger(__name__)

DENSE_LIMIT = 3000


class CoercivityFailure(RuntimeError):
    """The discrete least-squares form is not coercive on the admissible fields."""


class IncompatibleDataError(ValueError):
    """Divergence data that no admissible potential can match."""


# --------------------------------------------------------------------------
# Problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StokesProblem:
    """Viscosity, body force and boundary split on a 3D box.

    ``sigma_data`` / ``u_data`` optionally prescribe the constrained boundary
    components (``sigma nu`` on Gamma_nu, ``u`` on Gamma_tau); only those
    components are read, the rest of each field is ignored.
    """

    grid: Grid
    mu: float
    f: VectorField
    part: BoundaryPartition
    sigma_data: TensorField | None = None
    u_data: VectorField | None = None

    def __post_init__(self):
        if self.grid.kind != BOX or self.grid.n != 3:
            raise ValueError("the Stokes least-squares system is set up on 3D boxes")
        if not self.mu > 0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        for fld in (self.f, self.sigma_data, self.u_data):
            if fld is not None and fld.grid != self.grid:
                raise ValueError("field and problem grids differ")
        if self.part.grid != self.grid:
            raise ValueError("partition belongs to a different grid")

    @classmethod
    def homogeneous(
        cls, grid: Grid, mu: float = 1.0, f: VectorField | None = None, tau_faces=("x1=0",)
    ) -> "StokesProblem":
        return cls(grid, mu, f if f is not None else VectorField.zeros(grid), BoundaryPartition.from_tau(grid, tau_faces))

    # -- discrete pieces -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return self.grid.num_nodes

    @cached_property
    def basis(self) -> sp.csr_matrix:
        Es = bc_basis(self.part, 2, ("normal",))
        Eu = bc_basis(self.part, 1, ("dirichlet",))
        return sp.block_diag([Es, Eu], format="csr")

    @cached_property
    def operator(self) -> sp.csr_matrix:
        """Residual map ``(sigma, u) -> (dev sigma - mu sym Grad u, Div sigma)``."""
        g = self.grid
        top = sp.hstack(
            [pointwise_matrix_field(g, "dev"), -self.mu * pointwise_matrix_field(g, "sym") @ grad_matrix(g, 1)]
        )
        bottom = sp.hstack([div_matrix(g, 2), sp.csr_matrix((3 * self.num_nodes, 3 * self.num_nodes))])
        return sp.vstack([top, bottom], format="csr")

    @cached_property
    def weights(self) -> sp.dia_matrix:
        return sp.block_diag([weight_matrix(self.grid, 9), weight_matrix(self.grid, 3)], format="dia")

    @cached_property
    def target(self) -> np.ndarray:
        return np.concatenate([np.zeros(9 * self.num_nodes), self.f.flat()])

    @cached_property
    def lifting(self) -> np.ndarray:
        """Nodal vector carrying the prescribed constrained components (zero when homogeneous)."""
        s = self.sigma_data.flat() if self.sigma_data is not None else np.zeros(9 * self.num_nodes)
        u = self.u_data.flat() if self.u_data is not None else np.zeros(3 * self.num_nodes)
        x = np.concatenate([s, u])
        return x - self.basis @ (self.basis.T @ x)

    @cached_property
    def ls_form(self) -> sp.csr_matrix:
        L = self.operator @ self.basis
        A = (L.T @ self.weights @ L).tocsr()
        return (0.5 * (A + A.T)).tocsr()

    @cached_property
    def norm_form(self) -> sp.csr_matrix:
        """``|sigma|^2 + |Div sigma|^2 + mu^2 (|u|^2 + |Grad u|^2)`` on the admissible subspace."""
        g = self.grid
        W9, W3 = weight_matrix(g, 9), weight_matrix(g, 3)
        D, G = div_matrix(g, 2), grad_matrix(g, 1)
        Ns = W9 + D.T @ W3 @ D
        Nu = self.mu**2 * (W3 + G.T @ W9 @ G)
        N = self.basis.T @ sp.block_diag([Ns, Nu]) @ self.basis
        return (0.5 * (N + N.T)).tocsr()

    def split(self, x: np.ndarray) -> tuple[TensorField, VectorField]:
        k = 9 * self.num_nodes
        shape = self.grid.shape
        return TensorField(self.grid, x[:k].reshape(shape + (3, 3))), VectorField(self.grid, x[k:].reshape(shape + (3,)))


# --------------------------------------------------------------------------
# Functional, solver, coercivity
# --------------------------------------------------------------------------


def _stack(sigma: TensorField, u: VectorField, prob: StokesProblem) -> np.ndarray:
    if sigma.grid != prob.grid or u.grid != prob.grid:
        raise ValueError("fields do not live on the problem grid")
    return np.concatenate([sigma.flat(), u.flat()])


def ls_functional(sigma: TensorField, u: VectorField, prob: StokesProblem) -> tuple[float, np.ndarray]:
    """Value of the functional and its exact gradient with respect to the nodal vector ``[sigma, u]``.

    Boundary conditions are not enforced here; the caller passes admissible fields.
    """
    x = _stack(sigma, u, prob)
    r = prob.operator @ x - prob.target
    Wr = prob.weights @ r
    return float(r @ Wr), 2.0 * (prob.operator.T @ Wr)


def auxiliary_bounds(sigma: TensorField, u: VectorField, mu: float) -> dict[str, float]:
    """Norms entering the skew and trace bounds ``|skew sigma| <= |R|``, ``mu |div u| <= sqrt(3) |R|``."""
    R = alg.dev(sigma.values) - mu * alg.sym(grad_vector(u).values)
    g = sigma.grid
    return {
        "residual": lq_norm(TensorField(g, R)),
        "skew": lq_norm(TensorField(g, alg.skew(sigma.values))),
        "mu_div": mu * lq_norm(div_vector(u)),
    }


@dataclass
class LsSolution:
    sigma: TensorField
    u: VectorField
    pressure: ScalarField
    functional_value: float
    iterations: int
    gradient_norm: float = 0.0


def coercivity_eigenvalue(
    prob: StokesProblem, method: str = "auto", opts: EstimateOptions | None = None
) -> float:
    """Smallest eigenvalue of the least-squares form against the full graph norm."""
    K, N = prob.ls_form, prob.norm_form
    if method == "auto":
        method = "dense" if K.shape[0] <= DENSE_LIMIT else "iterative"
    if method == "dense":
        return float(smallest_eigenvalue_dense(K, N)[0])
    if method == "iterative":
        lam, *_ = smallest_eigenpair_iterative(K, N, opts or EstimateOptions(block_size=4))
        return float(lam)
    raise ValueError(f"unknown method {method!r}")


def solve_ls(
    prob: StokesProblem, tol: float = 1e-10, maxiter: int | None = None, check_coercivity: bool = True
) -> LsSolution:
    """Minimize the functional over admissible fields by CG on the normal equations.

    Stops when the functional gradient (with respect to the free
    coordinates) has shrunk to ``tol`` times its value at zero.
    """
    if check_coercivity:
        lam = coercivity_eigenvalue(prob)
        scale = prob.ls_form.diagonal().sum() / prob.norm_form.diagonal().sum()
        if lam <= 1e-10 * scale:
            raise CoercivityFailure(f"discrete coercivity failure: smallest eigenvalue {lam:.3g}")
    A = prob.ls_form
    E, L, W = prob.basis, prob.operator, prob.weights
    rhs = E.T @ (L.T @ (W @ (prob.target - L @ prob.lifting)))
    ref = float(np.linalg.norm(rhs))
    its = 0
    if ref == 0.0:
        y = np.zeros(A.shape[0])
    else:
        def count(_):
            nonlocal its
            its += 1

        precond = sp.diags(1.0 / A.diagonal())
        y, info = spla.cg(
            A, rhs, rtol=tol, atol=0.0, M=precond, maxiter=maxiter or 10 * A.shape[0], callback=count
        )
        if info != 0:
            res = np.linalg.norm(A @ y - rhs) / ref
            raise ConvergenceError(f"CG stopped after {its} iterations with relative gradient {res:.3g}")
    grad_norm = 2.0 * float(np.linalg.norm(A @ y - rhs))
    sigma, u = prob.split(prob.lifting + E @ y)
    value, _ = ls_functional(sigma, u, prob)
    p = ScalarField(prob.grid, -np.trace(sigma.values, axis1=-2, axis2=-1) / 3.0)
    return LsSolution(sigma, u, p, value, its, grad_norm)


# --------------------------------------------------------------------------
# Manufactured solution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ManufacturedSolution:
    """Polynomial exact solution: ``u = curl psi`` vanishes on ``x1 = 0``; ``p`` is quadratic."""

    mu: float
    u: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    p: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]


def _flatten(vals):
    if isinstance(vals, (list, tuple)):
        return [v for item in vals for v in _flatten(item)]
    return [vals]


def _vectorize(expr_fn, shape):
    def fn(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[:-1] + (int(np.prod(shape, dtype=int)),))
        for k, v in enumerate(_flatten(expr_fn(x[..., 0], x[..., 1], x[..., 2]))):
            out[..., k] = v  # constants broadcast
        return out.reshape(x.shape[:-1] + shape)

    return fn


def manufactured_solution(mu: float = 1.0) -> ManufacturedSolution:
    """Differentiate the polynomial potentials symbolically and compile them for numpy."""
    import sympy

    x = sympy.symbols("x1 x2 x3")
    x1, x2, x3 = x
    psi = [x1**2 * x2 * x3, x1**2 * (x2**3 + x3**2), x1**2 * (x2**2 - x3**3)]
    u = sympy.Matrix(
        [
            sympy.diff(psi[2], x2) - sympy.diff(psi[1], x3),
            sympy.diff(psi[0], x3) - sympy.diff(psi[2], x1),
            sympy.diff(psi[1], x1) - sympy.diff(psi[0], x2),
        ]
    )
    p = x1 * x2 + x3**2 - x1 / 2
    J = u.jacobian(x)
    sigma = mu * (J + J.T) / 2 - p * sympy.eye(3)
    f = sympy.Matrix([sum(sympy.diff(sigma[i, j], x[j]) for j in range(3)) for i in range(3)])
    lam = lambda e: sympy.lambdify(x, e, "numpy")
    return ManufacturedSolution(
        mu,
        _vectorize(lam(list(u)), (3,)),
        _vectorize(lam([list(r) for r in sigma.tolist()]), (3, 3)),
        _vectorize(lam(p), ()),
        _vectorize(lam(list(f)), (3,)),
    )


def manufactured_problem(resolution: int, mu: float = 1.0) -> tuple[StokesProblem, ManufacturedSolution]:
    grid = Grid.box(3, resolution)
    ms = manufactured_solution(mu)
    part = BoundaryPartition.from_tau(grid, ["x1=0"])
    prob = StokesProblem(
        grid,
        mu,
        VectorField.from_function(grid, ms.f),
        part,
        TensorField.from_function(grid, ms.sigma),
        VectorField.from_function(grid, ms.u),
    )
    return prob, ms


def manufactured_errors(sol: LsSolution, ms: ManufacturedSolution) -> dict[str, float]:
    g = sol.u.grid
    return {
        "u": lq_norm(sol.u - VectorField.from_function(g, ms.u)),
        "sigma": lq_norm(sol.sigma - TensorField.from_function(g, ms.sigma)),
        "p": lq_norm(sol.pressure - ScalarField.from_function(g, ms.p)),
    }


def stokes_report(resolution: int, mu: float = 1.0, tol: float = 1e-10) -> dict:
    """Coercivity eigenvalue plus the manufactured-solution errors on one grid."""
    prob, ms = manufactured_problem(resolution, mu)
    lam = coercivity_eigenvalue(prob)
    if lam <= 0:
        raise CoercivityFailure(f"discrete coercivity failure: smallest eigenvalue {lam:.3g}")
    sol = solve_ls(prob, tol=tol, check_coercivity=False)
    return {
        "resolution": resolution,
        "mu": mu,
        "functional_value": sol.functional_value,
        "coercivity_eig": lam,
        "iterations": sol.iterations,
        "errors": manufactured_errors(sol, ms),
    }


# --------------------------------------------------------------------------
# Divergence potential
# --------------------------------------------------------------------------


@dataclass
class PotentialResult:
    v: VectorField
    residual: float
    ratio: float
    iterations: int


def divergence_potential(
    g: ScalarField,
    part: BoundaryPartition,
    weight: float = 1e6,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> PotentialResult:
    """Smallest-H(Grad) ``v`` with ``v = 0`` on Gamma_tau and discrete ``div v = g``.

    The constraint enters as a least-squares penalty of relative size
    ``weight``; multiplier updates (augmented Lagrangian) reuse one
    factorization and drive the constraint residual to rounding level when
    ``g`` lies in the range of the discrete divergence.  Iteration stops at
    ``tol`` relative residual or when the residual stops decreasing.
    """
    grid = g.grid
    if part.grid != grid:
        raise ValueError("partition belongs to a different grid")
    w = grid.weights.ravel()
    total = float(w @ g.flat())
    gnorm = lq_norm(g)
    if not part.nu_faces and abs(total) > 1e-12 * max(gnorm, 1.0):
        raise IncompatibleDataError(
            "with Gamma_nu empty every admissible v vanishes on the whole boundary, so the integral "
            f"of div v is zero; the data has integral {total:.3g}. A potential needs Gamma_nu nonempty."
        )
    n = grid.n
    E = bc_basis(part, 1, ("dirichlet",))
    D = div_matrix(grid, 1) @ E
    G = grad_matrix(grid, 1) @ E
    Wn, Wnn, Ws = weight_matrix(grid, n), weight_matrix(grid, n * n), sp.diags(w)
    H = (E.T @ Wn @ E + G.T @ Wnn @ G).tocsr()
    C = (D.T @ Ws @ D).tocsr()
    if gnorm == 0.0:
        return PotentialResult(VectorField.zeros(grid), 0.0, 0.0, 0)
    omega = weight * H.diagonal().sum() / C.diagonal().sum()
    lu = spla.splu((H + omega * C).tocsc())
    b = g.flat()
    lam = np.zeros_like(b)
    prev = np.inf
    for it in range(1, max_iter + 1):
        y = lu.solve(D.T @ (Ws @ (omega * b - lam)))
        r = D @ y - b
        res = float(np.sqrt(r @ (w * r))) / gnorm
        # a component of g outside the discrete range makes the residual stall
        if res <= tol or res > 0.5 * prev:
            break
        prev = res
        lam = lam + omega * r
    v = VectorField(grid, (E @ y).reshape(grid.shape + (n,)))
    hnorm = float(np.sqrt(y @ (H @ y)))
    return PotentialResult(v, res, hnorm / gnorm, it)
