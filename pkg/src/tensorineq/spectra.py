"""Discrete inequality constants as generalized eigenvalue problems.

An inequality ``|lhs(T)| <= C (sum_i |seminorm_i(T)|)`` is probed through the
pencil ``(K, M)`` with ``K = sum_i B_i^T W B_i`` (the right-hand side) and
``M = L^T W L`` (the left-hand side), both restricted to the subspace of
nodal fields satisfying the boundary conditions.  The reported constant is
``lambda_min^(-1/2)``, the best constant for the squared-sum form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .calculus import (
    BOX,
    HALF_DISK,
    BoundaryPartition,
    Grid,
    TensorField,
    UnsupportedDimensionError,
    bc_basis,
    curl_matrix,
    div_matrix,
    grad_matrix,
    pointwise_matrix_field,
    weight_matrix,
)

log = logging.getLogger(__name__)

POINTWISE_OPS = ("identity", "sym", "skew", "dev", "spherical")


class InequalityFailure(RuntimeError):
    """The discrete right-hand side has a (near) kernel: no finite constant."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, last: "ConstantEstimate | None" = None):
        super().__init__(msg)
        self.last = last


# --------------------------------------------------------------------------
# Specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalitySpec:
    """Which seminorms bound which norm, under which boundary conditions.

    Pipelines are written like the math, rightmost operator first:
    ``"dev sym Grad"`` is ``dev(sym(Grad v))``.  ``bc`` lists the imposed
    conditions (``tangential``/``dirichlet`` on Gamma_tau, ``normal`` on
    Gamma_nu); ``requires`` names the boundary parts that must be nonempty.
    """

    name: str
    rhs_seminorms: tuple[str, ...]
    bc: tuple[str, ...]
    field_type: str = "tensor"
    lhs: str = "identity"
    requires: tuple[str, ...] = ()
    dims: tuple[int, ...] = (2, 3)
    holds: bool = True

    def __post_init__(self):
        if not self.rhs_seminorms:
            raise ValueError("an inequality needs at least one right-hand-side seminorm")
        if self.field_type not in ("tensor", "vector"):
            raise ValueError(f"unknown field type {self.field_type!r}")

    @property
    def rank(self) -> int:
        return 2 if self.field_type == "tensor" else 1

    def with_extra(self, *seminorms: str) -> "InequalitySpec":
        return InequalitySpec(
            f"{self.name}+{'+'.join(seminorms)}",
            self.rhs_seminorms + tuple(seminorms),
            self.bc,
            self.field_type,
            self.lhs,
            self.requires,
            self.dims,
            self.holds,
        )


SPECS: dict[str, InequalitySpec] = {
    s.name: s
    for s in [
        InequalitySpec("DevDiv", ("dev", "Div"), ("normal",), requires=("nu",)),
        InequalitySpec("SymCurl", ("sym", "Curl"), ("tangential",), requires=("tau",)),
        InequalitySpec("DevSymCurl", ("dev sym", "Curl"), ("tangential",), requires=("tau",), dims=(3,)),
        InequalitySpec("DevSymDevCurl", ("dev sym", "dev Curl"), ("tangential",), requires=("tau",), dims=(3,)),
        InequalitySpec("SymDevCurl", ("sym", "dev Curl"), ("tangential",), requires=("tau",), dims=(3,)),
        InequalitySpec("Maxwell", ("Curl", "Div"), ("tangential", "normal"), requires=("tau",)),
        InequalitySpec(
            "DevSymGrad", ("dev sym Grad",), ("dirichlet",), field_type="vector", lhs="Grad", requires=("tau",)
        ),
        # false inequalities, kept to exercise kernel detection
        InequalitySpec("SymDiv", ("sym", "Div"), ("normal",), requires=("nu",), dims=(3,), holds=False),
        InequalitySpec(
            "DevSymDevSymCurl", ("dev sym", "dev sym Curl"), ("tangential",), requires=("tau",), dims=(3,), holds=False
        ),
        InequalitySpec(
            "DevSymSymCurl", ("dev sym", "sym Curl"), ("tangential",), requires=("tau",), dims=(3,), holds=False
        ),
        InequalitySpec("Identity", ("identity",), ()),
    ]
}


def get_spec(name: str) -> InequalitySpec:
    try:
        return SPECS[name]
    except KeyError:
        raise KeyError(f"unknown inequality spec {name!r}; known: {sorted(SPECS)}") from None


def default_partition(spec: InequalitySpec, grid: Grid) -> BoundaryPartition:
    """One special face carries the spec's boundary condition.

    Box: the face ``x1=0`` is Gamma_nu for Div-type specs and Gamma_tau
    otherwise.  Half disk: Gamma_tau is the diameter.
    """
    if grid.kind == HALF_DISK:
        return BoundaryPartition.from_tau(grid, ["diameter"])
    if "normal" in spec.bc and "tangential" not in spec.bc:
        return BoundaryPartition.from_nu(grid, ["x1=0"])
    return BoundaryPartition.from_tau(grid, ["x1=0"])


# --------------------------------------------------------------------------
# Pipelines -> sparse operators
# --------------------------------------------------------------------------


def pipeline_matrix(grid: Grid, pipeline: str, rank: int) -> tuple[sp.csr_matrix, int]:
    """Sparse matrix of an operator pipeline and the component count of its output."""
    n = grid.n
    ncomp = n**rank
    op = sp.identity(grid.num_nodes * ncomp, format="csr")
    kind = rank  # 0, 1, 2 or "rowcurl"
    for word in reversed(pipeline.split()):
        if word in POINTWISE_OPS:
            if kind != 2:
                raise ValueError(f"{word!r} needs a square-matrix field in pipeline {pipeline!r}")
            if word != "identity":
                op = pointwise_matrix_field(grid, word) @ op
        elif word == "Grad":
            if kind not in (0, 1):
                raise ValueError(f"Grad needs a scalar or vector field in pipeline {pipeline!r}")
            op = grad_matrix(grid, kind) @ op
            kind += 1
        elif word == "Div":
            if kind not in (1, 2):
                raise ValueError(f"Div needs a vector or tensor field in pipeline {pipeline!r}")
            op = div_matrix(grid, kind) @ op
            kind -= 1
        elif word == "Curl":
            if kind != 2:
                raise ValueError(f"Curl needs a tensor field in pipeline {pipeline!r}")
            op = curl_matrix(grid) @ op
            kind = 2 if n == 3 else "rowcurl"
        else:
            raise ValueError(f"unknown operator {word!r} in pipeline {pipeline!r}")
    ncomp = 2 if kind == "rowcurl" else n**kind
    return op.tocsr(), ncomp


def _quadratic_form(grid: Grid, pipeline: str, rank: int) -> sp.csr_matrix:
    B, ncomp = pipeline_matrix(grid, pipeline, rank)
    return (B.T @ weight_matrix(grid, ncomp) @ B).tocsr()


@dataclass
class Forms:
    """Quadratic forms on the boundary-condition subspace plus the basis that embeds it."""

    rhs: sp.csr_matrix
    mass: sp.csr_matrix
    basis: sp.csr_matrix
    scale: float

    def rayleigh(self, x: np.ndarray) -> float:
        return float(x @ (self.rhs @ x)) / float(x @ (self.mass @ x))

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        """Coordinates of a nodal vector in the BC basis (orthogonal projection)."""
        return self.basis.T @ np.ravel(nodal)


def check_compatible(spec: InequalitySpec, grid: Grid, part: BoundaryPartition) -> None:
    if grid.n not in spec.dims:
        raise UnsupportedDimensionError(f"{spec.name} is defined for n in {spec.dims}, got {grid.n}")
    if part.grid != grid:
        raise ValueError("partition belongs to a different grid")
    if "nu" in spec.requires and not part.nu_faces:
        raise ValueError(f"{spec.name} requires a nonempty Gamma_nu")
    if "tau" in spec.requires and not part.tau_faces:
        raise ValueError(f"{spec.name} requires a nonempty Gamma_tau")


def assemble_forms(spec: InequalitySpec, grid: Grid, part: BoundaryPartition | None = None) -> Forms:
    """Right-hand-side and left-hand-side (``mass``) forms on BC-projected fields."""
    part = part or default_partition(spec, grid)
    check_compatible(spec, grid, part)
    E = bc_basis(part, spec.rank, spec.bc)
    K = sum(_quadratic_form(grid, p, spec.rank) for p in spec.rhs_seminorms)
    M = _quadratic_form(grid, spec.lhs, spec.rank)
    K = (E.T @ K @ E).tocsr()
    M = (E.T @ M @ E).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    scale = float(K.diagonal().sum() / M.diagonal().sum())
    return Forms(K.tocsr(), M.tocsr(), E, scale)


# --------------------------------------------------------------------------
# Estimation
# --------------------------------------------------------------------------


@dataclass
class EstimateOptions:
    tol: float = 1e-8
    kernel_tol: float = 1e-8
    max_iter: int = 500
    block_size: int = 6
    inner: str = "cg"
    inner_tol: float = 1e-10
    shift: float = 1e-6
    seed: int = 0


@dataclass
class ConstantEstimate:
    spec: str
    resolution: tuple[int, ...]
    lambda_min: float
    constant: float
    residual: float
    iterations: int
    verdict: str
    method: str = "iterative"
    refinement_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resolution"] = list(self.resolution)
        d["refinement_history"] = [list(map(_jsonable, h)) for h in self.refinement_history]
        return {k: _jsonable(v) for k, v in d.items()}


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, tuple):
        return list(v)
    return v


def _make_solver(A: sp.csr_matrix, how: str):
    if how == "direct":
        lu = spla.splu(A.tocsc())
        return lambda b, x0=None, rtol=None: lu.solve(b)

    def solve(b, x0=None, rtol=1e-10):
        x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=20 * A.shape[0])
        if info != 0:
            raise ConvergenceError(f"inner CG did not converge (info={info})")
        return x

    return solve


def smallest_eigenpair_iterative(
    K: sp.spmatrix, M: sp.spmatrix, opts: EstimateOptions, scale: float | None = None
) -> tuple[float, np.ndarray, float, int]:
    """Block shifted inverse iteration with Rayleigh-Ritz for the smallest eigenpair of ``(K, M)``.

    Each sweep solves ``(K + s M) Y = M X`` column by column with warm-started
    conjugate gradients (or a sparse LU for ``inner="direct"``), then rotates
    ``span(X, Y)`` onto Ritz vectors of the pencil.  The inner tolerance
    tracks the outer residual and tightens to ``opts.inner_tol`` near
    convergence; the Ritz step uses the exact forms, so loose early solves
    only cost sweeps, not accuracy.

    Returns ``(lambda, x, residual, iterations)`` with ``x^T M x = 1`` and
    residual ``|K x - lambda M x| / |M x|``.
    """
    ndof = K.shape[0]
    scale = scale if scale is not None else float(K.diagonal().sum() / M.diagonal().sum())
    s = opts.shift * scale
    solve = _make_solver((K + s * M).tocsr(), opts.inner)
    rng = np.random.default_rng(opts.seed)
    b = max(1, min(opts.block_size, ndof))
    X = rng.standard_normal((ndof, b))
    theta = None
    rtol = 1e-2
    lam, res = np.inf, np.inf
    for it in range(1, opts.max_iter + 1):
        MX = M @ X
        cols = []
        for j in range(b):
            x0 = None if theta is None else X[:, j] / (theta[j] + s)
            cols.append(solve(MX[:, j], x0, rtol))
        Y = np.column_stack(cols)
        basis = np.hstack([X, Y]) if theta is not None and 2 * b <= ndof else Y
        Q, _ = np.linalg.qr(basis)
        Kr = Q.T @ (K @ Q)
        Mr = Q.T @ (M @ Q)
        vals, V = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        theta = vals[:b]
        X = Q @ V[:, :b]
        x = X[:, 0]
        lam = float(theta[0])
        Mx = M @ x
        res = float(np.linalg.norm(K @ x - lam * Mx) / np.linalg.norm(Mx))
        if res <= opts.tol * max(1.0, abs(lam)) or lam < opts.kernel_tol * scale:
            return lam, x, res, it
        rtol = float(np.clip(0.1 * res / max(abs(lam), opts.tol), opts.inner_tol, 1e-2))
    raise ConvergenceError(f"no convergence in {opts.max_iter} sweeps (lambda={lam:.6g}, residual={res:.3g})")


def smallest_eigenvalue_dense(K: sp.spmatrix, M: sp.spmatrix, count: int = 1) -> np.ndarray:
    """Dense generalized eigendecomposition (the oracle for small grids)."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M)
    return sla.eigh(Kd, Md, eigvals_only=True, subset_by_index=[0, count - 1])


def _verdict(lam: float, forms: Forms, opts: EstimateOptions) -> str:
    return "fails" if lam < opts.kernel_tol * forms.scale else "finite"


def estimate_constant(
    spec: InequalitySpec | str,
    grid: Grid,
    part: BoundaryPartition | None = None,
    opts: EstimateOptions | None = None,
    method: str = "iterative",
) -> ConstantEstimate:
    """Best discrete constant ``lambda_min^(-1/2)`` of an inequality on one grid.

    ``verdict`` is ``"fails"`` when ``lambda_min`` falls below
    ``kernel_tol`` times the form scale (the discrete right-hand side has a
    kernel on the admissible fields), ``"finite"`` otherwise.
    """
    spec = get_spec(spec) if isinstance(spec, str) else spec
    opts = opts or EstimateOptions()
    forms = assemble_forms(spec, grid, part)
    if method == "dense":
        lam = float(smallest_eigenvalue_dense(forms.rhs, forms.mass)[0])
        res, its = 0.0, 0
    elif method == "iterative":
        lam, _, res, its = smallest_eigenpair_iterative(forms.rhs, forms.mass, opts, forms.scale)
    else:
        raise ValueError(f"unknown method {method!r}")
    verdict = _verdict(lam, forms, opts)
    const = float(lam ** -0.5) if verdict == "finite" else float("inf")
    return ConstantEstimate(spec.name, grid.resolution, lam, const, res, its, verdict, method)


@dataclass
class RefinementReport:
    spec: str
    estimates: list[ConstantEstimate]
    verdict: str
    drift: list[float]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "verdict": self.verdict,
            "drift": [_jsonable(d) for d in self.drift],
            "estimates": [e.to_dict() for e in self.estimates],
        }


def make_grid(domain: str, n: int, resolution: int) -> Grid:
    if domain in ("box", BOX):
        return Grid.box(n, resolution)
    if domain in ("half-disk", HALF_DISK):
        if n != 2:
            raise UnsupportedDimensionError("the half disk is two-dimensional")
        return Grid.half_disk(resolution)
    raise ValueError(f"unknown domain {domain!r}")


def refinement_study(
    spec: InequalitySpec | str,
    resolutions: Sequence[int],
    domain: str = "box",
    n: int = 3,
    opts: EstimateOptions | None = None,
    method: str = "iterative",
    stable_drift: float = 0.10,
) -> RefinementReport:
    """Estimate the constant on successively refined grids.

    ``"stable"`` when every successive relative change of the constant is
    below ``stable_drift``; ``"diverging"`` otherwise, including when some
    level reports a discrete kernel.
    """
    if len(resolutions) < 2:
        raise ValueError("a refinement study needs at least two resolutions")
    spec = get_spec(spec) if isinstance(spec, str) else spec
    estimates = []
    for res in resolutions:
        est = estimate_constant(spec, make_grid(domain, n, res), opts=opts, method=method)
        log.info("%s at %s: lambda_min=%.6g constant=%.6g", spec.name, res, est.lambda_min, est.constant)
        estimates.append(est)
    history = [(e.resolution[0], e.constant) for e in estimates]
    for e in estimates:
        e.refinement_history = history
    consts = np.array([e.constant for e in estimates])
    if np.all(np.isfinite(consts)):
        drift = list(np.abs(np.diff(consts)) / consts[:-1])
    else:
        drift = [float("inf")] * (len(consts) - 1)
    verdict = "stable" if max(drift) < stable_drift else "diverging"
    return RefinementReport(spec.name, estimates, verdict, [float(d) for d in drift])


# --------------------------------------------------------------------------
# Helmholtz decomposition
# --------------------------------------------------------------------------


@dataclass
class HelmholtzResult:
    gradient_part: TensorField
    curl_part: TensorField
    harmonic_residual: float
    potential: np.ndarray


def _weighted_projection(A: sp.spmatrix, W: sp.spmatrix, y: np.ndarray, tol: float) -> np.ndarray:
    """Coefficients ``c`` minimising ``|W^(1/2) (A c - y)|`` (minimum-norm, via LSQR)."""
    sw = sp.diags(np.sqrt(W.diagonal()))
    sol = spla.lsqr(sw @ A, sw @ y, atol=tol, btol=tol, iter_lim=50 * A.shape[1])
    return sol[0]


def helmholtz_decompose(T: TensorField, part: BoundaryPartition, tol: float = 1e-14) -> HelmholtzResult:
    """Split ``T = R + S + H`` with ``R`` a discrete gradient and ``S`` orthogonal to all gradients.

    ``R = Grad v`` for the row-wise least-squares potential ``v`` vanishing on
    Gamma_tau, i.e. the weighted-L2 projection onto discrete gradients.  ``S``
    is the projection of ``T`` onto ``Curl`` of fields with tangential
    conditions on Gamma_nu, taken in the complement of the gradients, so
    ``(R, S) = 0`` up to solver tolerance and ``S`` is weakly divergence-free
    with the normal condition on Gamma_nu.  The remainder ``H`` is reported as
    ``|H| / |T|``.
    """
    grid = T.grid
    if grid.kind != BOX or grid.n != 3:
        raise ValueError("helmholtz_decompose needs a 3D box grid")
    if part.grid != grid:
        raise ValueError("partition belongs to a different grid")
    W = weight_matrix(grid, 9)
    t = T.flat()
    # gradient part: normal equations, v = 0 on Gamma_tau
    E_v = bc_basis(part, 1, ["dirichlet"]) if part.tau_faces else sp.identity(grid.num_nodes * 3, format="csr")
    G = grad_matrix(grid, 1) @ E_v
    A = (G.T @ W @ G).tocsc()
    if not part.tau_faces:
        A = A + 1e-12 * sp.identity(A.shape[0], format="csc")
    c = spla.splu(A).solve(G.T @ (W @ t))
    r = G @ c
    # curl part: projection onto span(gradients, curls) minus the gradient part
    nu_part = BoundaryPartition(grid, part.nu_faces, part.tau_faces)
    E_s = bc_basis(nu_part, 2, ["tangential"]) if part.nu_faces else sp.identity(grid.num_nodes * 9, format="csr")
    C = curl_matrix(grid) @ E_s
    both = sp.hstack([G, C]).tocsr()
    coef = _weighted_projection(both, W, t, tol)
    s = both @ coef - r
    h = t - r - s
    tnorm = np.sqrt(t @ (W @ t))
    res = float(np.sqrt(h @ (W @ h)) / tnorm) if tnorm > 0 else 0.0
    shape = T.values.shape
    return HelmholtzResult(
        TensorField(grid, r.reshape(shape)),
        TensorField(grid, s.reshape(shape)),
        res,
        (E_v @ c).reshape(grid.shape + (3,)),
    )
