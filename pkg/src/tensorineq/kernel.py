"""Conformal Killing fields: the kernel of ``dev sym Grad`` in dimension n >= 3.

Every kernel element has the form

    v(x) = u(x) x - |x|^2 w / 2 + A x + v0,    u(x) = w . x + u0,
    Grad v(x) = u(x) Id + A(x),                A_ij(x) = w_j x_i - w_i x_j + A_ij,

with ``A`` skew, so the parameter space has dimension ``(n+1)(n+2)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import dev, sym
from .calculus import Grid, UnsupportedDimensionError, VectorField


def _require_dim(n: int) -> None:
    if n < 3:
        raise UnsupportedDimensionError(
            f"the conformal kernel is finite-dimensional only for n >= 3 (got n = {n})"
        )


def kernel_dimension(n: int) -> int:
    _require_dim(n)
    return (n + 1) * (n + 2) // 2


@dataclass(frozen=True, eq=False)
class ConformalKillingParams:
    """Parameters ``(u_bar, v_bar, w_bar, A_bar)`` of one conformal Killing field."""

    u_bar: float
    v_bar: np.ndarray
    w_bar: np.ndarray
    A_bar: np.ndarray

    def __post_init__(self):
        v = np.array(self.v_bar, dtype=float)
        w = np.array(self.w_bar, dtype=float)
        A = np.array(self.A_bar, dtype=float)
        n = v.shape[0]
        _require_dim(n)
        if v.shape != (n,) or w.shape != (n,) or A.shape != (n, n):
            raise ValueError("v_bar, w_bar must be n-vectors and A_bar an n x n matrix")
        if np.any(A + A.T != 0):
            raise ValueError("A_bar must be exactly skew-symmetric")
        object.__setattr__(self, "u_bar", float(self.u_bar))
        object.__setattr__(self, "v_bar", v)
        object.__setattr__(self, "w_bar", w)
        object.__setattr__(self, "A_bar", A)

    @property
    def n(self) -> int:
        return self.v_bar.shape[0]

    def to_vector(self) -> np.ndarray:
        """Flat parameters ``[u, v (n), w (n), A_ij for i < j]``."""
        iu = np.triu_indices(self.n, 1)
        return np.concatenate([[self.u_bar], self.v_bar, self.w_bar, self.A_bar[iu]])

    @classmethod
    def from_vector(cls, n: int, p: Sequence[float]) -> "ConformalKillingParams":
        p = np.asarray(p, dtype=float)
        if p.shape != (kernel_dimension(n),):
            raise ValueError(f"expected {kernel_dimension(n)} parameters for n = {n}, got {p.shape}")
        A = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        A[iu] = p[1 + 2 * n:]
        A = A - A.T
        return cls(p[0], p[1:1 + n], p[1 + n:1 + 2 * n], A)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "ConformalKillingParams":
        return cls.from_vector(n, rng.standard_normal(kernel_dimension(n)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))


def evaluate_kernel_field(p: ConformalKillingParams, x) -> np.ndarray:
    """``v(x)`` at one point or a stack of points ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n:
        raise ValueError(f"points must have {p.n} coordinates")
    u = x @ p.w_bar + p.u_bar
    return u[..., None] * x - 0.5 * np.sum(x * x, axis=-1)[..., None] * p.w_bar + x @ p.A_bar.T + p.v_bar


def evaluate_kernel_gradient(p: ConformalKillingParams, x) -> np.ndarray:
    """``Grad v(x) = u(x) Id + A(x)``, shape ``(..., n, n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n:
        raise ValueError(f"points must have {p.n} coordinates")
    u = x @ p.w_bar + p.u_bar
    A = np.einsum("...i,j->...ij", x, p.w_bar) - np.einsum("i,...j->...ij", p.w_bar, x) + p.A_bar
    return u[..., None, None] * np.eye(p.n) + A


def kernel_basis(n: int) -> list[ConformalKillingParams]:
    """Canonical basis: unit ``u_bar``, each ``v_bar = e_i``, each ``w_bar = e_i``, each elementary skew."""
    dim = kernel_dimension(n)
    return [ConformalKillingParams.from_vector(n, np.eye(dim)[k]) for k in range(dim)]


def sample_kernel_field(p: ConformalKillingParams, grid: Grid) -> VectorField:
    if grid.n != p.n:
        raise ValueError("grid dimension differs from parameter dimension")
    return VectorField(grid, evaluate_kernel_field(p, grid.coords))


def sample_matrix(n: int, points: np.ndarray) -> np.ndarray:
    """Columns are the basis fields sampled at ``points`` (flattened)."""
    points = np.asarray(points, dtype=float).reshape(-1, n)
    return np.column_stack([evaluate_kernel_field(b, points).ravel() for b in kernel_basis(n)])


@dataclass
class GramReport:
    n: int
    num_points: int
    rank: int
    dimension: int
    eigenvalues: np.ndarray


def basis_gram(n: int, points: np.ndarray, rtol: float = 1e-10) -> GramReport:
    """Gram matrix of the sampled basis and its numerical rank (eigenvalues above ``rtol * max``)."""
    S = sample_matrix(n, points)
    G = S.T @ S
    ev = np.linalg.eigvalsh(G)
    rank = int(np.sum(ev > rtol * ev.max()))
    return GramReport(n, S.shape[0] // n, rank, kernel_dimension(n), ev)


def max_devsym_residual(p: ConformalKillingParams, points: np.ndarray) -> float:
    """``max |dev sym Grad v|`` over the given points (zero up to rounding for kernel fields)."""
    G = evaluate_kernel_gradient(p, np.asarray(points, dtype=float).reshape(-1, p.n))
    return float(np.max(np.linalg.norm(dev(sym(G)), axis=(-2, -1))))


# --------------------------------------------------------------------------
# Rigidity under boundary conditions
# --------------------------------------------------------------------------


@dataclass
class RigidityFit:
    params: ConformalKillingParams
    rank: int
    dimension: int
    smallest_singular_value: float
    residual: float


def boundary_condition_matrix(
    n: int, points: np.ndarray, tangents: Sequence[np.ndarray], include_values: bool = True
) -> np.ndarray:
    """Linear map from parameters to the boundary data ``v(x_k)`` and ``Grad v(x_k) tau_l``."""
    points = np.asarray(points, dtype=float).reshape(-1, n)
    cols = []
    for b in kernel_basis(n):
        G = evaluate_kernel_gradient(b, points)
        rows = [evaluate_kernel_field(b, points).ravel()] if include_values else []
        rows += [(G @ np.asarray(t, dtype=float)).ravel() for t in tangents]
        cols.append(np.concatenate(rows))
    return np.column_stack(cols)


def rigidity_fit(
    n: int,
    points: np.ndarray,
    tangents: Sequence[np.ndarray],
    values: np.ndarray | None = None,
    tangential_derivatives: Sequence[np.ndarray] | None = None,
    include_values: bool = True,
) -> RigidityFit:
    """Least-squares kernel parameters matching boundary data on a face patch.

    With zero data (the default) this mirrors the step ``v in kernel and
    v = 0, Grad v tau = 0 on Gamma_tau  =>  v = 0``: when the condition matrix
    has full column rank the fitted parameters vanish.
    """
    _require_dim(n)
    points = np.asarray(points, dtype=float).reshape(-1, n)
    B = boundary_condition_matrix(n, points, tangents, include_values)
    if values is None and tangential_derivatives is None:
        rhs = np.zeros(B.shape[0])
    else:
        parts = [np.ravel(values)] if include_values else []
        parts += [np.ravel(d) for d in tangential_derivatives]
        rhs = np.concatenate(parts)
    coef, *_ = np.linalg.lstsq(B, rhs, rcond=None)
    sv = np.linalg.svd(B, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return RigidityFit(
        ConformalKillingParams.from_vector(n, coef),
        rank,
        kernel_dimension(n),
        float(sv[-1]) if len(sv) >= kernel_dimension(n) else 0.0,
        float(np.linalg.norm(B @ coef - rhs)),
    )


def face_patch(n: int, num: int, rng: np.random.Generator, axis: int = 0) -> tuple[np.ndarray, list[np.ndarray]]:
    """Random points on the unit-box face ``x_axis = 0`` and its coordinate tangents."""
    pts = rng.uniform(0.0, 1.0, size=(num, n))
    pts[:, axis] = 0.0
    tangents = [np.eye(n)[k] for k in range(n) if k != axis]
    return pts, tangents
