"""Kernels and counterexamples for the tensor inequalities.

* The half-disk sequence ``u_n(x, y) = x z^n`` (``z = x + iy``) vanishes on
  the diameter, has ``|Grad u_n|^2 -> inf`` while ``|dev_2 sym Grad u_n|^2 -> 0``,
  so no 2D DevSymGrad estimate holds with a partial boundary condition.
  Seen as a 3D object its 3D deviator does blow up.
* ``T = u Id`` kills both ``dev sym`` and ``sym Curl``; ``A = skew(grad u)``
  kills both ``sym`` and ``Div``.
* The identity chain characterising the kernel of (dev sym, dev Curl).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import algebra as alg
from .calculus import (
    Grid,
    ScalarField,
    TensorField,
    UnsupportedDimensionError,
    VectorField,
    curl_tensor,
    div_tensor,
    div_vector,
    grad_scalar,
    grad_vector,
    laplace_vector,
    lq_norm,
)


@dataclass
class Report:
    """Named bag of numeric results with a pass flag; serializes to a JSON record."""

    name: str
    values: dict[str, Any]
    passed: bool
    n: int | None = None
    resolution: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"name": self.name, "n": self.n, "resolution": self.resolution, "pass": bool(self.passed)}
        out.update({k: _clean(v) for k, v in self.values.items()})
        out.update({k: _clean(v) for k, v in self.extra.items()})
        return out


def _clean(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return "inf" if v > 0 else "nan"
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


# --------------------------------------------------------------------------
# Half-disk sequence
# --------------------------------------------------------------------------


def pompe_field(n: int, point) -> np.ndarray:
    """``(Re, Im)`` of ``x (x + iy)^n`` at points ``(..., 2)`` of the closed half disk."""
    if n < 1:
        raise ValueError("sequence index must be >= 1")
    p = np.asarray(point, dtype=float)
    x, y = p[..., 0], p[..., 1]
    if np.any(x < -1e-12) or np.any(x * x + y * y > 1 + 1e-12):
        raise ValueError("point outside the closed half disk {|z| <= 1, x >= 0}")
    w = x * (x + 1j * y) ** n
    return np.stack([w.real, w.imag], axis=-1)


def pompe_gradient(n: int, r, t) -> np.ndarray:
    """Closed-form ``Grad u_n`` in polar coordinates, shape ``(..., 2, 2)``.

    ``r^n [[cos nt, 0], [sin nt, 0]] + n r^n cos t R(nt - t)`` with ``R`` the
    rotation matrix.
    """
    if n < 1:
        raise ValueError("sequence index must be >= 1")
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0) or np.any(r > 1 + 1e-12) or np.any(np.abs(t) > np.pi / 2 + 1e-12):
        raise ValueError("polar point outside r in [0, 1], t in [-pi/2, pi/2]")
    rn = r**n
    c, s = np.cos(n * t), np.sin(n * t)
    cm, sm = np.cos(n * t - t), np.sin(n * t - t)
    k = n * rn * np.cos(t)
    G = np.empty(np.broadcast(r, t).shape + (2, 2))
    G[..., 0, 0] = rn * c + k * cm
    G[..., 0, 1] = -k * sm
    G[..., 1, 0] = rn * s + k * sm
    G[..., 1, 1] = k * cm
    return G


def pompe_gradient_field(n: int, grid: Grid) -> TensorField:
    r, t = grid.polar
    return TensorField(grid, pompe_gradient(n, r, t))


def embed_3d(G2: np.ndarray) -> np.ndarray:
    """Pad plane 2x2 tensors with zeros to 3x3."""
    G3 = np.zeros(G2.shape[:-2] + (3, 3))
    G3[..., :2, :2] = G2
    return G3


@dataclass(frozen=True)
class PompeSequenceItem:
    index: int
    grad_norm_sq: float
    dev2_norm_sq: float
    dev3_lower_bound: float | None


def pompe_closed_forms(n: int) -> PompeSequenceItem:
    if n < 1:
        raise ValueError("sequence index must be >= 1")
    grad = np.pi * (n * n + n + 1) / (2 * n + 2)
    dev2 = np.pi / (4 * n + 4)
    dev3 = np.pi * n * n / (12 * (n + 1)) if n > 2 else None
    return PompeSequenceItem(n, grad, dev2, dev3)


def pompe_quadrature_check(n: int, resolution: int) -> Report:
    """Polar trapezoidal quadrature of the three squared norms on the half disk."""
    if resolution < 50:
        raise ValueError("resolution must be >= 50")
    grid = Grid.half_disk(resolution)
    r, t = grid.polar
    G = pompe_gradient(n, r, t)
    w = grid.weights
    grad_sq = float(np.sum(w * np.sum(G**2, axis=(-2, -1))))
    dev2_sq = float(np.sum(w * np.sum(alg.dev(alg.sym(G)) ** 2, axis=(-2, -1))))
    dev3_sq = float(np.sum(w * np.sum(alg.dev(alg.sym(embed_3d(G))) ** 2, axis=(-2, -1))))
    cf = pompe_closed_forms(n)
    rel_grad = abs(grad_sq - cf.grad_norm_sq) / cf.grad_norm_sq
    rel_dev2 = abs(dev2_sq - cf.dev2_norm_sq) / cf.dev2_norm_sq
    ok = rel_grad <= 1e-3 and rel_dev2 <= 1e-3
    if cf.dev3_lower_bound is not None:
        ok = ok and dev3_sq >= cf.dev3_lower_bound
    return Report(
        "pompe_quadrature",
        {
            "grad_norm_sq_num": grad_sq,
            "dev2_norm_sq_num": dev2_sq,
            "dev3_norm_sq_num": dev3_sq,
            "grad_norm_sq": cf.grad_norm_sq,
            "dev2_norm_sq": cf.dev2_norm_sq,
            "dev3_lower_bound": cf.dev3_lower_bound,
            "rel_err_grad": rel_grad,
            "rel_err_dev2": rel_dev2,
            "ratio_num": grad_sq / dev2_sq,
            "ratio_closed_form": 2.0 * (n * n + n + 1),
        },
        ok,
        n=n,
        resolution=resolution,
    )


def pompe_table(max_n: int = 8, resolution: int = 400) -> list[Report]:
    return [pompe_quadrature_check(k, resolution) for k in range(1, max_n + 1)]


# --------------------------------------------------------------------------
# Closed-form curls (n = 3)
# --------------------------------------------------------------------------


def _require_3d(grid: Grid) -> None:
    if grid.n != 3:
        raise UnsupportedDimensionError("this construction lives in three dimensions")


def spherical_field(u: ScalarField) -> TensorField:
    return TensorField(u.grid, u.values[..., None, None] * np.eye(u.grid.n))


def skew_field(a: VectorField) -> TensorField:
    _require_3d(a.grid)
    return TensorField(a.grid, alg.skew_from_axial(a.values))


def curl_of_spherical(u: ScalarField) -> TensorField:
    """``Curl(u Id) = [[0, d3u, -d2u], [-d3u, 0, d1u], [d2u, -d1u, 0]]`` (pointwise skew)."""
    _require_3d(u.grid)
    return TensorField(u.grid, -alg.skew_from_axial(grad_scalar(u).values))


def curl_of_skew(a: VectorField) -> TensorField:
    """``Curl skew(a) = (div a) Id - (Grad a)^T``, assembled from the Jacobian of ``a``."""
    _require_3d(a.grid)
    J = grad_vector(a).values
    div = np.trace(J, axis1=-2, axis2=-1)
    return TensorField(a.grid, div[..., None, None] * np.eye(3) - np.swapaxes(J, -1, -2))


# --------------------------------------------------------------------------
# Witnesses against false inequalities
# --------------------------------------------------------------------------


def _require_compact(u: ScalarField, layers: int = 2) -> None:
    v = u.values
    for axis in range(v.ndim):
        lo = np.take(v, range(layers), axis=axis)
        hi = np.take(v, range(v.shape[axis] - layers, v.shape[axis]), axis=axis)
        if np.any(lo != 0) or np.any(hi != 0):
            raise ValueError(f"field is not compactly supported: nonzero within {layers} nodes of the boundary")


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if num == 0:
        return 0.0, False
    if den <= 1e-12 * num:
        return float("inf"), True
    return num / den, False


def witness_no_devsym_devsymcurl(u: ScalarField) -> Report:
    """``T = u Id``: a nonzero field with ``dev sym T = 0`` and ``sym Curl T = 0``."""
    _require_3d(u.grid)
    _require_compact(u)
    T = spherical_field(u)
    dev_sym = lq_norm(TensorField(u.grid, alg.dev(alg.sym(T.values))))
    sym_curl = lq_norm(TensorField(u.grid, alg.sym(curl_of_spherical(u).values)))
    t_norm = lq_norm(T)
    ratio, unbounded = _ratio(t_norm, dev_sym + sym_curl)
    return Report(
        "witness_no_devsym_devsymcurl",
        {"devsym_norm": dev_sym, "symcurl_norm": sym_curl, "T_norm": t_norm, "ratio": ratio, "unbounded": unbounded},
        passed=dev_sym <= 1e-12 * max(t_norm, 1.0) and sym_curl <= 1e-12 * max(t_norm, 1.0),
        n=3,
        resolution=u.grid.resolution[0],
    )


def witness_no_sym_div(u: ScalarField, gradient: VectorField | None = None) -> Report:
    """``A = skew(a)`` with ``a = grad u``: ``sym A = 0`` and ``Div A = -curl a = 0``.

    ``a`` is the discrete gradient of ``u`` unless an exact ``gradient`` is
    supplied; in the latter case ``Div A`` carries the O(h^2) stencil error.
    """
    _require_3d(u.grid)
    _require_compact(u)
    a = grad_scalar(u) if gradient is None else gradient
    A = skew_field(a)
    sym_norm = lq_norm(TensorField(u.grid, alg.sym(A.values)))
    div_norm = lq_norm(div_tensor(A))
    a_norm = lq_norm(A)
    ratio, unbounded = _ratio(a_norm, sym_norm + div_norm)
    tol = 1e-12 * max(a_norm, 1.0)
    return Report(
        "witness_no_sym_div",
        {"sym_norm": sym_norm, "div_norm": div_norm, "A_norm": a_norm, "ratio": ratio, "unbounded": unbounded},
        passed=sym_norm <= tol and (gradient is not None or div_norm <= tol),
        n=3,
        resolution=u.grid.resolution[0],
    )


# --------------------------------------------------------------------------
# Kernel chain for (dev sym, dev Curl)
# --------------------------------------------------------------------------


def devsym_devcurl_kernel_chain(u: ScalarField, a: VectorField) -> Report:
    """Residuals of each link of the chain for ``T = u Id + skew(a)``.

    With ``y = tr(Curl T) / 3`` the links are: the kernel condition
    ``dev Curl T = 0``; the symmetric off-diagonal sums ``d_i a_j + d_j a_i``;
    the diagonal ``d_i a_i = y/2`` (and ``2 div a = 3 y``); the gradient
    relation ``grad u = (d2 a3, d3 a1, d1 a2)``; and ``Laplace a = -grad y / 2``.
    Norms are discrete L2 norms on the grid.
    """
    _require_3d(u.grid)
    g = u.grid
    T = TensorField(g, spherical_field(u).values + skew_field(a).values)
    curl_T = curl_tensor(T)
    y = ScalarField(g, np.trace(curl_T.values, axis1=-2, axis2=-1) / 3.0)
    J = grad_vector(a).values  # J[..., i, j] = d_j a_i
    anti = np.stack([J[..., 1, 0] + J[..., 0, 1], J[..., 2, 1] + J[..., 1, 2], J[..., 0, 2] + J[..., 2, 0]], -1)
    diag = np.stack([J[..., i, i] - 0.5 * y.values for i in range(3)], -1)
    div_a = div_vector(a).values
    grad_u = grad_scalar(u).values
    gp = grad_u - np.stack([J[..., 2, 1], J[..., 0, 2], J[..., 1, 0]], -1)
    lap = laplace_vector(a).values + 0.5 * grad_scalar(y).values

    def norm(arr):
        return lq_norm(VectorField(g, arr)) if arr.shape[-1:] == (3,) and arr.ndim == g.n + 1 else lq_norm(ScalarField(g, arr))

    residuals = {
        "dev_curl": lq_norm(TensorField(g, alg.dev(curl_T.values))),
        "anticommutator": norm(anti),
        "diagonal": norm(diag),
        "div_relation": norm(2.0 * div_a - 3.0 * y.values),
        "gradient_relation": norm(gp),
        "laplace": norm(lap),
    }
    scale = max(lq_norm(VectorField(g, grad_u)), lq_norm(TensorField(g, J)), 1e-300)
    return Report(
        "devsym_devcurl_kernel_chain",
        {**residuals, "field_scale": scale, "max_residual": max(residuals.values())},
        passed=max(residuals.values()) <= 1e-10 * max(scale, 1.0),
        n=3,
        resolution=g.resolution[0],
    )


def bump(grid: Grid, power: int = 2, margin: int = 2) -> ScalarField:
    """Smooth bump ``prod sin^power`` supported strictly inside ``margin`` node layers."""
    x = grid.coords
    vals = np.ones(grid.shape)
    for k in range(grid.n):
        lo = grid.axes[k][margin]
        hi = grid.axes[k][-1 - margin]
        s = np.clip((x[..., k] - lo) / (hi - lo), 0.0, 1.0)
        vals = vals * np.sin(np.pi * s) ** power
    interior = np.ones(grid.shape, dtype=bool)
    for k in range(grid.n):
        idx = [slice(None)] * grid.n
        for layer in list(range(margin)) + list(range(-margin, 0)):
            idx[k] = layer
            interior[tuple(idx)] = False
    return ScalarField(grid, np.where(interior, vals, 0.0))
