"""Pointwise matrix algebra: sym/skew, dev/spherical and Cartan splits.

Every function accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``
and acts on the trailing two axes, so the same code serves nodal fields.
"""

from __future__ import annotations

import numpy as np


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices in the last two axes, got shape {M.shape}")
    return M


def transpose(M) -> np.ndarray:
    return np.swapaxes(_as_square(M), -1, -2)


def sym(M) -> np.ndarray:
    M = _as_square(M)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def skew(M) -> np.ndarray:
    M = _as_square(M)
    return 0.5 * (M - np.swapaxes(M, -1, -2))


def trace(M) -> np.ndarray:
    return np.trace(_as_square(M), axis1=-2, axis2=-1)


def spherical(M) -> np.ndarray:
    """``(tr M / n) Id``, broadcast over leading axes."""
    M = _as_square(M)
    n = M.shape[-1]
    return (trace(M) / n)[..., None, None] * np.eye(n)


def dev(M) -> np.ndarray:
    """Deviatoric (trace-free) part ``M - (tr M / n) Id``."""
    M = _as_square(M)
    return M - spherical(M)


def decompose_sym_skew(M) -> tuple[np.ndarray, np.ndarray]:
    return sym(M), skew(M)


def decompose_dev_tr(M) -> tuple[np.ndarray, np.ndarray]:
    return dev(M), spherical(M)


def cartan_decompose(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``M`` into (dev sym, skew, spherical) parts.

    The three parts sum to ``M`` and are pairwise orthogonal in the
    Frobenius inner product.
    """
    M = _as_square(M)
    return dev(sym(M)), skew(M), spherical(M)


def frobenius_inner(M, N) -> np.ndarray:
    """``sum_ij M_ij N_ij`` over the trailing two axes."""
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    if M.shape[-2:] != N.shape[-2:]:
        raise ValueError(f"dimension mismatch: {M.shape[-2:]} vs {N.shape[-2:]}")
    return np.einsum("...ij,...ij->...", M, N)


def frobenius_norm(M) -> np.ndarray:
    return np.sqrt(frobenius_inner(M, M))


def skew_from_axial(a) -> np.ndarray:
    """Embed a 3-vector ``a`` as the skew matrix ``[[0,-a3,a2],[a3,0,-a1],[-a2,a1,0]]``."""
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != 3:
        raise ValueError("axial embedding is only defined for n = 3")
    A = np.zeros(a.shape[:-1] + (3, 3))
    A[..., 0, 1] = -a[..., 2]
    A[..., 0, 2] = a[..., 1]
    A[..., 1, 0] = a[..., 2]
    A[..., 1, 2] = -a[..., 0]
    A[..., 2, 0] = -a[..., 1]
    A[..., 2, 1] = a[..., 0]
    return A


def axial_from_skew(A) -> np.ndarray:
    """Inverse of :func:`skew_from_axial` applied to the skew part of ``A``."""
    A = skew(A)
    if A.shape[-1] != 3:
        raise ValueError("axial vector is only defined for n = 3")
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


POINTWISE = {
    "identity": lambda M: _as_square(M),
    "sym": sym,
    "skew": skew,
    "dev": dev,
    "spherical": spherical,
    "transpose": transpose,
}


def pointwise_matrix(name: str, n: int) -> np.ndarray:
    """Matrix of a pointwise linear map acting on row-major flattened ``n x n`` matrices."""
    op = POINTWISE[name]
    P = np.zeros((n * n, n * n))
    for k in range(n * n):
        E = np.zeros(n * n)
        E[k] = 1.0
        P[:, k] = op(E.reshape(n, n)).ravel()
    return P
