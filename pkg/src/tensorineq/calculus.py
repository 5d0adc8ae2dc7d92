"""Structured grids, boundary partitions and row-wise differential operators.

Derivatives use one collocated stencil: second-order central differences at
interior nodes and second-order one-sided differences at boundary nodes
(the same scheme as ``numpy.gradient(..., edge_order=2)``).  The stencil is
exact on polynomials of degree <= 2, which the identity checks rely on.

Layout convention: nodal arrays have shape ``grid.shape + value_shape`` and
flatten in C order, i.e. node-major with the value components innermost.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, ClassVar, Sequence

import numpy as np
import scipy.sparse as sp

BOX = "box"
HALF_DISK = "half_disk"


class UnsupportedDimensionError(ValueError):
    """Raised when an operator is requested in a dimension it does not support."""


# --------------------------------------------------------------------------
# 1D building blocks
# --------------------------------------------------------------------------


def diff_matrix_1d(m: int, h: float) -> sp.csr_matrix:
    """First-derivative matrix on ``m`` equispaced nodes with spacing ``h``."""
    if m < 3:
        raise ValueError(f"resolution too small: need >= 3 nodes per axis, got {m}")
    rows, cols, vals = [], [], []
    for c, v in zip((0, 1, 2), (-3.0, 4.0, -1.0)):
        rows.append(0), cols.append(c), vals.append(v)
    for i in range(1, m - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-1.0, 1.0]
    for c, v in zip((m - 3, m - 2, m - 1), (1.0, -4.0, 3.0)):
        rows.append(m - 1), cols.append(c), vals.append(v)
    D = sp.coo_matrix((np.array(vals) / (2.0 * h), (rows, cols)), shape=(m, m))
    return D.tocsr()


def trapezoid_weights_1d(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _axis_operator(D1: sp.spmatrix, axis: int, shape: Sequence[int]) -> sp.csr_matrix:
    """Lift a 1D operator acting along ``axis`` to the full tensor grid."""
    left = int(np.prod(shape[:axis], dtype=int))
    right = int(np.prod(shape[axis + 1:], dtype=int))
    return sp.kron(sp.kron(sp.identity(left), D1), sp.identity(right), format="csr")


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Tensor-product node grid on a box or on the half disk.

    ``box``: ``[0, L_1] x ... x [0, L_n]`` with ``resolution[k]`` equispaced
    nodes along axis ``k``.  ``half_disk``: the polar grid over
    ``r in [0, 1]``, ``t in [-pi/2, pi/2]`` (``n = 2``), axes ordered (r, t).
    """

    kind: str
    n: int
    resolution: tuple[int, ...]
    lengths: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (BOX, HALF_DISK):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        res = tuple(int(r) for r in self.resolution)
        object.__setattr__(self, "resolution", res)
        if self.kind == HALF_DISK and self.n != 2:
            raise UnsupportedDimensionError("the half disk is two-dimensional")
        if len(res) != self.n:
            raise ValueError(f"need {self.n} resolutions, got {len(res)}")
        if min(res) < 3:
            raise ValueError(f"resolution too small: need >= 3 nodes per axis, got {min(res)}")
        if self.kind == BOX:
            lengths = tuple(float(L) for L in (self.lengths or (1.0,) * self.n))
            if len(lengths) != self.n or min(lengths) <= 0:
                raise ValueError("box lengths must be n positive numbers")
            object.__setattr__(self, "lengths", lengths)

    @classmethod
    def box(cls, n: int, resolution: int | Sequence[int], lengths: float | Sequence[float] = 1.0) -> "Grid":
        if np.isscalar(resolution):
            resolution = (int(resolution),) * n
        if np.isscalar(lengths):
            lengths = (float(lengths),) * n
        return cls(BOX, n, tuple(resolution), tuple(lengths))

    @classmethod
    def half_disk(cls, resolution: int | Sequence[int]) -> "Grid":
        if np.isscalar(resolution):
            resolution = (int(resolution),) * 2
        return cls(HALF_DISK, 2, tuple(resolution))

    # -- geometry ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.resolution))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """1D node coordinates per axis (Cartesian for box, (r, t) for half disk)."""
        if self.kind == BOX:
            return tuple(np.linspace(0.0, L, m) for L, m in zip(self.lengths, self.resolution))
        nr, nt = self.resolution
        return np.linspace(0.0, 1.0, nr), np.linspace(-np.pi / 2, np.pi / 2, nt)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @cached_property
    def coords(self) -> np.ndarray:
        """Physical node positions, shape ``grid.shape + (n,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        if self.kind == BOX:
            return np.stack(mesh, axis=-1)
        r, t = mesh
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    @cached_property
    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind != HALF_DISK:
            raise ValueError("polar coordinates exist only on the half disk")
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights per node (polar Jacobian ``r`` included)."""
        ws = [trapezoid_weights_1d(len(a), a[1] - a[0]) for a in self.axes]
        w = functools.reduce(np.multiply.outer, ws)
        if self.kind == HALF_DISK:
            w = w * self.polar[0]
        return w

    @cached_property
    def partials(self) -> tuple[sp.csr_matrix, ...]:
        """Sparse Cartesian partial-derivative matrices ``d/dx_k`` on flattened nodal vectors."""
        one_d = [diff_matrix_1d(len(a), a[1] - a[0]) for a in self.axes]
        lifted = [_axis_operator(D, k, self.shape) for k, D in enumerate(one_d)]
        if self.kind == BOX:
            return tuple(lifted)
        # Chain rule in polar coordinates; the 1/r terms are dropped at r = 0,
        # where the quadrature weight vanishes anyway.
        Dr, Dt = lifted
        r, t = (a.ravel() for a in self.polar)
        inv_r = np.divide(1.0, r, out=np.zeros_like(r), where=r > 0)
        dx = sp.diags(np.cos(t)) @ Dr - sp.diags(np.sin(t) * inv_r) @ Dt
        dy = sp.diags(np.sin(t)) @ Dr + sp.diags(np.cos(t) * inv_r) @ Dt
        return dx.tocsr(), dy.tocsr()

    # -- boundary faces ----------------------------------------------------

    @property
    def faces(self) -> tuple[str, ...]:
        if self.kind == BOX:
            return tuple(f"x{k + 1}={s}" for k in range(self.n) for s in (0, 1))
        return ("diameter", "arc")

    def face_mask(self, face: str) -> np.ndarray:
        """Boolean node mask of the closed face."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.kind == BOX:
            k, s = self._parse_box_face(face)
            idx = [slice(None)] * self.n
            idx[k] = 0 if s == 0 else -1
            mask[tuple(idx)] = True
            return mask
        if face == "diameter":
            mask[0, :] = True
            mask[:, 0] = True
            mask[:, -1] = True
        elif face == "arc":
            mask[-1, :] = True
        else:
            raise ValueError(f"unknown face {face!r}; half disk has 'diameter' and 'arc'")
        return mask

    def face_normal(self, face: str) -> np.ndarray:
        """Outward unit normal of ``face`` at every node, shape ``grid.shape + (n,)``."""
        nrm = np.zeros(self.shape + (self.n,))
        if self.kind == BOX:
            k, s = self._parse_box_face(face)
            nrm[..., k] = 1.0 if s == 1 else -1.0
            return nrm
        if face == "diameter":
            nrm[..., 0] = -1.0
        elif face == "arc":
            _, t = self.polar
            nrm[..., 0], nrm[..., 1] = np.cos(t), np.sin(t)
        else:
            raise ValueError(f"unknown face {face!r}")
        return nrm

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return functools.reduce(np.logical_or, (self.face_mask(f) for f in self.faces))

    def _parse_box_face(self, face: str) -> tuple[int, int]:
        try:
            axis, side = face.split("=")
            k = int(axis.lstrip("x")) - 1
            s = int(side)
        except ValueError:
            raise ValueError(f"bad face label {face!r}; expected e.g. 'x1=0'") from None
        if not (0 <= k < self.n and s in (0, 1)):
            raise ValueError(f"face {face!r} does not exist on a {self.n}D box")
        return k, s

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "resolution": list(self.resolution)}


# --------------------------------------------------------------------------
# Boundary partition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPartition:
    """Split of the boundary faces into Gamma_tau and Gamma_nu.

    Node masks follow the closure convention: ``tau_mask`` holds every node on
    the closure of a Gamma_tau face, ``nu_mask`` the remaining boundary nodes.
    Projections, in contrast, act face by face on closed faces, so edge nodes
    shared by faces of both kinds receive the union of the face conditions.
    """

    grid: Grid
    tau_faces: tuple[str, ...]
    nu_faces: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tau_faces", tuple(self.tau_faces))
        object.__setattr__(self, "nu_faces", tuple(self.nu_faces))
        known = set(self.grid.faces)
        for f in self.tau_faces + self.nu_faces:
            if f not in known:
                raise ValueError(f"unknown face {f!r}; grid faces are {sorted(known)}")
        if set(self.tau_faces) & set(self.nu_faces):
            raise ValueError("tau and nu faces must be disjoint")
        if set(self.tau_faces) | set(self.nu_faces) != known:
            raise ValueError("tau and nu faces must cover the whole boundary")

    @classmethod
    def from_tau(cls, grid: Grid, tau_faces: Sequence[str]) -> "BoundaryPartition":
        tau = tuple(tau_faces)
        return cls(grid, tau, tuple(f for f in grid.faces if f not in tau))

    @classmethod
    def from_nu(cls, grid: Grid, nu_faces: Sequence[str]) -> "BoundaryPartition":
        nu = tuple(nu_faces)
        return cls(grid, tuple(f for f in grid.faces if f not in nu), nu)

    @cached_property
    def tau_mask(self) -> np.ndarray:
        m = np.zeros(self.grid.shape, dtype=bool)
        for f in self.tau_faces:
            m |= self.grid.face_mask(f)
        return m

    @cached_property
    def nu_mask(self) -> np.ndarray:
        return self.grid.boundary_mask & ~self.tau_mask

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit outward normal per boundary node (normalized sum over incident faces)."""
        acc = np.zeros(self.grid.shape + (self.grid.n,))
        for f in self.grid.faces:
            m = self.grid.face_mask(f)
            acc[m] += self.grid.face_normal(f)[m]
        nrm = np.linalg.norm(acc, axis=-1, keepdims=True)
        return np.divide(acc, nrm, out=np.zeros_like(acc), where=nrm > 0)

    def faces_of(self, kind: str) -> tuple[str, ...]:
        if kind in ("tangential", "dirichlet"):
            return self.tau_faces
        if kind == "normal":
            return self.nu_faces
        raise ValueError(f"unknown boundary condition kind {kind!r}")


def _face_projector(kind: str, rank: int, n: int, nu: np.ndarray) -> np.ndarray:
    """Projector onto admissible nodal values for one face condition."""
    nn = np.outer(nu, nu)
    if rank == 2:
        if kind == "tangential":  # T tau = 0  <=>  T = (T nu) nu^T
            return np.kron(np.eye(n), nn)
        if kind == "normal":  # T nu = 0
            return np.kron(np.eye(n), np.eye(n) - nn)
    elif rank == 1:
        if kind == "dirichlet":
            return np.zeros((n, n))
        if kind == "tangential":  # nu x v = 0
            return nn
        if kind == "normal":  # nu . v = 0
            return np.eye(n) - nn
    elif rank == 0 and kind == "dirichlet":
        return np.zeros((1, 1))
    raise ValueError(f"boundary condition {kind!r} is not defined for rank-{rank} fields")


def node_projectors(part: BoundaryPartition, rank: int, kinds: Sequence[str]) -> dict[int, np.ndarray]:
    """Per-node projectors (flat node index -> matrix) for the requested conditions."""
    grid = part.grid
    ncomp = grid.n**rank
    out: dict[int, np.ndarray] = {}
    for kind in kinds:
        for face in part.faces_of(kind):
            mask = grid.face_mask(face).ravel()
            normals = grid.face_normal(face).reshape(-1, grid.n)
            for node in np.flatnonzero(mask):
                P = _face_projector(kind, rank, grid.n, normals[node])
                out[node] = P @ out.get(node, np.eye(ncomp))
    return out


def bc_basis(part: BoundaryPartition, rank: int, kinds: Sequence[str]) -> sp.csr_matrix:
    """Orthonormal basis (as sparse columns) of nodal vectors satisfying the conditions."""
    grid = part.grid
    ncomp = grid.n**rank
    projs = node_projectors(part, rank, kinds)
    rows, cols, vals = [], [], []
    col = 0
    for node in range(grid.num_nodes):
        P = projs.get(node)
        if P is None:
            for c in range(ncomp):
                rows.append(node * ncomp + c), cols.append(col), vals.append(1.0)
                col += 1
            continue
        lam, V = np.linalg.eigh(0.5 * (P + P.T))
        for vec in V[:, lam > 0.5].T:
            nz = np.flatnonzero(np.abs(vec) > 1e-15)
            rows += list(node * ncomp + nz)
            cols += [col] * len(nz)
            vals += list(vec[nz])
            col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.num_nodes * ncomp, col))


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a grid; immutable after construction."""

    grid: Grid
    values: np.ndarray
    rank: ClassVar[int] = -1

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = self.grid.shape + self.value_shape(self.grid)
        if vals.shape != expected:
            raise ValueError(f"{type(self).__name__} on this grid needs shape {expected}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def value_shape(cls, grid: Grid) -> tuple[int, ...]:
        return (grid.n,) * cls.rank

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]):
        """Sample ``func(x)`` where ``x`` has shape ``grid.shape + (n,)``."""
        return cls(grid, np.asarray(func(grid.coords), dtype=float))

    @classmethod
    def zeros(cls, grid: Grid):
        return cls(grid, np.zeros(grid.shape + cls.value_shape(grid)))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values: np.ndarray):
        return type(self)(self.grid, values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float):
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__


class ScalarField(Field):
    rank = 0


class VectorField(Field):
    rank = 1


class TensorField(Field):
    rank = 2


class RowCurlField(Field):
    """Row-wise scalar curls of a 2D tensor field (one value per row)."""

    rank = 1

    @classmethod
    def value_shape(cls, grid: Grid) -> tuple[int, ...]:
        if grid.n != 2:
            raise UnsupportedDimensionError("RowCurlField exists only for n = 2")
        return (2,)


FIELD_TYPES = {0: ScalarField, 1: VectorField, 2: TensorField}


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.values.shape != b.values.shape:
        raise ValueError("fields have different value shapes")


# --------------------------------------------------------------------------
# Differential operators
# --------------------------------------------------------------------------


def _partial(grid: Grid, k: int, values: np.ndarray) -> np.ndarray:
    flat = values.reshape(grid.num_nodes, -1)
    return (grid.partials[k] @ flat).reshape(values.shape)


def _all_partials(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Stack of partials, derivative index appended as the last axis."""
    return np.stack([_partial(grid, k, values) for k in range(grid.n)], axis=-1)


def grad_scalar(f: ScalarField) -> VectorField:
    return VectorField(f.grid, _all_partials(f.grid, f.values))


def grad_vector(v: VectorField) -> TensorField:
    """Jacobian ``(Grad v)_ij = d_j v_i``."""
    return TensorField(v.grid, _all_partials(v.grid, v.values))


def div_vector(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, sum(_partial(v.grid, k, v.values[..., k]) for k in range(v.grid.n)))


def div_tensor(T: TensorField) -> VectorField:
    """Row-wise divergence ``(Div T)_i = sum_j d_j T_ij``."""
    g = T.grid
    return VectorField(g, sum(_partial(g, j, T.values[..., j]) for j in range(g.n)))


_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_i, _k, _j] = -1.0


def curl_vector(v: VectorField) -> VectorField:
    if v.grid.n != 3:
        raise UnsupportedDimensionError("vector curl is implemented for n = 3 only")
    J = _all_partials(v.grid, v.values)  # J[..., l, k] = d_k v_l
    return VectorField(v.grid, np.einsum("jkl,...lk->...j", _LEVI_CIVITA, J))


def curl_tensor(T: TensorField) -> TensorField | RowCurlField:
    """Row-wise curl.

    ``n = 3``: ``(Curl T)_ij = eps_jkl d_k T_il``.  ``n = 2``: the scalar curl
    ``d_1 T_i2 - d_2 T_i1`` of each row, returned as a :class:`RowCurlField`.
    """
    g = T.grid
    if g.n == 3:
        J = _all_partials(g, T.values)  # J[..., i, l, k] = d_k T_il
        return TensorField(g, np.einsum("jkl,...ilk->...ij", _LEVI_CIVITA, J))
    if g.n == 2:
        return RowCurlField(g, _partial(g, 0, T.values[..., 1]) - _partial(g, 1, T.values[..., 0]))
    raise UnsupportedDimensionError(f"Curl is not defined here for n = {g.n}")


def laplace_vector(v: VectorField) -> VectorField:
    g = v.grid
    return VectorField(g, sum(_partial(g, k, _partial(g, k, v.values)) for k in range(g.n)))


# --------------------------------------------------------------------------
# Boundary conditions
# --------------------------------------------------------------------------


def apply_bc(T: Field, part: BoundaryPartition, kind: str) -> Field:
    """Project ``T`` onto the admissible values for the given boundary condition.

    ``tangential`` (on Gamma_tau): ``T tau = 0``; for vectors ``nu x v = 0``.
    ``normal`` (on Gamma_nu): ``T nu = 0``; for vectors ``nu . v = 0``.
    ``dirichlet`` (on Gamma_tau): the field vanishes.
    """
    if T.grid != part.grid:
        raise ValueError("field and partition live on different grids")
    faces = part.faces_of(kind)
    if not faces:
        raise ValueError(f"partition has no faces carrying a {kind!r} condition")
    projs = node_projectors(part, T.rank, [kind])
    ncomp = T.grid.n**T.rank
    flat = T.values.reshape(T.grid.num_nodes, ncomp).copy()
    for node, P in projs.items():
        flat[node] = P @ flat[node]
    return T.with_values(flat.reshape(T.values.shape))


# --------------------------------------------------------------------------
# Norms and inner products
# --------------------------------------------------------------------------


def _pointwise_norm(field: Field) -> np.ndarray:
    extra = tuple(range(field.grid.n, field.values.ndim))
    if not extra:
        return np.abs(field.values)
    return np.sqrt(np.sum(field.values**2, axis=extra))


def lq_norm(field: Field, q: float = 2.0) -> float:
    """``(int |field|^q)^(1/q)`` by trapezoidal quadrature (Euclidean/Frobenius pointwise norm)."""
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    return float(np.sum(field.grid.weights * _pointwise_norm(field) ** q) ** (1.0 / q))


def l2_inner(A: Field, B: Field) -> float:
    _check_same_grid(A, B)
    extra = tuple(range(A.grid.n, A.values.ndim))
    pointwise = np.sum(A.values * B.values, axis=extra) if extra else A.values * B.values
    return float(np.sum(A.grid.weights * pointwise))


def observed_order(errors: Sequence[float], spacings: Sequence[float]) -> np.ndarray:
    """Convergence orders between successive refinement levels."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(spacings, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

_FIELD_NAMES = {cls.__name__: cls for cls in (ScalarField, VectorField, TensorField, RowCurlField)}


def _header(field_: Field) -> dict:
    head = field_.grid.describe()
    head["lengths"] = list(field_.grid.lengths)
    head["field"] = type(field_).__name__
    return head


def save_field(field_: Field, path: str | Path) -> None:
    """Write a field as CSV (``.csv``) or raw little-endian float64 with a JSON header line.

    Nodal values follow lexicographic (C-order) node numbering, components
    innermost; CSV holds one node per row.
    """
    path = Path(path)
    head = json.dumps(_header(field_), sort_keys=True)
    flat = field_.values.reshape(field_.grid.num_nodes, -1)
    if path.suffix == ".csv":
        with path.open("w") as fh:
            fh.write(f"# {head}\n")
            np.savetxt(fh, flat, delimiter=",", fmt="%.17g")
    else:
        with path.open("wb") as fh:
            fh.write(head.encode() + b"\n")
            fh.write(flat.astype("<f8").tobytes())


def load_field(path: str | Path) -> Field:
    path = Path(path)
    if path.suffix == ".csv":
        with path.open() as fh:
            head = json.loads(fh.readline().lstrip("#").strip())
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    else:
        raw = path.read_bytes()
        line, _, payload = raw.partition(b"\n")
        head = json.loads(line)
        data = np.frombuffer(payload, dtype="<f8")
    grid = Grid(head["kind"], head["n"], tuple(head["resolution"]), tuple(head.get("lengths") or ()))
    cls = _FIELD_NAMES[head["field"]]
    return cls(grid, np.asarray(data).reshape(grid.shape + cls.value_shape(grid)))


# --------------------------------------------------------------------------
# Operator matrices (same stencils, acting on flattened nodal vectors)
# --------------------------------------------------------------------------


def _unit(rows: int, cols: int, r: int, c: int) -> sp.csr_matrix:
    return sp.csr_matrix(([1.0], ([r], [c])), shape=(rows, cols))


@functools.lru_cache(maxsize=64)
def grad_matrix(grid: Grid, rank: int) -> sp.csr_matrix:
    """Grad of a scalar (rank 0) or row-wise Jacobian of a vector field (rank 1)."""
    n = grid.n
    D = grid.partials
    if rank == 0:
        return sum(sp.kron(D[k], _unit(n, 1, k, 0)) for k in range(n)).tocsr()
    if rank == 1:
        return sum(
            sp.kron(D[j], _unit(n * n, n, i * n + j, i)) for i in range(n) for j in range(n)
        ).tocsr()
    raise ValueError("grad_matrix supports rank 0 and 1 inputs")


@functools.lru_cache(maxsize=64)
def div_matrix(grid: Grid, rank: int = 2) -> sp.csr_matrix:
    """Divergence of a vector field (rank 1) or row-wise divergence of a tensor field (rank 2)."""
    n = grid.n
    D = grid.partials
    if rank == 1:
        return sum(sp.kron(D[k], _unit(1, n, 0, k)) for k in range(n)).tocsr()
    if rank == 2:
        return sum(
            sp.kron(D[j], _unit(n, n * n, i, i * n + j)) for i in range(n) for j in range(n)
        ).tocsr()
    raise ValueError("div_matrix supports rank 1 and 2 inputs")


@functools.lru_cache(maxsize=64)
def curl_matrix(grid: Grid) -> sp.csr_matrix:
    """Row-wise Curl of a tensor field; for n = 2 the output has 2 components per node."""
    n = grid.n
    D = grid.partials
    if n == 3:
        terms = []
        for i in range(3):
            for j, k, l in zip(*np.nonzero(_LEVI_CIVITA)):
                eps = _LEVI_CIVITA[j, k, l]
                terms.append(eps * sp.kron(D[k], _unit(9, 9, i * 3 + j, i * 3 + l)))
        return sum(terms).tocsr()
    if n == 2:
        return sum(
            sp.kron(D[0], _unit(2, 4, i, i * 2 + 1)) - sp.kron(D[1], _unit(2, 4, i, i * 2))
            for i in range(2)
        ).tocsr()
    raise UnsupportedDimensionError(f"Curl is not defined here for n = {n}")


@functools.lru_cache(maxsize=64)
def pointwise_matrix_field(grid: Grid, name: str) -> sp.csr_matrix:
    """Block-diagonal matrix of a pointwise algebraic map (``dev``, ``sym``, ...)."""
    from .algebra import pointwise_matrix

    return sp.kron(sp.identity(grid.num_nodes), sp.csr_matrix(pointwise_matrix(name, grid.n)), format="csr")


def weight_matrix(grid: Grid, ncomp: int) -> sp.dia_matrix:
    """Quadrature weights repeated over ``ncomp`` components (diagonal)."""
    return sp.diags(np.repeat(grid.weights.ravel(), ncomp))
