"""B-spline meanline/thickness parametrization of rod-like 2D shapes.

A shape is described by two clamped B-splines over the normalized length
coordinate ``z = x / length``: the meanline height ``ml(z)`` and the vertical
thickness ``th(z)``.  The finite element grid has fixed x-coordinates; each
column of nodes is spread uniformly between ``ml - th/2`` and ``ml + th/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIRICHLET = 0
NEUMANN_FIXED = 1
NEUMANN_FREE = 2


class DegenerateShapeError(ValueError):
    """Raised when a shape has non-positive thickness somewhere.

    ``index`` is the offending thickness coefficient (or ``None`` when the
    failure is only visible on the evaluation grid).
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class BSplineBasis:
    degree: int
    knots: np.ndarray

    @classmethod
    def clamped_uniform(cls, n_basis: int, degree: int = 3) -> "BSplineBasis":
        if n_basis <= degree:
            raise ValueError(f"need n_basis > degree, got {n_basis} <= {degree}")
        n_inner = n_basis - degree - 1
        inner = np.linspace(0.0, 1.0, n_inner + 2)[1:-1]
        knots = np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])
        return cls(degree, knots)

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if np.any(np.diff(knots) < 0):
            raise ValueError("knot vector must be non-decreasing")
        object.__setattr__(self, "knots", knots)


def eval_basis(basis: BSplineBasis, z: float) -> np.ndarray:
    """Evaluate all basis functions at ``z`` via the Cox-de Boor recursion.

    The right endpoint ``z = 1`` is assigned to the last non-empty knot span so
    that the clamped basis interpolates the last coefficient.
    """
    z = float(z)
    if not (0.0 <= z <= 1.0) or np.isnan(z):
        raise ValueError(f"z={z!r} outside [0, 1]")
    t = basis.knots
    p = basis.degree
    n = basis.n_basis
    # degree-0 indicator functions on half-open spans
    N = np.zeros(len(t) - 1)
    if z == t[-1]:
        span = np.nonzero(t[:-1] < t[1:])[0][-1]
    else:
        span = np.searchsorted(t, z, side="right") - 1
    N[span] = 1.0
    for d in range(1, p + 1):
        M = np.zeros(len(t) - 1 - d)
        for i in range(len(M)):
            left = t[i + d] - t[i]
            right = t[i + d + 1] - t[i + 1]
            a = (z - t[i]) / left * N[i] if left > 0 else 0.0
            b = (t[i + d + 1] - z) / right * N[i + 1] if right > 0 else 0.0
            M[i] = a + b
        N = M
    return N[:n]


def basis_matrix(basis: BSplineBasis, z: np.ndarray) -> np.ndarray:
    """Collocation matrix ``B[i, j] = basis_j(z_i)``."""
    return np.array([eval_basis(basis, zi) for zi in np.atleast_1d(z)])


@dataclass(frozen=True)
class ShapeParams:
    """Meanline and thickness coefficients plus the optimization mask.

    ``free_mask`` has shape ``(2, n_B)``; row 0 refers to ``q_ml`` and row 1
    to ``q_th``.  Pinned entries never move under :func:`flat_to_params`.
    """

    q_ml: np.ndarray
    q_th: np.ndarray
    free_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        q_ml = np.array(self.q_ml, dtype=float)
        q_th = np.array(self.q_th, dtype=float)
        if q_ml.shape != q_th.shape or q_ml.ndim != 1:
            raise ValueError("q_ml and q_th must be 1D arrays of equal length")
        if self.free_mask is None:
            mask = default_free_mask(len(q_ml))
        else:
            mask = np.array(self.free_mask, dtype=bool)
        if mask.shape != (2, len(q_ml)):
            raise ValueError(f"free_mask must have shape (2, {len(q_ml)})")
        for name, arr in (("q_ml", q_ml), ("q_th", q_th), ("free_mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        bad = np.nonzero(~(q_th > 0))[0]
        if bad.size:
            raise DegenerateShapeError(
                f"thickness coefficient {bad[0]} is {q_th[bad[0]]!r}, must be > 0",
                index=int(bad[0]),
            )

    @property
    def n_basis(self) -> int:
        return len(self.q_ml)

    @property
    def n_free(self) -> int:
        return int(self.free_mask.sum())

    def coefficients(self) -> np.ndarray:
        return np.vstack([self.q_ml, self.q_th])


def default_free_mask(n_basis: int) -> np.ndarray:
    """First and last coefficient of each family pinned, the rest free."""
    mask = np.ones((2, n_basis), dtype=bool)
    mask[:, 0] = mask[:, -1] = False
    return mask


def params_to_flat(params: ShapeParams) -> np.ndarray:
    """Free coefficients as a flat vector, meanline entries first."""
    return params.coefficients()[params.free_mask].copy()


def flat_to_params(flat: np.ndarray, template: ShapeParams) -> ShapeParams:
    """Inverse of :func:`params_to_flat`; pinned values come from ``template``."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (template.n_free,):
        raise ValueError(
            f"expected {template.n_free} free coefficients, got shape {flat.shape}"
        )
    coeffs = template.coefficients().copy()
    coeffs[template.free_mask] = flat
    return ShapeParams(coeffs[0], coeffs[1], template.free_mask)


@dataclass(frozen=True)
class MeshGrid:
    """Structured triangular mesh of a rod-like shape.

    Node ``(i, j)`` (column ``i`` along x, row ``j`` from bottom to top) has
    index ``i * n_y + j``.  ``boundary_edges`` lists node pairs on the outer
    boundary, ``boundary_tags`` the matching tag (``DIRICHLET``,
    ``NEUMANN_FIXED`` or ``NEUMANN_FREE``).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    n_x: int
    n_y: int
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def column(self, i: int) -> np.ndarray:
        return np.arange(i * self.n_y, (i + 1) * self.n_y)

    def nodes_with_tag(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_edges[self.boundary_tags == tag])

    def outline(self) -> np.ndarray:
        """Boundary polygon, counter-clockwise, starting at the lower-left node."""
        ny = self.n_y
        bottom = np.arange(self.n_x) * ny
        top = np.arange(self.n_x) * ny + ny - 1
        right = np.arange((self.n_x - 1) * ny, self.n_x * ny)
        left = np.arange(ny)
        idx = np.concatenate([bottom, right[1:], top[::-1][1:], left[::-1][1:-1]])
        return self.nodes[idx]


def grid_topology(n_x: int, n_y: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Triangles and tagged boundary edges for an ``n_x`` by ``n_y`` grid.

    Each quad is split along its lower-left to upper-right diagonal.
    """
    idx = np.arange(n_x * n_y).reshape(n_x, n_y)
    ll = idx[:-1, :-1].ravel()
    lr = idx[1:, :-1].ravel()
    ul = idx[:-1, 1:].ravel()
    ur = idx[1:, 1:].ravel()
    tris = np.concatenate(
        [np.stack([ll, lr, ur], axis=1), np.stack([ll, ur, ul], axis=1)]
    )
    # interleave so the two triangles of a cell are adjacent
    n_cells = len(ll)
    order = np.arange(2 * n_cells).reshape(2, n_cells).T.ravel()
    tris = tris[order]

    left = np.stack([idx[0, :-1], idx[0, 1:]], axis=1)
    right = np.stack([idx[-1, :-1], idx[-1, 1:]], axis=1)
    bottom = np.stack([idx[:-1, 0], idx[1:, 0]], axis=1)
    top = np.stack([idx[:-1, -1], idx[1:, -1]], axis=1)
    edges = np.concatenate([left, right, bottom, top])
    tags = np.concatenate(
        [
            np.full(len(left), DIRICHLET),
            np.full(len(right), NEUMANN_FIXED),
            np.full(len(bottom) + len(top), NEUMANN_FREE),
        ]
    )
    return tris, edges, tags


def node_x(n_x: int, length: float) -> np.ndarray:
    return np.arange(n_x) * (length / (n_x - 1))


def row_offsets(n_y: int) -> np.ndarray:
    """Relative vertical position of each row in ``[-1/2, 1/2]``."""
    return np.arange(n_y) / (n_y - 1) - 0.5


class ShapeMapper:
    """Cached map from coefficients to mesh for a fixed grid and basis.

    The node coordinates are linear in the coefficients, so the map is
    ``y = B_ml @ q_ml + B_th @ q_th`` with constant matrices; those matrices
    double as the exact mesh sensitivities ``dY/dq``.
    """

    def __init__(self, basis: BSplineBasis, n_x: int, n_y: int, length: float = 1.0):
        if n_x < 2 or n_y < 2:
            raise ValueError("n_x and n_y must be at least 2")
        self.basis = basis
        self.n_x = n_x
        self.n_y = n_y
        self.length = float(length)
        self.x = node_x(n_x, length)
        self.collocation = basis_matrix(basis, self.x / self.length)
        self.triangles, self.boundary_edges, self.boundary_tags = grid_topology(n_x, n_y)
        offs = row_offsets(n_y)
        # dy[node, coeff] for meanline and thickness
        self.dy_dml = np.repeat(self.collocation, n_y, axis=0)
        self.dy_dth = self.dy_dml * np.tile(offs, n_x)[:, None]
        self._xcoord = np.repeat(self.x, n_y)

    def profiles(self, params: ShapeParams) -> tuple[np.ndarray, np.ndarray]:
        return self.collocation @ params.q_ml, self.collocation @ params.q_th

    def mesh(self, params: ShapeParams) -> MeshGrid:
        if params.n_basis != self.basis.n_basis:
            raise ValueError(
                f"params have {params.n_basis} coefficients, basis has {self.basis.n_basis}"
            )
        ml, th = self.profiles(params)
        if np.any(~(th > 0)):
            i = int(np.argmin(th))
            raise DegenerateShapeError(
                f"thickness {th[i]:.3g} <= 0 at x={self.x[i]:.3g}",
                index=int(np.argmax(self.collocation[i])),
            )
        y = self.dy_dml @ params.q_ml + self.dy_dth @ params.q_th
        nodes = np.column_stack([self._xcoord, y])
        return MeshGrid(
            nodes, self.triangles, self.n_x, self.n_y, self.boundary_edges, self.boundary_tags
        )

    def dy_dflat(self, params: ShapeParams) -> np.ndarray:
        """Sensitivity of the node y-coordinates to the free coefficients."""
        full = np.hstack([self.dy_dml, self.dy_dth])
        return full[:, params.free_mask.ravel()]


def shape_from_params(
    params: ShapeParams,
    n_x: int,
    n_y: int,
    length: float = 1.0,
    basis: BSplineBasis | None = None,
) -> MeshGrid:
    if basis is None:
        basis = BSplineBasis.clamped_uniform(params.n_basis)
    return ShapeMapper(basis, n_x, n_y, length).mesh(params)
