"""Linear elasticity on P1 triangles (plane strain).

Stresses are piecewise constant per element.  The Lamé constants follow the
plane strain relations ``lambda = nu E / ((1 + nu)(1 - 2 nu))`` and
``mu = E / (2 (1 + nu))``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .spline_geometry import DIRICHLET, NEUMANN_FIXED, MeshGrid


# smallest admissible |U_ii| / max |U_ii| of the LU factor
SINGULAR_PIVOT_RATIO = 1e-12


class ConstraintError(ValueError):
    """The boundary conditions do not remove the rigid body modes."""


class FemSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    youngs_modulus: float = 320e9
    poisson_ratio: float = 0.25
    weibull_module: float = 5.0
    sigma0: float = 140e6

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise ValueError("youngs_modulus must be positive")
        if not 0 < self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must lie in (0, 0.5)")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.weibull_module >= 1:
            raise ValueError("weibull_module must be >= 1")

    @property
    def lame_lambda(self) -> float:
        E, nu = self.youngs_modulus, self.poisson_ratio
        return nu * E / ((1 + nu) * (1 - 2 * nu))

    @property
    def lame_mu(self) -> float:
        return self.youngs_modulus / (2 * (1 + self.poisson_ratio))

    def stress(self, strain: np.ndarray) -> np.ndarray:
        """Hooke's law for a stack of 2x2 strain tensors."""
        tr = np.trace(strain, axis1=-2, axis2=-1)
        return self.lame_lambda * tr[..., None, None] * np.eye(2) + 2 * self.lame_mu * strain


@dataclass(frozen=True)
class BoundaryLoads:
    surface_traction: tuple[float, float] = (1e7, 0.0)
    volume_force: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element areas and constant shape function gradients.

    ``grads[e, a]`` is the gradient of the hat function of local vertex ``a``.
    """

    area: np.ndarray
    grads: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: MeshGrid) -> "ElementGeometry":
        p = mesh.nodes[mesh.triangles]
        x, y = p[..., 0], p[..., 1]
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
        if np.any(det <= 0):
            bad = int(np.argmin(det))
            raise ValueError(f"element {bad} has non-positive area {det[bad] / 2:.3g}")
        grads = np.empty(p.shape)
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            grads[:, a, 0] = (y[:, b] - y[:, c]) / det
            grads[:, a, 1] = (x[:, c] - x[:, b]) / det
        return cls(0.5 * det, grads)

    def displacement_gradient(self, mesh: MeshGrid, u: np.ndarray) -> np.ndarray:
        """``G[e, i, j] = d u_i / d x_j`` per element."""
        ue = u[mesh.triangles]  # (E, 3, 2)
        return np.einsum("eai,eaj->eij", ue, self.grads)


def element_dofs(triangles: np.ndarray) -> np.ndarray:
    return np.stack([2 * triangles, 2 * triangles + 1], axis=-1).reshape(len(triangles), 6)


def element_stiffness(geom: ElementGeometry, mat: MaterialParams) -> np.ndarray:
    """Stack of 6x6 element matrices, dof order (u1x, u1y, u2x, ...)."""
    g = geom.grads
    n_el = len(g)
    B = np.zeros((n_el, 3, 6))
    B[:, 0, 0::2] = g[:, :, 0]
    B[:, 1, 1::2] = g[:, :, 1]
    B[:, 2, 0::2] = g[:, :, 1]
    B[:, 2, 1::2] = g[:, :, 0]
    lam, mu = mat.lame_lambda, mat.lame_mu
    D = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
    Ke = geom.area[:, None, None] * np.einsum("eki,kl,elj->eij", B, D, B)
    # exact symmetry (the einsum may round the two triangles differently)
    return 0.5 * (Ke + Ke.transpose(0, 2, 1))


def traction_edges(mesh: MeshGrid) -> np.ndarray:
    return mesh.boundary_edges[mesh.boundary_tags == NEUMANN_FIXED]


def load_vector(mesh: MeshGrid, geom: ElementGeometry, loads: BoundaryLoads) -> np.ndarray:
    F = np.zeros(2 * mesh.n_nodes)
    g = np.asarray(loads.surface_traction, dtype=float)
    if np.any(g != 0):
        edges = traction_edges(mesh)
        lengths = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
        # 2-point Gauss on a linear edge: each end node receives half the edge force
        for k in range(2):
            for c in range(2):
                np.add.at(F, 2 * edges[:, k] + c, 0.5 * lengths * g[c])
    f = np.asarray(loads.volume_force, dtype=float)
    if np.any(f != 0):
        for c in range(2):
            np.add.at(F, 2 * mesh.triangles.ravel() + c, np.repeat(geom.area / 3, 3) * f[c])
    return F


def dirichlet_dofs(mesh: MeshGrid) -> np.ndarray:
    nodes = mesh.nodes_with_tag(DIRICHLET)
    return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))


def assemble_system(
    mesh: MeshGrid,
    mat: MaterialParams,
    loads: BoundaryLoads,
    geom: ElementGeometry | None = None,
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Full (unconstrained) stiffness matrix and load vector."""
    if geom is None:
        geom = ElementGeometry.from_mesh(mesh)
    if not np.any(mesh.boundary_tags == DIRICHLET):
        raise ConstraintError("mesh has no Dirichlet boundary; stiffness matrix is singular")
    Ke = element_stiffness(geom, mat)
    dofs = element_dofs(mesh.triangles)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # duplicate summation order can differ between (i, j) and (j, i)
    K = ((K + K.T) * 0.5).tocsr()
    return K, load_vector(mesh, geom, loads)


@dataclass
class FemSolution:
    displacement: np.ndarray
    grad_u: np.ndarray
    strain: np.ndarray
    stress: np.ndarray
    geometry: ElementGeometry
    free_dofs: np.ndarray
    _factor: object = field(default=None, repr=False)

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``K z = rhs`` on the free dofs (K is symmetric); z = 0 on fixed dofs."""
        z = np.zeros_like(rhs)
        z[self.free_dofs] = self._factor.solve(rhs[self.free_dofs])
        return z


def solve_state(
    K: sp.spmatrix,
    F: np.ndarray,
    mesh: MeshGrid,
    mat: MaterialParams,
    fixed_dofs: np.ndarray | None = None,
    geom: ElementGeometry | None = None,
) -> FemSolution:
    """Solve ``K u = F`` with ``u = 0`` on ``fixed_dofs`` (default: Dirichlet nodes)."""
    if geom is None:
        geom = ElementGeometry.from_mesh(mesh)
    n = K.shape[0]
    if fixed_dofs is None:
        fixed_dofs = dirichlet_dofs(mesh)
    if len(fixed_dofs) == 0:
        raise ConstraintError("no fixed degrees of freedom")
    free = np.setdiff1d(np.arange(n), fixed_dofs)
    Kff = sp.csc_matrix(K[free][:, free])
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            factor = spla.splu(Kff)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            cond = np.linalg.cond(Kff.toarray()) if len(free) <= 4000 else float("nan")
            raise FemSolveError(f"factorization failed ({exc}); condition number ~ {cond:.3g}") from exc
    piv = np.abs(factor.U.diagonal())
    if not piv.min() > SINGULAR_PIVOT_RATIO * piv.max():
        cond = np.linalg.cond(Kff.toarray()) if len(free) <= 4000 else float("nan")
        raise FemSolveError(
            f"stiffness matrix numerically singular (pivot ratio {piv.min() / piv.max():.3g}); "
            f"condition number ~ {cond:.3g}"
        )
    u = np.zeros(n)
    u[free] = factor.solve(F[free])
    if not np.all(np.isfinite(u)):
        raise FemSolveError("non-finite displacement")
    U = u.reshape(-1, 2)
    G = geom.displacement_gradient(mesh, U)
    strain = 0.5 * (G + G.transpose(0, 2, 1))
    return FemSolution(U, G, strain, mat.stress(strain), geom, free, factor)


def solve(mesh: MeshGrid, mat: MaterialParams, loads: BoundaryLoads) -> FemSolution:
    geom = ElementGeometry.from_mesh(mesh)
    K, F = assemble_system(mesh, mat, loads, geom)
    return solve_state(K, F, mesh, mat, geom=geom)
