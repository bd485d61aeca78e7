"""Failure probability, volume and obstacle penalty objectives with gradients.

J1 is the Weibull-type failure functional

    J1 = 1/(2 pi) * int_Omega int_{S^1} ((n' sigma n)^+ / sigma0)^m dn dz

evaluated with piecewise constant stresses and a trapezoidal rule in the
normal angle.  J2 is the area of the shape and J3 = c_P * area(shape & disk).

Gradients of J1 and J2 with respect to the free spline coefficients are
computed with a discrete adjoint on the node coordinates, chained through the
(linear) spline-to-mesh map.  The J3 gradient uses central differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .fem import BoundaryLoads, FemSolution, MaterialParams
from .geometry import ObstacleCircle, shape_circle_area
from .spline_geometry import (
    NEUMANN_FIXED,
    DegenerateShapeError,
    MeshGrid,
    ShapeMapper,
    ShapeParams,
    flat_to_params,
    params_to_flat,
)

DEFAULT_ANGLES = 64


@dataclass(frozen=True)
class ObjectiveWeights:
    lam: tuple[float, float, float] = (0.4, 0.3, 0.3)
    c_penalty: float = 100.0

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if len(lam) != 3 or min(lam) <= 0:
            raise ValueError(f"weights must be three positive numbers, got {lam}")
        if abs(sum(lam) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(lam)!r}")
        if not self.c_penalty > 0:
            raise ValueError("c_penalty must be positive")
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class ObjectiveValue:
    j1: float
    j2: float
    j3: float
    j_lambda: float

    @classmethod
    def combine(cls, j1: float, j2: float, j3: float, lam) -> "ObjectiveValue":
        return cls(j1, j2, j3, lam[0] * j1 + lam[1] * j2 + lam[2] * j3)


def _angles(n_angles: int) -> tuple[np.ndarray, np.ndarray]:
    phi = 2 * np.pi * np.arange(n_angles) / n_angles
    normals = np.column_stack([np.cos(phi), np.sin(phi)])
    return normals, np.einsum("ki,kj->kij", normals, normals)


def failure_density(
    stress: np.ndarray, mat: MaterialParams, n_angles: int = DEFAULT_ANGLES, derivative: bool = False
):
    """Angular mean of ``((n' sigma n)^+ / sigma0)^m`` per element.

    With ``derivative=True`` also returns d(density)/d(sigma) as a stack of
    symmetric 2x2 tensors.
    """
    normals, nn = _angles(n_angles)
    s = np.einsum("kij,eij->ek", nn, stress)
    ratio = np.maximum(s, 0.0) / mat.sigma0
    m = mat.weibull_module
    dens = np.mean(ratio**m, axis=1)
    if not derivative:
        return dens
    coef = m * ratio ** (m - 1) / mat.sigma0 / n_angles
    return dens, np.einsum("ek,kij->eij", coef, nn)


def eval_J1(mesh: MeshGrid, sol: FemSolution, mat: MaterialParams, n_angles: int = DEFAULT_ANGLES) -> float:
    if sol is None or sol.stress is None:
        raise ValueError("J1 needs a solved state")
    dens = failure_density(sol.stress, mat, n_angles)
    return float(np.sum(sol.geometry.area * dens))


def eval_J2(mesh: MeshGrid) -> float:
    return float(mesh.signed_areas().sum())


def eval_J3(mesh: MeshGrid, circle: ObstacleCircle, c_penalty: float) -> float:
    return c_penalty * shape_circle_area(mesh, circle)


def _scatter_nodes(mesh: MeshGrid, per_vertex: np.ndarray) -> np.ndarray:
    """Sum ``(E, 3, 2)`` per-vertex contributions into an ``(N, 2)`` array."""
    out = np.zeros((mesh.n_nodes, 2))
    np.add.at(out, mesh.triangles.ravel(), per_vertex.reshape(-1, 2))
    return out


def j1_node_gradient(
    mesh: MeshGrid,
    sol: FemSolution,
    mat: MaterialParams,
    loads: BoundaryLoads,
    n_angles: int = DEFAULT_ANGLES,
) -> np.ndarray:
    """dJ1/d(node coordinates) including the state sensitivity via the adjoint."""
    geom = sol.geometry
    A = geom.area
    g = geom.grads  # (E, 3, 2)
    Gu = sol.grad_u
    dens, W = failure_density(sol.stress, mat, n_angles, derivative=True)
    S = mat.stress(W)  # Hooke applied to dJ/dsigma

    # dJ1/du and the adjoint state
    Sg = np.einsum("eij,eaj->eai", S, g)
    rhs = _scatter_nodes(mesh, A[:, None, None] * Sg).ravel()
    z = sol.solve_adjoint(rhs).reshape(-1, 2)
    Gz = geom.displacement_gradient(mesh, z)
    sig_z = mat.stress(0.5 * (Gz + Gz.transpose(0, 2, 1)))
    sig_u = sol.stress

    # explicit mesh dependence of sum_e A_e dens_e
    explicit = dens[:, None, None] * g - np.einsum("eki,ekl,eal->eai", Gu, S, g)
    # d/dX of z' K(X) u at fixed u, z
    work = np.einsum("eij,eij->e", sig_u, Gz)
    dKu = (
        work[:, None, None] * g
        - np.einsum("eki,ekl,eal->eai", Gz, sig_u, g)
        - np.einsum("eki,ekl,eal->eai", Gu, sig_z, g)
    )
    grad = _scatter_nodes(mesh, A[:, None, None] * (explicit - dKu))
    grad += _load_sensitivity(mesh, geom, loads, z)
    return grad


def _load_sensitivity(mesh: MeshGrid, geom, loads: BoundaryLoads, z: np.ndarray) -> np.ndarray:
    """z' dF/dX for the traction and volume force load vector."""
    out = np.zeros((mesh.n_nodes, 2))
    t = np.asarray(loads.surface_traction, dtype=float)
    if np.any(t != 0):
        edges = mesh.boundary_edges[mesh.boundary_tags == NEUMANN_FIXED]
        d = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
        L = np.linalg.norm(d, axis=1)
        s = 0.5 * ((z[edges[:, 0]] + z[edges[:, 1]]) @ t)
        dL = (s / L)[:, None] * d
        np.add.at(out, edges[:, 1], dL)
        np.add.at(out, edges[:, 0], -dL)
    f = np.asarray(loads.volume_force, dtype=float)
    if np.any(f != 0):
        zf = (z[mesh.triangles] @ f).sum(axis=1) / 3.0
        out += _scatter_nodes(mesh, (zf * geom.area)[:, None, None] * geom.grads)
    return out


def j2_node_gradient(mesh: MeshGrid, geom: fem.ElementGeometry) -> np.ndarray:
    return _scatter_nodes(mesh, geom.area[:, None, None] * geom.grads)


@dataclass(frozen=True)
class Evaluation:
    """Objective breakdown at one point, optionally with per-objective gradients."""

    value: ObjectiveValue
    grad_j1: np.ndarray | None = None
    grad_j2: np.ndarray | None = None
    grad_j3: np.ndarray | None = None
    one_sided: bool = False

    def grad_lambda(self, lam) -> np.ndarray:
        return lam[0] * self.grad_j1 + lam[1] * self.grad_j2 + lam[2] * self.grad_j3


def fd_step(q: np.ndarray, rel: float = 1e-6, floor: float = 1e-8) -> np.ndarray:
    return np.maximum(rel * np.abs(q), floor)


class ShapeProblem:
    """Objective oracle over the free spline coefficients of one problem instance.

    The last evaluation is cached, so calling ``value`` and ``gradient`` at
    the same point only solves the state equation once.
    """

    def __init__(
        self,
        mapper: ShapeMapper,
        template: ShapeParams,
        material: MaterialParams,
        loads: BoundaryLoads,
        circle: ObstacleCircle,
        weights: ObjectiveWeights,
        n_angles: int = DEFAULT_ANGLES,
    ):
        self.mapper = mapper
        self.template = template
        self.material = material
        self.loads = loads
        self.circle = circle
        self.weights = weights
        self.n_angles = n_angles
        self._dy = mapper.dy_dflat(template)
        self._cache: dict[tuple[bytes, bool], Evaluation] = {}
        self.n_state_solves = 0

    @classmethod
    def from_config(cls, config) -> "ShapeProblem":
        return cls(
            config.mapper(),
            config.pinned_template(),
            config.material,
            config.loads,
            config.obstacle,
            config.weights,
            config.n_angles,
        )

    def params(self, flat) -> ShapeParams:
        return flat_to_params(flat, self.template)

    def flat(self, params: ShapeParams) -> np.ndarray:
        return params_to_flat(params)

    def mesh(self, flat) -> MeshGrid:
        return self.mapper.mesh(self.params(flat))

    def j3(self, flat) -> float:
        return eval_J3(self.mesh(flat), self.circle, self.weights.c_penalty)

    def evaluate(self, flat, gradient: bool = False) -> Evaluation:
        flat = np.asarray(flat, dtype=float)
        key = (flat.tobytes(), gradient)
        hit = self._cache.get(key) or (self._cache.get((key[0], True)) if not gradient else None)
        if hit is not None:
            return hit
        mesh = self.mesh(flat)
        try:
            geom = fem.ElementGeometry.from_mesh(mesh)
        except ValueError as exc:
            raise DegenerateShapeError(str(exc)) from exc
        K, F = fem.assemble_system(mesh, self.material, self.loads, geom)
        sol = fem.solve_state(K, F, mesh, self.material, geom=geom)
        self.n_state_solves += 1
        j1 = eval_J1(mesh, sol, self.material, self.n_angles)
        j2 = float(geom.area.sum())
        j3 = eval_J3(mesh, self.circle, self.weights.c_penalty)
        value = ObjectiveValue.combine(j1, j2, j3, self.weights.lam)
        if not gradient:
            ev = Evaluation(value)
        else:
            g1 = j1_node_gradient(mesh, sol, self.material, self.loads, self.n_angles)[:, 1] @ self._dy
            g2 = j2_node_gradient(mesh, geom)[:, 1] @ self._dy
            g3, one_sided = self.j3_gradient(flat, j3)
            ev = Evaluation(value, g1, g2, g3, one_sided)
        self._cache = {key: ev}
        return ev

    def j3_gradient(self, flat: np.ndarray, j3_here: float | None = None) -> tuple[np.ndarray, bool]:
        """Central differences of J3; forward/backward where a step would
        make the shape degenerate."""
        h = fd_step(flat)
        grad = np.zeros_like(flat)
        one_sided = False
        for i in range(len(flat)):
            e = np.zeros_like(flat)
            e[i] = h[i]
            fp = fm = None
            try:
                fp = self.j3(flat + e)
            except DegenerateShapeError:
                pass
            try:
                fm = self.j3(flat - e)
            except DegenerateShapeError:
                pass
            if fp is not None and fm is not None:
                grad[i] = (fp - fm) / (2 * h[i])
                continue
            one_sided = True
            here = self.j3(flat) if j3_here is None else j3_here
            if fp is not None:
                grad[i] = (fp - here) / h[i]
            elif fm is not None:
                grad[i] = (here - fm) / h[i]
            else:
                raise DegenerateShapeError(f"no feasible difference step for coefficient {i}", index=i)
        return grad, one_sided

    # plain callables for the optimizers
    def value(self, flat) -> float:
        return self.evaluate(flat).value.j_lambda

    def gradient(self, flat) -> np.ndarray:
        return self.evaluate(flat, gradient=True).grad_lambda(self.weights.lam)

    def scalarized(self, weights) -> tuple:
        """``(f, grad)`` callables for an arbitrary linear combination of J1..J3."""
        w = np.asarray(weights, dtype=float)

        def f(flat):
            v = self.evaluate(flat).value
            return w[0] * v.j1 + w[1] * v.j2 + w[2] * v.j3

        def grad(flat):
            ev = self.evaluate(flat, gradient=True)
            return w[0] * ev.grad_j1 + w[1] * ev.grad_j2 + w[2] * ev.grad_j3

        return f, grad


def eval_J_lambda(params: ShapeParams, config) -> ObjectiveValue:
    problem = ShapeProblem.from_config(config)
    return problem.evaluate(params_to_flat(params)).value


def grad_J_lambda(params: ShapeParams, config) -> np.ndarray:
    problem = ShapeProblem.from_config(config)
    return problem.gradient(params_to_flat(params))

