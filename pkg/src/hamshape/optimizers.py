"""Gradient descent with Armijo backtracking and dissipative Hamiltonian flows.

The momentum method integrates

    p' = -grad f(q) - (gamma / m^e) p
    q' = -kappa grad f(q) + p / m

with the symplectic Euler scheme (momentum first, then position with the
new momentum).  ``e`` is the friction exponent: 2 reproduces the scheme used
for the shape optimization runs, 1 the textbook heavy ball with friction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]

# exceptions an objective oracle may raise for an infeasible trial point
RECOVERABLE = (ValueError, ArithmeticError, RuntimeError)


class NonFiniteGradient(FloatingPointError):
    def __init__(self, message: str, state: "HamiltonianState | None" = None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class HamiltonianState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0
    k: int = 0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        p = np.array(self.p, dtype=float)
        if q.shape != p.shape:
            raise ValueError(f"q and p differ in shape: {q.shape} vs {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class HamiltonianParams:
    mass: float = 10.0
    friction: float = 100.0
    kappa: float = 1e-3
    dt: float = 1.0 / 250
    horizon: float = 1.0
    friction_exponent: int = 2

    def __post_init__(self):
        if not (self.mass > 0 and self.friction >= 0 and self.dt > 0 and self.horizon > 0):
            raise ValueError("mass, dt and horizon must be positive, friction non-negative")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.friction_exponent not in (1, 2):
            raise ValueError("friction_exponent must be 1 or 2")
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"horizon/dt = {n} is not an integer")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def damping(self) -> float:
        return self.friction / self.mass**self.friction_exponent

    @classmethod
    def from_steps(cls, horizon: float, steps: int, **kw) -> "HamiltonianParams":
        return cls(dt=horizon / steps, horizon=horizon, **kw)


@dataclass(frozen=True)
class EnergyRecord:
    k: int
    t: float
    e_pot: float
    e_kin: float
    e_tot: float

    @classmethod
    def at(cls, state: HamiltonianState, e_pot: float, mass: float) -> "EnergyRecord":
        e_kin = float(state.p @ state.p) / (2 * mass)
        return cls(state.k, state.t, float(e_pot), e_kin, float(e_pot) + e_kin)


@dataclass
class OptimizerResult:
    q: np.ndarray
    reason: str
    trajectory: list[np.ndarray] = field(default_factory=list)
    trajectory_k: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    energies: list[EnergyRecord] = field(default_factory=list)
    objectives: list[Any] = field(default_factory=list)
    message: str = ""

    @property
    def n_iter(self) -> int:
        return len(self.values) - 1

    @property
    def value(self) -> float:
        return self.values[-1]


def gradient_descent_armijo(
    q0,
    f: Objective,
    grad: Gradient,
    tol: float = 1e-5,
    max_iter: int = 200,
    c1: float = 1e-4,
    shrink: float = 0.5,
    initial_step: float = 1.0,
    max_backtracks: int = 50,
    max_step_norm: float | None = None,
    info: Callable[[np.ndarray], Any] | None = None,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> OptimizerResult:
    """Steepest descent, step accepted once ``f(q - s g) <= f(q) - c1 s |g|^2``.

    Every iteration restarts the backtracking from ``initial_step``.  Trial
    points where ``f`` raises (e.g. a degenerate shape) count as rejected.
    """
    q = np.array(q0, dtype=float)
    fq = f(q)
    g = grad(q)
    res = OptimizerResult(q, "max_steps")

    def record(k):
        res.trajectory.append(q.copy())
        res.trajectory_k.append(k)
        res.values.append(fq)
        res.grad_norms.append(float(np.linalg.norm(g)))
        if info is not None:
            res.objectives.append(info(q))

    record(0)
    for k in range(1, max_iter + 1):
        gnorm2 = float(g @ g)
        if not math.isfinite(gnorm2):
            res.reason, res.message = "error", f"non-finite gradient at iteration {k - 1}"
            break
        if math.sqrt(gnorm2) <= tol:
            res.reason = "converged"
            break
        s = initial_step
        if max_step_norm is not None:
            s = min(s, max_step_norm / math.sqrt(gnorm2))
        for _ in range(max_backtracks):
            trial = q - s * g
            try:
                ft = f(trial)
            except RECOVERABLE:
                ft = math.inf
            if ft <= fq - c1 * s * gnorm2:
                break
            s *= shrink
        else:
            res.reason = "error"
            res.message = (
                f"line search failed at iteration {k}: {max_backtracks} backtracks, "
                f"last step {s / shrink:.3g}, |grad| = {math.sqrt(gnorm2):.3g}"
            )
            break
        q, fq = trial, ft
        g = grad(q)
        record(k)
        if callback is not None:
            callback(k, q, fq)
    else:
        if np.linalg.norm(g) <= tol:
            res.reason = "converged"
    res.q = q
    log.info("gradient descent: %s after %d iterations, f = %.6g", res.reason, res.n_iter, fq)
    return res


def symplectic_euler_step(
    state: HamiltonianState, params: HamiltonianParams, grad: Gradient | np.ndarray
) -> HamiltonianState:
    """One step of the damped symplectic Euler scheme.

    ``grad`` may be the oracle or the precomputed gradient at ``state.q``;
    either way it is evaluated once and used in both update lines.
    """
    g = grad(state.q) if callable(grad) else np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(f"non-finite gradient at step {state.k}", state)
    a, m = params.dt, params.mass
    p_new = state.p - a * g - a * params.damping * state.p
    q_new = state.q - a * params.kappa * g + (a / m) * p_new
    return HamiltonianState(q_new, p_new, (state.k + 1) * a, state.k + 1)


def hamiltonian_flow(
    q0,
    p0,
    params: HamiltonianParams,
    f: Objective,
    grad: Gradient,
    grad_tol: float | None = None,
    store_every: int = 1,
    info: Callable[[np.ndarray], Any] | None = None,
    callback: Callable[[HamiltonianState, EnergyRecord], None] | None = None,
) -> OptimizerResult:
    """Run ``params.steps`` symplectic Euler steps from ``(q0, p0)``.

    An energy record is kept for every step k = 0..steps.  With ``grad_tol``
    the run stops early once ``|grad f(q_k)| <= grad_tol`` and ``|p_k|`` is
    below the same threshold.
    """
    state = HamiltonianState(q0, np.zeros_like(np.asarray(q0, dtype=float)) if p0 is None else p0)
    res = OptimizerResult(state.q, "horizon_reached")
    steps = params.steps
    while True:
        try:
            # gradient first: oracles that cache can then serve the value for free
            g = grad(state.q) if state.k < steps else None
            e_pot = f(state.q)
        except RECOVERABLE as exc:
            res.reason, res.message = "error", f"objective failed at step {state.k}: {exc}"
            break
        rec = EnergyRecord.at(state, e_pot, params.mass)
        res.energies.append(rec)
        res.values.append(rec.e_pot)
        if g is not None:
            res.grad_norms.append(float(np.linalg.norm(g)))
        if info is not None:
            res.objectives.append(info(state.q))
        if state.k % store_every == 0 or state.k == steps:
            res.trajectory.append(state.q.copy())
            res.trajectory_k.append(state.k)
        if callback is not None:
            callback(state, rec)
        res.q = state.q
        if state.k >= steps:
            break
        if grad_tol is not None and res.grad_norms[-1] <= grad_tol and np.linalg.norm(state.p) <= grad_tol:
            res.reason = "converged"
            break
        try:
            state = symplectic_euler_step(state, params, g)
        except NonFiniteGradient as exc:
            res.reason, res.message = "error", str(exc)
            break
    if res.trajectory_k and res.trajectory_k[-1] != state.k and res.reason != "error":
        res.trajectory.append(state.q.copy())
        res.trajectory_k.append(state.k)
    log.info("hamiltonian flow: %s at step %d, f = %.6g", res.reason, state.k, res.values[-1] if res.values else float("nan"))
    return res


def energy_history(result: OptimizerResult) -> list[EnergyRecord]:
    return list(result.energies)


def heavy_ball_step(q, q_prev, grad: Gradient, alpha_bar: float, beta: float) -> np.ndarray:
    """``q_{k+1} = q_k - alpha_bar grad f(q_k) + beta (q_k - q_{k-1})``."""
    return q - alpha_bar * grad(q) + beta * (q - q_prev)


def heavy_ball_as_hamiltonian(alpha: float, alpha_bar: float, beta: float, kappa: float = 0.0) -> HamiltonianParams:
    """Mass and friction that make the first-order-friction momentum scheme
    with time step ``alpha`` reproduce the heavy ball recursion."""
    mass = alpha**2 / alpha_bar
    friction = alpha * (1 - beta) / alpha_bar
    return HamiltonianParams(mass=mass, friction=friction, kappa=kappa, dt=alpha, horizon=alpha, friction_exponent=1)


def momentum_from_positions(q, q_prev, alpha: float, mass: float) -> np.ndarray:
    return (mass / alpha) * (np.asarray(q) - np.asarray(q_prev))
