"""Local (J1, J2) fronts by a warm-started sweep over the scalarization weight."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .optimizers import gradient_descent_armijo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrontPoint:
    weight: float
    q_opt: np.ndarray
    j1: float
    j2: float
    converged: bool
    residual: float = float("nan")
    n_iter: int = 0


def trace_front(
    problem,
    q_start,
    weights,
    tol: float = 1e-5,
    max_iter_each: int = 200,
    **gd_options,
) -> list[FrontPoint]:
    """Minimize ``w J1 + (1 - w) J2`` for each ``w`` in ``weights`` in turn.

    Each solve starts from the optimum of the previous weight; the first one
    from ``q_start``.  ``problem`` is a :class:`~hamshape.objectives.ShapeProblem`.
    Non-converged weights are kept and flagged.
    """
    w = np.asarray(weights, dtype=float)
    if np.any((w <= 0) | (w >= 1)):
        raise ValueError("weights must lie in (0, 1)")
    if len(w) > 1 and not (np.all(np.diff(w) > 0) or np.all(np.diff(w) < 0)):
        raise ValueError("weights must be strictly monotone")
    q = np.array(q_start, dtype=float)
    front = []
    for wk in w:
        f, grad = problem.scalarized((wk, 1.0 - wk, 0.0))
        res = gradient_descent_armijo(q, f, grad, tol=tol, max_iter=max_iter_each, **gd_options)
        v = problem.evaluate(res.q).value
        residual = float(np.linalg.norm(grad(res.q)))
        front.append(FrontPoint(float(wk), res.q.copy(), v.j1, v.j2, res.reason == "converged", residual, res.n_iter))
        log.info("w=%.3f: J1=%.4g J2=%.4g %s", wk, v.j1, v.j2, res.reason)
        if res.reason != "error":
            q = res.q
    for a, b in zip(front, front[1:]):
        # more weight on J2 should not increase the volume
        if (b.weight - a.weight) < 0 and b.j2 > a.j2 + 1e-9 or (b.weight - a.weight) > 0 and b.j2 < a.j2 - 1e-9:
            log.warning("front not monotone between w=%.3f and w=%.3f", a.weight, b.weight)
    return front


def _dominates(a, b) -> bool:
    return a.j1 <= b.j1 and a.j2 <= b.j2 and (a.j1 < b.j1 or a.j2 < b.j2)


def dominance_filter(points) -> list:
    """Non-dominated subset, sorted by ``j2`` (ties keep input order)."""
    pts = list(points)
    keep = [p for p in pts if not any(_dominates(o, p) for o in pts)]
    return sorted(keep, key=lambda p: p.j2)
