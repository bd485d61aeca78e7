"""End-to-end runs of one configuration: optimizers, sweeps and artifacts."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ProblemConfig, build_initial_shape
from .export import (
    export_energy_csv,
    export_front_csv,
    export_objectives_csv,
    export_shape_svg,
    history_rows,
    write_coefficients,
    write_manifest,
)
from .fem import FemSolveError
from .objectives import ShapeProblem
from .optimizers import HamiltonianParams, OptimizerResult, gradient_descent_armijo, hamiltonian_flow
from .pareto import dominance_filter, trace_front
from .spline_geometry import DegenerateShapeError, ShapeParams, params_to_flat

log = logging.getLogger(__name__)

NUMERICAL_ERRORS = (FemSolveError, DegenerateShapeError, FloatingPointError, ArithmeticError)


class NumericalFailure(RuntimeError):
    pass


def hamiltonian_params(config: ProblemConfig) -> HamiltonianParams:
    o = config.optimizer
    return HamiltonianParams.from_steps(
        o.horizon, o.steps, mass=o.mass, friction=o.friction, kappa=o.kappa, friction_exponent=o.friction_exponent
    )


def run_gradient_descent(problem: ShapeProblem, q0, config: ProblemConfig, callback=None) -> OptimizerResult:
    o = config.optimizer
    return gradient_descent_armijo(
        q0,
        problem.value,
        problem.gradient,
        tol=o.gd_tol,
        max_iter=o.gd_max_iter,
        c1=o.armijo_c1,
        shrink=o.armijo_shrink,
        initial_step=o.armijo_initial_step,
        max_backtracks=o.armijo_max_backtracks,
        max_step_norm=o.armijo_max_step_norm,
        info=lambda q: problem.evaluate(q).value,
        callback=callback,
    )


def run_hamiltonian(problem: ShapeProblem, q0, config: ProblemConfig, callback=None) -> OptimizerResult:
    q0 = np.asarray(q0, dtype=float)
    return hamiltonian_flow(
        q0,
        np.zeros_like(q0),
        hamiltonian_params(config),
        problem.value,
        problem.gradient,
        store_every=config.optimizer.store_every,
        info=lambda q: problem.evaluate(q).value,
        callback=callback,
    )


def lower_boundary_above(problem: ShapeProblem, q, config: ProblemConfig) -> bool:
    """Whether the lower boundary over the obstacle's x-extent lies above its center."""
    mesh = problem.mesh(q)
    (cx, cy), r = config.obstacle.midpoint, config.obstacle.radius
    bottom = mesh.nodes[:: mesh.n_y]
    sel = np.abs(bottom[:, 0] - cx) <= r
    if not np.any(sel):
        return False
    return bool(np.all(bottom[sel, 1] > cy))


def lies_below(problem: ShapeProblem, q, config: ProblemConfig) -> bool:
    """Upper boundary below the circle's center over its x-extent."""
    mesh = problem.mesh(q)
    (cx, cy), r = config.obstacle.midpoint, config.obstacle.radius
    top = mesh.nodes[mesh.n_y - 1 :: mesh.n_y]
    sel = np.abs(top[:, 0] - cx) <= r
    return bool(np.any(sel) and np.all(top[sel, 1] < cy))


@dataclass
class RunOutcome:
    config: ProblemConfig
    q0: np.ndarray
    gd: OptimizerResult | None = None
    hf: OptimizerResult | None = None
    status: str = "ok"
    message: str = ""
    artifacts: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.status != "ok"


def _summary(problem, result: OptimizerResult | None, config) -> dict | None:
    if result is None:
        return None
    v = problem.evaluate(result.q).value
    return {
        "reason": result.reason,
        "message": result.message,
        "iterations": result.n_iter,
        "j1": v.j1,
        "j2": v.j2,
        "j3": v.j3,
        "j_lambda": v.j_lambda,
        "final_grad_norm": result.grad_norms[-1] if result.grad_norms else None,
        "lower_boundary_above_center": lower_boundary_above(problem, result.q, config),
        "below_obstacle": lies_below(problem, result.q, config),
        "q": [float(x) for x in result.q],
    }


def _snapshots(result: OptimizerResult, every: int) -> list[tuple[int, np.ndarray]]:
    if not result.trajectory:
        return []
    last = result.trajectory_k[-1]
    return [(k, q) for k, q in zip(result.trajectory_k, result.trajectory) if k % every == 0 or k == last]


def run_config(config: ProblemConfig, out_dir: str | Path | None = None, figures: bool | None = None) -> RunOutcome:
    """Run the optimizers selected by ``config.optimizer.mode`` and write artifacts.

    ``out_dir`` defaults to ``config.output.directory``.  Numerical failures
    are recorded in the manifest rather than raised.
    """
    out = Path(out_dir if out_dir is not None else config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    figures = config.output.figures if figures is None else figures
    t_start = time.perf_counter()
    problem = ShapeProblem.from_config(config)
    params0 = build_initial_shape(config)
    q0 = params_to_flat(params0)
    outcome = RunOutcome(config, q0)
    art = outcome.artifacts
    art.append(str(write_coefficients(params0, out / "initial_coefficients.json")))
    mode = config.optimizer.mode
    try:
        if mode in ("gd", "both"):
            # an exhausted line search ends the descent but not the run
            outcome.gd = run_gradient_descent(problem, q0, config)
            if outcome.gd.reason == "error":
                log.warning("%s: gradient descent stopped: %s", config.name, outcome.gd.message)
        if mode in ("hamiltonian", "both"):
            outcome.hf = run_hamiltonian(problem, q0, config)
            if outcome.hf.reason == "error":
                raise NumericalFailure(f"hamiltonian flow: {outcome.hf.message}")
    except (NumericalFailure, *NUMERICAL_ERRORS) as exc:
        outcome.status, outcome.message = "numerical_failure", str(exc)
        log.error("%s: %s", config.name, exc)

    every = config.output.snapshot_every
    for tag, res in (("gd", outcome.gd), ("hf", outcome.hf)):
        if res is None or not res.values:
            continue
        if tag == "hf":
            rows = history_rows(res.energies, res.objectives)
            art.append(str(export_energy_csv(rows, out / "hf_energy.csv")))
        art.append(str(export_objectives_csv(enumerate(res.objectives), out / f"{tag}_objectives.csv",
                                             "k" if tag == "hf" else "iteration")))
        art.append(str(write_coefficients(problem.params(res.q), out / f"{tag}_final_coefficients.json")))
        if config.output.svg:
            for k, q in _snapshots(res, every):
                try:
                    mesh = problem.mesh(q)
                except DegenerateShapeError:
                    continue
                art.append(str(export_shape_svg(mesh, config.obstacle, out / f"{tag}_shape_{k:04d}.svg")))
    if config.output.svg:
        art.append(str(export_shape_svg(problem.mesh(q0), config.obstacle, out / "initial_shape.svg")))
    if figures:
        art.extend(_figures(problem, outcome, out))

    manifest = {
        "package_version": __version__,
        "config": config.to_dict(),
        "status": outcome.status,
        "message": outcome.message,
        "initial": {"q": [float(x) for x in q0], **vars(problem.evaluate(q0).value)},
        "gradient_descent": _summary(problem, outcome.gd, config) if outcome.gd and outcome.gd.values else None,
        "hamiltonian": _summary(problem, outcome.hf, config) if outcome.hf and outcome.hf.values else None,
        "artifacts": sorted(Path(a).name for a in art),
        "elapsed_s": round(time.perf_counter() - t_start, 3),
    }
    write_manifest(manifest, out / ("manifest.json" if not outcome.failed else "error_manifest.json"))
    return outcome


def _figures(problem, outcome: RunOutcome, out: Path) -> list[str]:
    from .export import history_rows
    from .plotting import plot_energy, plot_shapes

    paths = []
    meshes, labels = [problem.mesh(outcome.q0)], ["initial"]
    for tag, res in (("GD", outcome.gd), ("HF", outcome.hf)):
        if res is not None and res.values:
            try:
                meshes.append(problem.mesh(res.q))
                labels.append(f"{tag} final")
            except DegenerateShapeError:
                pass
    paths.append(str(plot_shapes(meshes, outcome.config.obstacle, out / "shapes.png", labels, outcome.config.name)))
    if outcome.hf is not None and outcome.hf.energies:
        rows = history_rows(outcome.hf.energies, outcome.hf.objectives)
        paths.append(str(plot_energy(rows, out / "energy.png", outcome.config.name)))
    return paths


def trace_config(config: ProblemConfig, start: ShapeParams, out_dir: str | Path | None = None, figures=None):
    """Warm-started (J1, J2) sweep from ``start``; writes the raw and filtered fronts."""
    out = Path(out_dir if out_dir is not None else config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    problem = ShapeProblem.from_config(config)
    tr = config.trace
    o = config.optimizer
    weights = np.linspace(tr.w_max, tr.w_min, tr.n_weights)
    front = trace_front(
        problem,
        params_to_flat(start),
        weights,
        tol=tr.tol,
        max_iter_each=tr.max_iter,
        c1=o.armijo_c1,
        shrink=o.armijo_shrink,
        initial_step=o.armijo_initial_step,
        max_backtracks=o.armijo_max_backtracks,
        max_step_norm=o.armijo_max_step_norm,
    )
    export_front_csv(front, out / "front_raw.csv")
    export_front_csv(dominance_filter(front), out / "front.csv")
    if config.output.figures if figures is None else figures:
        from .plotting import plot_fronts

        plot_fronts({"traced": dominance_filter(front)}, out / "front.png")
    write_manifest(
        {
            "package_version": __version__,
            "config": config.to_dict(),
            "start": [float(x) for x in params_to_flat(start)],
            "weights": [float(w) for w in weights],
            "n_converged": sum(p.converged for p in front),
        },
        out / "trace_manifest.json",
    )
    return front


def check_config(config: ProblemConfig) -> list[tuple[str, bool, str]]:
    """Cheap invariants of a configuration: initial shape, mesh, gradient."""
    results = []

    def record(name, fn):
        try:
            ok, msg = fn()
        except (ConfigError, *NUMERICAL_ERRORS, ValueError) as exc:
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), msg))

    problem = ShapeProblem.from_config(config)
    state: dict = {}

    def initial():
        state["q0"] = params_to_flat(build_initial_shape(config))
        j3 = problem.j3(state["q0"])
        return j3 == 0.0, f"J3(q0) = {j3:g}"

    def mesh():
        m = problem.mesh(state["q0"])
        a = m.signed_areas()
        return bool(np.all(a > 0)), f"{len(m.nodes)} nodes, {len(m.triangles)} triangles, min area {a.min():.3g}"

    def gradient():
        q = state["q0"]
        g = problem.gradient(q)
        h = 1e-6 * np.maximum(np.abs(q), 1.0)
        fd = np.array([(problem.value(q + h[i] * e) - problem.value(q - h[i] * e)) / (2 * h[i])
                       for i, e in enumerate(np.eye(len(q)))])
        err = float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)))
        return err <= 1e-4, f"max relative error vs central differences {err:.2e}"

    def hamiltonian():
        p = hamiltonian_params(config)
        return p.steps == config.optimizer.steps, f"{p.steps} steps, dt = {p.dt:g}"

    record("initial_shape", initial)
    if "q0" in state:
        record("mesh", mesh)
        record("gradient", gradient)
    record("hamiltonian_params", hamiltonian)
    return results
