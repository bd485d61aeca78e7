"""Problem configuration: dataclasses, TOML parsing and the initial shape rule."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .fem import BoundaryLoads, MaterialParams
from .geometry import ObstacleCircle, shape_circle_area
from .objectives import DEFAULT_ANGLES, ObjectiveWeights
from .spline_geometry import (
    BSplineBasis,
    ShapeMapper,
    ShapeParams,
    basis_matrix,
    default_free_mask,
)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; ``field`` names the culprit."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class GeometryConfig:
    length: float = 1.0
    boundary_height: float = 0.2
    left_bottom: float = 0.0
    right_offset: float = 0.0
    n_x: int = 41
    n_y: int = 7
    n_basis: int = 5
    degree: int = 3
    max_height: float = 1.0


@dataclass(frozen=True)
class InitialShapeConfig:
    rule: str = "lift"
    margin: float = 0.01
    coefficients: tuple[float, ...] | None = None


@dataclass(frozen=True)
class OptimizerConfig:
    mode: str = "both"
    mass: float = 10.0
    friction: float = 100.0
    kappa: float = 1e-3
    horizon: float = 1.0
    steps: int = 250
    friction_exponent: int = 2
    gd_tol: float = 1e-5
    gd_max_iter: int = 200
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_initial_step: float = 1.0
    armijo_max_backtracks: int = 50
    # cap on the first trial step length |s g|; None keeps the plain rule
    armijo_max_step_norm: float | None = None
    store_every: int = 1

    @property
    def dt(self) -> float:
        return self.horizon / self.steps


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_every: int = 10
    svg: bool = True
    figures: bool = True


@dataclass(frozen=True)
class TraceConfig:
    n_weights: int = 21
    w_min: float = 0.05
    w_max: float = 0.95
    tol: float = 1e-5
    max_iter: int = 200


@dataclass(frozen=True)
class ProblemConfig:
    name: str = "problem"
    material: MaterialParams = field(default_factory=MaterialParams)
    loads: BoundaryLoads = field(default_factory=BoundaryLoads)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    obstacle: ObstacleCircle = field(default_factory=lambda: ObstacleCircle((0.5, 0.26), 0.05))
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    n_angles: int = DEFAULT_ANGLES
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    initial_shape: InitialShapeConfig = field(default_factory=InitialShapeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)

    def basis(self) -> BSplineBasis:
        return BSplineBasis.clamped_uniform(self.geometry.n_basis, self.geometry.degree)

    def mapper(self) -> ShapeMapper:
        g = self.geometry
        return ShapeMapper(self.basis(), g.n_x, g.n_y, g.length)

    def boundary_meanlines(self) -> tuple[float, float]:
        g = self.geometry
        left = g.left_bottom + 0.5 * g.boundary_height
        return left, left + g.right_offset

    def pinned_template(self) -> ShapeParams:
        """Straight shape between the two boundary segments.

        Linear meanline via Greville abscissae, constant thickness; only the
        pinned (end) coefficients of the template matter to the optimizer.
        """
        basis = self.basis()
        left, right = self.boundary_meanlines()
        grev = greville(basis)
        q_ml = left + (right - left) * grev
        q_th = np.full(basis.n_basis, self.geometry.boundary_height)
        return ShapeParams(q_ml, q_th, default_free_mask(basis.n_basis))

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["obstacle"] = {"midpoint": list(self.obstacle.midpoint), "radius": self.obstacle.radius}
        return _plain(d)


def greville(basis: BSplineBasis) -> np.ndarray:
    p = basis.degree
    t = basis.knots
    return np.array([t[j + 1 : j + p + 1].mean() for j in range(basis.n_basis)])


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def build_initial_shape(config: ProblemConfig) -> ShapeParams:
    """Starting shape that clears the top of the obstacle.

    ``rule = "lift"``: the interior meanline coefficients of the straight
    template are raised by a common amount, the smallest one for which the
    lower boundary stays ``margin`` above the top of the circle over its
    x-extent.  ``rule = "coefficients"`` takes the free coefficients verbatim.
    """
    init = config.initial_shape
    template = config.pinned_template()
    if init.rule == "coefficients":
        if init.coefficients is None:
            raise ConfigError("rule 'coefficients' needs a coefficient list", "initial_shape.coefficients")
        from .spline_geometry import flat_to_params

        try:
            return flat_to_params(np.asarray(init.coefficients, dtype=float), template)
        except ValueError as exc:
            raise ConfigError(str(exc), "initial_shape.coefficients") from exc
    if init.rule == "straight":
        return template
    if init.rule != "lift":
        raise ConfigError(f"unknown rule {init.rule!r}", "initial_shape.rule")

    g = config.geometry
    circ = config.obstacle
    (cx, cy), r = circ.midpoint, circ.radius
    clearance = cy + r + init.margin
    x0, x1 = max(cx - r, 0.0), min(cx + r, g.length)
    if x0 >= x1:
        # obstacle outside the shape's x-range never intersects it
        return template
    mapper = config.mapper()
    xs = np.union1d(np.linspace(x0, x1, 201), mapper.x[(mapper.x >= x0) & (mapper.x <= x1)])
    B = basis_matrix(config.basis(), xs / g.length)
    lift_dir = template.free_mask[0].astype(float)
    base_lower = B @ template.q_ml - 0.5 * (B @ template.q_th)
    gain = B @ lift_dir
    if np.any(gain <= 0):
        raise ConfigError("obstacle footprint is not controlled by free meanline coefficients", "obstacle")
    lift = max(0.0, float(np.max((clearance - base_lower) / gain)))
    params = ShapeParams(template.q_ml + lift * lift_dir, template.q_th, template.free_mask)
    mesh = mapper.mesh(params)
    top = mesh.nodes[:, 1].max()
    if top > g.max_height:
        raise ConfigError(
            f"clearing the obstacle needs the shape to reach y={top:.3g} > max_height={g.max_height}",
            "obstacle",
        )
    if shape_circle_area(mesh, circ) != 0.0:
        raise ConfigError("constructed initial shape intersects the obstacle", "initial_shape.margin")
    return params


# --- TOML parsing -----------------------------------------------------------

_SECTIONS = {
    "geometry": GeometryConfig,
    "initial_shape": InitialShapeConfig,
    "optimizer": OptimizerConfig,
    "output": OutputConfig,
    "trace": TraceConfig,
}


def _build(cls, section: str, data: dict):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", section)
    kwargs = {}
    for key, val in data.items():
        default = names[key].default
        if isinstance(val, list):
            val = tuple(val)
        elif isinstance(default, bool) and not isinstance(val, bool):
            raise ConfigError(f"expected a boolean, got {val!r}", f"{section}.{key}")
        elif isinstance(default, float) and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        elif isinstance(default, int) and not isinstance(default, bool) and not isinstance(val, int):
            raise ConfigError(f"expected an integer, got {val!r}", f"{section}.{key}")
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), section) from exc


def _require(data: dict, key: str, section: str):
    if key not in data:
        raise ConfigError("missing required field", f"{section}.{key}")
    return data[key]


def config_from_dict(data: dict) -> ProblemConfig:
    data = dict(data)
    kwargs: dict[str, Any] = {"name": str(data.pop("name", "problem"))}
    if "obstacle" not in data and "obstacles" not in data:
        raise ConfigError("missing required section", "obstacle")
    if "obstacles" in data:
        obstacles = data.pop("obstacles")
        if len(obstacles) != 1:
            raise ConfigError("exactly one obstacle is supported", "obstacles")
        data["obstacle"] = obstacles[0]
    obs = data.pop("obstacle")
    try:
        kwargs["obstacle"] = ObstacleCircle(
            tuple(_require(obs, "midpoint", "obstacle")), float(_require(obs, "radius", "obstacle"))
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "obstacle") from exc

    if "material" in data:
        mat = data.pop("material")
        try:
            kwargs["material"] = MaterialParams(**{k: float(v) for k, v in mat.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "material") from exc
    if "loads" in data:
        loads = data.pop("loads")
        try:
            kwargs["loads"] = BoundaryLoads(**{k: tuple(float(x) for x in v) for k, v in loads.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "loads") from exc
    if "weights" in data:
        w = data.pop("weights")
        try:
            kwargs["weights"] = ObjectiveWeights(
                tuple(_require(w, "lam", "weights")), float(w.get("c_penalty", 100.0))
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "weights") from exc
    if "n_angles" in data:
        kwargs["n_angles"] = int(data.pop("n_angles"))
    for section, cls in _SECTIONS.items():
        if section in data:
            kwargs[section] = _build(cls, section, data.pop(section))
    if data:
        raise ConfigError(f"unknown section(s) {sorted(data)}")
    cfg = ProblemConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: ProblemConfig) -> None:
    opt = cfg.optimizer
    if opt.mode not in ("gd", "hamiltonian", "both"):
        raise ConfigError(f"unknown mode {opt.mode!r}", "optimizer.mode")
    if opt.friction_exponent not in (1, 2):
        raise ConfigError("must be 1 or 2", "optimizer.friction_exponent")
    for name in ("mass", "friction", "horizon"):
        if not getattr(opt, name) > 0:
            raise ConfigError("must be positive", f"optimizer.{name}")
    if opt.kappa < 0:
        raise ConfigError("must be non-negative", "optimizer.kappa")
    if opt.armijo_max_step_norm is not None and not opt.armijo_max_step_norm > 0:
        raise ConfigError("must be positive", "optimizer.armijo_max_step_norm")
    if opt.steps < 1:
        raise ConfigError("must be at least 1", "optimizer.steps")
    g = cfg.geometry
    if g.n_x < 2 or g.n_y < 2:
        raise ConfigError("mesh needs at least 2x2 nodes", "geometry")
    if g.boundary_height <= 0 or g.length <= 0:
        raise ConfigError("length and boundary_height must be positive", "geometry")
    if g.n_basis <= g.degree:
        raise ConfigError("n_basis must exceed degree", "geometry.n_basis")
    if cfg.n_angles < 4:
        raise ConfigError("need at least 4 angles", "n_angles")


def load_config(path: str | Path) -> ProblemConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def replace(cfg: ProblemConfig, **sections) -> ProblemConfig:
    """Copy of ``cfg`` with whole sections or nested keys replaced.

    ``replace(cfg, optimizer={"friction": 10.0})`` updates one key.
    """
    kwargs = {}
    for name, val in sections.items():
        if isinstance(val, dict):
            val = dataclasses.replace(getattr(cfg, name), **val)
        kwargs[name] = val
    return dataclasses.replace(cfg, **kwargs)
