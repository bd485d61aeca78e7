"""Shape optimization of 2D elastic rods with obstacles via dissipative Hamiltonian flows."""
__version__ = "0.1.0"

from .config import ConfigError, ProblemConfig, build_initial_shape, load_config  # noqa: E402
from .fem import BoundaryLoads, MaterialParams  # noqa: E402
from .geometry import ObstacleCircle  # noqa: E402
from .objectives import ObjectiveWeights, ShapeProblem  # noqa: E402
from .spline_geometry import ShapeParams  # noqa: E402

__all__ = [
    "BoundaryLoads",
    "ConfigError",
    "MaterialParams",
    "ObjectiveWeights",
    "ObstacleCircle",
    "ProblemConfig",
    "ShapeParams",
    "ShapeProblem",
    "build_initial_shape",
    "load_config",
]
