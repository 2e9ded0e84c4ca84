"""
Constants and enumerations shared across the toolkit.
"""

from enum import IntEnum

from afem._compat import StrEnum

MESH_HEADER = "afem-mesh v1"
FUNCTION_HEADER = "afem-fn v1"

# L-shaped domain area: [-1,1]^2 minus [0,1]x[-1,0]
LSHAPE_AREA = 3.0


class BoundaryLabel(StrEnum):
    """Edge classification of the boundary partition."""

    INTERIOR = "Interior"
    GAMMA0 = "Gamma0"
    GAMMA_A = "GammaA"
    GAMMA_C = "GammaC"

    @property
    def code(self) -> int:
        """Integer code used in per-edge label arrays."""
        return LABEL_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "BoundaryLabel":
        """Inverse of ``code``."""
        return _CODE_LABELS[code]


LABEL_CODES: dict[BoundaryLabel, int] = {
    BoundaryLabel.INTERIOR: 0,
    BoundaryLabel.GAMMA0: 1,
    BoundaryLabel.GAMMA_A: 2,
    BoundaryLabel.GAMMA_C: 3,
}
_CODE_LABELS = {code: label for label, code in LABEL_CODES.items()}


class RefinementMode(StrEnum):
    """How a marked element is bisected."""

    ALL_EDGES = "all-edges"
    SINGLE_EDGE = "single-edge"


class Segment(StrEnum):
    """Named straight pieces of the L-shaped boundary."""

    BOTTOM = "bottom"
    REENTRANT_VERTICAL = "reentrant_vertical"
    REENTRANT_HORIZONTAL = "reentrant_horizontal"
    RIGHT = "right"
    TOP = "top"
    LEFT = "left"


class FluxKind(StrEnum):
    """Closed-form anode current densities."""

    ZERO = "zero"
    CONSTANT = "constant"
    RADIAL = "radial"  # x^2 + y^2
    OSCILLATORY = "oscillatory"  # sin(20 y)
    TRIGONOMETRIC = "trigonometric"  # sin(x) + cos(y)


class QuadraturePoints(IntEnum):
    """Gauss-Legendre point counts on edges."""

    POLYNOMIAL = 3
    TRANSCENDENTAL = 7
    REFERENCE = 16
    MAX = 16


class SolverDefaults(IntEnum):
    """Iteration caps."""

    NEWTON_MAX_ITER = 50
    CG_CAP_FACTOR = 10
    MAX_ADAPTIVE_ITERATIONS = 200
    UNIFORM_LEVELS = 6
    MIN_FIT_POINTS = 6


class Tolerances:
    """Floating-point tolerances."""

    NEWTON_EPS = 1e-7
    REFERENCE_EPS = 1e-11
    CG_TOL = 1e-12
    GALERKIN = 1e-9
    GEOMETRY = 1e-12
    BUTLER_VOLMER_EXPONENT = 700.0


class BenchmarkTargets:
    """Reference observations for the benchmark configurations, shown next to observed values."""

    ITERATIONS: dict[tuple[int, float], int] = {(1, 0.1): 58, (1, 0.3): 24, (2, 0.1): 53, (2, 0.3): 22}
    SNAPSHOT_DOFS: dict[int, int] = {1: 3248, 2: 3070}
    SNAPSHOT_ERRORS: dict[int, float] = {1: 0.0648, 2: 0.0627}
    SLOPES: dict[tuple[int, float], tuple[float, float]] = {
        (1, 0.1): (-0.51, -0.54),
        (1, 0.3): (-0.50, -0.53),
        (2, 0.1): (-0.50, -0.56),
        (2, 0.3): (-0.51, -0.55),
    }
    UNIFORM_SLOPES: dict[int, float] = {1: -0.09, 2: -0.11}
    SLOPE_TOLERANCE: dict[int, float] = {1: 0.08, 2: 0.10}
    UNIFORM_SLOPE_TOLERANCE = 0.06
    EFFECTIVITY_BAND = 10.0
    CLOSURE_BOUND = 20.0
    SLOPE_AGREEMENT = 0.1
    ADAPTIVE_OVER_UNIFORM = 3.0
