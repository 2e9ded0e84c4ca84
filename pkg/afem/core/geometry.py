"""L-shaped domain geometry and boundary segment classification."""

import numpy as np
from numpy.typing import NDArray

from afem.core.constants import Segment, Tolerances

SEGMENT_ORDER: list[Segment] = list(Segment)

# Counterclockwise traversal of the boundary of [-1,1]^2 \ ([0,1] x [-1,0])
LSHAPE_SEGMENTS: dict[Segment, tuple[tuple[float, float], tuple[float, float]]] = {
    Segment.BOTTOM: ((-1.0, -1.0), (0.0, -1.0)),
    Segment.REENTRANT_VERTICAL: ((0.0, -1.0), (0.0, 0.0)),
    Segment.REENTRANT_HORIZONTAL: ((0.0, 0.0), (1.0, 0.0)),
    Segment.RIGHT: ((1.0, 0.0), (1.0, 1.0)),
    Segment.TOP: ((1.0, 1.0), (-1.0, 1.0)),
    Segment.LEFT: ((-1.0, 1.0), (-1.0, -1.0)),
}


def segment_code(segment: Segment) -> int:
    return SEGMENT_ORDER.index(segment)


def classify_points(points: NDArray[np.float64], tol: float = 1e-9) -> NDArray[np.int64]:
    """Map points to the code of the L-shape boundary segment containing them.

    Args:
        points: Array of shape (n, 2)
        tol: Distance tolerance

    Returns:
        Segment codes, -1 for points on no segment
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    codes = np.full(len(points), -1, dtype=np.int64)
    for code, segment in enumerate(SEGMENT_ORDER):
        (x0, y0), (x1, y1) = LSHAPE_SEGMENTS[segment]
        a = np.array([x0, y0])
        d = np.array([x1 - x0, y1 - y0])
        rel = points - a
        t = rel @ d / (d @ d)
        dist = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / np.hypot(*d)
        on = (dist <= tol) & (t >= -tol) & (t <= 1 + tol) & (codes < 0)
        codes[on] = code
    return codes


def inside_lshape(points: NDArray[np.float64], tol: float = Tolerances.GEOMETRY) -> NDArray[np.bool_]:
    """Membership test for the closed L-shaped domain."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = points[:, 0], points[:, 1]
    in_square = (x >= -1 - tol) & (x <= 1 + tol) & (y >= -1 - tol) & (y <= 1 + tol)
    in_notch = (x > tol) & (y < -tol)
    return in_square & ~in_notch
