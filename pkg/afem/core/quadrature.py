"""Quadrature rules on the unit segment and the reference triangle."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from numpy.typing import NDArray

from afem.core.constants import QuadraturePoints
from afem.exceptions import QuadratureError

FloatArray = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points and positive weights.

    Segment rules hold abscissae in [0, 1]; triangle rules hold barycentric triples
    and weights summing to the reference area 1/2.
    """

    points: FloatArray
    weights: FloatArray
    degree: int

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def edge_gauss_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for polynomials of degree 2n-1."""
    if not 1 <= n_points <= QuadraturePoints.MAX:
        raise QuadratureError(f"Unsupported Gauss-Legendre order {n_points}", {"n_points": n_points})
    x, w = legendre.leggauss(n_points)
    return QuadratureRule(points=0.5 * (x + 1.0), weights=0.5 * w, degree=2 * n_points - 1)


# Symmetric rules on the reference triangle, as (barycentric points, weights summing to 1)
_TRIANGLE_RULES: dict[int, tuple[list[list[float]], list[float]]] = {
    1: ([[1 / 3, 1 / 3, 1 / 3]], [1.0]),
    2: ([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]], [1 / 3, 1 / 3, 1 / 3]),
}


def _strang_fix_degree5() -> tuple[FloatArray, FloatArray]:
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    points = [[1 / 3, 1 / 3, 1 / 3]]
    for a, b in ((a1, b1), (a2, b2)):
        points += [[a, b, b], [b, a, b], [b, b, a]]
    w0, w1, w2 = 0.225, 0.132394152788506, 0.125939180544827
    weights = [w0] + [w1] * 3 + [w2] * 3
    return np.array(points), np.array(weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Symmetric rule on the reference triangle exact up to ``degree`` (1, 2 or 5)."""
    if degree in _TRIANGLE_RULES:
        points, weights = _TRIANGLE_RULES[degree]
        return QuadratureRule(np.array(points), 0.5 * np.array(weights), degree)
    if degree in (3, 4, 5):
        # positive weights only, so degrees 3 and 4 share the 7-point rule
        points, weights = _strang_fix_degree5()
        return QuadratureRule(points, 0.5 * weights, 5)
    raise QuadratureError(f"Unsupported triangle rule degree {degree}", {"degree": degree})


def legendre_projection(values: FloatArray, rule: QuadratureRule, degree: int) -> FloatArray:
    """L2(0,1) projection onto polynomials of ``degree``, evaluated at the rule's points.

    Args:
        values: Samples at the rule's points, shape (..., n_points)
        rule: Segment rule with more than ``degree`` points
        degree: Target polynomial degree

    Returns:
        Projected samples, same shape as ``values``
    """
    if rule.degree < 2 * degree:
        raise QuadratureError(
            f"{len(rule)}-point rule cannot project onto P{degree}", {"points": len(rule), "degree": degree}
        )
    basis = legendre.legvander(2.0 * rule.points - 1.0, degree)  # (n_points, degree+1)
    norms = 1.0 / (2.0 * np.arange(degree + 1) + 1.0)
    coeffs = (values * rule.weights) @ basis / norms
    return coeffs @ basis.T
