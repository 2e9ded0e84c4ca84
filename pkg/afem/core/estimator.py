"""Residual a posteriori error indicators and data oscillation.

For P1 elements with element-wise constant conductivity the interior strong residual
vanishes, so both quantities reduce to edge terms. Every edge F carries a jump J_F:

    interior:  [sigma grad u . n_F]   (side 0 minus side 1, n_F pointing out of side 0)
    Gamma0:    sigma grad u . n
    GammaA:    g - sigma grad u . n
    GammaC:    f(u) + sigma grad u . n

and an element T collects

    eta_T^2 = sum_F c_F h_T ||J_F||^2,        c_F = 1/2 on interior edges, 1 on the boundary
    osc_T^2 = sum_F h_T ||J_F - P J_F||^2

with P the L2 projection onto P3 on cubic-law cathode edges and onto constants elsewhere.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from afem.core.assembly import FeFunction, FloatArray, IntArray, check_bound, edge_samples, flux_samples
from afem.core.constants import BoundaryLabel, QuadraturePoints
from afem.core.mesh import Mesh
from afem.core.quadrature import QuadratureRule, edge_gauss_rule, legendre_projection
from afem.exceptions import ValidationError
from afem.models.problem import ProblemSpec

logger = logging.getLogger(__name__)

INDICATOR_CSV_FIELDS = ["element_id", "eta_sq", "osc_sq"]


@dataclass(frozen=True, eq=False)
class IndicatorField:
    """Per-element squared indicators and oscillations of one mesh generation."""

    mesh_generation: int
    eta_sq: FloatArray
    osc_sq: FloatArray

    def __len__(self) -> int:
        return len(self.eta_sq)

    @property
    def eta_sq_sum(self) -> float:
        return global_indicator(self)[0]

    @property
    def osc_sq_sum(self) -> float:
        return global_indicator(self)[1]

    def rows(self) -> list[dict[str, str]]:
        """Rows for the indicator CSV."""
        return [
            {"element_id": str(t), "eta_sq": repr(float(eta)), "osc_sq": repr(float(osc))}
            for t, (eta, osc) in enumerate(zip(self.eta_sq, self.osc_sq, strict=True))
        ]


@dataclass(frozen=True, eq=False)
class EdgeResidual:
    """Jump J_F sampled at Gauss points on a group of edges sharing one label."""

    label: BoundaryLabel
    edge_ids: IntArray
    points: FloatArray  # (ne, nq, 2)
    weights: FloatArray  # (ne, nq), includes the edge length
    values: FloatArray  # (ne, nq)
    rule: QuadratureRule
    projection_degree: int

    def norm_sq(self) -> FloatArray:
        return np.einsum("eq,eq->e", self.weights, self.values**2)

    def projected(self) -> FloatArray:
        return legendre_projection(self.values, self.rule, self.projection_degree)

    def deviation_sq(self) -> FloatArray:
        deviation = self.values - self.projected()
        return np.einsum("eq,eq->e", self.weights, deviation**2)


def edge_normals(mesh: Mesh, edge_ids: IntArray) -> FloatArray:
    """Unit normals pointing out of each edge's first adjacent triangle (outward on the boundary)."""
    a = mesh.vertices[mesh.edges[edge_ids, 0]]
    d = mesh.vertices[mesh.edges[edge_ids, 1]] - a
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / mesh.edge_lengths[edge_ids][:, None]
    owner = mesh.edge_triangles[edge_ids, 0]
    centroids = mesh.vertices[mesh.triangles[owner]].mean(axis=1)
    inward = np.einsum("ij,ij->i", centroids - a, normals) > 0
    normals[inward] *= -1.0
    return normals


def _normal_flux(mesh: Mesh, u: FeFunction, triangles: IntArray, normals: FloatArray) -> FloatArray:
    grads = np.einsum("tik,ti->tk", mesh.gradients[triangles], u.coeffs[mesh.triangles[triangles]])
    return mesh.sigma[triangles] * np.einsum("tk,tk->t", grads, normals)


def _cathode_points(spec: ProblemSpec) -> int:
    # the squared cubic-law jump has degree 6 along an edge
    return max(spec.gamma_c_points, QuadraturePoints.TRANSCENDENTAL)


def edge_residuals(
    mesh: Mesh, spec: ProblemSpec, u: FeFunction, edge_ids: IntArray | None = None
) -> list[EdgeResidual]:
    """Jumps on the given edges (all edges by default), grouped by label in code order."""
    check_bound(mesh, u)
    if edge_ids is None:
        edge_ids = np.arange(mesh.n_edges)
    edge_ids = np.asarray(edge_ids, dtype=np.int64)
    labels = mesh.edge_labels[edge_ids]
    groups: list[EdgeResidual] = []

    for label in BoundaryLabel:
        ids = edge_ids[labels == label.code]
        if ids.size == 0:
            continue
        normals = edge_normals(mesh, ids)
        flux_out = _normal_flux(mesh, u, mesh.edge_triangles[ids, 0], normals)

        if label in (BoundaryLabel.INTERIOR, BoundaryLabel.GAMMA0):
            rule = edge_gauss_rule(1)
            samples = edge_samples(mesh, ids, 1)
            jump = flux_out
            if label == BoundaryLabel.INTERIOR:
                jump = flux_out - _normal_flux(mesh, u, mesh.edge_triangles[ids, 1], normals)
            values = jump[:, None]
            degree = 0
        elif label == BoundaryLabel.GAMMA_A:
            rule = edge_gauss_rule(spec.gamma_a_points)
            samples, g = flux_samples(mesh, spec, ids, spec.gamma_a_points)
            values = g - flux_out[:, None]
            degree = 0
        else:
            n_points = _cathode_points(spec)
            rule = edge_gauss_rule(n_points)
            samples = edge_samples(mesh, ids, n_points)
            values = spec.law.f(samples.values(u.coeffs)) + flux_out[:, None]
            degree = spec.law.projection_degree

        groups.append(EdgeResidual(label, ids, samples.points, samples.weights, values, rule, degree))
    return groups


def edge_residual(mesh: Mesh, spec: ProblemSpec, u: FeFunction, edge_id: int) -> EdgeResidual:
    """Jump on a single edge."""
    if not 0 <= edge_id < mesh.n_edges:
        raise ValidationError("edge_id", edge_id, f"Edge id outside 0..{mesh.n_edges - 1}")
    return edge_residuals(mesh, spec, u, np.array([edge_id]))[0]


def _edge_weights(mesh: Mesh, edge_ids: IntArray) -> FloatArray:
    return np.where(mesh.edge_labels[edge_ids] == BoundaryLabel.INTERIOR.code, 0.5, 1.0)


def _edge_terms(mesh: Mesh, spec: ProblemSpec, u: FeFunction, edge_ids: IntArray) -> tuple[FloatArray, FloatArray]:
    norm_sq = np.zeros(mesh.n_edges)
    deviation_sq = np.zeros(mesh.n_edges)
    for group in edge_residuals(mesh, spec, u, edge_ids):
        norm_sq[group.edge_ids] = group.norm_sq()
        deviation_sq[group.edge_ids] = group.deviation_sq()
    return norm_sq, deviation_sq


def _collect(
    mesh: Mesh, triangles: IntArray, norm_sq: FloatArray, deviation_sq: FloatArray
) -> tuple[FloatArray, FloatArray]:
    edges = mesh.triangle_edges[triangles]
    weights = _edge_weights(mesh, edges.ravel()).reshape(edges.shape)
    h = mesh.h[triangles]
    eta_sq = h * (weights * norm_sq[edges]).sum(axis=1)
    osc_sq = h * deviation_sq[edges].sum(axis=1)
    return eta_sq, osc_sq


def interior_residual(mesh: Mesh, u: FeFunction) -> FloatArray:
    """div(sigma grad u) on each element, recomputed from the quadratic interpolant of u.

    The interpolant takes the vertex values and edge midpoint averages, so for P1 data
    every entry is zero up to rounding.
    """
    check_bound(mesh, u)
    grads = mesh.gradients
    gram = np.einsum("tik,tjk->tij", grads, grads)
    return 4.0 * mesh.sigma * np.einsum("ti,tij->t", u.coeffs[mesh.triangles], gram)


def _check_interior_residual(mesh: Mesh, u: FeFunction) -> None:
    residual = interior_residual(mesh, u)
    scale = float(np.max(np.abs(u.coeffs), initial=0.0)) * float(np.max(mesh.sigma / mesh.areas, initial=0.0))
    bound = 1e-9 * (1.0 + scale)
    worst = float(np.max(np.abs(residual), initial=0.0))
    assert worst <= bound, f"Interior residual {worst:.3e} exceeds {bound:.3e}"
    logger.debug(f"Interior residual of generation {mesh.generation}: max {worst:.3e}")


def estimate(mesh: Mesh, spec: ProblemSpec, u: FeFunction) -> IndicatorField:
    """Indicators and oscillations on every element."""
    if logger.isEnabledFor(logging.DEBUG):
        _check_interior_residual(mesh, u)
    norm_sq, deviation_sq = _edge_terms(mesh, spec, u, np.arange(mesh.n_edges))
    eta_sq, osc_sq = _collect(mesh, np.arange(mesh.n_triangles), norm_sq, deviation_sq)
    field = IndicatorField(mesh.generation, eta_sq, osc_sq)
    logger.debug(
        f"Estimated generation {mesh.generation}: sum eta^2={field.eta_sq_sum:.6e}, sum osc^2={field.osc_sq_sum:.6e}"
    )
    return field


def _check_triangle(mesh: Mesh, triangle: int) -> None:
    if not 0 <= triangle < mesh.n_triangles:
        raise ValidationError("triangle", triangle, f"Triangle id outside 0..{mesh.n_triangles - 1}")


def local_indicator(mesh: Mesh, spec: ProblemSpec, u: FeFunction, triangle: int) -> float:
    """eta_T^2 of a single element."""
    _check_triangle(mesh, triangle)
    edges = mesh.triangle_edges[triangle]
    norm_sq, deviation_sq = _edge_terms(mesh, spec, u, edges)
    return float(_collect(mesh, np.array([triangle]), norm_sq, deviation_sq)[0][0])


def local_oscillation(mesh: Mesh, spec: ProblemSpec, u: FeFunction, triangle: int) -> float:
    """osc_T^2 of a single element."""
    _check_triangle(mesh, triangle)
    edges = mesh.triangle_edges[triangle]
    norm_sq, deviation_sq = _edge_terms(mesh, spec, u, edges)
    return float(_collect(mesh, np.array([triangle]), norm_sq, deviation_sq)[1][0])


def global_indicator(field: IndicatorField, subset: Iterable[int] | IntArray | None = None) -> tuple[float, float]:
    """Sums of eta_T^2 and osc_T^2 over ``subset`` (all elements by default).

    Raises:
        ValidationError: If the subset holds ids outside the field
    """
    if subset is None:
        ids = np.arange(len(field))
    else:
        ids = np.unique(np.fromiter(subset, dtype=np.int64) if not isinstance(subset, np.ndarray) else subset)
        if ids.size and (ids[0] < 0 or ids[-1] >= len(field)):
            raise ValidationError("subset", None, f"Element ids must lie in 0..{len(field) - 1}")
    return math.fsum(field.eta_sq[ids]), math.fsum(field.osc_sq[ids])
