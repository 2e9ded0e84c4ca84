"""P1 finite element assembly: residual, Jacobian, energy functional and norms."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from afem.core.constants import BoundaryLabel
from afem.core.geometry import SEGMENT_ORDER
from afem.core.mesh import Mesh
from afem.core.quadrature import edge_gauss_rule, triangle_rule
from afem.exceptions import MeshError, ValidationError
from afem.models.problem import ProblemSpec

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Nodal coefficients of a continuous piecewise-linear function on one mesh generation."""

    mesh_generation: int
    coeffs: FloatArray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.coeffs)):
            raise ValidationError("coeffs", None, "Finite element coefficients must be finite")

    def __len__(self) -> int:
        return len(self.coeffs)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "FeFunction":
        return cls(mesh.generation, np.zeros(mesh.n_vertices))

    @classmethod
    def from_values(cls, mesh: Mesh, values: ArrayLike) -> "FeFunction":
        coeffs = np.asarray(values, dtype=float).reshape(-1)
        function = cls(mesh.generation, coeffs)
        check_bound(mesh, function)
        return function

    @classmethod
    def interpolant(cls, mesh: Mesh, fn: Callable[[FloatArray, FloatArray], FloatArray]) -> "FeFunction":
        """Nodal interpolant of a callable ``fn(x, y)``."""
        values = fn(mesh.vertices[:, 0], mesh.vertices[:, 1])
        return cls(mesh.generation, np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_vertices,)).copy())


def check_bound(mesh: Mesh, u: FeFunction) -> None:
    """Ensure ``u`` belongs to ``mesh``."""
    if u.mesh_generation != mesh.generation or len(u.coeffs) != mesh.n_vertices:
        raise ValidationError(
            "u",
            (u.mesh_generation, len(u.coeffs)),
            f"Function bound to generation {u.mesh_generation} with {len(u.coeffs)} values does not match "
            f"mesh generation {mesh.generation} with {mesh.n_vertices} vertices",
        )


def element_stiffness(vertices: ArrayLike, sigma: float = 1.0) -> FloatArray:
    """Exact P1 stiffness matrix sigma * |T| * grad(phi_i) . grad(phi_j) of one triangle."""
    p = np.asarray(vertices, dtype=float).reshape(3, 2)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    twice_area = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(twice_area) <= 1e-300:
        raise MeshError("Degenerate triangle has zero area", {"vertices": p.tolist()})
    grads = np.empty((3, 2))
    for i in range(3):
        a, b = p[(i + 1) % 3], p[(i + 2) % 3]
        grads[i] = (a[1] - b[1], b[0] - a[0])
    grads /= twice_area
    return sigma * 0.5 * abs(twice_area) * grads @ grads.T


def element_stiffness_all(mesh: Mesh, sigma: FloatArray | None = None) -> FloatArray:
    """Element stiffness matrices of every triangle, shape (nt, 3, 3)."""
    weights = mesh.areas if sigma is None else sigma * mesh.areas
    return np.einsum("t,tik,tjk->tij", weights, mesh.gradients, mesh.gradients)


def _assemble_matrix(mesh: Mesh, rows: IntArray, cols: IntArray, values: FloatArray) -> sparse.csr_matrix:
    n = mesh.n_vertices
    return sparse.coo_matrix((values.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def _element_pattern(mesh: Mesh) -> tuple[IntArray, IntArray]:
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    return rows, cols


def stiffness_matrix(mesh: Mesh, with_sigma: bool = True) -> sparse.csr_matrix:
    rows, cols = _element_pattern(mesh)
    local = element_stiffness_all(mesh, mesh.sigma if with_sigma else None)
    return _assemble_matrix(mesh, rows, cols, local.reshape(mesh.n_triangles, 9))


def mass_matrix(mesh: Mesh) -> sparse.csr_matrix:
    rows, cols = _element_pattern(mesh)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    values = mesh.areas[:, None] * local.ravel()[None, :]
    return _assemble_matrix(mesh, rows, cols, values)


def h1_gram(mesh: Mesh) -> sparse.csr_matrix:
    """Gram matrix of the H1 inner product on the P1 space."""
    return stiffness_matrix(mesh, with_sigma=False) + mass_matrix(mesh)


@dataclass(frozen=True)
class EdgeSamples:
    """Gauss samples on a group of boundary edges."""

    edge_ids: IntArray
    endpoints: IntArray  # (ne, 2)
    points: FloatArray  # (ne, nq, 2)
    phi: FloatArray  # (nq, 2) traces of the two endpoint hat functions
    weights: FloatArray  # (ne, nq), includes the edge length

    def values(self, u: FloatArray) -> FloatArray:
        return u[self.endpoints] @ self.phi.T


def edge_samples(mesh: Mesh, edge_ids: IntArray, n_points: int) -> EdgeSamples:
    rule = edge_gauss_rule(n_points)
    t = rule.points
    endpoints = mesh.edges[edge_ids]
    a = mesh.vertices[endpoints[:, 0]]
    b = mesh.vertices[endpoints[:, 1]]
    points = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    phi = np.stack([1.0 - t, t], axis=1)
    weights = mesh.edge_lengths[edge_ids][:, None] * rule.weights[None, :]
    return EdgeSamples(edge_ids, endpoints, points, phi, weights)


def flux_samples(mesh: Mesh, spec: ProblemSpec, edge_ids: IntArray, n_points: int) -> tuple[EdgeSamples, FloatArray]:
    """Samples on anode edges together with g at the sample points."""
    samples = edge_samples(mesh, edge_ids, n_points)
    g = np.zeros(samples.points.shape[:2])
    segments = mesh.edge_segments[edge_ids]
    for code, segment in enumerate(SEGMENT_ORDER):
        rows = np.flatnonzero(segments == code)
        if rows.size:
            g[rows] = spec.flux.evaluate(segment, samples.points[rows, :, 0], samples.points[rows, :, 1])
    unknown = np.flatnonzero(segments < 0)
    if unknown.size:
        g[unknown] = spec.flux.evaluate_default(samples.points[unknown, :, 0], samples.points[unknown, :, 1])
    return samples, g


def _scatter(mesh: Mesh, endpoints: IntArray, local: FloatArray) -> FloatArray:
    return np.bincount(endpoints.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def assemble_load(mesh: Mesh, spec: ProblemSpec) -> FloatArray:
    """Anode load vector: integral of g * phi_i over Gamma_A."""
    anode = mesh.edges_with_label(BoundaryLabel.GAMMA_A)
    if anode.size == 0:
        return np.zeros(mesh.n_vertices)
    samples, g = flux_samples(mesh, spec, anode, spec.gamma_a_points)
    local = (samples.weights * g) @ samples.phi
    return _scatter(mesh, samples.endpoints, local)


def _stiffness_action(mesh: Mesh, u: FloatArray) -> FloatArray:
    local = np.einsum("tij,tj->ti", element_stiffness_all(mesh, mesh.sigma), u[mesh.triangles])
    return _scatter(mesh, mesh.triangles, local)


def assemble_residual(mesh: Mesh, spec: ProblemSpec, u: FeFunction) -> FloatArray:
    """G(u)_i = (sigma grad u, grad phi_i) + (f(u), phi_i)_{Gamma_C} - (g, phi_i)_{Gamma_A}."""
    check_bound(mesh, u)
    residual = _stiffness_action(mesh, u.coeffs)

    cathode = mesh.edges_with_label(BoundaryLabel.GAMMA_C)
    if cathode.size:
        samples = edge_samples(mesh, cathode, spec.gamma_c_points)
        local = (samples.weights * spec.law.f(samples.values(u.coeffs))) @ samples.phi
        residual += _scatter(mesh, samples.endpoints, local)

    residual -= assemble_load(mesh, spec)
    return residual


def assemble_jacobian(mesh: Mesh, spec: ProblemSpec, u: FeFunction) -> sparse.csr_matrix:
    """Stiffness plus the cathode term (f'(u) phi_i, phi_j)_{Gamma_C}."""
    check_bound(mesh, u)
    rows, cols = _element_pattern(mesh)
    values = element_stiffness_all(mesh, mesh.sigma).reshape(mesh.n_triangles, 9)

    cathode = mesh.edges_with_label(BoundaryLabel.GAMMA_C)
    if cathode.size:
        samples = edge_samples(mesh, cathode, spec.gamma_c_points)
        slope = spec.law.f_prime(samples.values(u.coeffs)) * samples.weights
        local = np.einsum("eq,qi,qj->eij", slope, samples.phi, samples.phi).reshape(-1, 4)
        rows = np.concatenate([rows.ravel(), np.repeat(samples.endpoints, 2, axis=1).ravel()])
        cols = np.concatenate([cols.ravel(), np.tile(samples.endpoints, (1, 2)).ravel()])
        values = np.concatenate([values.ravel(), local.ravel()])

    return _assemble_matrix(mesh, rows, cols, values)


def energy_functional(mesh: Mesh, spec: ProblemSpec, u: FeFunction) -> float:
    """J(u) = 1/2 (sigma grad u, grad u) + int_{Gamma_C} F(u) - int_{Gamma_A} g u."""
    check_bound(mesh, u)
    energy = 0.5 * float(u.coeffs @ _stiffness_action(mesh, u.coeffs))

    cathode = mesh.edges_with_label(BoundaryLabel.GAMMA_C)
    if cathode.size:
        samples = edge_samples(mesh, cathode, spec.gamma_c_points)
        energy += math.fsum((samples.weights * spec.law.antiderivative(samples.values(u.coeffs))).ravel())

    energy -= float(assemble_load(mesh, spec) @ u.coeffs)
    return energy


def element_gradients(mesh: Mesh, u: FeFunction) -> FloatArray:
    """Constant gradient of u on every triangle, shape (nt, 2)."""
    return np.einsum("tik,ti->tk", mesh.gradients, u.coeffs[mesh.triangles])


def h1_seminorm_sq(mesh: Mesh, u: FeFunction) -> float:
    check_bound(mesh, u)
    grads = element_gradients(mesh, u)
    return math.fsum(mesh.areas * np.einsum("tk,tk->t", grads, grads))


def l2_norm_sq(mesh: Mesh, u: FeFunction) -> float:
    check_bound(mesh, u)
    rule = triangle_rule(2)
    values = u.coeffs[mesh.triangles] @ rule.points.T  # (nt, nq)
    return math.fsum(2.0 * mesh.areas * (values**2 @ rule.weights))


def h1_norm_sq(mesh: Mesh, u: FeFunction) -> float:
    return h1_seminorm_sq(mesh, u) + l2_norm_sq(mesh, u)


def flux_l2_norm_sq(mesh: Mesh, spec: ProblemSpec) -> float:
    """Squared L2(Gamma_A) norm of the anode data."""
    anode = mesh.edges_with_label(BoundaryLabel.GAMMA_A)
    if anode.size == 0:
        return 0.0
    samples, g = flux_samples(mesh, spec, anode, spec.gamma_a_points)
    return math.fsum((samples.weights * g**2).ravel())
