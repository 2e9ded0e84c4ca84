"""Tests for the residual indicators and data oscillation."""

import logging
import math

import numpy as np
import pytest
from numpy.polynomial import legendre

from afem.core.assembly import FeFunction
from afem.core.constants import BoundaryLabel, FluxKind, RefinementMode, Segment
from afem.core.estimator import (
    edge_residual,
    edge_residuals,
    estimate,
    global_indicator,
    interior_residual,
    local_indicator,
    local_oscillation,
)
from afem.core.mesh import Mesh, refine
from afem.core.quadrature import legendre_projection
from afem.core.solver import interpolate
from afem.exceptions import ValidationError
from afem.models.problem import BoundaryPartition, FluxData, ProblemSpec


def group(residuals, label):
    return next(g for g in residuals if g.label == label)


def find_edge(mesh: Mesh, a: tuple[float, float], b: tuple[float, float]) -> int:
    ia = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, a), axis=1))[0])
    ib = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, b), axis=1))[0])
    return int(np.flatnonzero((mesh.edges == sorted((ia, ib))).all(axis=1))[0])


def dense_indicators(mesh: Mesh, spec: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """eta_T^2 by looping over triangles and their edges with a 16-point rule."""
    x, w = legendre.leggauss(16)
    t, w = 0.5 * (x + 1.0), 0.5 * w
    eta_sq = np.zeros(mesh.n_triangles)
    for k, tri in enumerate(mesh.triangles):
        p = mesh.vertices[tri]
        d1, d2 = p[1] - p[0], p[2] - p[0]
        h = math.sqrt(0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0]))
        grad = np.linalg.solve(np.array([p[1] - p[0], p[2] - p[0]]), u[tri[1:]] - u[tri[0]])
        for i in range(3):
            a, b, c = tri[(i + 1) % 3], tri[(i + 2) % 3], tri[i]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            length = np.linalg.norm(pb - pa)
            normal = np.array([pb[1] - pa[1], pa[0] - pb[0]]) / length
            if (mesh.vertices[c] - pa) @ normal > 0:
                normal = -normal
            neighbors = [
                j for j, other in enumerate(mesh.triangles) if j != k and a in other and b in other
            ]
            if neighbors:
                q = mesh.vertices[mesh.triangles[neighbors[0]]]
                other = mesh.triangles[neighbors[0]]
                grad_n = np.linalg.solve(np.array([q[1] - q[0], q[2] - q[0]]), u[other[1:]] - u[other[0]])
                jump_sq = ((grad - grad_n) @ normal) ** 2 * length
                eta_sq[k] += 0.5 * h * jump_sq
                continue
            points = pa[None, :] + t[:, None] * (pb - pa)[None, :]
            u_q = (1 - t) * u[a] + t * u[b]
            if np.allclose([pa[0], pb[0]], -1.0):
                jump = spec.law.f(u_q) + grad @ normal
            else:
                jump = points[:, 0] ** 2 + points[:, 1] ** 2 - grad @ normal
            eta_sq[k] += h * length * (w @ jump**2)
    return eta_sq


def test_zero_data_gives_zero_indicators(initial_mesh, zero_data):
    field = estimate(initial_mesh, zero_data, FeFunction.zeros(initial_mesh))
    assert np.all(field.eta_sq == 0.0)
    assert np.all(field.osc_sq == 0.0)
    assert global_indicator(field) == (0.0, 0.0)


def test_linear_function_has_no_interior_jumps(initial_mesh, example1):
    u = FeFunction.interpolant(initial_mesh, lambda x, y: 1.0 + 2.0 * x - y)
    interior = group(edge_residuals(initial_mesh, example1, u), BoundaryLabel.INTERIOR)
    assert np.allclose(interior.values, 0.0, atol=1e-12)


def test_anode_residual_is_flux_at_zero(initial_mesh, example1):
    anode = group(edge_residuals(initial_mesh, example1, FeFunction.zeros(initial_mesh)), BoundaryLabel.GAMMA_A)
    expected = anode.points[..., 0] ** 2 + anode.points[..., 1] ** 2
    assert np.allclose(anode.values, expected, atol=1e-15)


def test_cathode_residual_vanishes_at_zero(initial_mesh, zero_data):
    cathode = group(edge_residuals(initial_mesh, zero_data, FeFunction.zeros(initial_mesh)), BoundaryLabel.GAMMA_C)
    assert np.all(cathode.values == 0.0)


def test_cathode_uses_cubic_projection(initial_mesh, example1, example2):
    u = FeFunction.zeros(initial_mesh)
    assert group(edge_residuals(initial_mesh, example1, u), BoundaryLabel.GAMMA_C).projection_degree == 3
    assert group(edge_residuals(initial_mesh, example2, u), BoundaryLabel.GAMMA_C).projection_degree == 0


def test_indicators_match_dense_oracle(coarse_mesh, example1, rng):
    u = rng.normal(size=coarse_mesh.n_vertices)
    field = estimate(coarse_mesh, example1, FeFunction.from_values(coarse_mesh, u))
    expected = dense_indicators(coarse_mesh, example1, u)
    assert np.allclose(field.eta_sq, expected, rtol=1e-10, atol=0.0)


def test_constant_flux_closed_form(coarse_mesh):
    spec = ProblemSpec(
        flux=FluxData(default=FluxKind.CONSTANT, constant=1.5),
        partition=BoundaryPartition(gamma_0=frozenset({Segment.LEFT})),
    )
    mesh = Mesh.from_arrays(
        coarse_mesh.vertices, coarse_mesh.triangles, coarse_mesh.ref_edges, partition=spec.partition
    )
    field = estimate(mesh, spec, FeFunction.zeros(mesh))
    anode = mesh.edge_labels[mesh.triangle_edges] == BoundaryLabel.GAMMA_A.code
    anode_length = (mesh.edge_lengths[mesh.triangle_edges] * anode).sum(axis=1)
    assert np.allclose(field.eta_sq, mesh.h * anode_length * 1.5**2)
    assert np.allclose(field.osc_sq, 0.0, atol=1e-28)


def test_oscillation_closed_form(coarse_mesh, example1):
    spec = example1.model_copy(update={"flux_points": 16})
    edge = find_edge(coarse_mesh, (-1.0, 1.0), (0.0, 1.0))
    residual = edge_residual(coarse_mesh, spec, FeFunction.zeros(coarse_mesh), edge)
    # g = x^2 + 1 on [-1, 0] x {1}: variance of x^2 over a unit interval is 1/5 - 1/9
    assert residual.deviation_sq()[0] == pytest.approx(4 / 45, abs=1e-13)


def test_projection_is_optimal_on_cathode(initial_mesh, example1, rng):
    u = FeFunction.from_values(initial_mesh, rng.normal(size=initial_mesh.n_vertices))
    cathode = group(edge_residuals(initial_mesh, example1, u), BoundaryLabel.GAMMA_C)
    constant = legendre_projection(cathode.values, cathode.rule, 0)
    quadratic = legendre_projection(cathode.values, cathode.rule, 2)
    for other in (constant, quadratic):
        other_sq = np.einsum("eq,eq->e", cathode.weights, (cathode.values - other) ** 2)
        assert np.all(cathode.deviation_sq() <= other_sq + 1e-14)


def test_reduction_under_uniform_refinement(coarse_mesh, example1, rng):
    u = FeFunction.from_values(coarse_mesh, rng.normal(size=coarse_mesh.n_vertices))
    fine = refine(coarse_mesh, np.arange(coarse_mesh.n_triangles), RefinementMode.ALL_EDGES)
    coarse_sum = estimate(coarse_mesh, example1, u).eta_sq_sum
    fine_sum = estimate(fine, example1, interpolate(u, fine)).eta_sq_sum
    assert fine_sum <= coarse_sum / math.sqrt(2.0) + 1e-12


def test_local_values_match_field(initial_mesh, example2, rng):
    mesh = Mesh.from_arrays(
        initial_mesh.vertices, initial_mesh.triangles, initial_mesh.ref_edges, partition=example2.partition
    )
    u = FeFunction.from_values(mesh, 0.1 * rng.normal(size=mesh.n_vertices))
    field = estimate(mesh, example2, u)
    for triangle in (0, 17, mesh.n_triangles - 1):
        assert local_indicator(mesh, example2, u, triangle) == pytest.approx(field.eta_sq[triangle], rel=1e-13)
        assert local_oscillation(mesh, example2, u, triangle) == pytest.approx(field.osc_sq[triangle], rel=1e-13)
    with pytest.raises(ValidationError):
        local_indicator(mesh, example2, u, mesh.n_triangles)


def test_osc_bounded_by_indicator(initial_mesh, example1, rng):
    u = FeFunction.from_values(initial_mesh, rng.normal(size=initial_mesh.n_vertices))
    field = estimate(initial_mesh, example1, u)
    # c_F >= 1/2 and projections do not increase norms
    assert np.all(field.osc_sq <= 2.0 * field.eta_sq + 1e-14)


def test_interior_residual_vanishes(coarse_mesh, rng):
    u = FeFunction.from_values(coarse_mesh, rng.normal(size=coarse_mesh.n_vertices))
    residual = interior_residual(coarse_mesh, u)
    assert residual.shape == (coarse_mesh.n_triangles,)
    scale = np.max(np.abs(u.coeffs)) / np.min(coarse_mesh.areas)
    assert np.max(np.abs(residual)) <= 1e-10 * scale
    with pytest.raises(ValidationError):
        interior_residual(coarse_mesh, FeFunction.zeros(refine(coarse_mesh, [0], RefinementMode.ALL_EDGES)))


def test_estimate_checks_interior_residual_in_debug(initial_mesh, example1, rng, caplog):
    caplog.set_level(logging.DEBUG, logger="afem.core.estimator")
    u = FeFunction.from_values(initial_mesh, rng.normal(size=initial_mesh.n_vertices))
    field = estimate(initial_mesh, example1, u)
    assert field.eta_sq_sum > 0.0
    assert "Interior residual of generation" in caplog.text


class TestGlobalIndicator:
    def test_empty_subset(self, initial_mesh, example1):
        field = estimate(initial_mesh, example1, FeFunction.zeros(initial_mesh))
        assert global_indicator(field, []) == (0.0, 0.0)

    def test_full_subset(self, initial_mesh, example1):
        field = estimate(initial_mesh, example1, FeFunction.zeros(initial_mesh))
        eta, osc = global_indicator(field, range(len(field)))
        assert eta == pytest.approx(field.eta_sq.sum(), rel=1e-14)
        assert osc == pytest.approx(field.osc_sq.sum(), rel=1e-14)

    def test_rejects_unknown_ids(self, initial_mesh, example1):
        field = estimate(initial_mesh, example1, FeFunction.zeros(initial_mesh))
        with pytest.raises(ValidationError):
            global_indicator(field, [len(field)])
