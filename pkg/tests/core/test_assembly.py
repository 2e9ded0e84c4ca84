"""Tests for the residual, Jacobian, energy functional and norms."""

import numpy as np
import pytest
from numpy.polynomial import legendre

from afem.core.assembly import (
    FeFunction,
    assemble_jacobian,
    assemble_load,
    assemble_residual,
    element_stiffness,
    energy_functional,
    flux_l2_norm_sq,
    h1_norm_sq,
    h1_seminorm_sq,
    l2_norm_sq,
    mass_matrix,
    stiffness_matrix,
)
from afem.core.constants import FluxKind
from afem.core.mesh import Mesh
from afem.exceptions import MeshError, ValidationError
from afem.models.problem import FluxData, ProblemSpec


def gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def dense_residual(mesh: Mesh, spec: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """Element-by-element assembly with a 16-point rule on every boundary edge."""
    residual = np.zeros(mesh.n_vertices)
    for tri in mesh.triangles:
        local = element_stiffness(mesh.vertices[tri])
        residual[tri] += local @ u[tri]

    t, w = gauss(16)
    for e in mesh.boundary_edges:
        a, b = mesh.edges[e]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        length = np.linalg.norm(pb - pa)
        points = pa[None, :] + t[:, None] * (pb - pa)[None, :]
        u_q = (1 - t) * u[a] + t * u[b]
        if np.allclose([pa[0], pb[0]], -1.0):
            integrand = spec.law.f(u_q)
        else:
            integrand = -(points[:, 0] ** 2 + points[:, 1] ** 2)
        residual[a] += length * w @ (integrand * (1 - t))
        residual[b] += length * w @ (integrand * t)
    return residual


def test_unit_triangle_stiffness():
    expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert np.allclose(element_stiffness([[0, 0], [1, 0], [0, 1]]), expected, atol=1e-15)


def test_degenerate_triangle():
    with pytest.raises(MeshError):
        element_stiffness([[0, 0], [1, 1], [2, 2]])


def test_zero_data_gives_zero_residual(coarse_mesh, zero_data):
    residual = assemble_residual(coarse_mesh, zero_data, FeFunction.zeros(coarse_mesh))
    assert np.all(residual == 0.0)
    assert energy_functional(coarse_mesh, zero_data, FeFunction.zeros(coarse_mesh)) == 0.0


def test_residual_matches_dense_oracle(coarse_mesh, example1, rng):
    u = rng.normal(size=coarse_mesh.n_vertices)
    residual = assemble_residual(coarse_mesh, example1, FeFunction.from_values(coarse_mesh, u))
    expected = dense_residual(coarse_mesh, example1, u)
    assert np.linalg.norm(residual - expected) <= 1e-12 * np.linalg.norm(expected)


def test_jacobian_matches_finite_differences(coarse_mesh, example1, rng):
    u = rng.normal(size=coarse_mesh.n_vertices)
    jacobian = assemble_jacobian(coarse_mesh, example1, FeFunction.from_values(coarse_mesh, u)).toarray()
    step = 1e-6
    columns = []
    for j in range(coarse_mesh.n_vertices):
        e = np.zeros_like(u)
        e[j] = step
        plus = assemble_residual(coarse_mesh, example1, FeFunction.from_values(coarse_mesh, u + e))
        minus = assemble_residual(coarse_mesh, example1, FeFunction.from_values(coarse_mesh, u - e))
        columns.append((plus - minus) / (2 * step))
    fd = np.stack(columns, axis=1)
    assert np.linalg.norm(jacobian - fd) <= 1e-6 * np.linalg.norm(jacobian)


@pytest.mark.parametrize("example", ["example1", "example2"])
def test_residual_is_energy_gradient(initial_mesh, example, rng, request):
    spec = request.getfixturevalue(example)
    u = 0.3 * rng.normal(size=initial_mesh.n_vertices)
    residual = assemble_residual(initial_mesh, spec, FeFunction.from_values(initial_mesh, u))
    step = 1e-6
    gradient = np.empty_like(u)
    for j in range(len(u)):
        e = np.zeros_like(u)
        e[j] = step
        plus = energy_functional(initial_mesh, spec, FeFunction.from_values(initial_mesh, u + e))
        minus = energy_functional(initial_mesh, spec, FeFunction.from_values(initial_mesh, u - e))
        gradient[j] = (plus - minus) / (2 * step)
    assert np.linalg.norm(residual - gradient) <= 1e-6 * np.linalg.norm(residual)


def test_jacobian_symmetric_positive_definite(initial_mesh, example2, rng):
    u = 0.2 * rng.normal(size=initial_mesh.n_vertices)
    jacobian = assemble_jacobian(initial_mesh, example2, FeFunction.from_values(initial_mesh, u)).toarray()
    assert np.allclose(jacobian, jacobian.T, atol=1e-13)
    assert np.linalg.eigvalsh(jacobian).min() > 0


def test_jacobian_at_zero_adds_scaled_edge_mass(coarse_mesh, example1):
    jacobian = assemble_jacobian(coarse_mesh, example1, FeFunction.zeros(coarse_mesh)).toarray()
    edge_mass = np.zeros_like(jacobian)
    for e in coarse_mesh.boundary_edges:
        a, b = coarse_mesh.edges[e]
        if np.allclose(coarse_mesh.vertices[[a, b], 0], -1.0):
            local = coarse_mesh.edge_lengths[e] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
            edge_mass[np.ix_([a, b], [a, b])] += local
    difference = jacobian - stiffness_matrix(coarse_mesh).toarray()
    assert np.allclose(difference, example1.law.c1 * edge_mass, atol=1e-14)


def test_stiffness_annihilates_constants(initial_mesh):
    assert np.allclose(stiffness_matrix(initial_mesh) @ np.ones(initial_mesh.n_vertices), 0.0, atol=1e-13)


def test_mass_matrix_total_is_area(initial_mesh):
    assert mass_matrix(initial_mesh).sum() == pytest.approx(3.0)


def test_load_total_for_constant_flux(coarse_mesh):
    spec = ProblemSpec(flux=FluxData(default=FluxKind.CONSTANT, constant=2.0))
    # the anode is the boundary minus the left side, of length 6
    assert assemble_load(coarse_mesh, spec).sum() == pytest.approx(12.0)
    assert flux_l2_norm_sq(coarse_mesh, spec) == pytest.approx(24.0)


def test_norms_of_linear_function(initial_mesh):
    u = FeFunction.interpolant(initial_mesh, lambda x, y: x)
    assert h1_seminorm_sq(initial_mesh, u) == pytest.approx(3.0)


def test_norms_of_constant(initial_mesh):
    u = FeFunction.interpolant(initial_mesh, lambda x, y: np.full_like(x, 2.0))
    assert h1_seminorm_sq(initial_mesh, u) == pytest.approx(0.0, abs=1e-24)
    assert l2_norm_sq(initial_mesh, u) == pytest.approx(12.0)
    assert h1_norm_sq(initial_mesh, u) == pytest.approx(12.0)


def test_function_bound_to_other_mesh(coarse_mesh, initial_mesh, example1):
    with pytest.raises(ValidationError):
        assemble_residual(initial_mesh, example1, FeFunction.zeros(coarse_mesh))
