"""Tests for the conjugate gradient solve, Newton's method and prolongation."""

import numpy as np
import pytest
from scipy import sparse

from afem.core.assembly import FeFunction, assemble_residual
from afem.core.constants import RefinementMode
from afem.core.mesh import refine
from afem.core.solver import conjugate_gradient, galerkin_satisfied, interpolate, linear_solve, newton_solve
from afem.exceptions import LinearSolverError, NewtonConvergenceError, ValidationError
from afem.models.problem import CubicLaw


class TestConjugateGradient:
    def test_identity_in_one_iteration(self, rng):
        b = rng.normal(size=10)
        x, iterations = conjugate_gradient(sparse.identity(10, format="csr"), b)
        assert iterations == 1
        assert np.allclose(x, b, atol=1e-14)

    def test_small_spd_system(self):
        matrix = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
        rhs = np.array([1.0, 2.0, 3.0])
        assert np.allclose(linear_solve(matrix, rhs), np.linalg.solve(matrix, rhs), atol=1e-12)

    def test_random_spd_system(self, rng):
        m = rng.normal(size=(50, 50))
        matrix = m @ m.T + 50.0 * np.eye(50)
        rhs = rng.normal(size=50)
        x, iterations = conjugate_gradient(matrix, rhs)
        assert 0 < iterations <= 500
        assert np.allclose(x, np.linalg.solve(matrix, rhs), rtol=1e-9, atol=1e-12)

    def test_zero_rhs(self):
        x, iterations = conjugate_gradient(np.eye(4), np.zeros(4))
        assert iterations == 0
        assert np.all(x == 0.0)

    def test_rejects_non_positive_diagonal(self):
        with pytest.raises(LinearSolverError):
            conjugate_gradient(np.array([[1.0, 0.0], [0.0, -1.0]]), np.ones(2))

    def test_rejects_mismatched_rhs(self):
        with pytest.raises(ValidationError):
            conjugate_gradient(np.eye(3), np.ones(2))


def test_galerkin_bound_scales_with_solution():
    assert galerkin_satisfied(np.array([5e-9]), np.array([10.0]))
    assert not galerkin_satisfied(np.array([5e-9]), np.array([1.0]))


class TestNewton:
    def test_zero_data_needs_no_iteration(self, coarse_mesh, zero_data):
        u, report = newton_solve(coarse_mesh, zero_data, FeFunction.zeros(coarse_mesh))
        assert report.iterations == 0
        assert report.converged
        assert np.all(u.coeffs == 0.0)

    def test_linear_law_converges_in_one_iteration(self, initial_mesh, example1, rng):
        spec = example1.model_copy(update={"law": CubicLaw(c1=1.0, c2=0.0)})
        u0 = FeFunction.from_values(initial_mesh, rng.normal(size=initial_mesh.n_vertices))
        _, report = newton_solve(initial_mesh, spec, u0, eps=1e-7)
        assert report.iterations == 1
        assert report.converged
        assert report.final_step_h1 <= 1e-7

    @pytest.mark.parametrize("eps", [1e-7, 1e-300])
    def test_converged_report_meets_tolerance(self, initial_mesh, example1, rng, eps):
        spec = example1.model_copy(update={"law": CubicLaw(c1=1.0, c2=0.0)})
        u0 = FeFunction.from_values(initial_mesh, rng.normal(size=initial_mesh.n_vertices))
        try:
            _, report = newton_solve(initial_mesh, spec, u0, eps=eps, max_iter=3)
        except NewtonConvergenceError as e:
            assert not e.report.converged
        else:
            assert report.converged
            assert report.final_step_h1 <= eps

    @pytest.mark.parametrize("example", ["example1", "example2"])
    def test_benchmark_converges_from_zero(self, initial_mesh, example, request):
        spec = request.getfixturevalue(example)
        u, report = newton_solve(initial_mesh, spec, FeFunction.zeros(initial_mesh))
        assert report.converged
        assert report.iterations <= 10
        assert report.energy_increases == 0
        assert len(report.energies) == report.iterations + 1
        assert report.final_step_h1 <= 1e-7
        assert galerkin_satisfied(assemble_residual(initial_mesh, spec, u), u.coeffs)

    def test_iteration_cap(self, initial_mesh, example1):
        with pytest.raises(NewtonConvergenceError) as exc_info:
            newton_solve(initial_mesh, example1, FeFunction.zeros(initial_mesh), eps=1e-14, max_iter=1)
        assert exc_info.value.report.iterations == 1
        assert not exc_info.value.report.converged

    def test_rejects_non_positive_tolerance(self, coarse_mesh, example1):
        with pytest.raises(ValidationError):
            newton_solve(coarse_mesh, example1, FeFunction.zeros(coarse_mesh), eps=0.0)

    def test_warm_start_needs_fewer_iterations(self, initial_mesh, example1):
        u, _ = newton_solve(initial_mesh, example1, FeFunction.zeros(initial_mesh))
        fine = refine(initial_mesh, np.arange(0, initial_mesh.n_triangles, 3), RefinementMode.ALL_EDGES)
        _, cold = newton_solve(fine, example1, FeFunction.zeros(fine))
        _, warm = newton_solve(fine, example1, interpolate(u, fine))
        assert warm.iterations <= cold.iterations


class TestInterpolate:
    def test_reproduces_linear_function(self, initial_mesh, rng):
        def linear(x, y):
            return 0.5 - 2.0 * x + 3.0 * y

        fine = refine(initial_mesh, rng.choice(initial_mesh.n_triangles, 20, replace=False))
        u = interpolate(FeFunction.interpolant(initial_mesh, linear), fine)
        assert u.mesh_generation == fine.generation
        assert np.allclose(u.coeffs, linear(fine.vertices[:, 0], fine.vertices[:, 1]), atol=1e-14)

    def test_constant_stays_constant(self, coarse_mesh):
        fine = refine(coarse_mesh, [0, 3])
        u = interpolate(FeFunction.from_values(coarse_mesh, np.full(coarse_mesh.n_vertices, 4.0)), fine)
        assert np.all(u.coeffs == 4.0)

    def test_same_mesh_returns_input(self, coarse_mesh):
        u = FeFunction.zeros(coarse_mesh)
        assert interpolate(u, coarse_mesh) is u

    def test_rejects_unrelated_mesh(self, coarse_mesh):
        twice = refine(refine(coarse_mesh, [0]), [0])
        with pytest.raises(ValidationError):
            interpolate(FeFunction.zeros(coarse_mesh), twice)
