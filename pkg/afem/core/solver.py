"""Newton iteration with a Jacobi-preconditioned conjugate gradient inner solve."""

import logging
import math

import numpy as np
from numpy.typing import ArrayLike
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from afem.core.assembly import (
    FeFunction,
    FloatArray,
    assemble_jacobian,
    assemble_residual,
    check_bound,
    energy_functional,
    h1_gram,
)
from afem.core.constants import SolverDefaults, Tolerances
from afem.core.mesh import Mesh
from afem.exceptions import LinearSolverError, NewtonConvergenceError, ValidationError
from afem.models.problem import ProblemSpec
from afem.models.records import NewtonReport

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-12


def conjugate_gradient(
    matrix: sparse.spmatrix | FloatArray, rhs: ArrayLike, tol: float = Tolerances.CG_TOL
) -> tuple[FloatArray, int]:
    """Solve an SPD system with diagonally preconditioned CG.

    Args:
        matrix: Symmetric positive definite matrix
        rhs: Right-hand side
        tol: Relative residual target

    Returns:
        Solution and the number of CG iterations

    Raises:
        LinearSolverError: If the diagonal is not positive or the iteration cap (10 x dim) is hit
    """
    a = sparse.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float).reshape(-1)
    n = a.shape[0]
    if a.shape != (n, n) or len(b) != n:
        raise ValidationError("rhs", len(b), f"System of shape {a.shape} does not match a right-hand side of {len(b)}")
    if not np.any(b):
        return np.zeros(n), 0

    diagonal = a.diagonal()
    if np.any(diagonal <= 0):
        raise LinearSolverError("Matrix has a non-positive diagonal entry and is not SPD", 0)
    preconditioner = LinearOperator((n, n), matvec=lambda x: np.ravel(x) / diagonal, dtype=float)

    iterations = 0

    def count(_: FloatArray) -> None:
        nonlocal iterations
        iterations += 1

    cap = SolverDefaults.CG_CAP_FACTOR * n
    x, info = cg(a, b, rtol=tol, atol=0.0, maxiter=cap, M=preconditioner, callback=count)
    if info != 0:
        relative = float(np.linalg.norm(a @ x - b) / np.linalg.norm(b))
        raise LinearSolverError(
            f"Conjugate gradient stopped after {iterations} iterations at relative residual {relative:.3e}",
            iterations,
        )
    logger.debug(f"CG converged in {iterations} iterations (n={n})")
    return x, iterations


def linear_solve(matrix: sparse.spmatrix | FloatArray, rhs: ArrayLike, tol: float = Tolerances.CG_TOL) -> FloatArray:
    x, _ = conjugate_gradient(matrix, rhs, tol)
    return x


def galerkin_satisfied(residual: FloatArray, u: FloatArray) -> bool:
    """Residual bound max|G| <= 1e-9 (1 + max|u|)."""
    scale = 1.0 + (float(np.max(np.abs(u))) if u.size else 0.0)
    return float(np.max(np.abs(residual), initial=0.0)) <= Tolerances.GALERKIN * scale


def newton_solve(
    mesh: Mesh,
    spec: ProblemSpec,
    u0: FeFunction,
    eps: float = Tolerances.NEWTON_EPS,
    max_iter: int = SolverDefaults.NEWTON_MAX_ITER,
    cg_tol: float = Tolerances.CG_TOL,
) -> tuple[FeFunction, NewtonReport]:
    """Minimize the energy functional on ``mesh`` by Newton's method.

    Stops when the H1 norm of the increment is at most ``eps``. A residual meeting the Galerkin
    bound stops the loop before a step when no step was taken yet, or when the skipped
    increment is itself at most ``eps``; ``final_step_h1`` then holds that increment.

    Returns:
        Converged iterate and the iteration report

    Raises:
        ValidationError: If ``eps`` is not positive or ``u0`` belongs to another mesh
        NewtonConvergenceError: If ``max_iter`` steps do not reach the tolerance
        LinearSolverError: If an inner solve breaks down
    """
    if not eps > 0:
        raise ValidationError("eps", eps, "Newton tolerance must be positive")
    check_bound(mesh, u0)

    gram = h1_gram(mesh)
    u = u0.coeffs.copy()
    report = NewtonReport(energies=[energy_functional(mesh, spec, u0)])
    step_h1 = 0.0

    while True:
        residual = assemble_residual(mesh, spec, FeFunction(mesh.generation, u))
        report.final_residual = float(np.max(np.abs(residual), initial=0.0))
        satisfied = galerkin_satisfied(residual, u)
        if satisfied and report.iterations == 0:
            report.converged = True
            break
        if report.iterations >= max_iter and not satisfied:
            break

        jacobian = assemble_jacobian(mesh, spec, FeFunction(mesh.generation, u))
        delta, inner = conjugate_gradient(jacobian, residual, cg_tol)
        delta_h1 = math.sqrt(max(float(delta @ (gram @ delta)), 0.0))
        # a residual stop reports the increment it skips, which must meet eps
        if satisfied and delta_h1 <= eps:
            step_h1 = delta_h1
            report.converged = True
            break
        if report.iterations >= max_iter:
            break
        u = u - delta
        step_h1 = delta_h1

        report.iterations += 1
        report.inner_iterations.append(inner)
        report.energies.append(energy_functional(mesh, spec, FeFunction(mesh.generation, u)))
        if report.iterations >= 2 and report.energies[-1] > report.energies[-2] + ENERGY_SLACK:
            report.energy_increases += 1
            logger.warning(
                f"Energy increased at Newton step {report.iterations}: "
                f"{report.energies[-2]:.12e} -> {report.energies[-1]:.12e}"
            )
        logger.debug(f"Newton step {report.iterations}: |du|_H1={step_h1:.3e}, CG iterations={inner}")

        if step_h1 <= eps:
            report.converged = True
            report.final_residual = float(
                np.max(np.abs(assemble_residual(mesh, spec, FeFunction(mesh.generation, u))), initial=0.0)
            )
            break

    report.final_step_h1 = step_h1
    if not report.converged:
        raise NewtonConvergenceError(
            f"Newton did not converge in {max_iter} iterations (last increment {step_h1:.3e} > {eps:.1e})",
            report,
        )
    logger.info(
        f"Newton converged in {report.iterations} iterations on {mesh.n_vertices} dofs "
        f"(|du|_H1={step_h1:.3e}, max|G|={report.final_residual:.3e})"
    )
    return FeFunction(mesh.generation, u), report


def interpolate(u_coarse: FeFunction, mesh_next: Mesh) -> FeFunction:
    """Carry a function to a refinement of its mesh.

    Surviving vertices keep their values; each bisection midpoint takes the mean of its parent
    edge endpoints.

    Raises:
        ValidationError: If ``mesh_next`` is not the direct refinement of ``u_coarse``'s mesh
    """
    if u_coarse.mesh_generation == mesh_next.generation and len(u_coarse) == mesh_next.n_vertices:
        return u_coarse
    if u_coarse.mesh_generation + 1 != mesh_next.generation or mesh_next.parent_vertex_count != len(u_coarse):
        raise ValidationError(
            "mesh_next",
            mesh_next.generation,
            f"Cannot interpolate a generation-{u_coarse.mesh_generation} function with {len(u_coarse)} values "
            f"onto generation {mesh_next.generation}",
        )
    parents = mesh_next.vertex_parents
    midpoints = 0.5 * (u_coarse.coeffs[parents[:, 0]] + u_coarse.coeffs[parents[:, 1]])
    return FeFunction(mesh_next.generation, np.concatenate([u_coarse.coeffs, midpoints]))
