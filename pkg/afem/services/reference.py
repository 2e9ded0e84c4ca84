"""Reference solutions on fine uniform meshes, cross-mesh H1 errors and the uniform baseline."""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from afem.cache.reference import ReferenceSolutionCache
from afem.core.assembly import FeFunction, FloatArray, element_gradients, h1_norm_sq
from afem.core.constants import RefinementMode, SolverDefaults, Tolerances
from afem.core.estimator import estimate, global_indicator
from afem.core.mesh import Mesh, build_lshape_initial, locate_points, refine
from afem.core.problem import example_config
from afem.core.quadrature import triangle_rule
from afem.core.solver import interpolate, newton_solve
from afem.exceptions import ValidationError
from afem.models.problem import ProblemSpec
from afem.models.records import IterationRecord

logger = logging.getLogger(__name__)

ERROR_CHUNK_SIZE = 32768


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """Converged solution on a fine uniform mesh."""

    spec: ProblemSpec
    mesh: Mesh
    solution: FeFunction
    h_ref: float
    eps: float

    @cached_property
    def h1_norm_sq(self) -> float:
        return h1_norm_sq(self.mesh, self.solution)


def resolve_spec(problem: int | ProblemSpec) -> ProblemSpec:
    return example_config(problem) if isinstance(problem, int) else problem


def uniform_mesh(spec: ProblemSpec, h: float) -> Mesh:
    return build_lshape_initial(h, spec.partition, spec.sigma_default)


def reference_solve(
    problem: int | ProblemSpec,
    h_ref: float = 1 / 512,
    eps: float = Tolerances.REFERENCE_EPS,
    *,
    max_iter: int = SolverDefaults.NEWTON_MAX_ITER,
    cg_tol: float = Tolerances.CG_TOL,
    cache: ReferenceSolutionCache | None = None,
) -> ReferenceSolution:
    """Solve on the uniform mesh of size ``h_ref`` with a tight Newton tolerance.

    Args:
        problem: Example id or explicit problem data
        h_ref: Uniform mesh size; 1/h_ref must be an integer
        eps: Newton increment tolerance, at most 1e-11
        max_iter: Newton iteration cap
        cg_tol: Relative residual of the inner solves
        cache: Optional store consulted before and filled after solving

    Raises:
        ValidationError: If ``eps`` exceeds 1e-11 or ``h_ref`` does not divide 1
        SolverError: If the Newton solve fails
    """
    if eps > Tolerances.REFERENCE_EPS:
        raise ValidationError("eps", eps, f"Reference tolerance must be at most {Tolerances.REFERENCE_EPS:g}")
    spec = resolve_spec(problem)

    if cache is not None:
        cached = cache.get_solution(spec, h_ref, eps)
        if cached is not None:
            return ReferenceSolution(spec, cached[0], cached[1], h_ref, eps)

    mesh = uniform_mesh(spec, h_ref)
    logger.info(f"Solving reference for {spec.name} on {mesh.n_triangles} triangles (h={h_ref:g}, eps={eps:g})")
    solution, report = newton_solve(mesh, spec, FeFunction.zeros(mesh), eps, max_iter, cg_tol)
    logger.info(f"Reference solved in {report.iterations} Newton iterations")

    if cache is not None:
        cache.save_solution(spec, h_ref, eps, mesh, solution)
    return ReferenceSolution(spec, mesh, solution, h_ref, eps)


def _error_chunk(
    mesh: Mesh,
    u: FeFunction,
    grads_all: FloatArray,
    ref: ReferenceSolution,
    ref_grads_all: FloatArray,
    triangles: np.ndarray,
) -> float:
    rule = triangle_rule(2)
    ref_mesh = ref.mesh
    corners = ref_mesh.vertices[ref_mesh.triangles[triangles]]  # (nc, 3, 2)
    points = np.einsum("qi,tik->tqk", rule.points, corners).reshape(-1, 2)
    n_q = len(rule)

    ref_values = (ref.solution.coeffs[ref_mesh.triangles[triangles]] @ rule.points.T).reshape(-1)
    ref_grads = np.repeat(ref_grads_all[triangles], n_q, axis=0)

    owners, bary = locate_points(mesh, points)
    values = np.einsum("pi,pi->p", bary, u.coeffs[mesh.triangles[owners]])
    grads = grads_all[owners]

    diff_grad = ref_grads - grads
    integrand = np.einsum("pk,pk->p", diff_grad, diff_grad) + (ref_values - values) ** 2
    weights = (2.0 * ref_mesh.areas[triangles])[:, None] * rule.weights[None, :]
    return math.fsum(weights.reshape(-1) * integrand)


def h1_error_sq_vs_reference(mesh: Mesh, u: FeFunction, ref: ReferenceSolution, threads: int = 1) -> float:
    """Squared H1 norm of u_ref - u on the reference mesh with a degree-2 triangle rule.

    The reference elements are split into fixed chunks, optionally evaluated on a thread pool,
    and the chunk sums are added in chunk order.

    Raises:
        PointLocationError: If a quadrature point falls outside ``mesh``
    """
    # build lazy geometry before threads share the mesh
    _ = mesh.trifinder, mesh.vertex_triangles
    grads_all = element_gradients(mesh, u)
    ref_grads_all = element_gradients(ref.mesh, ref.solution)
    chunks = [
        np.arange(start, min(start + ERROR_CHUNK_SIZE, ref.mesh.n_triangles))
        for start in range(0, ref.mesh.n_triangles, ERROR_CHUNK_SIZE)
    ]

    def process(chunk: np.ndarray) -> float:
        return _error_chunk(mesh, u, grads_all, ref, ref_grads_all, chunk)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partial = list(pool.map(process, chunks))
    else:
        partial = [process(chunk) for chunk in chunks]
    error_sq = math.fsum(partial)
    logger.debug(f"H1 error^2 vs reference on {mesh.n_vertices} dofs: {error_sq:.6e} ({len(chunks)} chunks)")
    return error_sq


def h1_error_vs_reference(mesh: Mesh, u: FeFunction, ref: ReferenceSolution, threads: int = 1) -> float:
    return math.sqrt(h1_error_sq_vs_reference(mesh, u, ref, threads))


def reference_error_fn(ref: ReferenceSolution, threads: int = 1) -> Callable[[Mesh, FeFunction], float]:
    def error_fn(mesh: Mesh, u: FeFunction) -> float:
        return h1_error_sq_vs_reference(mesh, u, ref, threads)

    return error_fn


def uniform_baseline(
    problem: int | ProblemSpec,
    levels: int = SolverDefaults.UNIFORM_LEVELS,
    initial_h: float = 0.2,
    *,
    reference: ReferenceSolution | None = None,
    eps_newton: float = Tolerances.NEWTON_EPS,
    cg_tol: float = Tolerances.CG_TOL,
    threads: int = 1,
    progress: Callable[[IterationRecord], None] | None = None,
) -> list[IterationRecord]:
    """Solve on successive uniform refinements of the initial mesh.

    Every level refines all elements in all-edges mode, so element counts grow by four.

    Returns:
        One record per level; ``n_marked`` counts the elements refined after that level
    """
    if levels < 1:
        raise ValidationError("levels", levels, "At least one uniform level is required")
    spec = resolve_spec(problem)
    mesh = uniform_mesh(spec, initial_h)
    u = FeFunction.zeros(mesh)
    records: list[IterationRecord] = []

    for level in range(levels):
        if level > 0:
            mesh = refine(mesh, np.arange(mesh.n_triangles), RefinementMode.ALL_EDGES)
            u = interpolate(u, mesh)
        u, report = newton_solve(mesh, spec, u, eps_newton, SolverDefaults.NEWTON_MAX_ITER, cg_tol)
        eta_sq_sum, osc_sq_sum = global_indicator(estimate(mesh, spec, u))
        record = IterationRecord(
            k=level,
            n_elem=mesh.n_triangles,
            dofs=mesh.n_vertices,
            eta_sq_sum=eta_sq_sum,
            osc_sq_sum=osc_sq_sum,
            n_marked=mesh.n_triangles if level < levels - 1 else 0,
            newton_iters=report.iterations,
            h1_err_sq=h1_error_sq_vs_reference(mesh, u, reference, threads) if reference is not None else None,
            energy=report.energies[-1],
            h1_norm_sq=h1_norm_sq(mesh, u),
            ref_h1_norm_sq=reference.h1_norm_sq if reference is not None else None,
        )
        records.append(record)
        logger.info(f"Uniform level {level}: {record.dofs} dofs, sum eta^2={eta_sq_sum:.4e}")
        if progress is not None:
            progress(record)
    return records


def nodal_values(mesh: Mesh, ref: ReferenceSolution) -> FloatArray:
    """Reference solution evaluated at the vertices of ``mesh``."""
    owners, bary = locate_points(ref.mesh, mesh.vertices)
    return np.einsum("pi,pi->p", bary, ref.solution.coeffs[ref.mesh.triangles[owners]])
