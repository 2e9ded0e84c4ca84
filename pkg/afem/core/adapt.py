"""Dörfler marking and the SOLVE-ESTIMATE-MARK-REFINE loop."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from afem.core.assembly import FeFunction, IntArray, h1_norm_sq
from afem.core.constants import RefinementMode, SolverDefaults, Tolerances
from afem.core.estimator import IndicatorField, estimate, global_indicator
from afem.core.mesh import Mesh, refine
from afem.core.solver import interpolate, newton_solve
from afem.exceptions import AdaptiveLoopError, ProblemError, SolverError, ValidationError
from afem.models.problem import ProblemSpec
from afem.models.records import AdaptiveRun, IterationRecord, RunConfig

logger = logging.getLogger(__name__)


def _check_theta(theta: float) -> None:
    if not 0.0 < theta <= 1.0:
        raise ValidationError("theta", theta, f"Marking parameter must lie in (0, 1], got {theta}")


def doerfler_mark(eta_sq: ArrayLike, theta: float) -> IntArray:
    """Smallest set of elements carrying a ``theta`` share of the total indicator.

    Indicators are taken in descending order, ties by ascending element id, and the shortest
    prefix reaching the threshold is returned.

    Args:
        eta_sq: Non-negative per-element indicators
        theta: Bulk parameter in (0, 1]

    Returns:
        Marked element ids in ascending order (empty when the total is zero)
    """
    _check_theta(theta)
    values = np.asarray(eta_sq, dtype=float).reshape(-1)
    if values.size and (not np.all(np.isfinite(values)) or values.min() < 0):
        raise ValidationError("eta_sq", None, "Indicators must be finite and non-negative")

    positive = np.flatnonzero(values > 0)
    if positive.size == 0:
        return np.zeros(0, dtype=np.int64)
    if theta == 1.0:
        return positive.astype(np.int64)

    ids = np.arange(len(values))
    order = np.lexsort((ids, -values))
    cumulative = np.cumsum(values[order])
    count = int(np.searchsorted(cumulative, theta * cumulative[-1], side="left")) + 1
    return np.sort(order[:count]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class IterationState:
    """Everything known at the end of one adaptive iteration."""

    record: IterationRecord
    mesh: Mesh
    solution: FeFunction
    indicators: IndicatorField
    marked: IntArray


def adaptive_loop(
    spec: ProblemSpec,
    initial_mesh: Mesh,
    theta: float,
    tau: float,
    eps_newton: float = Tolerances.NEWTON_EPS,
    mode: RefinementMode = RefinementMode.ALL_EDGES,
    max_k: int = SolverDefaults.MAX_ADAPTIVE_ITERATIONS,
    *,
    newton_max_iter: int = SolverDefaults.NEWTON_MAX_ITER,
    cg_tol: float = Tolerances.CG_TOL,
    error_fn: Callable[[Mesh, FeFunction], float] | None = None,
    progress: Callable[[IterationState], None] | None = None,
) -> AdaptiveRun:
    """Run the adaptive algorithm until sum eta_k^2 <= tau or k = max_k.

    Args:
        spec: Problem data
        initial_mesh: Conforming starting mesh
        theta: Dörfler bulk parameter
        tau: Stopping tolerance on the squared estimator
        eps_newton: Newton increment tolerance
        mode: Refinement of marked elements
        max_k: Iteration cap
        newton_max_iter: Newton iteration cap per mesh
        cg_tol: Relative residual of the inner linear solves
        error_fn: Squared H1 error of (mesh, u_k), stored in the record when given
        progress: Called with the state of every finished iteration

    Returns:
        Record of every iteration

    Raises:
        ValidationError: For theta outside (0, 1], non-positive tau or negative max_k
        AdaptiveLoopError: If a solve fails; ``partial_run`` holds the finished iterations
    """
    _check_theta(theta)
    if not tau > 0:
        raise ValidationError("tau", tau, "Stopping tolerance must be positive")
    if max_k < 0:
        raise ValidationError("max_k", max_k, "Iteration cap must be non-negative")

    run = AdaptiveRun(
        config=RunConfig(problem=spec.name, theta=theta, tau=tau, eps_newton=eps_newton, mode=mode, max_k=max_k)
    )
    mesh = initial_mesh
    u = FeFunction.zeros(mesh)

    for k in range(max_k + 1):
        guess = interpolate(u, mesh) if k > 0 else u
        try:
            u, report = newton_solve(mesh, spec, guess, eps_newton, newton_max_iter, cg_tol)
        except (SolverError, ProblemError) as e:
            run.stopped_by = "error"
            raise AdaptiveLoopError(f"Adaptive loop aborted at iteration {k}: {e}", run) from e

        indicators = estimate(mesh, spec, u)
        eta_sq_sum, osc_sq_sum = global_indicator(indicators)
        record = IterationRecord(
            k=k,
            n_elem=mesh.n_triangles,
            dofs=mesh.n_vertices,
            eta_sq_sum=eta_sq_sum,
            osc_sq_sum=osc_sq_sum,
            newton_iters=report.iterations,
            h1_err_sq=error_fn(mesh, u) if error_fn is not None else None,
            energy=report.energies[-1],
            h1_norm_sq=h1_norm_sq(mesh, u),
        )

        marked = np.zeros(0, dtype=np.int64)
        if eta_sq_sum <= tau:
            run.stopped_by = "tolerance"
        elif k == max_k:
            run.stopped_by = "max_k"
        else:
            marked = doerfler_mark(indicators.eta_sq, theta)
            record.n_marked = len(marked)

        run.records.append(record)
        logger.info(
            f"k={k}: {record.n_elem} elements, {record.dofs} dofs, sum eta^2={eta_sq_sum:.4e}, "
            f"marked {record.n_marked}, Newton {record.newton_iters}"
        )
        if progress is not None:
            progress(IterationState(record, mesh, u, indicators, marked))
        if run.stopped_by is not None:
            break
        mesh = refine(mesh, marked, mode)

    logger.info(f"Adaptive loop stopped by {run.stopped_by} after {len(run.records)} iterations")
    return run
