"""Convergence-rate fits and the empirical checks run on adaptive records."""

import logging
import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from afem.core.constants import BenchmarkTargets, SolverDefaults
from afem.exceptions import ValidationError
from afem.models.records import ContractionEstimate, IterationRecord, RateFit, SnapshotError

logger = logging.getLogger(__name__)

BETA_GRID = np.logspace(-6.0, 2.0, 97)
CONTRACTION_START = 2
EFFECTIVITY_START = 5


def fit_rate(
    dofs: ArrayLike,
    values: ArrayLike,
    window: tuple[float, float] | None = None,
    window_decades: float = 1.0,
    min_points: int = SolverDefaults.MIN_FIT_POINTS,
) -> RateFit:
    """Least-squares slope of log(values) against log(dofs).

    Args:
        dofs: Degrees of freedom N
        values: Positive quantity Q(N)
        window: Explicit (n_min, n_max); defaults to the last ``window_decades`` decades of N
        window_decades: Width of the default window
        min_points: Smallest admissible number of points inside the window

    Returns:
        Fitted slope and intercept of log Q = intercept + slope * log N

    Raises:
        ValidationError: For non-positive data or a window holding too few distinct points
    """
    n = np.asarray(dofs, dtype=float).reshape(-1)
    q = np.asarray(values, dtype=float).reshape(-1)
    if len(n) != len(q):
        raise ValidationError("values", len(q), f"Got {len(n)} dof counts but {len(q)} values")
    if len(n) == 0 or np.any(n <= 0) or np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise ValidationError("values", None, "Rate fits need positive, finite data")

    if window is None:
        n_max = float(n.max())
        window = (n_max / 10.0**window_decades, n_max)
    n_lo, n_hi = window
    inside = (n >= n_lo * (1 - 1e-12)) & (n <= n_hi * (1 + 1e-12))
    if int(inside.sum()) < min_points or len(np.unique(n[inside])) < 2:
        raise ValidationError(
            "window",
            window,
            f"Window [{n_lo:.4g}, {n_hi:.4g}] holds {int(inside.sum())} points; at least {min_points} are needed",
        )

    x = np.log(n[inside])
    y = np.log(q[inside])
    slope, intercept = np.polyfit(x, y, 1)
    residual = math.sqrt(float(np.mean((y - (intercept + slope * x)) ** 2)))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        n_min=float(n[inside].min()),
        n_max=float(n[inside].max()),
        n_points=int(inside.sum()),
        residual=residual,
    )


def estimator_series(records: Sequence[IterationRecord]) -> tuple[list[float], list[float]]:
    """(dofs, eta_k) pairs."""
    return [float(r.dofs) for r in records], [math.sqrt(r.eta_sq_sum) for r in records]


def error_series(records: Sequence[IterationRecord]) -> tuple[list[float], list[float]]:
    """(dofs, H1 error) pairs for records that carry an error."""
    kept = [r for r in records if r.h1_err_sq is not None and r.h1_err_sq > 0]
    return [float(r.dofs) for r in kept], [math.sqrt(r.h1_err_sq or 0.0) for r in kept]


def contraction_search(
    records: Sequence[IterationRecord],
    reference_energy: float,
    start_k: int = CONTRACTION_START,
    betas: ArrayLike = BETA_GRID,
) -> ContractionEstimate:
    """Weight beta minimizing the largest ratio of consecutive E_k + beta * eta_k^2.

    E_k is the energy gap J(u_k) - J(u_ref).

    Raises:
        ValidationError: If fewer than two records lie at or after ``start_k``
    """
    tail = [r for r in records if r.k >= start_k]
    if len(tail) < 2:
        raise ValidationError("records", len(tail), f"Need at least two iterations from k={start_k}")
    gap = np.array([r.energy - reference_energy for r in tail])
    eta_sq = np.array([r.eta_sq_sum for r in tail])

    best_beta, best_mu = math.nan, math.inf
    for beta in np.asarray(betas, dtype=float):
        quantity = gap + beta * eta_sq
        if np.any(quantity[:-1] <= 0):
            continue
        mu = float(np.max(quantity[1:] / quantity[:-1]))
        if mu < best_mu:
            best_beta, best_mu = float(beta), mu

    holds = best_mu < 1.0
    logger.info(f"Contraction: beta={best_beta:.3g}, mu={best_mu:.4f} over {len(tail)} iterations")
    return ContractionEstimate(beta=best_beta, mu=best_mu, start_k=start_k, holds=holds)


def effectivity_ratios(records: Sequence[IterationRecord], start_k: int = EFFECTIVITY_START) -> list[float]:
    """H1 error squared over eta^2 per iteration from ``start_k`` on."""
    return [
        r.h1_err_sq / r.eta_sq_sum
        for r in records
        if r.k >= start_k and r.h1_err_sq is not None and r.eta_sq_sum > 0
    ]


def effectivity_band(records: Sequence[IterationRecord], start_k: int = EFFECTIVITY_START) -> float | None:
    """Max over min of the effectivity ratios, or None without enough data."""
    ratios = effectivity_ratios(records, start_k)
    if len(ratios) < 2 or min(ratios) <= 0:
        return None
    return max(ratios) / min(ratios)


def closure_ratios(records: Sequence[IterationRecord]) -> list[float]:
    """(#T_k - #T_0) / sum_{j<k} #M_j for every k with at least one marked element before it."""
    if not records:
        return []
    n0 = records[0].n_elem
    ratios: list[float] = []
    marked_total = 0
    for previous, current in zip(records, records[1:], strict=False):
        marked_total += previous.n_marked
        if marked_total > 0:
            ratios.append((current.n_elem - n0) / marked_total)
    return ratios


def closure_ratio(records: Sequence[IterationRecord]) -> float | None:
    ratios = closure_ratios(records)
    return max(ratios) if ratios else None


def stability_ratios(records: Sequence[IterationRecord], flux_norm_sq: float) -> list[float]:
    """||u_k||_H1 / ||g||_L2(Gamma_A) per iteration."""
    if flux_norm_sq <= 0:
        return []
    return [math.sqrt(r.h1_norm_sq / flux_norm_sq) for r in records]


def stability_ratio(records: Sequence[IterationRecord], flux_norm_sq: float) -> float | None:
    ratios = stability_ratios(records, flux_norm_sq)
    return max(ratios) if ratios else None


def snapshot(records: Sequence[IterationRecord], target_dofs: int, example: int | None = None) -> SnapshotError | None:
    """Relative error of the iteration whose dofs are nearest ``target_dofs`` (first one on ties)."""
    candidates = [r for r in records if r.relative_error is not None]
    if not candidates:
        return None
    nearest = min(candidates, key=lambda r: (abs(r.dofs - target_dofs), r.k))
    return SnapshotError(
        target_dofs=target_dofs,
        dofs=nearest.dofs,
        k=nearest.k,
        relative_error=nearest.relative_error or 0.0,
        target_relative_error=BenchmarkTargets.SNAPSHOT_ERRORS.get(example) if example is not None else None,
    )
