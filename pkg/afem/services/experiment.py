"""End-to-end benchmark experiment: adaptive run, uniform baseline, reference comparison and outputs."""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from afem.cache.reference import ReferenceSolutionCache
from afem.config import Settings
from afem.core.adapt import IterationState, adaptive_loop
from afem.core.assembly import energy_functional, flux_l2_norm_sq
from afem.core.constants import BenchmarkTargets, RefinementMode
from afem.core.estimator import INDICATOR_CSV_FIELDS
from afem.core.mesh_io import write_vtk
from afem.exceptions import AdaptiveLoopError, ValidationError
from afem.models.problem import ProblemSpec
from afem.models.records import AdaptiveRun, ExperimentSummary, IterationRecord, RateFit
from afem.services.export import write_csv, write_json, write_run_csv, write_text
from afem.services.plotting import Series, plot_convergence
from afem.services.rates import (
    closure_ratio,
    contraction_search,
    effectivity_band,
    error_series,
    estimator_series,
    fit_rate,
    snapshot,
    stability_ratios,
)
from afem.services.reference import (
    ReferenceSolution,
    reference_error_fn,
    reference_solve,
    resolve_spec,
    uniform_baseline,
    uniform_mesh,
)

logger = logging.getLogger(__name__)

RUN_CSV = "run.csv"
UNIFORM_CSV = "uniform.csv"
INDICATORS_CSV = "indicators.csv"
RATES_TXT = "rates.txt"
SUMMARY_JSON = "summary.json"
CONVERGENCE_SVG = "convergence.svg"
FINAL_VTK = "final.vtk"


@dataclass
class ExperimentOptions:
    """Knobs of one experiment beyond (example, theta, tau, mode)."""

    h_ref: float | None = None
    uniform_levels: int = 6
    window_decades: float = 1.0
    write_vtk: bool = False
    use_cache: bool = True
    clear_cache: bool = False
    max_k: int | None = None


@dataclass
class ExperimentResult:
    """Outcome of ``run_experiment``."""

    summary: ExperimentSummary
    run: AdaptiveRun
    uniform: list[IterationRecord] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def _safe_fit(
    label: str, dofs: Sequence[float], values: Sequence[float], window_decades: float, flags: list[str]
) -> RateFit | None:
    try:
        return fit_rate(dofs, values, window_decades=window_decades)
    except ValidationError as e:
        flags.append(f"{label} fit unavailable: {e}")
        return None


def summarize(
    records: Sequence[IterationRecord],
    *,
    problem: str,
    example: int | None,
    theta: float | None,
    tau: float | None,
    mode: RefinementMode | None,
    stopped_by: str | None = None,
    uniform: Sequence[IterationRecord] = (),
    reference_energy: float | None = None,
    flux_norm_sq: float | None = None,
    h_ref: float | None = None,
    window_decades: float = 1.0,
) -> ExperimentSummary:
    """Fit rates and run the empirical checks on a finished run.

    Checks that miss their band are listed in ``flags``; none of them raise.
    """
    flags: list[str] = []
    estimator_fit = _safe_fit("estimator", *estimator_series(records), window_decades, flags)
    dofs, errors = error_series(records)
    error_fit = _safe_fit("error", dofs, errors, window_decades, flags) if dofs else None
    uniform_fit = None
    if uniform:
        # the uniform baseline is fitted over all levels
        u_dofs, u_errors = error_series(uniform)
        if u_dofs:
            span = math.log10(max(u_dofs) / min(u_dofs)) + 1e-9
            uniform_fit = _safe_fit("uniform", u_dofs, u_errors, span, flags)

    contraction = None
    if reference_energy is not None:
        try:
            contraction = contraction_search(records, reference_energy)
        except ValidationError as e:
            flags.append(f"contraction unavailable: {e}")

    stability = stability_ratios(records, flux_norm_sq) if flux_norm_sq else []
    summary = ExperimentSummary(
        problem=problem,
        example=example,
        theta=theta,
        tau=tau,
        mode=mode,
        iterations=records[-1].k if records else -1,
        target_iterations=BenchmarkTargets.ITERATIONS.get((example, theta)) if example else None,
        stopped_by=stopped_by,
        estimator_fit=estimator_fit,
        error_fit=error_fit,
        uniform_fit=uniform_fit,
        target_slopes=BenchmarkTargets.SLOPES.get((example, theta)) if example else None,
        target_uniform_slope=BenchmarkTargets.UNIFORM_SLOPES.get(example) if example else None,
        contraction=contraction,
        effectivity_band=effectivity_band(records),
        closure_max=closure_ratio(records),
        stability_max=max(stability) if stability else None,
        stability_nonincreasing=all(b <= a * (1 + 1e-3) for a, b in zip(stability, stability[1:], strict=False))
        if stability
        else None,
        snapshot=snapshot(records, BenchmarkTargets.SNAPSHOT_DOFS[example], example)
        if example in BenchmarkTargets.SNAPSHOT_DOFS
        else None,
        h_ref=h_ref,
        reference_energy=reference_energy,
        flags=flags,
    )
    summary.flags.extend(_check_bands(summary))
    return summary


def _check_bands(summary: ExperimentSummary) -> list[str]:
    flags: list[str] = []
    tolerance = BenchmarkTargets.SLOPE_TOLERANCE.get(summary.example or 0, 0.1)
    if summary.target_slopes is not None:
        for name, fit, target in (
            ("estimator", summary.estimator_fit, summary.target_slopes[0]),
            ("error", summary.error_fit, summary.target_slopes[1]),
        ):
            if fit is not None and abs(fit.slope - target) > tolerance:
                flags.append(f"{name} slope {fit.slope:.3f} outside {target:.2f} +/- {tolerance:.2f}")
    if summary.target_uniform_slope is not None and summary.uniform_fit is not None:
        deviation = abs(summary.uniform_fit.slope - summary.target_uniform_slope)
        if deviation > BenchmarkTargets.UNIFORM_SLOPE_TOLERANCE:
            flags.append(
                f"uniform slope {summary.uniform_fit.slope:.3f} outside {summary.target_uniform_slope:.2f} "
                f"+/- {BenchmarkTargets.UNIFORM_SLOPE_TOLERANCE:.2f}"
            )
    if summary.uniform_ratio is not None and summary.uniform_ratio < BenchmarkTargets.ADAPTIVE_OVER_UNIFORM:
        flags.append(f"adaptive/uniform slope ratio {summary.uniform_ratio:.2f} below 3")
    if summary.slope_agreement is not None and summary.slope_agreement > BenchmarkTargets.SLOPE_AGREEMENT:
        flags.append(f"estimator and error slopes differ by {summary.slope_agreement:.3f}")
    if summary.effectivity_band is not None and summary.effectivity_band > BenchmarkTargets.EFFECTIVITY_BAND:
        flags.append(f"effectivity band {summary.effectivity_band:.2f} exceeds 10")
    if summary.closure_max is not None and summary.closure_max > BenchmarkTargets.CLOSURE_BOUND:
        flags.append(f"closure ratio {summary.closure_max:.2f} exceeds 20")
    if summary.contraction is not None and not summary.contraction.holds:
        flags.append(f"no contraction found (best mu {summary.contraction.mu:.4f})")
    if summary.stability_nonincreasing is False:
        flags.append("stability ratio increased under refinement")
    if summary.stopped_by == "max_k":
        flags.append("stopped by the iteration cap before reaching tau")
    return flags


def _or_na(value: object) -> str:
    return "n/a" if value is None else f"{value}"


def format_rates(summary: ExperimentSummary) -> str:
    """Plain-text report for rates.txt."""

    def fit_line(name: str, fit: RateFit | None, target: float | None) -> str:
        if fit is None:
            return f"{name} slope: n/a"
        text = f"{name} slope: {fit.slope:.4f} over dofs [{fit.n_min:.0f}, {fit.n_max:.0f}] ({fit.n_points} points)"
        return text + (f" (target {target:.2f})" if target is not None else "")

    targets = summary.target_slopes or (None, None)
    lines = [
        f"problem: {summary.problem}",
        f"theta: {_or_na(summary.theta)}  tau: {_or_na(summary.tau)}  mode: {_or_na(summary.mode)}",
        f"iterations: {summary.iterations}"
        + (f" (target {summary.target_iterations})" if summary.target_iterations is not None else "")
        + (f"  stopped by: {summary.stopped_by}" if summary.stopped_by else ""),
        fit_line("estimator", summary.estimator_fit, targets[0]),
        fit_line("error", summary.error_fit, targets[1]),
        fit_line("uniform", summary.uniform_fit, summary.target_uniform_slope),
    ]
    if summary.slope_agreement is not None:
        lines.append(f"estimator/error slope difference: {summary.slope_agreement:.4f}")
    if summary.uniform_ratio is not None:
        lines.append(f"adaptive/uniform slope ratio: {summary.uniform_ratio:.2f}")
    if summary.contraction is not None:
        c = summary.contraction
        lines.append(f"contraction: beta={c.beta:.4g} mu={c.mu:.4f} from k={c.start_k} holds={c.holds}")
    for label, value in (
        ("effectivity band", summary.effectivity_band),
        ("closure max", summary.closure_max),
        ("stability max", summary.stability_max),
    ):
        if value is not None:
            lines.append(f"{label}: {value:.4f}")
    if summary.snapshot is not None:
        s = summary.snapshot
        line = (
            f"snapshot: dofs={s.dofs} (nearest {s.target_dofs}) k={s.k} "
            f"relative H1 error={100 * s.relative_error:.2f}%"
        )
        if s.target_relative_error is not None:
            line += f" (target {100 * s.target_relative_error:.2f}%)"
        lines.append(line)
    lines.append("flags: " + ("none" if not summary.flags else "; ".join(summary.flags)))
    return "\n".join(lines) + "\n"


def run_experiment(
    problem: int | ProblemSpec,
    theta: float,
    tau: float,
    mode: RefinementMode,
    out_dir: Path,
    settings: Settings,
    options: ExperimentOptions | None = None,
    *,
    example: int | None = None,
    progress: Callable[[str, IterationRecord], None] | None = None,
    reference: ReferenceSolution | None = None,
) -> ExperimentResult:
    """Run the adaptive loop against a reference solution and write every output file.

    Writes run.csv, uniform.csv, indicators.csv, rates.txt, summary.json, convergence.svg and,
    when requested, final.vtk into ``out_dir``.

    Raises:
        AdaptiveLoopError: If the adaptive loop aborts; run.csv then holds the finished iterations
    """
    options = options or ExperimentOptions()
    spec = resolve_spec(problem)
    if example is None and isinstance(problem, int):
        example = problem
    h_ref = options.h_ref or settings.reference_h

    if reference is None:
        cache = None
        if options.use_cache:
            cache = ReferenceSolutionCache(settings.cache_dir)
            if options.clear_cache:
                cache.clear_cache()
        try:
            reference = reference_solve(
                spec,
                h_ref,
                settings.reference_eps,
                max_iter=settings.newton_max_iter,
                cg_tol=settings.cg_tol,
                cache=cache,
            )
        finally:
            if cache is not None:
                cache.close()
    reference_energy = energy_functional(reference.mesh, spec, reference.solution)

    initial = uniform_mesh(spec, settings.initial_h)
    final: list[IterationState] = []

    def on_iteration(state: IterationState) -> None:
        state.record.ref_h1_norm_sq = reference.h1_norm_sq
        final[:] = [state]
        if progress is not None:
            progress("adaptive", state.record)

    files: list[Path] = []
    try:
        run = adaptive_loop(
            spec,
            initial,
            theta,
            tau,
            settings.newton_eps,
            mode,
            options.max_k if options.max_k is not None else settings.max_k,
            newton_max_iter=settings.newton_max_iter,
            cg_tol=settings.cg_tol,
            error_fn=reference_error_fn(reference, settings.threads),
            progress=on_iteration,
        )
    except AdaptiveLoopError as e:
        write_run_csv(e.partial_run.records, out_dir / RUN_CSV)
        raise

    uniform: list[IterationRecord] = []
    if options.uniform_levels > 0:
        uniform = uniform_baseline(
            spec,
            options.uniform_levels,
            settings.initial_h,
            reference=reference,
            eps_newton=settings.newton_eps,
            cg_tol=settings.cg_tol,
            threads=settings.threads,
            progress=(lambda record: progress("uniform", record)) if progress is not None else None,
        )

    summary = summarize(
        run.records,
        problem=spec.name,
        example=example,
        theta=theta,
        tau=tau,
        mode=mode,
        stopped_by=run.stopped_by,
        uniform=uniform,
        reference_energy=reference_energy,
        flux_norm_sq=flux_l2_norm_sq(initial, spec),
        h_ref=h_ref,
        window_decades=options.window_decades,
    )

    write_run_csv(run.records, out_dir / RUN_CSV)
    files.append(out_dir / RUN_CSV)
    if uniform:
        write_run_csv(uniform, out_dir / UNIFORM_CSV)
        files.append(out_dir / UNIFORM_CSV)

    state = final[0]
    write_csv(state.indicators.rows(), INDICATOR_CSV_FIELDS, out_dir / INDICATORS_CSV)
    write_text(format_rates(summary), out_dir / RATES_TXT, "text")
    write_json(summary.model_dump(mode="json"), out_dir / SUMMARY_JSON)
    files += [out_dir / INDICATORS_CSV, out_dir / RATES_TXT, out_dir / SUMMARY_JSON]

    series = [
        Series("estimator", *estimator_series(run.records), fit=summary.estimator_fit),
        Series("H1 error", *error_series(run.records), fit=summary.error_fit, marker="s"),
    ]
    if uniform:
        series.append(Series("uniform H1 error", *error_series(uniform), fit=summary.uniform_fit, marker="^"))
    plot_convergence(series, out_dir / CONVERGENCE_SVG, title=f"{spec.name}, theta={theta:g}")
    files.append(out_dir / CONVERGENCE_SVG)

    if options.write_vtk:
        write_vtk(
            state.mesh,
            out_dir / FINAL_VTK,
            point_data={"u": state.solution.coeffs},
            cell_data={"eta_sq": state.indicators.eta_sq},
            title=f"{spec.name} k={state.record.k}",
        )
        files.append(out_dir / FINAL_VTK)

    logger.info(f"Experiment {spec.name} theta={theta:g} finished after {len(run.records)} iterations")
    return ExperimentResult(summary=summary, run=run, uniform=uniform, files=files)
