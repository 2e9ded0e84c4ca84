"""Adaptive run command implementation."""

import logging
from pathlib import Path
from typing import Annotated

import typer

from afem.cli.utils.options import (
    CONFIG_OPTION,
    EXAMPLE_OPTION,
    FORCE_OPTION,
    H_REF_OPTION,
    MODE_OPTION,
    NO_CACHE_OPTION,
    OUTPUT_DIR_OPTION,
    TAU_OPTION,
    THETA_OPTION,
)
from afem.cli.utils.output import (
    console,
    exit_with_error,
    iteration_line,
    print_flags,
    print_saved,
    summary_table,
)
from afem.config import load_problem_config, load_settings
from afem.core.constants import RefinementMode
from afem.core.problem import example_config, spec_from_config
from afem.exceptions import AdaptiveLoopError, AFEMError
from afem.models.records import IterationRecord
from afem.services.experiment import RUN_CSV, ExperimentOptions, run_experiment

logger = logging.getLogger(__name__)


def run(
    example: EXAMPLE_OPTION = 1,
    theta: THETA_OPTION = 0.3,
    tau: TAU_OPTION = 1e-3,
    mode: MODE_OPTION = RefinementMode.ALL_EDGES,
    out: OUTPUT_DIR_OPTION = None,
    h_ref: H_REF_OPTION = None,
    config: CONFIG_OPTION = None,
    uniform_levels: Annotated[
        int,
        typer.Option("--uniform-levels", help="Levels of the uniform baseline (0 skips it)", min=0),
    ] = 6,
    window_decades: Annotated[
        float,
        typer.Option(
            "--window-decades",
            help="Rate fits use the last this many decades of dofs",
            min=0.0,
            min_open=True,
        ),
    ] = 1.0,
    max_k: Annotated[
        int | None,
        typer.Option("--max-k", help="Iteration cap (default from AFEM_MAX_K)", min=0),
    ] = None,
    vtk: Annotated[bool, typer.Option("--vtk", help="Also write the final mesh and solution as legacy VTK")] = False,
    no_cache: NO_CACHE_OPTION = False,
    force: FORCE_OPTION = False,
) -> None:
    """Run SOLVE, ESTIMATE, MARK and REFINE until the squared estimator drops below tau.

    Writes run.csv, uniform.csv, indicators.csv, rates.txt, summary.json and convergence.svg
    to the output directory. A configuration file can override the law coefficients,
    the conductivity and the boundary partition of the chosen example.
    """
    settings = load_settings()
    out_dir: Path = out or settings.output_dir

    try:
        if config is not None:
            problem_config = load_problem_config(config)
            if problem_config.example != example:
                console.print(f"[yellow]Config selects example {problem_config.example}; using it[/yellow]")
            example = problem_config.example
            spec = spec_from_config(problem_config)
        else:
            spec = example_config(example)
    except AFEMError as e:
        raise exit_with_error(e) from e

    console.print(
        f"[bold blue]{spec.name}[/bold blue] theta={theta:g} tau={tau:g} mode={mode} "
        f"h_ref={h_ref or settings.reference_h:g}"
    )

    def progress(stage: str, record: IterationRecord) -> None:
        console.print(iteration_line(stage, record))

    options = ExperimentOptions(
        h_ref=h_ref,
        uniform_levels=uniform_levels,
        window_decades=window_decades,
        write_vtk=vtk,
        use_cache=not no_cache,
        clear_cache=force,
        max_k=max_k,
    )
    try:
        with console.status("[bold blue]Running experiment...[/bold blue]"):
            result = run_experiment(
                spec, theta, tau, mode, out_dir, settings, options, example=example, progress=progress
            )
    except AdaptiveLoopError as e:
        console.print(f"[yellow]Partial run written to {out_dir / RUN_CSV}[/yellow]")
        raise exit_with_error(e) from e
    except AFEMError as e:
        raise exit_with_error(e) from e

    console.print(summary_table(result.summary))
    print_flags(result.summary.flags)
    print_saved(result.files)
    logger.debug(f"Run finished with stopped_by={result.run.stopped_by}")
