"""Rate fitting command implementation."""

import json
import logging
from pathlib import Path
from typing import Annotated, Any

import typer

from afem.cli.utils.options import OUTPUT_FORMAT_OPTION, OutputFormat
from afem.cli.utils.output import console, exit_with_error, print_flags, print_json, records_table, summary_table
from afem.core.constants import RefinementMode
from afem.exceptions import AFEMError
from afem.models.records import IterationRecord
from afem.services.experiment import SUMMARY_JSON, UNIFORM_CSV, summarize
from afem.services.export import read_run_csv

logger = logging.getLogger(__name__)


def _run_metadata(csv: Path) -> dict[str, Any]:
    """Example, theta, tau and mode from a summary.json next to the CSV, if present."""
    path = csv.parent / SUMMARY_JSON
    if not path.is_file():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"Ignoring unreadable {path}: {e}")
        return {}
    keys = ("problem", "example", "theta", "tau", "mode", "stopped_by", "reference_energy")
    return {key: data.get(key) for key in keys}


def _uniform_records(csv: Path) -> list[IterationRecord]:
    path = csv.parent / UNIFORM_CSV
    if path == csv or not path.is_file():
        return []
    return read_run_csv(path)


def rates(
    csv: Annotated[Path, typer.Option("--csv", help="Run CSV written by 'afem run'", exists=True, dir_okay=False)],
    window_decades: Annotated[
        float,
        typer.Option("--window-decades", help="Fit over the last this many decades of dofs", min=0.0, min_open=True),
    ] = 1.0,
    show_records: Annotated[bool, typer.Option("--records", help="Also print the per-iteration table")] = False,
    output_format: OUTPUT_FORMAT_OPTION = OutputFormat.TABLE,
) -> None:
    """Fit log-log slopes of the estimator and the H1 error against the dofs.

    A uniform.csv next to the run CSV adds the uniform baseline and the adaptive/uniform
    ratio; a summary.json adds the example targets and the contraction check.
    """
    try:
        records = read_run_csv(csv)
        uniform = _uniform_records(csv)
        meta = _run_metadata(csv)
        summary = summarize(
            records,
            problem=meta.get("problem") or csv.stem,
            example=meta.get("example"),
            theta=meta.get("theta"),
            tau=meta.get("tau"),
            mode=RefinementMode(meta["mode"]) if meta.get("mode") else None,
            stopped_by=meta.get("stopped_by"),
            uniform=uniform,
            reference_energy=meta.get("reference_energy"),
            window_decades=window_decades,
        )
    except AFEMError as e:
        raise exit_with_error(e) from e

    if output_format == OutputFormat.JSON:
        print_json(summary.model_dump(mode="json"))
        return

    if show_records:
        console.print(records_table(records, title=str(csv)))
    console.print(summary_table(summary))
    print_flags(summary.flags)
