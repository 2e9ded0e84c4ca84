"""Shared console output for CLI commands."""

import json
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import typer
from rich.console import Console
from rich.table import Table

from afem.exceptions import AFEMError
from afem.models.records import ExperimentSummary, IterationRecord
from afem.services.export import JSON_INDENT

console = Console()


def print_saved(paths: Sequence[Path]) -> None:
    for path in paths:
        console.print(f"[bold green]✓ Saved to:[/bold green] {path}")


def print_json(data: Any) -> None:
    console.print_json(json.dumps(data, indent=JSON_INDENT, default=str))


def exit_with_error(error: AFEMError) -> typer.Exit:
    """Print an error and return the exit to raise."""
    console.print(f"[red]Error: {error}[/red]")
    if error.details:
        details = ", ".join(f"{key}={value}" for key, value in error.details.items() if key != "report")
        if details:
            console.print(f"[dim]{details}[/dim]")
    return typer.Exit(1)


def iteration_line(stage: str, record: IterationRecord) -> str:
    """One progress line per finished iteration."""
    line = (
        f"[dim]{stage}[/dim] k={record.k:3d}  elements={record.n_elem:7d}  dofs={record.dofs:7d}  "
        f"eta^2={record.eta_sq_sum:.4e}  newton={record.newton_iters}"
    )
    if record.relative_error is not None:
        line += f"  rel. H1 error={100 * record.relative_error:.2f}%"
    return line


def records_table(records: Sequence[IterationRecord], title: str) -> Table:
    table = Table(title=title, show_lines=False)
    table.add_column("k", justify="right")
    table.add_column("elements", justify="right")
    table.add_column("dofs", justify="right", style="cyan")
    table.add_column("eta^2", justify="right")
    table.add_column("osc^2", justify="right")
    table.add_column("marked", justify="right")
    table.add_column("Newton", justify="right")
    table.add_column("H1 error^2", justify="right")
    for r in records:
        table.add_row(
            str(r.k),
            str(r.n_elem),
            str(r.dofs),
            f"{r.eta_sq_sum:.4e}",
            f"{r.osc_sq_sum:.4e}",
            str(r.n_marked),
            str(r.newton_iters),
            "" if r.h1_err_sq is None else f"{r.h1_err_sq:.4e}",
        )
    return table


def summary_table(summary: ExperimentSummary) -> Table:
    """Observed values next to their targets."""
    table = Table(title=f"Rates for {summary.problem}", show_lines=True)
    table.add_column("Quantity", style="bold")
    table.add_column("Observed", justify="right")
    table.add_column("Target", justify="right", style="dim")

    targets = summary.target_slopes or (None, None)
    rows: list[tuple[str, float | int | None, float | int | None]] = [
        ("iterations", summary.iterations, summary.target_iterations),
        ("estimator slope", summary.estimator_fit.slope if summary.estimator_fit else None, targets[0]),
        ("H1 error slope", summary.error_fit.slope if summary.error_fit else None, targets[1]),
        ("uniform slope", summary.uniform_fit.slope if summary.uniform_fit else None, summary.target_uniform_slope),
        ("slope difference", summary.slope_agreement, None),
        ("adaptive/uniform", summary.uniform_ratio, None),
        ("contraction mu", summary.contraction.mu if summary.contraction else None, None),
        ("effectivity band", summary.effectivity_band, None),
        ("closure max", summary.closure_max, None),
        ("stability max", summary.stability_max, None),
    ]
    if summary.snapshot is not None:
        snap = summary.snapshot
        rows.append((f"rel. error @ {snap.dofs} dofs", snap.relative_error, snap.target_relative_error))
    for name, observed, target in rows:
        table.add_row(name, _cell(observed), _cell(target))
    return table


def _cell(value: float | int | None) -> str:
    if value is None:
        return "-"
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"


def print_flags(flags: Sequence[str]) -> None:
    if not flags:
        console.print("[green]✓ All checks within their bands[/green]")
        return
    console.print("\n[bold yellow]Flags:[/bold yellow]")
    for flag in flags:
        console.print(f"[yellow]• {flag}[/yellow]")
