"""Mesh check command implementation."""

from collections import Counter
from pathlib import Path
from typing import Annotated

import typer
from rich.table import Table

from afem.cli.utils.options import OUTPUT_FORMAT_OPTION, OutputFormat
from afem.cli.utils.output import console, exit_with_error, print_json
from afem.core.constants import BoundaryLabel
from afem.core.mesh import shape_regularity, total_area, validate_conformity
from afem.core.mesh_io import read_mesh
from afem.exceptions import AFEMError


def mesh_check(
    path: Annotated[Path, typer.Argument(help="Mesh file in afem-mesh format", exists=True, dir_okay=False)],
    output_format: OUTPUT_FORMAT_OPTION = OutputFormat.TABLE,
) -> None:
    """Check a mesh for conformity and report its size, area and shape regularity.

    Exits with status 1 when the mesh is not conforming.
    """
    try:
        mesh = read_mesh(path)
    except AFEMError as e:
        raise exit_with_error(e) from e

    report = validate_conformity(mesh)
    boundary = Counter(str(BoundaryLabel.from_code(int(code))) for code in mesh.edge_labels[mesh.boundary_edges])
    stats = {
        "path": str(path),
        "conforming": report.ok,
        "diagnostic": report.diagnostic,
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "edges": mesh.n_edges,
        "area": total_area(mesh),
        "shape_regularity": shape_regularity(mesh) if report.ok else None,
        "boundary_edges": dict(sorted(boundary.items())),
    }

    if output_format == OutputFormat.JSON:
        print_json(stats)
    else:
        table = Table(title=f"Mesh {path.name}", show_header=False)
        table.add_column("Property", style="bold")
        table.add_column("Value", justify="right")
        for key in ("vertices", "triangles", "edges"):
            table.add_row(key, str(stats[key]))
        table.add_row("area", f"{stats['area']:.12g}")
        if stats["shape_regularity"] is not None:
            table.add_row("max h/rho", f"{stats['shape_regularity']:.4f}")
        for label, count in stats["boundary_edges"].items():
            table.add_row(f"{label} edges", str(count))
        console.print(table)
        if report.ok:
            console.print("[green]✓ Mesh is conforming[/green]")
        else:
            console.print(f"[red]✗ Not conforming: {report.diagnostic}[/red]")

    if not report.ok:
        raise typer.Exit(1)
