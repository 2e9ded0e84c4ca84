"""Reference solution command implementation."""

import logging
from pathlib import Path
from typing import Annotated

import typer

from afem.cache.reference import ReferenceSolutionCache
from afem.cli.utils.options import EXAMPLE_OPTION, FORCE_OPTION, H_REF_OPTION, NO_CACHE_OPTION
from afem.cli.utils.output import console, exit_with_error, print_saved
from afem.config import load_settings
from afem.core.assembly import energy_functional
from afem.core.mesh_io import write_function, write_mesh
from afem.exceptions import AFEMError
from afem.services.reference import reference_solve

logger = logging.getLogger(__name__)


def reference(
    out: Annotated[
        Path,
        typer.Option(
            "--out",
            "-o",
            help="Solution file; the mesh is written next to it with a .mesh suffix",
            dir_okay=False,
        ),
    ],
    example: EXAMPLE_OPTION = 1,
    h_ref: H_REF_OPTION = None,
    no_cache: NO_CACHE_OPTION = False,
    force: FORCE_OPTION = False,
) -> None:
    """Solve on a uniform mesh of size h with a tight Newton tolerance.

    The coefficients go to FILE in afem-fn format, the mesh to FILE with a .mesh suffix.
    """
    settings = load_settings()
    h = h_ref or settings.reference_h
    mesh_path = out.with_suffix(".mesh")
    if mesh_path == out:
        mesh_path = out.with_name(f"{out.name}.mesh")

    cache = None
    try:
        if not no_cache:
            cache = ReferenceSolutionCache(settings.cache_dir)
            if force:
                cache.clear_cache()
        with console.status(f"[bold blue]Solving example {example} on h={h:g}...[/bold blue]"):
            solution = reference_solve(
                example,
                h,
                settings.reference_eps,
                max_iter=settings.newton_max_iter,
                cg_tol=settings.cg_tol,
                cache=cache,
            )
        write_function(solution.solution, out)
        write_mesh(solution.mesh, mesh_path)
    except AFEMError as e:
        raise exit_with_error(e) from e
    finally:
        if cache is not None:
            cache.close()

    energy = energy_functional(solution.mesh, solution.spec, solution.solution)
    console.print(
        f"[green]✓ Reference[/green] {solution.spec.name}: {solution.mesh.n_triangles} triangles, "
        f"{solution.mesh.n_vertices} dofs, ||u||_H1^2={solution.h1_norm_sq:.10e}, J(u)={energy:.10e}"
    )
    print_saved([out, mesh_path])
    logger.debug(f"Reference eps={solution.eps:g}")
