"""Main CLI entry point for the adaptive finite element toolkit."""

import logging
from typing import Annotated

import typer
from rich.logging import RichHandler

from afem import __version__
from afem.cli.commands.mesh_check import mesh_check
from afem.cli.commands.rates import rates
from afem.cli.commands.reference import reference
from afem.cli.commands.run import run
from afem.cli.utils.output import console

app = typer.Typer(
    name="afem",
    help="Adaptive P1 finite elements for cathodic protection with nonlinear boundary conditions",
    add_completion=True,
    rich_markup_mode="rich",
    no_args_is_help=True,
)


def _version(value: bool) -> None:
    if value:
        console.print(f"afem {__version__}")
        raise typer.Exit()


@app.callback()
def callback(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log solver internals at DEBUG level")] = False,
    version: Annotated[
        bool, typer.Option("--version", callback=_version, is_eager=True, help="Show the version and exit")
    ] = False,
) -> None:
    """
    AFEM command line
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


app.command("run", help="Run the adaptive loop for a benchmark example and write all outputs")(run)
app.command("reference", help="Solve a benchmark example on a fine uniform reference mesh")(reference)
app.command("rates", help="Fit convergence rates from a run CSV")(rates)
app.command("mesh-check", help="Validate conformity and shape regularity of a mesh file")(mesh_check)


if __name__ == "__main__":
    app()
