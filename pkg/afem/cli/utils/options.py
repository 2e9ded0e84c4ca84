"""Shared CLI options and enums for commands."""

from pathlib import Path
from typing import Annotated

import typer

from afem._compat import StrEnum
from afem.core.constants import RefinementMode


class OutputFormat(StrEnum):
    """Supported output formats across commands."""

    TABLE = "table"
    JSON = "json"


EXAMPLE_OPTION = Annotated[
    int,
    typer.Option(
        "--example",
        "-e",
        help="Benchmark example (1: cubic cathode, 2: Butler-Volmer cathode)",
        min=1,
        max=2,
    ),
]

THETA_OPTION = Annotated[
    float,
    typer.Option(
        "--theta",
        help="Dörfler marking parameter in (0, 1]",
        min=0.0,
        max=1.0,
        min_open=True,
    ),
]

TAU_OPTION = Annotated[
    float,
    typer.Option(
        "--tau",
        help="Stop once the squared estimator falls below this tolerance",
        min=0.0,
        min_open=True,
    ),
]

MODE_OPTION = Annotated[
    RefinementMode,
    typer.Option(
        "--mode",
        help="Bisect all edges of a marked element or its refinement edge only",
        case_sensitive=False,
    ),
]

H_REF_OPTION = Annotated[
    float | None,
    typer.Option(
        "--h-ref",
        "--h",
        help="Reference mesh size; 1/h must be an integer (default from AFEM_REFERENCE_H)",
        min=0.0,
        min_open=True,
    ),
]

CONFIG_OPTION = Annotated[
    Path | None,
    typer.Option(
        "--config",
        "-c",
        help="Problem config file with 'key = value' overrides",
        exists=True,
        dir_okay=False,
    ),
]

OUTPUT_DIR_OPTION = Annotated[
    Path | None,
    typer.Option(
        "--out",
        "-o",
        help="Output directory (default from AFEM_OUTPUT_DIR)",
        file_okay=False,
    ),
]

OUTPUT_FORMAT_OPTION = Annotated[
    OutputFormat,
    typer.Option(
        "--format",
        "-f",
        help="Output format",
        case_sensitive=False,
    ),
]

NO_CACHE_OPTION = Annotated[
    bool,
    typer.Option(
        "--no-cache",
        help="Solve the reference problem even if a cached solution exists",
    ),
]

FORCE_OPTION = Annotated[
    bool,
    typer.Option(
        "--force",
        help="Clear the reference cache before solving",
    ),
]
