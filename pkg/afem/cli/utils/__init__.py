"""CLI utilities module."""

from afem.cli.utils.options import (
    CONFIG_OPTION,
    EXAMPLE_OPTION,
    FORCE_OPTION,
    H_REF_OPTION,
    MODE_OPTION,
    NO_CACHE_OPTION,
    OUTPUT_DIR_OPTION,
    OUTPUT_FORMAT_OPTION,
    TAU_OPTION,
    THETA_OPTION,
    OutputFormat,
)
from afem.cli.utils.output import console, exit_with_error, print_saved

__all__ = [
    "CONFIG_OPTION",
    "EXAMPLE_OPTION",
    "FORCE_OPTION",
    "H_REF_OPTION",
    "MODE_OPTION",
    "NO_CACHE_OPTION",
    "OUTPUT_DIR_OPTION",
    "OUTPUT_FORMAT_OPTION",
    "TAU_OPTION",
    "THETA_OPTION",
    "OutputFormat",
    "console",
    "exit_with_error",
    "print_saved",
]
