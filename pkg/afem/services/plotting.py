"""Log-log convergence plots."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from afem.exceptions import ExportError
from afem.models.records import RateFit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Series:
    """One curve of the convergence plot, optionally with its fitted rate."""

    label: str
    dofs: Sequence[float]
    values: Sequence[float]
    fit: RateFit | None = None
    marker: str = "o"


def plot_convergence(series: Sequence[Series], path: Path, title: str = "") -> None:
    """Write quantities against dofs on log-log axes, fits as dashed lines, to an SVG file.

    Raises:
        ExportError: If the file cannot be written
    """
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot(111)
    for curve in series:
        if not curve.dofs:
            continue
        (line,) = ax.plot(curve.dofs, curve.values, marker=curve.marker, markersize=3, lw=1.0, label=curve.label)
        if curve.fit is not None:
            n = np.array([curve.fit.n_min, curve.fit.n_max])
            fitted = [curve.fit.predict(float(v)) for v in n]
            ax.plot(n, fitted, linestyle="--", color=line.get_color(), lw=1.0, label=f"slope {curve.fit.slope:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set(xlabel="degrees of freedom", ylabel="estimator / H1 error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", lw=0.3)
    ax.legend(loc="best", fontsize="small")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        # fixed salt and no date keep the SVG byte-identical across runs
        with rc_context({"svg.hashsalt": "afem", "svg.fonttype": "none"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ExportError("svg", f"Failed to write plot to {path}: {e}", {"path": str(path)}) from e
    logger.info(f"Wrote convergence plot to {path}")
