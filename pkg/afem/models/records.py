"""Run records and analysis results."""

import math
from typing import Literal

from pydantic import BaseModel, Field, computed_field

from afem.core.constants import RefinementMode

RUN_CSV_FIELDS = [
    "k",
    "n_elem",
    "dofs",
    "eta_sq_sum",
    "osc_sq_sum",
    "n_marked",
    "newton_iters",
    "h1_err_sq",
    "energy",
    "ref_h1_norm_sq",
]


class NewtonReport(BaseModel):
    """Outcome of one Newton solve."""

    iterations: int = 0
    final_step_h1: float = math.inf
    converged: bool = False
    inner_iterations: list[int] = Field(default_factory=list)
    energies: list[float] = Field(default_factory=list, description="Energy of every iterate, starting at u0")
    energy_increases: int = Field(default=0, description="Energy increases after the first Newton step")
    final_residual: float = math.inf


class IterationRecord(BaseModel):
    """One SOLVE-ESTIMATE-MARK-REFINE pass."""

    k: int
    n_elem: int
    dofs: int
    eta_sq_sum: float
    osc_sq_sum: float
    n_marked: int = 0
    newton_iters: int
    h1_err_sq: float | None = None
    energy: float
    h1_norm_sq: float = Field(default=0.0, description="Squared H1 norm of u_k")
    ref_h1_norm_sq: float | None = Field(default=None, description="Squared H1 norm of the reference solution")

    @property
    def relative_error(self) -> float | None:
        if self.h1_err_sq is None or not self.ref_h1_norm_sq:
            return None
        return math.sqrt(self.h1_err_sq / self.ref_h1_norm_sq)

    def csv_row(self) -> dict[str, str]:
        """Row for the run CSV; floats use repr so files are bit-reproducible."""
        row = self.model_dump(include=set(RUN_CSV_FIELDS))
        return {key: "" if row[key] is None else repr(row[key]) for key in RUN_CSV_FIELDS}


class RunConfig(BaseModel):
    """Snapshot of the adaptive loop parameters."""

    problem: str
    theta: float = Field(gt=0, le=1)
    tau: float = Field(gt=0)
    eps_newton: float = Field(gt=0)
    mode: RefinementMode = RefinementMode.ALL_EDGES
    max_k: int = Field(ge=0)


class AdaptiveRun(BaseModel):
    """Record of a full adaptive run."""

    config: RunConfig
    records: list[IterationRecord] = Field(default_factory=list)
    stopped_by: Literal["tolerance", "max_k", "error"] | None = None

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def k_final(self) -> int:
        return self.records[-1].k if self.records else -1


class RateFit(BaseModel):
    """Least-squares slope of log Q against log N."""

    slope: float
    intercept: float
    n_min: float
    n_max: float
    n_points: int
    residual: float

    def predict(self, n: float) -> float:
        return math.exp(self.intercept) * n**self.slope


class ContractionEstimate(BaseModel):
    """Best weight beta for E_k + beta * eta_k^2 and the resulting contraction factor."""

    beta: float
    mu: float
    start_k: int
    holds: bool


class SnapshotError(BaseModel):
    """Relative H1 error at the iteration whose dofs are nearest a target."""

    target_dofs: int
    dofs: int
    k: int
    relative_error: float
    target_relative_error: float | None = None


class ExperimentSummary(BaseModel):
    """Everything written to rates.txt / summary.json."""

    problem: str
    example: int | None = None
    theta: float | None = None
    tau: float | None = None
    mode: RefinementMode | None = None
    iterations: int
    target_iterations: int | None = None
    stopped_by: str | None = None
    estimator_fit: RateFit | None = None
    error_fit: RateFit | None = None
    uniform_fit: RateFit | None = None
    target_slopes: tuple[float, float] | None = None
    target_uniform_slope: float | None = None
    contraction: ContractionEstimate | None = None
    effectivity_band: float | None = None
    closure_max: float | None = None
    stability_max: float | None = None
    snapshot: SnapshotError | None = None
    h_ref: float | None = None
    reference_energy: float | None = None
    stability_nonincreasing: bool | None = None
    flags: list[str] = Field(default_factory=list)

    @computed_field
    @property
    def slope_agreement(self) -> float | None:
        """|estimator slope - error slope|."""
        if self.estimator_fit is None or self.error_fit is None:
            return None
        return abs(self.estimator_fit.slope - self.error_fit.slope)

    @computed_field
    @property
    def uniform_ratio(self) -> float | None:
        """Adaptive over uniform error slope magnitude."""
        if self.error_fit is None or self.uniform_fit is None or self.uniform_fit.slope == 0:
            return None
        return abs(self.error_fit.slope) / abs(self.uniform_fit.slope)
