"""Problem data models: cathode laws, anode flux and the boundary partition."""

import json
import math
from typing import Annotated, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from afem.core.constants import BoundaryLabel, FluxKind, QuadraturePoints, Segment, Tolerances
from afem.exceptions import OverflowGuardError

FloatArray = NDArray[np.float64]


class CubicLaw(BaseModel):
    """Polynomial cathode law f(t) = C1 t + C2 t^3.

    C2 = 0 is accepted and gives the linear Robin law, which keeps f strictly monotone with
    f' >= C1. Config files still require C2 > 0.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["cubic"] = "cubic"
    c1: PositiveFloat = 1.0
    c2: NonNegativeFloat = 1.0

    def f(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        return self.c1 * t + self.c2 * t**3

    def f_prime(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        return self.c1 + 3.0 * self.c2 * t**2

    def antiderivative(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        return 0.5 * self.c1 * t**2 + 0.25 * self.c2 * t**4

    @property
    def alpha(self) -> float:
        """Lower bound of f'."""
        return self.c1

    @property
    def projection_degree(self) -> int:
        """Polynomial degree of the jump projection on cathode edges (P1 elements)."""
        return 3

    @property
    def quadrature_points(self) -> int:
        return QuadraturePoints.POLYNOMIAL


class ButlerVolmerLaw(BaseModel):
    """Exponential cathode law f(t) = C5 (exp(C3 t) - exp(-C4 t))."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["butler-volmer"] = "butler-volmer"
    c3: PositiveFloat = 5.0
    c4: PositiveFloat = 5.0
    c5: PositiveFloat = 1.0

    @property
    def guard(self) -> float:
        """Largest admissible |t| before exp overflows."""
        return Tolerances.BUTLER_VOLMER_EXPONENT / max(self.c3, self.c4)

    def _checked(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        if t.size:
            max_abs = float(np.max(np.abs(t)))
            if not max_abs <= self.guard:
                raise OverflowGuardError(max_abs, self.guard)
        return t

    def f(self, t: ArrayLike) -> FloatArray:
        t = self._checked(t)
        return self.c5 * (np.exp(self.c3 * t) - np.exp(-self.c4 * t))

    def f_prime(self, t: ArrayLike) -> FloatArray:
        t = self._checked(t)
        return self.c5 * (self.c3 * np.exp(self.c3 * t) + self.c4 * np.exp(-self.c4 * t))

    def antiderivative(self, t: ArrayLike) -> FloatArray:
        t = self._checked(t)
        # expm1 keeps F(0) = 0 exact and avoids cancellation near zero
        return self.c5 * (np.expm1(self.c3 * t) / self.c3 + np.expm1(-self.c4 * t) / self.c4)

    @property
    def alpha(self) -> float:
        """Minimum of f', attained where C3^2 exp(C3 t) = C4^2 exp(-C4 t)."""
        t_min = 2.0 * math.log(self.c4 / self.c3) / (self.c3 + self.c4)
        return float(self.f_prime(t_min))

    @property
    def projection_degree(self) -> int:
        return 0

    @property
    def quadrature_points(self) -> int:
        return QuadraturePoints.TRANSCENDENTAL


NonlinearLaw = Annotated[CubicLaw | ButlerVolmerLaw, Field(discriminator="kind")]


class FluxData(BaseModel):
    """Anode current density g, one closed-form rule per boundary segment."""

    model_config = ConfigDict(frozen=True)

    rules: dict[Segment, FluxKind] = Field(default_factory=dict)
    default: FluxKind = FluxKind.ZERO
    constant: float = 0.0

    def kind_for(self, segment: Segment) -> FluxKind:
        return self.rules.get(segment, self.default)

    def evaluate(self, segment: Segment, x: FloatArray, y: FloatArray) -> FloatArray:
        """Evaluate g at points of one boundary segment."""
        return self._evaluate_kind(self.kind_for(segment), x, y)

    def evaluate_default(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Evaluate g on boundary edges that lie on no named segment."""
        return self._evaluate_kind(self.default, x, y)

    def _evaluate_kind(self, kind: FluxKind, x: FloatArray, y: FloatArray) -> FloatArray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if kind == FluxKind.ZERO:
            return np.zeros_like(x)
        if kind == FluxKind.CONSTANT:
            return np.full_like(x, self.constant)
        if kind == FluxKind.RADIAL:
            return x**2 + y**2
        if kind == FluxKind.OSCILLATORY:
            return np.sin(20.0 * y)
        return np.sin(x) + np.cos(y)

    @property
    def quadrature_points(self) -> int:
        transcendental = {FluxKind.OSCILLATORY, FluxKind.TRIGONOMETRIC}
        if transcendental & {*self.rules.values(), self.default}:
            return QuadraturePoints.TRANSCENDENTAL
        return QuadraturePoints.POLYNOMIAL


class BoundaryPartition(BaseModel):
    """Assignment of boundary segments to cathodes and insulated parts; the rest are anodes."""

    model_config = ConfigDict(frozen=True)

    gamma_c: frozenset[Segment] = frozenset()
    gamma_0: frozenset[Segment] = frozenset()

    @model_validator(mode="after")
    def check_disjoint(self) -> "BoundaryPartition":
        overlap = self.gamma_c & self.gamma_0
        if overlap:
            raise ValueError(f"Segments assigned twice: {sorted(overlap)}")
        return self

    def label_for(self, segment: Segment) -> BoundaryLabel:
        if segment in self.gamma_c:
            return BoundaryLabel.GAMMA_C
        if segment in self.gamma_0:
            return BoundaryLabel.GAMMA0
        return BoundaryLabel.GAMMA_A


class ProblemSpec(BaseModel):
    """Complete data of one cathodic-protection problem."""

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    law: NonlinearLaw = Field(default_factory=CubicLaw)
    flux: FluxData = Field(default_factory=FluxData)
    sigma_default: PositiveFloat = 1.0
    sigma_min: PositiveFloat | None = None
    sigma_max: PositiveFloat | None = None
    partition: BoundaryPartition = Field(default_factory=BoundaryPartition)
    law_points: int | None = Field(default=None, ge=1, le=QuadraturePoints.MAX)
    flux_points: int | None = Field(default=None, ge=1, le=QuadraturePoints.MAX)

    @property
    def sigma_bounds(self) -> tuple[float, float]:
        """Global conductivity bounds (sigma_1, sigma_2)."""
        return (self.sigma_min or self.sigma_default, self.sigma_max or self.sigma_default)

    @property
    def gamma_c_points(self) -> int:
        return self.law_points or self.law.quadrature_points

    @property
    def gamma_a_points(self) -> int:
        return self.flux_points or self.flux.quadrature_points

    def fingerprint(self) -> str:
        """Stable text identity used for cache keys."""
        data = self.model_dump(mode="json")
        data["partition"] = {key: sorted(value) for key, value in data["partition"].items()}
        return json.dumps(data, sort_keys=True)
