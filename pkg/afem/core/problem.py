"""Named experiment configurations and problem-data evaluation."""

import logging

from numpy.typing import ArrayLike

from afem.config import ProblemConfig
from afem.core.constants import FluxKind, Segment
from afem.exceptions import ValidationError
from afem.models.problem import (
    BoundaryPartition,
    ButlerVolmerLaw,
    CubicLaw,
    FloatArray,
    FluxData,
    NonlinearLaw,
    ProblemSpec,
)

logger = logging.getLogger(__name__)

EXAMPLE_IDS = (1, 2)


def f_eval(law: NonlinearLaw, t: ArrayLike) -> FloatArray:
    return law.f(t)


def f_prime(law: NonlinearLaw, t: ArrayLike) -> FloatArray:
    return law.f_prime(t)


def f_antideriv(law: NonlinearLaw, t: ArrayLike) -> FloatArray:
    """F(t), the antiderivative of f with F(0) = 0."""
    return law.antiderivative(t)


def example_config(example_id: int) -> ProblemSpec:
    """Problem data of one of the two benchmark experiments.

    Example 1 is a cubic cathode on the left side with g = x^2 + y^2 on every other segment.
    Example 2 is a Butler-Volmer cathode on both re-entrant segments with g = sin(20 y) on the
    left side and g = sin(x) + cos(y) on the remaining anode segments.

    Raises:
        ValidationError: If ``example_id`` is not 1 or 2
    """
    if example_id == 1:
        return ProblemSpec(
            name="example1",
            law=CubicLaw(c1=1.0, c2=1.0),
            flux=FluxData(default=FluxKind.RADIAL),
            partition=BoundaryPartition(gamma_c=frozenset({Segment.LEFT})),
        )
    if example_id == 2:
        return ProblemSpec(
            name="example2",
            law=ButlerVolmerLaw(c3=5.0, c4=5.0, c5=1.0),
            flux=FluxData(rules={Segment.LEFT: FluxKind.OSCILLATORY}, default=FluxKind.TRIGONOMETRIC),
            partition=BoundaryPartition(
                gamma_c=frozenset({Segment.REENTRANT_VERTICAL, Segment.REENTRANT_HORIZONTAL}),
            ),
        )
    raise ValidationError("example", example_id, f"Unknown example id {example_id}; expected one of {EXAMPLE_IDS}")


def spec_from_config(config: ProblemConfig) -> ProblemSpec:
    """Apply the overrides of a problem config file to its base example."""
    spec = example_config(config.example)
    updates: dict[str, object] = {}

    law = spec.law
    if isinstance(law, CubicLaw):
        coefficients = {"c1": config.c1, "c2": config.c2}
    else:
        coefficients = {"c3": config.c3, "c4": config.c4, "c5": config.c5}
    overrides = {key: value for key, value in coefficients.items() if value is not None}
    ignored = [
        key
        for key in ("c1", "c2", "c3", "c4", "c5")
        if key not in coefficients and getattr(config, key) is not None
    ]
    if ignored:
        logger.warning(f"Coefficients {ignored} do not apply to the {law.kind} law of example {config.example}")
    if overrides:
        updates["law"] = law.model_copy(update=overrides)

    if config.sigma is not None:
        updates["sigma_default"] = config.sigma

    if config.gamma_c is not None or config.gamma_0 is not None:
        gamma_c = frozenset(config.gamma_c) if config.gamma_c is not None else spec.partition.gamma_c
        gamma_0 = frozenset(config.gamma_0) if config.gamma_0 is not None else spec.partition.gamma_0 - gamma_c
        if gamma_c & gamma_0:
            raise ValidationError(
                "gamma_0", sorted(gamma_c & gamma_0), "Segments cannot be both cathode and insulated"
            )
        updates["partition"] = BoundaryPartition(gamma_c=gamma_c, gamma_0=gamma_0)

    if updates:
        spec = spec.model_copy(update={**updates, "name": f"{spec.name}-custom"})
        logger.info(f"Applied problem overrides: {sorted(updates)}")
    return spec
