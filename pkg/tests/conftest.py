"""Shared fixtures: benchmark meshes, problem data and seeded generators."""

import numpy as np
import pytest

from afem.config import Settings
from afem.core.constants import FluxKind, Segment
from afem.core.mesh import Mesh, build_lshape_initial
from afem.core.problem import example_config
from afem.models.problem import BoundaryPartition, CubicLaw, FluxData, ProblemSpec


@pytest.fixture
def example1() -> ProblemSpec:
    return example_config(1)


@pytest.fixture
def example2() -> ProblemSpec:
    return example_config(2)


@pytest.fixture
def zero_data() -> ProblemSpec:
    """Cubic cathode on the left side and no anode current."""
    return ProblemSpec(
        name="zero",
        law=CubicLaw(c1=1.0, c2=1.0),
        flux=FluxData(default=FluxKind.ZERO),
        partition=BoundaryPartition(gamma_c=frozenset({Segment.LEFT})),
    )


@pytest.fixture
def coarse_mesh(example1: ProblemSpec) -> Mesh:
    """h = 1: three unit squares, six triangles."""
    return build_lshape_initial(1.0, example1.partition)


@pytest.fixture
def initial_mesh(example1: ProblemSpec) -> Mesh:
    """h = 0.2 starting mesh of the benchmark runs."""
    return build_lshape_initial(0.2, example1.partition)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def settings(tmp_path) -> Settings:
    """Small, fast configuration writing into a temporary directory."""
    return Settings(
        output_dir=tmp_path / "results",
        cache_dir=tmp_path / "cache",
        initial_h=0.5,
        reference_h=0.125,
        max_k=3,
    )
