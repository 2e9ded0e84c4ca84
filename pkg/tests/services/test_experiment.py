"""Tests for the end-to-end experiment and its summary."""

import json

import pytest

from afem.core.constants import RefinementMode
from afem.exceptions import AdaptiveLoopError
from afem.services.experiment import (
    CONVERGENCE_SVG,
    FINAL_VTK,
    INDICATORS_CSV,
    RATES_TXT,
    RUN_CSV,
    SUMMARY_JSON,
    UNIFORM_CSV,
    ExperimentOptions,
    format_rates,
    run_experiment,
    summarize,
)
from afem.services.export import read_run_csv
from afem.services.reference import reference_solve
from tests.factories import make_record


def test_small_experiment_writes_every_output(settings, tmp_path):
    out = tmp_path / "run"
    options = ExperimentOptions(uniform_levels=2, write_vtk=True)
    stages = []
    result = run_experiment(
        1, 0.5, 1e-12, RefinementMode.ALL_EDGES, out, settings, options, progress=lambda s, r: stages.append(s)
    )
    for name in (RUN_CSV, UNIFORM_CSV, INDICATORS_CSV, RATES_TXT, SUMMARY_JSON, CONVERGENCE_SVG, FINAL_VTK):
        assert (out / name).is_file(), name
    assert stages.count("adaptive") == 4
    assert stages.count("uniform") == 2

    summary = result.summary
    assert summary.example == 1
    assert summary.iterations == 3
    assert summary.stopped_by == "max_k"
    assert summary.target_iterations is None
    assert summary.h_ref == 0.125
    assert any("iteration cap" in flag for flag in summary.flags)
    assert all(r.h1_err_sq is not None and r.h1_err_sq > 0 for r in result.run.records)

    loaded = read_run_csv(out / RUN_CSV)
    assert [r.dofs for r in loaded] == [r.dofs for r in result.run.records]
    assert [r.eta_sq_sum for r in loaded] == [r.eta_sq_sum for r in result.run.records]
    data = json.loads((out / SUMMARY_JSON).read_text(encoding="utf-8"))
    assert data["mode"] == "all-edges"
    assert "slope_agreement" in data
    indicator_rows = (out / INDICATORS_CSV).read_text(encoding="utf-8").splitlines()
    assert len(indicator_rows) == result.run.final.n_elem + 1


def test_experiment_output_is_reproducible(settings, tmp_path):
    options = ExperimentOptions(uniform_levels=0, use_cache=False, max_k=2)
    for name in ("a", "b"):
        run_experiment(1, 0.3, 1e-12, RefinementMode.SINGLE_EDGE, tmp_path / name, settings, options)
    for name in (RUN_CSV, RATES_TXT, CONVERGENCE_SVG):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_failed_loop_writes_partial_csv(settings, tmp_path):
    reference = reference_solve(1, settings.reference_h)
    failing = settings.model_copy(update={"newton_max_iter": 1, "newton_eps": 1e-15})
    with pytest.raises(AdaptiveLoopError):
        run_experiment(
            1,
            0.3,
            1e-3,
            RefinementMode.ALL_EDGES,
            tmp_path,
            failing,
            ExperimentOptions(use_cache=False),
            reference=reference,
        )
    assert (tmp_path / RUN_CSV).is_file()


def power_law_run(n: int = 12):
    return [
        make_record(
            k,
            dofs=100 * 2**k,
            eta_sq=(100 * 2**k) ** -1.0,
            h1_err_sq=0.25 * (100 * 2**k) ** -1.0,
            ref_h1_norm_sq=1.0,
            energy=-1.0 + (100 * 2**k) ** -1.0,
            n_marked=50 * 2**k,
            n_elem=200 * 2**k,
        )
        for k in range(n)
    ]


def test_summary_of_benchmark_like_run():
    uniform = [make_record(k, 100 * 4**k, 1.0, h1_err_sq=(100 * 4**k) ** -0.2) for k in range(6)]
    summary = summarize(
        power_law_run(),
        problem="example1",
        example=1,
        theta=0.3,
        tau=1e-3,
        mode=RefinementMode.ALL_EDGES,
        stopped_by="tolerance",
        uniform=uniform,
        reference_energy=-1.0,
        window_decades=3.0,
    )
    assert summary.estimator_fit is not None
    assert summary.estimator_fit.slope == pytest.approx(-0.5)
    assert summary.error_fit is not None
    assert summary.error_fit.slope == pytest.approx(-0.5)
    assert summary.uniform_fit is not None
    assert summary.uniform_fit.slope == pytest.approx(-0.1)
    assert summary.slope_agreement == pytest.approx(0.0, abs=1e-10)
    assert summary.uniform_ratio == pytest.approx(5.0)
    assert summary.target_iterations == 24
    assert summary.target_slopes == (-0.50, -0.53)
    assert summary.contraction is not None and summary.contraction.holds
    assert summary.closure_max == pytest.approx(4.0)
    assert "stopped by the iteration cap" not in " ".join(summary.flags)

    text = format_rates(summary)
    assert "estimator slope: -0.5000" in text
    assert "(target 24)" in text
    assert "contraction:" in text


def test_summary_without_run_parameters():
    summary = summarize(power_law_run(), problem="run", example=None, theta=None, tau=None, mode=None)
    assert summary.target_slopes is None
    assert summary.uniform_fit is None
    assert "theta: n/a  tau: n/a  mode: n/a" in format_rates(summary)


def test_summary_flags_missing_fit():
    records = power_law_run(3)
    summary = summarize(records, problem="short", example=1, theta=0.1, tau=1e-3, mode=RefinementMode.ALL_EDGES)
    assert summary.estimator_fit is None
    assert any(flag.startswith("estimator fit unavailable") for flag in summary.flags)


@pytest.mark.parametrize(
    ("example", "theta", "slopes", "iterations"),
    [(1, 0.1, (-0.51, -0.54), 58), (2, 0.1, (-0.50, -0.56), 53), (2, 0.3, (-0.51, -0.55), 22)],
)
def test_summary_targets_per_configuration(example, theta, slopes, iterations):
    summary = summarize(
        power_law_run(), problem="run", example=example, theta=theta, tau=1e-3, mode=RefinementMode.ALL_EDGES
    )
    assert summary.target_slopes == slopes
    assert summary.target_iterations == iterations
