"""Tests for rate fits and the empirical run checks."""

import math

import numpy as np
import pytest

from afem.exceptions import ValidationError
from afem.services.rates import (
    closure_ratio,
    closure_ratios,
    contraction_search,
    effectivity_band,
    error_series,
    estimator_series,
    fit_rate,
    snapshot,
    stability_ratio,
)
from tests.factories import make_record


class TestFitRate:
    def test_exact_power_law(self):
        n = np.logspace(2, 5, 20)
        fit = fit_rate(n, n**-0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.predict(1e4) == pytest.approx(1e-2, rel=1e-10)

    def test_constant_values(self):
        n = np.logspace(1, 4, 12)
        assert fit_rate(n, np.full_like(n, 3.0)).slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_data(self, rng):
        n = np.logspace(2, 5, 30)
        q = n**-0.54 * np.exp(rng.normal(0.0, 0.02, size=n.size))
        fit = fit_rate(n, q, window=(n[0], n[-1]))
        assert fit.slope == pytest.approx(-0.54, abs=0.02)
        assert fit.n_points == 30

    def test_default_window_is_last_decade(self):
        n = np.logspace(1, 5, 41)
        q = np.where(n < 5e3, 1.0, n**-0.5)
        fit = fit_rate(n, q)
        assert fit.n_min == pytest.approx(1e4)
        assert fit.n_max == pytest.approx(1e5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)

    def test_too_few_points(self):
        n = np.array([10.0, 100.0, 1000.0])
        with pytest.raises(ValidationError):
            fit_rate(n, n**-0.5)

    def test_needs_distinct_dofs(self):
        with pytest.raises(ValidationError):
            fit_rate(np.full(8, 100.0), np.linspace(1.0, 2.0, 8), min_points=2)

    def test_rejects_non_positive_values(self):
        with pytest.raises(ValidationError):
            fit_rate([1.0, 2.0], [1.0, 0.0], min_points=2)


def geometric_run(n: int, decay: float = 0.6):
    return [
        make_record(
            k,
            dofs=100 * 2**k,
            eta_sq=decay**k,
            energy=-1.0 + 0.5 * decay**k,
            h1_err_sq=0.3 * decay**k,
            n_marked=10 * 2**k,
            h1_norm_sq=4.0 / (1 + k),
            ref_h1_norm_sq=4.0,
        )
        for k in range(n)
    ]


def test_series():
    records = geometric_run(4)
    dofs, eta = estimator_series(records)
    assert dofs == [100.0, 200.0, 400.0, 800.0]
    assert eta[2] == pytest.approx(0.6)
    _, errors = error_series(records)
    assert errors[0] == pytest.approx(math.sqrt(0.3))


def test_contraction_found_for_geometric_decay():
    estimate = contraction_search(geometric_run(10), reference_energy=-1.0)
    assert estimate.holds
    assert estimate.mu == pytest.approx(0.6, rel=1e-9)
    assert estimate.start_k == 2
    assert 1e-6 <= estimate.beta <= 1e2


def test_contraction_fails_for_stagnation():
    records = [make_record(k, 100 * (k + 1), 1.0, energy=0.0) for k in range(6)]
    assert not contraction_search(records, reference_energy=-1.0).holds


def test_contraction_needs_two_records():
    with pytest.raises(ValidationError):
        contraction_search(geometric_run(3), reference_energy=-1.0)


def test_effectivity_band_of_proportional_quantities():
    assert effectivity_band(geometric_run(10)) == pytest.approx(1.0)
    assert effectivity_band(geometric_run(5)) is None


def test_closure_ratios():
    records = [make_record(k, 10, 1.0, n_elem=n, n_marked=m) for k, (n, m) in enumerate([(10, 2), (18, 3), (30, 0)])]
    assert closure_ratios(records) == pytest.approx([4.0, 4.0])
    assert closure_ratio(records) == pytest.approx(4.0)
    assert closure_ratio(records[:1]) is None


def test_stability_ratio():
    assert stability_ratio(geometric_run(3), flux_norm_sq=4.0) == pytest.approx(1.0)
    assert stability_ratio(geometric_run(3), flux_norm_sq=0.0) is None


def test_snapshot_picks_nearest_dofs():
    records = geometric_run(6)
    shot = snapshot(records, 700, example=1)
    assert shot is not None
    assert shot.dofs == 800
    assert shot.relative_error == pytest.approx(math.sqrt(0.3 * 0.6**3 / 4.0))
    assert shot.target_relative_error == pytest.approx(0.0648)


def test_snapshot_tie_takes_earlier_iteration():
    shot = snapshot(geometric_run(4), 300)
    assert shot is not None
    assert shot.k == 1
    assert shot.target_relative_error is None
