import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fasbar.analysis import (
    NMSE_FLOOR_DB,
    lemma1_mse,
    lemma2_min_mse,
    mean_channel_power,
    monte_carlo_mse,
    mse_report,
    nmse,
    nmse_stats,
    noise_variance_for,
    results_to_csv,
    run_experiment,
)
from fasbar.channel import ArrayGeometry, PortSchedule
from fasbar.config import EstimatorSpec, ExperimentConfig
from fasbar.kernels import KernelHyper

from conftest import random_psd


class TestMismatchedPriorMse:
    def test_infinite_noise_gives_trace(self, rng):
        sigma, cov = random_psd(rng, 8), random_psd(rng, 8)
        e = lemma1_mse(sigma, cov, [0, 3, 5], 1e12 * np.linalg.norm(sigma, 2))
        assert e == pytest.approx(np.trace(cov).real, rel=1e-6)

    def test_true_kernel_full_observation_attains_minimum(self, rng):
        cov = random_psd(rng, 10)
        e = lemma1_mse(cov, cov, np.arange(10), 0.3)
        assert e == pytest.approx(lemma2_min_mse(cov, 0.3), abs=1e-10)

    def test_matches_monte_carlo(self, rng):
        sigma, cov = random_psd(rng, 16), random_psd(rng, 16)
        sched = PortSchedule(rng.choice(16, 6, replace=False), 6, 1, 16)
        report = mse_report(sigma, cov, sched, 0.1, trials=100_000, rng_seed=4)
        assert abs(report.z_score) < 3
        assert report.min_mse <= report.analytic_mse

    def test_permutation_invariance(self, rng):
        sigma, cov = random_psd(rng, 9), random_psd(rng, 9)
        omega = np.array([1, 4, 8])
        perm = rng.permutation(9)
        inv = np.argsort(perm)
        # relabel ports: new port i is old port perm[i]
        a = lemma1_mse(sigma, cov, omega, 0.2)
        b = lemma1_mse(sigma[np.ix_(perm, perm)], cov[np.ix_(perm, perm)], inv[omega], 0.2)
        assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mse_never_below_lmmse_bound(seed):
    rng = np.random.default_rng(seed)
    n = 16
    sigma, cov = random_psd(rng, n), random_psd(rng, n)
    omega = rng.choice(n, int(rng.integers(1, n + 1)), replace=False)
    s2 = float(10 ** rng.uniform(-3, 1))
    assert lemma1_mse(sigma, cov, omega, s2) >= lemma2_min_mse(cov, s2) - 1e-9


class TestMinimumMse:
    def test_noiseless_full_rank_is_zero(self, rng):
        assert abs(lemma2_min_mse(random_psd(rng, 6), 0.0)) < 1e-10

    def test_identity(self):
        assert lemma2_min_mse(np.eye(7), 0.25) == pytest.approx(7 * 0.25 / 1.25, rel=1e-14)

    def test_matches_information_form(self, rng):
        cov = random_psd(rng, 8)
        s2 = 0.4
        oracle = np.trace(np.linalg.inv(np.linalg.inv(cov) + np.eye(8) / s2)).real
        assert lemma2_min_mse(cov, s2) == pytest.approx(oracle, abs=1e-10)


class TestNmse:
    def test_exact_recovery_floor(self):
        h = np.ones(4)
        assert nmse([(h, h)]) == NMSE_FLOOR_DB

    def test_zero_estimate_is_zero_db(self, rng):
        pairs = [(np.zeros(5), rng.standard_normal(5)) for _ in range(3)]
        assert nmse(pairs) == pytest.approx(0.0, abs=1e-12)

    def test_one_percent_error(self, rng):
        pairs = []
        for _ in range(5):
            h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            e = rng.standard_normal(8)
            e *= 0.1 * np.linalg.norm(h) / np.linalg.norm(e)
            pairs.append((h + e, h))
        assert nmse(pairs) == pytest.approx(-20.0, abs=1e-10)

    def test_averages_ratios_not_decibels(self):
        h = np.ones(1)
        s = nmse_stats([(h * 0.9, h), (h * 0.0, h)])
        assert s.mean_ratio == pytest.approx((0.01 + 1.0) / 2)
        assert s.nmse_db == pytest.approx(10 * math.log10(0.505))

    def test_zero_channel_excluded(self):
        s = nmse_stats([(np.ones(3), np.zeros(3)), (np.zeros(3), np.ones(3))])
        assert s.excluded == 1 and s.trials == 1

    def test_scale_invariant(self, rng):
        pairs = [(rng.standard_normal(6) + 1j * rng.standard_normal(6), rng.standard_normal(6)) for _ in range(4)]
        c = 3.7 - 12j
        assert nmse([(c * a, c * b) for a, b in pairs]) == pytest.approx(nmse(pairs), abs=1e-12)

    def test_shape_and_empty_errors(self):
        with pytest.raises(ValueError):
            nmse([])
        with pytest.raises(ValueError):
            nmse([(np.ones(2), np.ones(3))])


def _config(**kw):
    base = dict(
        estimators=(EstimatorSpec("sbar", "sbar", "bessel", KernelHyper()),),
        geometry=ArrayGeometry(16),
        antennas=2,
        pilots=(2,),
        trials=8,
        master_seed=11,
        power_calibration_trials=200,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestExperiment:
    def test_noiseless_full_observation_with_true_covariance(self):
        spec = EstimatorSpec("cov", "sbar", "covariance", KernelHyper())
        cfg = _config(estimators=(spec,), antennas=4, pilots=(4,), trials=1, snr_db=(math.inf,))
        (res,) = run_experiment(cfg)
        assert res.nmse_db <= -100

    def test_rerun_is_byte_identical(self):
        specs = (
            EstimatorSpec("sbar", "sbar", "bessel", KernelHyper()),
            EstimatorSpec("omp", "omp", sparsity=4),
            EstimatorSpec("ml", "ml", sparsity=4, max_iters=10),
            EstimatorSpec("zoh", "selmmse"),
        )
        cfg = _config(estimators=specs, pilots=(1, 2, 3))
        a = results_to_csv(run_experiment(cfg))
        assert a == results_to_csv(run_experiment(cfg))
        assert a == results_to_csv(run_experiment(cfg, workers=2))
        assert len(a.splitlines()) == 1 + 4 * 3

    def test_snr_references(self):
        cfg = _config()
        power = mean_channel_power(cfg)
        assert power == pytest.approx(16, rel=0.15)
        assert noise_variance_for(cfg, 10) == pytest.approx(power / 16 / 10)
        assert noise_variance_for(replace(cfg, snr_reference="total"), 10) == pytest.approx(power / 10)

    def test_result_rows(self):
        (res,) = run_experiment(_config())
        row = res.row()
        assert row[:7] == ["sbar", "ssc", "bessel", "16", "2", "2", "20"]
        assert np.isfinite(res.nmse_db) and res.nmse_stderr >= 0

    def test_monte_carlo_helper_stderr(self, rng):
        cov = random_psd(rng, 4)
        mean, se = monte_carlo_mse(cov, cov, [0, 1], 0.1, 4000, 1)
        assert se > 0 and mean > 0
