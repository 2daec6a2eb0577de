"""Closed-form MSE of the Bayesian reconstructor, NMSE bookkeeping and the
Monte Carlo experiment engine."""

from __future__ import annotations

import csv
import functools
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg

from . import baselines, sbar
from .channel import PortSchedule, complex_normal, generate_ssc_channel, make_rng, receive_pilots
from .config import EstimatorSpec, ExperimentConfig
from .errors import NumericalFailureError
from .gp import gram_factor
from .kernels import Kernel, bessel_kernel, covariance_kernel, exponential_kernel

NMSE_FLOOR_DB = -200.0
MIN_CHANNEL_NORM = 1e-12
CSV_COLUMNS = (
    "estimator", "channel_model", "kernel", "N", "M", "P",
    "snr_db", "trials", "nmse_db", "nmse_stderr", "seed",
)

# seed streams: (master_seed, stream, ...) -> independent, order-free generators
STREAM_CHANNEL = 0
STREAM_NOISE = 1
STREAM_SCHEDULE = 2
STREAM_TRAINING = 3
STREAM_POWER = 4


def _matrix(k) -> np.ndarray:
    return np.asarray(k.matrix if isinstance(k, Kernel) else k)


def _indices(schedule) -> np.ndarray:
    if isinstance(schedule, PortSchedule):
        return schedule.indices
    return np.asarray(schedule, dtype=np.int64)


def _pi_matrix(sigma, idx, noise_variance):
    """Pi = (S K S^H + s2 I)^{-1} S K."""
    factor = gram_factor(sigma[np.ix_(idx, idx)], noise_variance)
    return linalg.cho_solve(factor, sigma[idx, :])


def lemma1_mse(kernel, true_cov, schedule, noise_variance: float) -> float:
    """Expected ||W^H y - h||^2 when the reconstructor uses ``kernel`` but
    h has second moment ``true_cov``::

        E = Tr(Pi^H (S C S^H + s2 I) Pi) - 2 Re Tr(Pi^H S C) + Tr(C)
    """
    sigma, cov = _matrix(kernel), _matrix(true_cov)
    idx = _indices(schedule)
    pi = _pi_matrix(sigma, idx, noise_variance)
    inner = cov[np.ix_(idx, idx)] + noise_variance * np.eye(idx.size)
    e = (
        np.trace(pi.conj().T @ inner @ pi).real
        - 2.0 * np.trace(pi.conj().T @ cov[idx, :]).real
        + np.trace(cov).real
    )
    return float(e)


def lemma2_min_mse(true_cov, noise_variance: float) -> float:
    """Tr(C) - Tr(C (C + s2 I)^{-1} C): full observation with the true covariance."""
    cov = _matrix(true_cov)
    factor = gram_factor(cov, noise_variance)
    return float(np.trace(cov).real - np.trace(cov @ linalg.cho_solve(factor, cov)).real)


def sample_channels(true_cov, count: int, rng) -> np.ndarray:
    """``count`` draws of h ~ CN(0, C), shape (count, N)."""
    cov = _matrix(true_cov)
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    return complex_normal(make_rng(rng), (count, cov.shape[0])) @ root.T


def monte_carlo_mse(kernel, true_cov, schedule, noise_variance, trials, rng_seed=0, batch=20_000):
    """Empirical mean and standard error of ||W^H y - h||^2."""
    sigma = _matrix(kernel)
    idx = _indices(schedule)
    weights = _pi_matrix(sigma, idx, noise_variance)
    rng = make_rng(rng_seed)
    errs = []
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        h = sample_channels(true_cov, m, rng)
        y = h[:, idx] + complex_normal(rng, (m, idx.size), noise_variance)
        h_hat = y @ weights.conj()
        errs.append(np.sum(np.abs(h_hat - h) ** 2, axis=1))
        done += m
    errs = np.concatenate(errs)
    return float(errs.mean()), float(errs.std(ddof=1) / np.sqrt(errs.size))


@dataclass(frozen=True)
class MseReport:
    analytic_mse: float
    monte_carlo_mse: float
    monte_carlo_stderr: float
    min_mse: float
    trials: int

    @property
    def z_score(self) -> float:
        return (self.monte_carlo_mse - self.analytic_mse) / self.monte_carlo_stderr


def mse_report(kernel, true_cov, schedule, noise_variance, trials=200_000, rng_seed=0) -> MseReport:
    mc, se = monte_carlo_mse(kernel, true_cov, schedule, noise_variance, trials, rng_seed)
    return MseReport(
        lemma1_mse(kernel, true_cov, schedule, noise_variance),
        mc,
        se,
        lemma2_min_mse(true_cov, noise_variance),
        trials,
    )


@dataclass(frozen=True)
class NmseSummary:
    nmse_db: float
    mean_ratio: float
    stderr_ratio: float
    trials: int
    excluded: int = 0

    @property
    def stderr_db(self) -> float:
        """Delta-method standard error of the dB value."""
        if self.mean_ratio <= 0 or self.trials < 2:
            return 0.0
        return 10.0 / math.log(10.0) * self.stderr_ratio / self.mean_ratio


def _to_db(ratio: float) -> float:
    if ratio <= 0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(ratio), NMSE_FLOOR_DB)


def summarize_ratios(ratios, excluded=0) -> NmseSummary:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("no usable trials")
    mean = float(np.sum(ratios) / ratios.size)
    se = float(ratios.std(ddof=1) / np.sqrt(ratios.size)) if ratios.size > 1 else 0.0
    return NmseSummary(_to_db(mean), mean, se, int(ratios.size), int(excluded))


def error_ratio(h_hat, h) -> float | None:
    """||h - h_hat||^2 / ||h||^2, or None when h is (numerically) zero."""
    h = np.asarray(h)
    power = float(np.vdot(h, h).real)
    if math.sqrt(power) < MIN_CHANNEL_NORM:
        return None
    d = h - np.asarray(h_hat)
    return float(np.vdot(d, d).real) / power


def nmse_stats(estimates: Iterable[tuple[np.ndarray, np.ndarray]]) -> NmseSummary:
    ratios, excluded = [], 0
    for h_hat, h in estimates:
        if np.shape(h_hat) != np.shape(h):
            raise ValueError(f"estimate shape {np.shape(h_hat)} != channel shape {np.shape(h)}")
        r = error_ratio(h_hat, h)
        if r is None:
            excluded += 1
        else:
            ratios.append(r)
    if not ratios and not excluded:
        raise ValueError("nmse needs at least one (estimate, channel) pair")
    return summarize_ratios(ratios, excluded)


def nmse(estimates: Iterable[tuple[np.ndarray, np.ndarray]]) -> float:
    """Trial-averaged ||h - h_hat||^2 / ||h||^2 in dB (floored at -200 dB)."""
    return nmse_stats(estimates).nmse_db


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentResult:
    estimator: str
    channel_model: str
    kernel: str
    num_ports: int
    antennas: int
    pilots: int
    snr_db: float
    trials: int
    nmse_db: float
    nmse_stderr: float
    seed: int
    excluded: int = 0

    def row(self) -> list[str]:
        return [
            self.estimator, self.channel_model, self.kernel, str(self.num_ports),
            str(self.antennas), str(self.pilots), f"{self.snr_db:g}", str(self.trials),
            f"{self.nmse_db:.6f}", f"{self.nmse_stderr:.6f}", str(self.seed),
        ]


def channel_for_trial(config: ExperimentConfig, stream: int, *keys) -> np.ndarray:
    return generate_ssc_channel(config.geometry, config.channel_params, (config.master_seed, stream, *keys))


@functools.lru_cache(maxsize=32)
def _mean_power(geometry, params, master_seed, count) -> float:
    total = math.fsum(
        float(np.sum(np.abs(generate_ssc_channel(geometry, params, (master_seed, STREAM_POWER, t))) ** 2))
        for t in range(count)
    )
    return total / count


def mean_channel_power(config: ExperimentConfig) -> float:
    """E||h||^2 estimated from held-out seeds (cached per channel configuration)."""
    return _mean_power(config.geometry, config.channel_params, config.master_seed, config.power_calibration_trials)


def noise_variance_for(config: ExperimentConfig, snr_db: float) -> float:
    """Noise power for a receiver SNR.

    ``per_port`` (default): SNR = E||h||^2 / (N s2), i.e. per-measurement SNR.
    ``total``: SNR = E||h||^2 / s2.
    """
    power = mean_channel_power(config)
    if config.snr_reference == "per_port":
        power /= config.geometry.num_ports
    return power / 10.0 ** (snr_db / 10.0)


def build_kernel(config: ExperimentConfig, spec: EstimatorSpec) -> Kernel:
    if spec.kernel == "bessel":
        return bessel_kernel(config.geometry, spec.hyper)
    if spec.kernel == "exponential":
        return exponential_kernel(config.geometry, spec.hyper)
    samples = [channel_for_trial(config, STREAM_TRAINING, t) for t in range(spec.training_samples)]
    return covariance_kernel(samples)


@dataclass(frozen=True, eq=False)
class _GridTask:
    config: ExperimentConfig
    grid_index: int
    pilots: int
    noise_variance: float
    plans: dict
    start: int
    channels: np.ndarray


def _estimate(spec: EstimatorSpec, task: _GridTask, h: np.ndarray, trial: int) -> np.ndarray:
    config = task.config
    geom = config.geometry
    p, m = task.pilots, config.antennas
    noise_seed = (config.master_seed, STREAM_NOISE, task.grid_index, trial)
    if spec.kind == "sbar":
        plan = task.plans[spec.name]
        pilots = receive_pilots(h, plan.schedule, task.noise_variance, noise_seed)
        return sbar.reconstruct(plan, pilots)
    if spec.kind == "selmmse":
        sched = baselines.selmmse_schedule(geom.num_ports, p, m)
        pilots = receive_pilots(h, sched, task.noise_variance, noise_seed)
        return baselines.selmmse(pilots, geom, p, m)
    sched = baselines.random_switch_matrix(
        geom.num_ports, p, m, (config.master_seed, STREAM_SCHEDULE, task.grid_index, trial)
    )
    pilots = receive_pilots(h, sched, task.noise_variance, noise_seed)
    sparsity = min(spec.sparsity, p * m)
    omp = baselines.fas_omp(pilots, sched, geom, sparsity)
    if spec.kind == "omp":
        return omp.reconstructed
    return baselines.fas_ml(pilots, sched, geom, sparsity, spec.max_iters, init=omp).reconstructed


def _run_chunk(task: _GridTask) -> np.ndarray:
    """Error ratios, shape (trials in chunk, estimators); NaN marks excluded trials."""
    out = np.empty((task.channels.shape[0], len(task.config.estimators)))
    for row, h in enumerate(task.channels):
        t = task.start + row
        for col, spec in enumerate(task.config.estimators):
            r = error_ratio(_estimate(spec, task, h, t), h)
            out[row, col] = np.nan if r is None else r
    return out


def run_experiment(config: ExperimentConfig, workers: int = 1, progress=None) -> list[ExperimentResult]:
    """Evaluate every estimator at every grid point.

    Channel realisations are shared across estimators and grid points (trial
    ``t`` always sees the same h), so curves are compared on common random
    numbers.  Output is independent of ``workers``.
    """
    kernels = {s.name: build_kernel(config, s) for s in config.estimators if s.kind == "sbar"}
    channels = np.stack([channel_for_trial(config, STREAM_CHANNEL, t) for t in range(config.trials)])
    results = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for gi, (p, snr_db) in enumerate(config.grid()):
            s2 = noise_variance_for(config, snr_db)
            plans = {}
            for spec in config.estimators:
                if spec.kind != "sbar":
                    continue
                design_s2 = s2 if spec.design_snr_db is None else noise_variance_for(config, spec.design_snr_db)
                plans[spec.name], _ = sbar.cached_plan(
                    kernels[spec.name], p, config.antennas, design_s2, config.plan_cache
                )
            bounds = np.linspace(0, config.trials, max(workers, 1) + 1).astype(int)
            tasks = [
                _GridTask(config, gi, p, s2, plans, int(a), channels[a:b])
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a
            ]
            chunks = list(pool.map(_run_chunk, tasks)) if pool else [_run_chunk(t) for t in tasks]
            ratios = np.concatenate(chunks, axis=0)
            for col, spec in enumerate(config.estimators):
                r = ratios[:, col]
                ok = r[~np.isnan(r)]
                summary = summarize_ratios(ok, r.size - ok.size)
                if not np.isfinite(summary.nmse_db):
                    raise NumericalFailureError(f"non-finite NMSE for {spec.name}")
                results.append(ExperimentResult(
                    spec.name, config.channel, spec.kernel_column, config.geometry.num_ports,
                    config.antennas, p, float(snr_db), config.trials, summary.nmse_db,
                    summary.stderr_db, config.master_seed, summary.excluded,
                ))
            if progress is not None:
                progress(gi, p, snr_db)
    finally:
        if pool is not None:
            pool.shutdown()
    order = {s.name: i for i, s in enumerate(config.estimators)}
    results.sort(key=lambda r: order[r.estimator])
    return results


def results_to_csv(results: Iterable[ExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow(r.row())
    return buf.getvalue()


def write_csv(results: Iterable[ExperimentResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(results_to_csv(results))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
