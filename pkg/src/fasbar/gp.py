"""Complex Gaussian conditioning and greedy max-variance sampling.

The posterior after observing ports ``omega`` with noise variance s2 is::

    mean = K[:, omega] (K[omega, omega] + s2 I)^{-1} y
    cov  = K - K[:, omega] (K[omega, omega] + s2 I)^{-1} K[omega, :]

Every call re-solves from scratch with a Cholesky factorisation; no
explicit inverse is formed and no rank-one downdating is done.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .errors import ExhaustedScheduleError, NumericalFailureError, ScheduleMismatchError
from .kernels import Kernel

DIAG_IMAG_TOL = 1e-12


def _as_matrix(kernel) -> np.ndarray:
    return np.asarray(kernel.matrix if isinstance(kernel, Kernel) else kernel)


def gram_factor(k_oo: np.ndarray, noise_variance: float):
    """Cholesky factor of K[omega, omega] + s2 I, or NumericalFailureError."""
    a = k_oo + noise_variance * np.eye(k_oo.shape[0])
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        raise NumericalFailureError(
            "K[omega, omega] + noise_variance*I is not positive definite", _cond(a)
        ) from None
    pivots = np.abs(np.diag(factor[0])) ** 2
    # Cholesky can "succeed" on a numerically singular matrix; reject Schur complements at roundoff level
    scale = np.abs(np.diag(a)).max()
    if scale == 0 or pivots.min() <= 10 * a.shape[0] * np.finfo(float).eps * scale:
        raise NumericalFailureError("K[omega, omega] + noise_variance*I is numerically singular", _cond(a))
    return factor


def _cond(a):
    try:
        return float(np.linalg.cond(a))
    except np.linalg.LinAlgError:
        return float("inf")


def real_diagonal(cov: np.ndarray) -> np.ndarray:
    d = np.diag(cov)
    if np.iscomplexobj(d):
        scale = max(1.0, float(np.abs(d).max(initial=0.0)))
        if np.abs(d.imag).max(initial=0.0) > DIAG_IMAG_TOL * scale:
            raise NumericalFailureError("posterior covariance diagonal drifted off the real axis")
        d = d.real
    return d.copy()


def posterior_covariance(kernel, omega: Sequence[int], noise_variance: float) -> np.ndarray:
    """Posterior covariance given measurements at ``omega`` (independent of y)."""
    k = _as_matrix(kernel)
    omega = np.asarray(omega, dtype=np.int64)
    if omega.size == 0:
        return k.copy()
    factor = gram_factor(k[np.ix_(omega, omega)], noise_variance)
    # v = L^{-1} K[omega, :], cov = K - v^H v
    v = linalg.solve_triangular(factor[0], k[omega, :], lower=True)
    return k - v.conj().T @ v


def regression_weights(kernel, omega: Sequence[int], noise_variance: float) -> np.ndarray:
    """W = (K[omega, omega] + s2 I)^{-1} K[omega, :], shape (|omega|, N)."""
    k = _as_matrix(kernel)
    omega = np.asarray(omega, dtype=np.int64)
    if omega.size == 0:
        return np.zeros((0, k.shape[0]), dtype=k.dtype)
    factor = gram_factor(k[np.ix_(omega, omega)], noise_variance)
    return linalg.cho_solve(factor, k[omega, :])


@dataclass(frozen=True, eq=False)
class PosteriorState:
    mean: np.ndarray
    covariance: np.ndarray
    measured: tuple[int, ...] = ()
    observations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    noise_variance: float = 0.0

    @property
    def variances(self) -> np.ndarray:
        """Real posterior variances, one per port."""
        return real_diagonal(self.covariance)


def condition(kernel, omega: Sequence[int], pilots, noise_variance: float | None = None) -> PosteriorState:
    """Posterior of h ~ CN(0, K) after observing y = h[omega] + z.

    ``pilots`` is a :class:`~fasbar.channel.PilotBatch` or a plain array (then
    ``noise_variance`` must be given).
    """
    k = _as_matrix(kernel)
    omega = np.asarray(omega, dtype=np.int64).reshape(-1)
    if hasattr(pilots, "observations"):
        y = pilots.observations
        if noise_variance is None:
            noise_variance = pilots.noise_variance
    else:
        y = np.asarray(pilots, dtype=complex).reshape(-1)
    if noise_variance is None:
        raise ValueError("noise_variance required when pilots is a plain array")
    if y.size != omega.size:
        raise ScheduleMismatchError(f"{y.size} observations for {omega.size} measured ports")
    if omega.size and (omega.min() < 0 or omega.max() >= k.shape[0]):
        raise ScheduleMismatchError("measured port out of range")
    if omega.size == 0:
        return PosteriorState(np.zeros(k.shape[0], dtype=complex), k.copy(), (), y, noise_variance)

    factor = gram_factor(k[np.ix_(omega, omega)], noise_variance)
    v = linalg.solve_triangular(factor[0], k[omega, :], lower=True)
    alpha = linalg.solve_triangular(factor[0], y, lower=True)
    mean = v.conj().T @ alpha
    cov = k - v.conj().T @ v
    return PosteriorState(mean, cov, tuple(int(i) for i in omega), y.copy(), float(noise_variance))


def max_variance_index(state: PosteriorState) -> int:
    """Unmeasured port with the largest posterior variance (lowest index on ties)."""
    var = state.variances
    free = np.ones(var.size, dtype=bool)
    free[list(state.measured)] = False
    if not free.any():
        raise ExhaustedScheduleError("all ports have been measured")
    var = np.where(free, var, -np.inf)
    return int(np.argmax(var))


@dataclass(frozen=True)
class RegressionConfig:
    tolerance: float = 0.0
    max_samples: int | None = None
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.max_samples is not None and self.max_samples < 1:
            raise ValueError("max_samples must be positive")


def sequential_regression(kernel, measure: Callable[[int], complex], config: RegressionConfig) -> PosteriorState:
    """Measure the most uncertain port until every variance is <= tolerance.

    ``measure(n)`` returns the noisy channel observation at 0-based port n.
    Stops early once ``config.max_samples`` ports have been measured.
    """
    k = _as_matrix(kernel)
    n = k.shape[0]
    cap = n if config.max_samples is None else config.max_samples
    if cap > n:
        raise ValueError(f"max_samples {cap} exceeds the number of ports {n}")
    state = condition(k, [], np.zeros(0), config.noise_variance)
    measured: list[int] = []
    values: list[complex] = []
    while len(measured) < cap and state.variances.max() > config.tolerance:
        nxt = max_variance_index(state)
        values.append(complex(measure(nxt)))
        measured.append(nxt)
        state = condition(k, measured, np.asarray(values), config.noise_variance)
    return state
