"""Comparison estimators: DFT-grid OMP, gridless ML refinement, zero-order hold."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, PilotBatch, PortSchedule, make_rng, steering_matrix
from .errors import CapacityError, NumericalFailureError, ScheduleMismatchError


def random_switch_matrix(num_ports: int, pilots: int, antennas: int, rng_seed) -> PortSchedule:
    """P*M distinct ports drawn uniformly without replacement."""
    count = pilots * antennas
    if count > num_ports:
        raise CapacityError(f"P*M = {count} exceeds the number of ports N = {num_ports}")
    idx = make_rng(rng_seed).choice(num_ports, size=count, replace=False)
    return PortSchedule(idx, pilots, antennas, num_ports)


@functools.lru_cache(maxsize=8)
def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT basis, F[n, k] = exp(j 2pi n k / N) / sqrt(N) (read-only, cached)."""
    grid = np.arange(n)
    f = np.exp(2j * np.pi * (np.outer(grid, grid) % n) / n) / np.sqrt(n)
    f.setflags(write=False)
    return f


@dataclass(frozen=True, eq=False)
class SparseEstimate:
    support: tuple[int, ...]
    coefficients: np.ndarray
    reconstructed: np.ndarray
    rank_deficient: bool = False


def _check_pilots(pilots: PilotBatch, schedule: PortSchedule, n: int):
    if len(pilots) != len(schedule):
        raise ScheduleMismatchError(f"{len(pilots)} pilots for a schedule of length {len(schedule)}")
    schedule._check_fits(n)


def fas_omp(pilots: PilotBatch, schedule: PortSchedule, geometry: ArrayGeometry, sparsity: int) -> SparseEstimate:
    """Orthogonal matching pursuit over the N-point DFT dictionary.

    Returns ``F[:, support] @ coefficients`` as the channel estimate.  When the
    selected sub-dictionary is rank deficient, the minimum-norm least-squares
    fit is used and ``rank_deficient`` is set.
    """
    n = geometry.num_ports
    _check_pilots(pilots, schedule, n)
    if sparsity > len(schedule):
        raise CapacityError(f"sparsity {sparsity} exceeds the number of pilots {len(schedule)}")
    y = pilots.observations
    f = dft_matrix(n)
    psi = f[schedule.indices, :]
    residual = y.copy()
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    deficient = False
    for _ in range(sparsity):
        corr = np.abs(psi.conj().T @ residual)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = psi[:, support]
        coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        deficient = deficient or rank < len(support)
        residual = y - sub @ coef
    return SparseEstimate(tuple(support), coef, f[:, support] @ coef, deficient)


def grid_angles(support, geometry: ArrayGeometry) -> np.ndarray:
    """Angles in [0, pi] whose steering vectors match DFT columns ``support``.

    Column k has spatial frequency k/N cycles per port (wrapped to
    [-1/2, 1/2)); bins outside the visible region are clipped to endfire.
    """
    n = geometry.num_ports
    freq = (np.asarray(support, dtype=float) / n + 0.5) % 1.0 - 0.5
    cos_theta = freq * geometry.wavelength / geometry.port_spacing
    return np.arccos(np.clip(cos_theta, -1.0, 1.0))


def ml_dictionary(theta, schedule: PortSchedule, geometry: ArrayGeometry) -> np.ndarray:
    """B(theta) = sqrt(N/L) S [a(theta_1), ..., a(theta_L)]."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    # only the scheduled rows of a(theta): sqrt(N/L) / sqrt(N) = 1/sqrt(L)
    phase = geometry.wavenumber * geometry.port_spacing * np.outer(schedule.indices, np.cos(theta))
    return np.exp(1j * phase) / np.sqrt(theta.size)


def ml_objective(y, gains, theta, schedule: PortSchedule, geometry: ArrayGeometry) -> float:
    """||y - B(theta) g||^2."""
    r = y - ml_dictionary(theta, schedule, geometry) @ gains
    return float(np.vdot(r, r).real)


def _gradient(b, y, gains, theta, schedule, geometry):
    r = y - b @ gains
    # da_n/dtheta = -j k n d sin(theta) a_n
    n = schedule.indices.astype(float)[:, None]
    db = b * (-1j * geometry.wavenumber * geometry.port_spacing * n * np.sin(theta)[None, :])
    return -2.0 * np.real(r.conj() @ (db * gains[None, :]))


def ml_angle_gradient(y, gains, theta, schedule: PortSchedule, geometry: ArrayGeometry) -> np.ndarray:
    """Analytic d||y - B(theta) g||^2 / d theta at fixed gains."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    b = ml_dictionary(theta, schedule, geometry)
    return _gradient(b, y, np.asarray(gains), theta, schedule, geometry)


@dataclass(frozen=True, eq=False)
class MlEstimate:
    gains: np.ndarray
    angles: np.ndarray
    reconstructed: np.ndarray
    iterations: int = 0
    objective_history: list = field(default_factory=list)


def fas_ml(
    pilots: PilotBatch,
    schedule: PortSchedule,
    geometry: ArrayGeometry,
    sparsity: int,
    max_iters: int = 50,
    rel_tol: float = 1e-8,
    init: SparseEstimate | None = None,
) -> MlEstimate:
    """Alternating gain LS / angle gradient refinement, initialised by OMP.

    The step length starts at 1 and halves every outer iteration.  A step that
    would increase the residual is rejected (angles kept).  Iteration stops
    after ``max_iters`` or once an accepted step changes the objective by less
    than ``rel_tol`` relative.
    """
    y = pilots.observations
    n = geometry.num_ports
    if init is None:
        init = fas_omp(pilots, schedule, geometry, sparsity)
    theta = grid_angles(init.support, geometry)

    def residual_power(b, g):
        r = y - b @ g
        return float(np.vdot(r, r).real)

    b = ml_dictionary(theta, schedule, geometry)
    gains = np.linalg.lstsq(b, y, rcond=None)[0]
    current = residual_power(b, gains)
    history = [current]
    step = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        if current == 0.0:
            break
        grad = _gradient(b, y, gains, theta, schedule, geometry)
        if not np.all(np.isfinite(grad)):
            raise NumericalFailureError("non-finite angle gradient in FAS-ML")
        trial = theta - step * grad
        b_trial = ml_dictionary(trial, schedule, geometry)
        trial_obj = residual_power(b_trial, gains)
        step /= 2.0
        if not np.isfinite(trial_obj):
            raise NumericalFailureError("non-finite objective in FAS-ML")
        if trial_obj > current:
            continue
        theta, b = trial, b_trial
        history.append(trial_obj)
        gains = np.linalg.lstsq(b, y, rcond=None)[0]
        new = residual_power(b, gains)
        history.append(new)
        converged = current - new <= rel_tol * current
        current = new
        if converged:
            break

    a = steering_matrix(n, geometry.port_spacing, geometry.wavelength, theta)
    h_hat = np.sqrt(n / theta.size) * (a @ gains)
    return MlEstimate(gains, theta, h_hat, it, history)


def selmmse_schedule(num_ports: int, pilots: int, antennas: int) -> PortSchedule:
    """P*M equally spaced ports including both ends (round half up)."""
    count = pilots * antennas
    if count > num_ports:
        raise CapacityError(f"P*M = {count} exceeds the number of ports N = {num_ports}")
    if count == 1:
        idx = np.zeros(1, dtype=np.int64)
    else:
        idx = np.floor(np.arange(count) * (num_ports - 1) / (count - 1) + 0.5).astype(np.int64)
    return PortSchedule(idx, pilots, antennas, num_ports)


def selmmse(pilots: PilotBatch, geometry: ArrayGeometry, pilots_per_frame: int, antennas: int) -> np.ndarray:
    """Zero-order hold: each port copies its nearest measured port (lower index on ties)."""
    schedule = selmmse_schedule(geometry.num_ports, pilots_per_frame, antennas)
    if len(pilots) != len(schedule):
        raise ScheduleMismatchError(f"{len(pilots)} pilots for {len(schedule)} equally spaced ports")
    measured = schedule.indices
    dist = np.abs(np.arange(geometry.num_ports)[:, None] - measured[None, :])
    # measured is increasing, so argmin's first hit is the lower port
    nearest = np.argmin(dist, axis=1)
    return pilots.observations[nearest]
