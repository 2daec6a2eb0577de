"""Successive Bayesian reconstruction: offline port plan, online weighted sum.

Stage 1 (:func:`design_plan`) only looks at the kernel: it greedily picks the
port with the largest posterior variance, P*M times, then precomputes the
regression weights.  Stage 2 (:func:`reconstruct`) is the linear map
``h_hat = W^H y``.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import PilotBatch, PortSchedule
from .errors import CapacityError, ScheduleMismatchError
from .gp import PosteriorState, max_variance_index, posterior_covariance, regression_weights
from .kernels import Kernel

log = logging.getLogger(__name__)

_MAGIC = b"SBARPLN1"
_HEADER = struct.Struct("<8sIIId32s")


@dataclass(frozen=True, eq=False)
class SbarPlan:
    schedule: PortSchedule
    weights: np.ndarray
    design_noise_variance: float
    kernel_label: str = "custom"
    kernel_hash: str = ""

    @property
    def num_ports(self) -> int:
        return self.weights.shape[1]

    def switch_matrix(self) -> np.ndarray:
        return self.schedule.switch_matrix(self.num_ports)

    def operator(self) -> np.ndarray:
        """The N x N map W^H S from the full channel to the estimate (noise-free part)."""
        return self.weights.conj().T @ self.switch_matrix()


def select_ports(kernel: Kernel, count: int, noise_variance: float) -> list[int]:
    """Greedy max-posterior-variance port sequence of length ``count``."""
    k = kernel.matrix
    omega: list[int] = []
    for _ in range(count):
        cov = posterior_covariance(k, omega, noise_variance)
        state = PosteriorState(np.zeros(k.shape[0]), cov, tuple(omega))
        omega.append(max_variance_index(state))
    return omega


def design_plan(kernel: Kernel, pilots: int, antennas: int, noise_variance: float) -> SbarPlan:
    """Stage 1: choose P*M ports and the regression weights for ``kernel``."""
    n = kernel.size
    count = pilots * antennas
    if pilots < 1 or antennas < 1:
        raise CapacityError("pilots and antennas must be positive")
    if count > n:
        raise CapacityError(f"P*M = {count} exceeds the number of ports N = {n}")
    omega = select_ports(kernel, count, noise_variance)
    schedule = PortSchedule(np.asarray(omega), pilots, antennas, n)
    # always complex so a plan is bit-identical to its cache file
    weights = regression_weights(kernel.matrix, omega, noise_variance).astype(complex)
    weights.setflags(write=False)
    return SbarPlan(schedule, weights, float(noise_variance), kernel.label, kernel.digest())


def reconstruct(plan: SbarPlan, pilots) -> np.ndarray:
    """Stage 2: h_hat = W^H y."""
    y = pilots.observations if isinstance(pilots, PilotBatch) else np.asarray(pilots, dtype=complex)
    if y.shape[0] != plan.weights.shape[0]:
        raise ScheduleMismatchError(
            f"{y.shape[0]} pilots for a plan expecting {plan.weights.shape[0]}"
        )
    return plan.weights.conj().T @ y


def schedule_to_switch_matrices(plan: SbarPlan) -> list[np.ndarray]:
    """Binary M x N switch matrix for each of the P timeslots."""
    return plan.schedule.timeslot_matrices(plan.num_ports)


def gram_condition_number(kernel: Kernel, plan: SbarPlan) -> float:
    idx = plan.schedule.indices
    a = kernel.matrix[np.ix_(idx, idx)] + plan.design_noise_variance * np.eye(idx.size)
    return float(np.linalg.cond(a))


def plan_key(kernel: Kernel, pilots: int, antennas: int, noise_variance: float) -> str:
    """Content hash identifying a plan in the cache."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(kernel.matrix, dtype="<c16").tobytes())
    h.update(struct.pack("<IId", pilots, antennas, float(noise_variance)))
    return h.hexdigest()


def save_plan(plan: SbarPlan, path) -> None:
    """Header {N, P, M, s2, kernel hash}, omega as uint32, W as complex128 LE."""
    sched = plan.schedule
    digest = bytes.fromhex(plan.kernel_hash) if plan.kernel_hash else bytes(32)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, plan.num_ports, sched.pilots_per_frame, sched.antennas,
                             plan.design_noise_variance, digest))
        f.write(np.ascontiguousarray(sched.indices, dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(plan.weights, dtype="<c16").tobytes())


def load_plan(path, kernel_label="custom") -> SbarPlan:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated plan header")
    magic, n, p, m, s2, digest = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a plan file")
    count = p * m
    body = raw[_HEADER.size:]
    if len(body) != 4 * count + 16 * count * n:
        raise ValueError(f"{path}: plan body has {len(body)} bytes, expected {4 * count + 16 * count * n}")
    omega = np.frombuffer(body[:4 * count], dtype="<u4").astype(np.int64)
    weights = np.frombuffer(body[4 * count:], dtype="<c16").reshape(count, n).astype(complex)
    weights.setflags(write=False)
    schedule = PortSchedule(omega, p, m, n)
    return SbarPlan(schedule, weights, s2, kernel_label, digest.hex())


def cached_plan(kernel: Kernel, pilots: int, antennas: int, noise_variance: float, cache_dir=None):
    """Return ``(plan, hit)``, designing and caching on a miss.

    A corrupt cache file is rebuilt with a warning.
    """
    if cache_dir is None:
        return design_plan(kernel, pilots, antennas, noise_variance), False
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{plan_key(kernel, pilots, antennas, noise_variance)}.plan"
    if path.exists():
        try:
            plan = load_plan(path, kernel.label)
            if plan.kernel_hash == kernel.digest() and plan.num_ports == kernel.size:
                return plan, True
            log.warning("plan cache %s does not match its key; rebuilding", path)
        except (ValueError, struct.error) as exc:
            log.warning("plan cache %s is corrupt (%s); rebuilding", path, exc)
    plan = design_plan(kernel, pilots, antennas, noise_variance)
    save_plan(plan, path)
    return plan, False


__all__ = [
    "SbarPlan",
    "design_plan",
    "reconstruct",
    "schedule_to_switch_matrices",
    "select_ports",
    "save_plan",
    "load_plan",
    "cached_plan",
    "plan_key",
    "gram_condition_number",
]
