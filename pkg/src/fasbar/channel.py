"""Port geometry, narrowband FAS channel generators and pilot reception.

All port indices are 0-based inside Python.  Messages shown to people (and
``PortSchedule.ports``) use the 1-based numbering common in the literature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidGeometryError, ScheduleMismatchError

SPEED_OF_LIGHT = 299_792_458.0


def make_rng(seed) -> np.random.Generator:
    """Return a Generator for ``seed``.

    ``seed`` may be an int, a sequence of ints (e.g. ``(master, stream,
    trial)``, which gives counter-based, order-independent streams) or an
    existing Generator, which is passed through untouched.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, size, variance=1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, variance) draws (real/imag each N(0, variance/2))."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


@dataclass(frozen=True)
class ArrayGeometry:
    """A linear aperture of ``num_ports`` equally spaced ports.

    Lengths may be in any unit as long as ``wavelength`` and ``aperture`` agree.
    The defaults work in wavelength units (``wavelength=1``), which is the
    unit system in which the kernel hyperparameter defaults make sense.
    """

    num_ports: int
    wavelength: float = 1.0
    aperture: float = 10.0

    def __post_init__(self):
        if int(self.num_ports) != self.num_ports or self.num_ports < 2:
            raise InvalidGeometryError(f"num_ports must be an integer >= 2, got {self.num_ports!r}")
        if not self.wavelength > 0:
            raise InvalidGeometryError(f"wavelength must be positive, got {self.wavelength!r}")
        if not self.aperture > 0:
            raise InvalidGeometryError(f"aperture must be positive, got {self.aperture!r}")
        object.__setattr__(self, "num_ports", int(self.num_ports))

    @classmethod
    def from_carrier(cls, num_ports, carrier_hz=3.5e9, aperture_wavelengths=10.0):
        """Geometry in meters for a given carrier frequency."""
        lam = SPEED_OF_LIGHT / carrier_hz
        return cls(num_ports, lam, aperture_wavelengths * lam)

    @property
    def port_spacing(self) -> float:
        return self.aperture / (self.num_ports - 1)

    @property
    def positions(self) -> np.ndarray:
        """Port coordinates along the line, starting at 0."""
        return np.arange(self.num_ports) * self.port_spacing

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True)
class SscParams:
    """Spatially-sparse clustered channel parameters.

    Gains are CN(0, 1); cluster centres are uniform on (-pi, pi); ray angles
    are spread uniformly within +-``max_angle_spread`` of their centre.
    """

    num_clusters: int = 9
    rays_per_cluster: int = 100
    max_angle_spread: float = float(np.deg2rad(5.0))

    def __post_init__(self):
        if self.num_clusters < 1 or self.rays_per_cluster < 1:
            raise ValueError("num_clusters and rays_per_cluster must be >= 1")
        if not 0.0 <= self.max_angle_spread <= np.pi:
            raise ValueError("max_angle_spread must lie in [0, pi]")


RICH_PARAMS = SscParams(num_clusters=23, rays_per_cluster=20, max_angle_spread=float(np.deg2rad(5.0)))


@dataclass(frozen=True)
class PortSchedule:
    """Ordered port sequence for P pilot timeslots of M antennas.

    ``indices[(p * M) + m]`` is the 0-based port visited by antenna ``m`` in
    timeslot ``p``.
    """

    indices: np.ndarray
    pilots_per_frame: int
    antennas: int
    num_ports: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if idx.size != self.pilots_per_frame * self.antennas:
            raise ScheduleMismatchError(
                f"schedule has {idx.size} ports but P*M = {self.pilots_per_frame * self.antennas}"
            )
        if np.unique(idx).size != idx.size:
            raise ScheduleMismatchError("schedule visits a port more than once")
        if idx.size and idx.min() < 0:
            raise ScheduleMismatchError("port indices must be >= 1")
        if self.num_ports is not None:
            if idx.size > self.num_ports:
                raise ScheduleMismatchError(f"P*M = {idx.size} exceeds N = {self.num_ports}")
            if idx.size and idx.max() >= self.num_ports:
                raise ScheduleMismatchError(
                    f"port {idx.max() + 1} out of range for N = {self.num_ports}"
                )

    @classmethod
    def from_ports(cls, ports: Sequence[int], pilots_per_frame=None, antennas=1, num_ports=None):
        """Build from 1-based port numbers."""
        ports = np.asarray(ports, dtype=np.int64)
        if ports.size and ports.min() < 1:
            raise ScheduleMismatchError("port numbers are 1-based")
        if pilots_per_frame is None:
            pilots_per_frame = ports.size // antennas
        return cls(ports - 1, pilots_per_frame, antennas, num_ports)

    @classmethod
    def from_switch_matrix(cls, switch: np.ndarray, antennas: int = 1):
        switch = np.asarray(switch)
        rows, n = switch.shape
        if not np.all((switch == 0) | (switch == 1)) or not np.all(switch.sum(axis=1) == 1):
            raise ScheduleMismatchError("switch matrix rows must each hold exactly one 1")
        return cls(np.argmax(switch, axis=1), rows // antennas, antennas, n)

    @property
    def ports(self) -> tuple[int, ...]:
        """1-based port numbers, in schedule order."""
        return tuple(int(i) + 1 for i in self.indices)

    def __len__(self):
        return self.indices.size

    def switch_matrix(self, num_ports: int | None = None) -> np.ndarray:
        """Stacked binary switch matrix S (P*M x N)."""
        n = num_ports if num_ports is not None else self.num_ports
        if n is None:
            raise ScheduleMismatchError("num_ports unknown for this schedule")
        self._check_fits(n)
        s = np.zeros((self.indices.size, n))
        s[np.arange(self.indices.size), self.indices] = 1.0
        return s

    def timeslot_matrices(self, num_ports: int | None = None) -> list[np.ndarray]:
        """Per-timeslot switch matrices S_1..S_P, each M x N."""
        s = self.switch_matrix(num_ports)
        m = self.antennas
        return [s[p * m:(p + 1) * m] for p in range(self.pilots_per_frame)]

    def _check_fits(self, n):
        if self.indices.size and self.indices.max() >= n:
            raise ScheduleMismatchError(f"port {self.indices.max() + 1} out of range for N = {n}")


@dataclass(frozen=True)
class PilotBatch:
    observations: np.ndarray
    noise_variance: float
    schedule: PortSchedule | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        y = np.asarray(self.observations, dtype=complex).reshape(-1)
        object.__setattr__(self, "observations", y)
        if self.schedule is not None and len(self.schedule) != y.size:
            raise ScheduleMismatchError(
                f"{y.size} observations for a schedule of length {len(self.schedule)}"
            )

    def __len__(self):
        return self.observations.size


def steering_matrix(num_ports, spacing, wavelength, thetas) -> np.ndarray:
    """Columns a(theta_l), shape (num_ports, len(thetas)).

    Entry n is exp(j 2pi/lambda * n * d * cos(theta)) / sqrt(N), n = 0..N-1.
    """
    if num_ports < 1 or not wavelength > 0:
        raise InvalidGeometryError("num_ports and wavelength must be positive")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phase = (2.0 * np.pi / wavelength) * spacing * np.cos(thetas)
    return np.exp(1j * np.outer(np.arange(num_ports), phase)) / np.sqrt(num_ports)


def steering_vector(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    return steering_matrix(geometry.num_ports, geometry.port_spacing, geometry.wavelength, theta)[:, 0]


def ssc_rays(params: SscParams, rng: np.random.Generator):
    """Draw (gains, angles) for every ray, each of length C*R."""
    c, r = params.num_clusters, params.rays_per_cluster
    centres = rng.uniform(-np.pi, np.pi, size=c)
    offsets = rng.uniform(-params.max_angle_spread, params.max_angle_spread, size=(c, r))
    angles = (centres[:, None] + offsets).reshape(-1)
    gains = complex_normal(rng, c * r)
    return gains, angles


def ssc_from_rays(geometry: ArrayGeometry, gains, angles) -> np.ndarray:
    gains = np.asarray(gains, dtype=complex).reshape(-1)
    n = geometry.num_ports
    # h_n = sqrt(N/CR) * sum_l g_l a_n(theta_l); the 1/sqrt(N) of a() folds into the prefactor
    phase = geometry.wavenumber * geometry.port_spacing * np.cos(np.asarray(angles, dtype=float))
    # rows z^0..z^(N-1) by running product: ~10x cheaper than N*L complex exps, error ~ N*eps
    a = np.empty((n, gains.size), dtype=complex)
    a[0] = 1.0
    a[1:] = np.exp(1j * phase)
    np.cumprod(a, axis=0, out=a)
    return (a @ gains) / np.sqrt(gains.size)


def generate_ssc_channel(geometry: ArrayGeometry, params: SscParams, rng_seed, gains=None, angles=None):
    """One spatially-sparse clustered channel realisation.

    ``gains``/``angles`` override the random draw (both length C*R) and are
    mainly useful for constructing known channels in tests.
    """
    if gains is None or angles is None:
        g, th = ssc_rays(params, make_rng(rng_seed))
        gains = g if gains is None else gains
        angles = th if angles is None else angles
    expected = params.num_clusters * params.rays_per_cluster
    if np.size(gains) != expected or np.size(angles) != expected:
        raise ValueError(f"expected {expected} gains and angles")
    return ssc_from_rays(geometry, gains, angles)


def generate_rich_channel(geometry: ArrayGeometry, rng_seed) -> np.ndarray:
    """Rich-scattering proxy: 23 clusters of 20 rays, 5 degree spread."""
    return generate_ssc_channel(geometry, RICH_PARAMS, rng_seed)


def receive_pilots(channel, schedule: PortSchedule, noise_variance, rng_seed=None) -> PilotBatch:
    """y(i) = h(Omega(i)) + z(i) with z ~ CN(0, noise_variance)."""
    h = np.asarray(channel)
    schedule._check_fits(h.size)
    y = h[schedule.indices].astype(complex)
    if noise_variance > 0:
        y = y + complex_normal(make_rng(rng_seed), y.size, noise_variance)
    return PilotBatch(y, float(noise_variance), schedule)
