"""Prior-covariance kernels over the port line.

Three constructions are provided: a squared-distance exponential kernel, a
Bessel-J kernel (with order 0 this is Clarke's isotropic-scattering
correlation when ``eta_sq = lambda / 2pi``) and the empirical covariance of
training channels.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np
from scipy import special

from .channel import ArrayGeometry
from .errors import InsufficientDataError, InvariantViolationError

LABELS = ("exponential", "bessel", "covariance", "custom")
PSD_TOLERANCE = 1e-8
DEFAULT_FLOOR = 1e-10

_MAGIC = b"FASKERN1"


@dataclass(frozen=True)
class KernelHyper:
    alpha_sq: float = 1.0
    eta_sq: float = 1.0 / (2.0 * np.pi)
    bessel_order: int = 0

    def __post_init__(self):
        if not self.alpha_sq > 0 or not self.eta_sq > 0:
            raise ValueError("alpha_sq and eta_sq must be positive")
        if int(self.bessel_order) != self.bessel_order or self.bessel_order < 0:
            raise ValueError("bessel_order must be a non-negative integer")

    @classmethod
    def default(cls, geometry: ArrayGeometry, bessel_order=0):
        """alpha^2 = 1, eta^2 = lambda / (2 pi)."""
        return cls(1.0, geometry.wavelength / (2.0 * np.pi), bessel_order)


@dataclass(frozen=True, eq=False)
class Kernel:
    matrix: np.ndarray
    label: str = "custom"
    hyper: KernelHyper | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantViolationError(f"kernel must be square, got shape {m.shape}")
        if self.label not in LABELS:
            raise ValueError(f"unknown kernel label {self.label!r}")
        if not np.array_equal(m, m.conj().T):
            raise InvariantViolationError("kernel matrix is not exactly Hermitian")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def is_psd(self, tolerance=PSD_TOLERANCE) -> bool:
        """Smallest eigenvalue >= -tolerance * spectral norm."""
        w = np.linalg.eigvalsh(self.matrix)
        return bool(w[0] >= -tolerance * max(abs(w[0]), abs(w[-1])))

    def digest(self) -> str:
        """SHA-256 of the matrix bytes (complex128, little endian, row-major)."""
        data = np.ascontiguousarray(self.matrix, dtype="<c16").tobytes()
        return hashlib.sha256(data).hexdigest()


def hermitian(a: np.ndarray) -> np.ndarray:
    """Symmetrise to an exactly Hermitian matrix."""
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def _distances(geometry: ArrayGeometry) -> np.ndarray:
    x = geometry.positions
    return np.abs(x[:, None] - x[None, :])


def exponential_kernel(geometry: ArrayGeometry, hyper: KernelHyper | None = None) -> Kernel:
    """alpha^2 * exp(-|x_n - x_n'|^2 / eta^2).

    The exponent uses the squared distance; note that eta^2 then has units of
    length even though it is squared, so the kernel depends on the length
    unit of ``geometry``.
    """
    hyper = hyper or KernelHyper.default(geometry)
    k = hyper.alpha_sq * np.exp(-_distances(geometry) ** 2 / hyper.eta_sq)
    return Kernel(k, "exponential", hyper)


def bessel_kernel(geometry: ArrayGeometry, hyper: KernelHyper | None = None, floor=DEFAULT_FLOOR) -> Kernel:
    """alpha^2 * J_nu(|x_n - x_n'| / eta^2), passed through :func:`regularize_psd`."""
    hyper = hyper or KernelHyper.default(geometry)
    k = hyper.alpha_sq * special.jv(hyper.bessel_order, _distances(geometry) / hyper.eta_sq)
    return regularize_psd(Kernel(k, "bessel", hyper), floor)


def covariance_kernel(samples: Sequence[np.ndarray]) -> Kernel:
    """Sample second moment (1/T) sum_t h_t h_t^H."""
    samples = list(samples)
    if not samples:
        raise InsufficientDataError("covariance_kernel needs at least one channel sample")
    lengths = {np.size(h) for h in samples}
    if len(lengths) != 1:
        raise ValueError(f"channel samples have mixed lengths {sorted(lengths)}")
    h = np.asarray(samples, dtype=complex)
    k = hermitian(h.T @ h.conj() / h.shape[0])
    return Kernel(k, "covariance")


def regularize_psd(kernel: Kernel, floor=DEFAULT_FLOOR) -> Kernel:
    """Clamp negative eigenvalues when the kernel is materially indefinite.

    If the smallest eigenvalue is below ``-1e-8 * ||K||_2`` the eigenvalues are
    clamped at zero and ``floor * trace / N`` is added to the diagonal.
    Otherwise the kernel is returned unchanged.
    """
    m = np.asarray(kernel.matrix)
    if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise InvariantViolationError("regularize_psd needs a Hermitian matrix")
    w, v = np.linalg.eigh(m)
    norm = max(abs(w[0]), abs(w[-1]))
    if w[0] >= -PSD_TOLERANCE * norm:
        return kernel
    w = np.clip(w, 0.0, None)
    fixed = (v * w) @ v.conj().T
    fixed = hermitian(fixed + floor * np.trace(fixed).real / m.shape[0] * np.eye(m.shape[0]))
    if np.isrealobj(m):
        fixed = fixed.real
    return Kernel(fixed, kernel.label, kernel.hyper)


def save_kernel(kernel: Kernel, path) -> None:
    """Binary format: magic, uint32 header length, JSON header, complex128 LE row-major."""
    header = json.dumps(
        {
            "N": kernel.size,
            "label": kernel.label,
            "hyper": asdict(kernel.hyper) if kernel.hyper else None,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(kernel.matrix, dtype="<c16").tobytes())


def load_kernel(path) -> Kernel:
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a kernel file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        n = int(header["N"])
        data = np.frombuffer(f.read(16 * n * n), dtype="<c16")
    if data.size != n * n:
        raise ValueError(f"{path}: truncated kernel body")
    matrix = data.reshape(n, n).astype(complex)
    if not np.any(matrix.imag):
        matrix = matrix.real
    hyper = KernelHyper(**header["hyper"]) if header["hyper"] else None
    return Kernel(matrix, header["label"], hyper)
