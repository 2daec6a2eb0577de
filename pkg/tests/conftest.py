"""Shared oracles and random-instance helpers.

The oracles here are written independently of the package: explicit
inverses and full joint-Gaussian block algebra instead of Cholesky solves.
"""

import numpy as np
import pytest


def random_psd(rng, n, rank=None, complex_=True):
    """Random Hermitian PSD matrix of the given rank (full by default)."""
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank))
    if complex_:
        a = a + 1j * rng.standard_normal((n, rank))
    k = a @ a.conj().T / rank
    return 0.5 * (k + k.conj().T)


def dense_condition(k, omega, y, s2):
    """Condition h ~ CN(0, K) on y = S h + z through the joint (N + |omega|)
    dimensional Gaussian, inverting the observation block directly."""
    k = np.asarray(k, dtype=complex)
    n = k.shape[0]
    omega = list(omega)
    s = np.zeros((len(omega), n))
    s[np.arange(len(omega)), omega] = 1.0
    joint = np.block([[k, k @ s.T], [s @ k, s @ k @ s.T + s2 * np.eye(len(omega))]])
    k_hh, k_hy, k_yy = joint[:n, :n], joint[:n, n:], joint[n:, n:]
    inv = np.linalg.inv(k_yy)
    return k_hy @ inv @ np.asarray(y), k_hh - k_hy @ inv @ k_hy.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (title, passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
