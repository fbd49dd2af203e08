"""Shared oracles: central finite differences, independent of the engine."""

from __future__ import annotations

import numpy as np
import pytest


def central_diff(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar f at x, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for k in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi.flat[k] += step
        lo.flat[k] -= step
        grad.flat[k] = (f(hi) - f(lo)) / (2.0 * step)
    return grad


def directional_diff(f, x: np.ndarray, direction: np.ndarray, step: float = 1e-5) -> float:
    """Central finite difference of scalar f along a unit direction."""
    d = direction / np.linalg.norm(direction)
    return (f(x + step * d) - f(x - step * d)) / (2.0 * step)


def rel_error(approx: np.ndarray, exact: np.ndarray) -> float:
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = max(np.linalg.norm(approx), np.linalg.norm(exact), 1e-10)
    return float(np.linalg.norm(approx - exact) / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
