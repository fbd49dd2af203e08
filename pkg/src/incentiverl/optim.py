"""Gradient-step helpers: adaptive-moment accumulator and norm clipping."""

from __future__ import annotations

import numpy as np


class Adam:
    """Adaptive-moment estimation with the standard bias correction.

    `step(grad)` returns the increment that *descends* the supplied
    gradient; callers ascending an objective pass the negated gradient.
    """

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return -self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(vec: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    """Scale `vec` down to `max_norm` when it exceeds it.

    Returns (clipped vector, scale applied); scale is 1.0 when untouched.
    """
    norm = float(np.linalg.norm(vec))
    if norm <= max_norm or norm == 0.0:
        return vec, 1.0
    scale = max_norm / norm
    return vec * scale, scale
