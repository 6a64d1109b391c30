"""Dormand-Prince 5(4) stepper on real-flattened complex states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import IntegrationError

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
# difference between the 5th order and embedded 4th order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    error_sum: float = 0.0
    last_h: Optional[float] = None


def _to_real(y: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(y, dtype=complex).reshape(-1).view(np.float64)


def _to_complex(y: np.ndarray, shape) -> np.ndarray:
    return y.view(np.complex128).reshape(shape)


def _initial_step(f, t0, y0, f0, atol, rtol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    y0: np.ndarray,
    atol: float,
    rtol: float,
    stats: StepStats,
    max_steps: int,
    on_accept: Optional[Callable[[float, np.ndarray], None]] = None,
    h_init: Optional[float] = None,
) -> np.ndarray:
    """Integrate the complex ODE y' = fun(t, y) from t0 to t1 (t1 >= t0).

    Error control uses the max norm over the real and imaginary parts of
    every state entry. ``stats`` is updated in place so that callers can
    chain several intervals under a common step budget.
    """
    shape = np.shape(y0)
    if t1 <= t0:
        return np.array(y0, dtype=complex, copy=True)

    def f(t, yr):
        return _to_real(fun(t, _to_complex(yr, shape)))

    y = _to_real(y0).copy()
    t = float(t0)
    span = float(t1) - t
    fy = f(t, y)
    if h_init is None or not np.isfinite(h_init) or h_init <= 0:
        h = _initial_step(f, t, y, fy, atol, rtol, span)
    else:
        h = min(h_init, span)
    k = [None] * 7
    while t < t1:
        if stats.accepted >= max_steps:
            raise IntegrationError(f"step budget of {max_steps} accepted steps exhausted at t={t}")
        last = t + h >= t1 or (t1 - (t + h)) < 1e-12 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        k[0] = fy
        for i in range(1, 7):
            dy = sum(a * k[j] for j, a in enumerate(A[i]) if a != 0.0)
            k[i] = f(t + C[i] * h, y + h * dy)
        y_new = y + h * sum(b * k[j] for j, b in enumerate(B[:6]) if b != 0.0)
        err_vec = h * sum(e * k[j] for j, e in enumerate(E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if err_vec.size else 0.0
        if not np.isfinite(err):
            raise IntegrationError(f"non-finite state near t={t}")
        if err <= 1.0:
            t = t1 if last else t + h
            y = y_new
            fy = k[6]
            stats.accepted += 1
            stats.error_sum += float(np.max(np.abs(err_vec))) if err_vec.size else 0.0
            if on_accept is not None:
                on_accept(t, _to_complex(y, shape))
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            stats.last_h = h
            h = h * max(1.0, factor) if factor >= 1.0 else h * factor
        else:
            stats.rejected += 1
            h = h * max(MIN_FACTOR, SAFETY * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t}")
    return _to_complex(y, shape).copy()
