"""Adaptive Dormand-Prince 5(4) integration for small complex ODE systems.

Germ continuation compounds integration error multiplicatively along a
path, so the defaults are tight (rtol 1e-9, atol 1e-11).  States are 1-d
complex numpy arrays; the error norm treats real and imaginary parts
together through the complex modulus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError, PathExitsDomainError

# Dormand-Prince tableau (RK45 pair)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-11
    max_steps: int = 10_000
    first_step: float = 0.1


DEFAULT_INTEGRATOR = IntegratorConfig()


def integrate(rhs, t0, t1, y0, config=DEFAULT_INTEGRATOR, guard=None):
    """Integrate ``y' = rhs(t, y)`` from t0 to t1; returns the final state.

    ``guard``, when given, is called with each accepted state and may raise
    (used to abort trajectories that leave a metric's domain).  The exit
    point is attached to the raised error when possible.
    """
    t = float(t0)
    t1 = float(t1)
    y = np.asarray(y0, dtype=complex).copy()
    if t1 == t:
        return y
    span = t1 - t
    h = span * min(config.first_step, 1.0)
    f = rhs(t, y)
    k = np.empty((7, y.size), dtype=complex)
    for _ in range(config.max_steps):
        if (t + h - t1) * np.sign(span) > 0:
            h = t1 - t
        k[0] = f
        for s in range(1, 7):
            dy = h * (_A[s] @ k[:s])
            k[s] = rhs(t + _C[s] * h, y + dy)
        y_new = y + h * (_B5 @ k)
        err_vec = h * (_ERR @ k)
        scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
        if err <= 1.0:
            t += h
            y = y_new
            f = k[6]  # FSAL
            if guard is not None:
                try:
                    guard(y)
                except PathExitsDomainError:
                    raise
                except Exception as exc:  # attach trajectory context
                    raise PathExitsDomainError(
                        f"trajectory left the domain at t={t:.6g}: {exc}",
                        exit_point=y.copy()) from exc
            if abs(t - t1) <= 1e-15 * max(1.0, abs(t1)):
                return y
            factor = min(_MAX_FACTOR, _SAFETY * err ** -0.2) if err > 0 else _MAX_FACTOR
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        h *= factor
        if abs(h) < 1e-15 * max(1.0, abs(span)):
            raise NoConvergenceError("step size underflow in RK45 integration")
    raise NoConvergenceError("RK45 exceeded the step budget")
