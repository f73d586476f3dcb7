"""Exact zero-order-hold discretization of the shaft dynamics.

One shaft on the transmission spring obeys

    J w' = u - B w - K (theta - anchor)

with ``u`` and ``anchor`` held constant over a step.  The two-shaft (free
output) system is handled the same way with a 4x4 state.  Friction enters as
an additive torque held over the step, so the linear part stays exact.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import expm


def _zoh(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n, m = b.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a
    aug[:n, n:] = b
    e = expm(aug * dt)
    return e[:n, :n], e[:n, n:]


@lru_cache(maxsize=256)
def single_shaft(J: float, B: float, K: float, dt: float) -> tuple[float, ...]:
    """Coefficients (p11, p12, p21, p22, g11, g12, g21, g22) for one shaft.

    Inputs are (torque, anchor angle).
    """
    a = np.array([[0.0, 1.0], [-K / J, -B / J]])
    b = np.array([[0.0, 0.0], [1.0 / J, K / J]])
    phi, gam = _zoh(a, b, dt)
    return (float(phi[0, 0]), float(phi[0, 1]), float(phi[1, 0]), float(phi[1, 1]),
            float(gam[0, 0]), float(gam[0, 1]), float(gam[1, 0]), float(gam[1, 1]))


def advance(theta: float, omega: float, torque: float, anchor: float,
            c: tuple[float, ...]) -> tuple[float, float]:
    p11, p12, p21, p22, g11, g12, g21, g22 = c
    return (p11 * theta + p12 * omega + g11 * torque + g12 * anchor,
            p21 * theta + p22 * omega + g21 * torque + g22 * anchor)


@lru_cache(maxsize=256)
def two_shaft(J_in: float, J_out: float, B: float, K: float,
              dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(Phi, Gamma) for state [th_in, w_in, th_out, w_out].

    Inputs are (input torque, output load torque, phase offset [rad]); the
    spring deflection is ``th_in - th_out + phase``.
    """
    a = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-K / J_in, -B / J_in, K / J_in, B / J_in],
        [0.0, 0.0, 0.0, 1.0],
        [K / J_out, B / J_out, -K / J_out, -B / J_out],
    ])
    b = np.array([
        [0.0, 0.0, 0.0],
        [1.0 / J_in, 0.0, -K / J_in],
        [0.0, 0.0, 0.0],
        [0.0, 1.0 / J_out, K / J_out],
    ])
    phi, gam = _zoh(a, b, dt)
    phi.setflags(write=False)
    gam.setflags(write=False)
    return phi, gam
