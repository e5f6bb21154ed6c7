"""Generalized-momentum observer for external joint torques.

    gamma = K [p + int(g - C^T qdot - tau_m - gamma) dt],   p = M qdot

which obeys ``gamma_dot = K (tau_c - gamma)`` and needs no joint
accelerations.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import model as rb


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Residual ``gamma`` and the running integral it is built from.

    ``pending`` is the integrand evaluated at the previous sample; the
    explicit-Euler integral is advanced with it on the next update.
    """

    K: np.ndarray
    integral: np.ndarray
    gamma: np.ndarray
    pending: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float).reshape(-1)
        if np.any(K <= 0):
            raise ValueError("observer gains must be positive")
        object.__setattr__(self, "K", K)

    @classmethod
    def start(cls, model, q, qdot, gains=100.0):
        """Observer initialized so that ``gamma = 0`` at the initial state."""
        K = np.broadcast_to(np.asarray(gains, dtype=float), (model.n,)).copy()
        p0 = rb.mass_matrix(model, q) @ np.asarray(qdot, dtype=float)
        return cls(K, -p0, np.zeros(model.n))


def observer_update(state, model, q, qdot, tau_m, dt):
    """One sample of the momentum observer at (q, qdot, tau_m)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    integral = state.integral
    if state.pending is not None:
        integral = integral + (state.pending - state.gamma) * dt
    M = rb.mass_matrix(model, q)
    C = rb.coriolis_matrix(model, q, qdot)
    g = rb.gravity_vector(model, q)
    gamma = state.K * (M @ qdot + integral)
    pending = g - C.T @ qdot - np.asarray(tau_m, dtype=float)
    return replace(state, integral=integral, gamma=gamma, pending=pending)


@dataclass(frozen=True)
class Detection:
    contact: bool
    last_excited_joint: Optional[int] = None


def detect(gamma, epsilon):
    """Threshold the residual with the infinity norm.

    The contact lies on link ``last_excited_joint`` or beyond.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    excited = np.flatnonzero(np.abs(np.asarray(gamma, dtype=float)) >= epsilon)
    if excited.size == 0:
        return Detection(False, None)
    return Detection(True, int(excited[-1]))
