"""Operational-space PD control of the end-effector tip and the task trajectories."""
from dataclasses import dataclass

import numpy as np

from . import model as rb

# damping added to J M^-1 J^T before inversion
LAMBDA_DAMPING = 1e-6


@dataclass(frozen=True)
class TaskGoal:
    x_des: np.ndarray
    xdot_des: np.ndarray
    kp: float = 100.0
    kv: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "x_des", np.asarray(self.x_des, dtype=float).reshape(2))
        object.__setattr__(self, "xdot_des", np.asarray(self.xdot_des, dtype=float).reshape(2))
        if self.kp <= 0 or self.kv <= 0:
            raise ValueError("kp and kv must be positive")


def task_inertia(model, q, M=None, J=None):
    """Damped ``(J M^-1 J^T + lambda I)^-1`` for the tip Jacobian."""
    if M is None:
        M = rb.mass_matrix(model, q)
    if J is None:
        J = rb.tip_jacobian(model, q)
    inv = J @ np.linalg.solve(M, J.T)
    return np.linalg.inv(inv + LAMBDA_DAMPING * np.eye(2))


def opspace_torques(model, q, qdot, goal, null_gravity=1.0, null_damping=0.0,
                    null_stiffness=0.0, posture=None):
    """Joint torques ``J^T Lambda (kp e + kv edot) + g``.

    ``null_gravity`` scales the part of gravity compensation acting in the
    task null space (1 compensates all of ``g``, 0 lets the redundant
    joints fall while the tip is held).  ``null_damping`` adds
    ``-N^T (d * qdot)`` with the dynamically consistent projector ``N``.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    M = rb.mass_matrix(model, q)
    J = rb.tip_jacobian(model, q)
    g = rb.gravity_vector(model, q)
    Lam = task_inertia(model, q, M, J)

    x = rb.end_effector(model, q)
    xdot = J @ qdot
    f_task = Lam @ (goal.kp * (goal.x_des - x) + goal.kv * (goal.xdot_des - xdot))
    tau = J.T @ f_task + g
    if null_gravity == 1.0 and null_damping == 0.0 and null_stiffness == 0.0:
        return tau

    Jbar = np.linalg.solve(M, J.T @ Lam)
    Nt = np.eye(model.n) - J.T @ Jbar.T
    tau_null = (null_gravity - 1.0) * g - null_damping * qdot
    if null_stiffness:
        tau_null = tau_null + null_stiffness * (np.asarray(posture, dtype=float) - q)
    return tau + Nt @ tau_null


@dataclass(frozen=True)
class Trajectory:
    """End-effector task: ``hold`` stays at ``anchor``; ``track`` runs a circle.

    The circle passes through ``anchor`` at angle ``phase`` (measured at the
    circle center) and starts moving counter-clockwise at time ``start``.
    With ``ramp > 0`` the angular rate rises from zero over ``ramp`` seconds
    along a raised cosine, so the commanded velocity is continuous.
    """

    kind: str
    anchor: np.ndarray
    radius: float = 0.1
    period: float = 4.0
    phase: float = np.pi
    start: float = 0.0
    ramp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("hold", "track"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(2))
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.ramp < 0:
            raise ValueError("ramp must be non-negative")

    @property
    def circle_center(self):
        return self.anchor - self.radius * np.array([np.cos(self.phase), np.sin(self.phase)])


def scenario_trajectory(kind, t, params, kp=100.0, kv=20.0):
    """Task goal at time ``t`` for a ``hold`` or ``track`` scenario."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if kind == "hold":
        return TaskGoal(params.anchor, np.zeros(2), kp, kv)
    if kind != "track":
        raise ValueError(f"unknown trajectory kind {kind!r}")
    if t < params.start:
        return TaskGoal(params.anchor, np.zeros(2), kp, kv)
    w = 2.0 * np.pi / params.period
    tau = t - params.start
    T = params.ramp
    if tau < T:
        rate = w * 0.5 * (1.0 - np.cos(np.pi * tau / T))
        swept = w * (0.5 * tau - T / (2.0 * np.pi) * np.sin(np.pi * tau / T))
    else:
        rate = w
        swept = w * ((tau - 0.5 * T) % params.period)
    phase = params.phase + swept
    r = params.radius
    x = params.circle_center + r * np.array([np.cos(phase), np.sin(phase)])
    xdot = r * rate * np.array([-np.sin(phase), np.cos(phase)])
    return TaskGoal(x, xdot, kp, kv)
