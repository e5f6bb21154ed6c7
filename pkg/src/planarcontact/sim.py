"""Ground-truth planar physics with a penalty contact against a circular obstacle."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import model as rb

log = logging.getLogger(__name__)

# M condition number above which the model is treated as broken
MAX_CONDITION = 1e12
# joint speed (rad/s) treated as numerical divergence
MAX_SPEED = 1e4


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Obstacle:
    center: np.ndarray
    radius: float
    stiffness: float = 1e4
    damping: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.stiffness <= 0:
            raise ValueError("obstacle stiffness must be positive")
        if self.damping < 0:
            raise ValueError("obstacle damping must be non-negative")


@dataclass(frozen=True, eq=False)
class Contact:
    """Resolved penalty contact.  ``normal`` is the outward obstacle normal."""

    point: rb.BoundaryPoint
    point_world: np.ndarray
    normal: np.ndarray
    depth: float
    force: np.ndarray
    tau: np.ndarray


@dataclass(frozen=True, eq=False)
class SimState:
    joints: rb.JointState
    t: float = 0.0
    # contact applied during the step that produced this state
    true_contact: Optional[Contact] = None


def _closest_on_link(model, q, link, center):
    """Boundary point of ``link`` closest to ``center``: (distance, arc length, world point)."""
    corners = rb.link_corners(model, q, link)
    L, w = model.lengths[link], model.widths[link]
    edge_lengths = (L, w, L, w)
    best = None
    offset = 0.0
    for e in range(4):
        a, b = corners[e], corners[(e + 1) % 4]
        u = np.clip((center - a) @ (b - a) / edge_lengths[e] ** 2, 0.0, 1.0)
        p = a + u * (b - a)
        d = float(np.linalg.norm(p - center))
        if best is None or d < best[0]:
            best = (d, offset + u * edge_lengths[e], p)
        offset += edge_lengths[e]
    return best


def contact_resolve(model, q, qdot, obstacle):
    """Deepest penetrating boundary point and its spring-damper force, or None.

    The closest-point search per edge is exact, so no sampling is needed.
    """
    if obstacle is None:
        return None
    center = obstacle.center
    hits = []
    for link in range(model.n):
        d, s, p = _closest_on_link(model, q, link, center)
        depth = obstacle.radius - d
        if depth > 0.0:
            hits.append((depth, link, s, p))
    if not hits:
        return None
    if len(hits) > 1:
        log.warning("links %s penetrate the obstacle; keeping the deepest",
                    [h[1] for h in hits])
    depth, link, s, p = max(hits, key=lambda h: (h[0], -h[1]))
    pt = rb.perimeter_point(model, link, s)
    normal = (p - center) / np.linalg.norm(p - center)
    J = rb.point_jacobian(model, q, pt)
    vn = float(normal @ (J @ np.asarray(qdot, dtype=float)))
    magnitude = max(obstacle.stiffness * depth - obstacle.damping * vn, 0.0)
    force = magnitude * normal
    return Contact(pt, p, normal, depth, force, J.T @ force)


def step(model, state, tau_m, obstacle, dt):
    """Advance one step of ``M qdd + C qd + g = tau_m + tau_c - D qd``.

    Generalized momentum is advanced with explicit Euler using
    ``pdot = tau - g + C^T qd``; positions use the semi-implicit velocity
    ``qd + qdd dt`` and the new velocity is recovered from the new momentum.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q, qdot = state.joints.q, state.joints.qdot
    tau_m = np.asarray(tau_m, dtype=float)
    contact = contact_resolve(model, q, qdot, obstacle)
    tau_c = contact.tau if contact is not None else 0.0

    M = rb.mass_matrix(model, q)
    if np.linalg.cond(M) > MAX_CONDITION:
        raise SimulationError("mass matrix is numerically singular")
    C = rb.coriolis_matrix(model, q, qdot)
    g = rb.gravity_vector(model, q)
    tau = tau_m + tau_c - model.joint_damping * qdot

    qddot = np.linalg.solve(M, tau - C @ qdot - g)
    p_next = M @ qdot + dt * (tau - g + C.T @ qdot)
    q_next = q + dt * (qdot + dt * qddot)
    M_next = rb.mass_matrix(model, q_next)
    if np.linalg.cond(M_next) > MAX_CONDITION:
        raise SimulationError("mass matrix is numerically singular")
    qdot_next = np.linalg.solve(M_next, p_next)
    if not np.all(np.abs(qdot_next) < MAX_SPEED):
        raise SimulationError(f"integration diverged at t={state.t + dt:.4f} s")
    return SimState(rb.JointState(q_next, qdot_next), state.t + dt, contact)


def total_energy(model, joints):
    return rb.kinetic_energy(model, joints.q, joints.qdot) + rb.potential_energy(model, joints.q)
