"""Planar serial-chain robot: geometry, kinematics and rigid-body dynamics.

Conventions
-----------
Every link is a rectangle in its own frame with the proximal joint at the
origin, the link axis along local +x, ``x in [0, length]`` and
``y in [-width/2, width/2]``.  Absolute link angles are cumulative sums of
the joint angles, and joint ``i`` sits at the proximal end of link ``i``.

The boundary of each rectangle is parameterized by arc length ``s``,
starting at the local corner ``(0, -width/2)`` and walking counter-clockwise:
bottom edge, distal face, top edge, proximal face.  Edges are half-open, so
a corner carries the normal of the edge that starts there.

Planar cross product: ``a x b = a_x b_y - a_y b_x``.
"""
from dataclasses import dataclass, field

import numpy as np


def perp(v):
    """Rotate 2-vectors by +90 degrees, ``(x, y) -> (-y, x)``."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return np.array([-v[1], v[0]])
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross2(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Kinematic and inertial description of a planar chain of rectangular links.

    Per-link arrays all have length ``n``.  ``inertia`` is about the link
    COM, ``com_offset`` is measured along the link axis from the proximal
    joint.  ``joint_damping`` is only seen by the simulator.
    """

    lengths: np.ndarray
    widths: np.ndarray
    masses: np.ndarray
    inertias: np.ndarray
    com_offsets: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, -9.81]))
    joint_damping: np.ndarray = None
    base: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        arrays = {}
        for name in ("lengths", "widths", "masses", "inertias", "com_offsets"):
            arrays[name] = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
        n = arrays["lengths"].size
        if n < 1:
            raise ValueError("a robot needs at least one link")
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise ValueError(f"{name} must have {n} entries, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        for name in ("lengths", "widths", "masses", "inertias"):
            if np.any(arrays[name] <= 0):
                raise ValueError(f"{name} must be strictly positive")
        if np.any(arrays["com_offsets"] < 0) or np.any(arrays["com_offsets"] > arrays["lengths"]):
            raise ValueError("com_offsets must lie in [0, length]")
        damping = self.joint_damping
        damping = np.zeros(n) if damping is None else np.broadcast_to(
            np.asarray(damping, dtype=float), (n,)).copy()
        if np.any(damping < 0):
            raise ValueError("joint_damping must be non-negative")
        gravity = np.asarray(self.gravity, dtype=float).reshape(2).copy()
        base = np.asarray(self.base, dtype=float).reshape(2).copy()
        for name, arr in arrays.items():
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for name, arr in (("joint_damping", damping), ("gravity", gravity), ("base", base)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.lengths.size

    def perimeter(self, link):
        return 2.0 * (self.lengths[link] + self.widths[link])

    @classmethod
    def uniform(cls, n=4, length=0.5, width=0.08, mass=1.0, **kwargs):
        """Chain of identical solid rectangles with the COM at the link center."""
        lengths = np.full(n, float(length))
        widths = np.full(n, float(width))
        masses = np.full(n, float(mass))
        inertias = masses * (lengths**2 + widths**2) / 12.0
        return cls(lengths, widths, masses, inertias, lengths / 2.0, **kwargs)


@dataclass(frozen=True, eq=False)
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1).copy()
        qdot = np.asarray(self.qdot, dtype=float).reshape(-1).copy()
        if q.shape != qdot.shape:
            raise ValueError("q and qdot must have the same length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
            raise ValueError("joint state must be finite")
        q.flags.writeable = False
        qdot.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """A material point on a link's rectangular boundary (link frame)."""

    link: int
    s: float
    local: np.ndarray
    outward_normal: np.ndarray

    @property
    def tangent(self):
        """Unit tangent in the direction of increasing ``s``."""
        return perp(self.outward_normal)


# ---------------------------------------------------------------------------
# kinematics


def link_angles(model, q):
    return np.cumsum(np.asarray(q, dtype=float))


def joint_origins(model, q):
    """World positions of all joint origins plus the distal tip, shape (n+1, 2)."""
    theta = link_angles(model, q)
    steps = model.lengths[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    return np.vstack([model.base, model.base + np.cumsum(steps, axis=0)])


def com_positions(model, q):
    theta = link_angles(model, q)
    origins = joint_origins(model, q)
    return origins[:-1] + model.com_offsets[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])


def end_effector(model, q):
    return joint_origins(model, q)[-1]


def _lower_mask(n):
    # [i, j] -> j <= i
    return np.tril(np.ones((n, n), dtype=bool))


def _com_jacobians(model, q):
    """Linear Jacobians of every link COM, shape (n, 2, n)."""
    n = model.n
    origins = joint_origins(model, q)
    coms = com_positions(model, q)
    cols = perp(coms[:, None, :] - origins[None, :n, :])  # [i, j, xy]
    cols[~_lower_mask(n)] = 0.0
    return np.transpose(cols, (0, 2, 1))


def mass_matrix(model, q):
    """Joint-space inertia matrix, composite sum over link COM Jacobians."""
    jv = _com_jacobians(model, q)
    M = np.einsum("i,iaj,iak->jk", model.masses, jv, jv)
    # angular part: link i rotates with every joint j <= i
    n = model.n
    idx = np.arange(n)
    M += np.cumsum(model.inertias[::-1])[::-1][np.maximum.outer(idx, idx)]
    return 0.5 * (M + M.T)


def mass_matrix_derivatives(model, q):
    """Analytic partials ``dM[k] = dM/dq_k``, shape (n, n, n)."""
    n = model.n
    origins = joint_origins(model, q)
    coms = com_positions(model, q)
    jv = _com_jacobians(model, q)
    idx = np.arange(n)
    # d(com_i - o_j)/dq_k = perp(com_i - o_max(j, k)) for j, k <= i, so the
    # derivative of Jacobian column perp(com_i - o_j) is -(com_i - o_max(j, k))
    jk = np.maximum.outer(idx, idx)
    djv = -(coms[:, None, None, :] - origins[jk][None, :, :, :])  # [i, j, k, xy]
    lower = _lower_mask(n)
    djv[~(lower[:, :, None] & lower[:, None, :])] = 0.0
    prod = np.einsum("i,ijka,ial->kjl", model.masses, djv, jv)
    return prod + np.transpose(prod, (0, 2, 1))


def coriolis_matrix(model, q, qdot, dM=None):
    """Christoffel-symbol Coriolis/centrifugal matrix, ``Mdot - 2C`` is skew."""
    if dM is None:
        dM = mass_matrix_derivatives(model, q)
    qdot = np.asarray(qdot, dtype=float)
    # Gamma[i, j, k] = 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)
    gamma = 0.5 * (
        np.einsum("kij->ijk", dM) + np.einsum("jik->ijk", dM) - np.einsum("ijk->ijk", dM)
    )
    return gamma @ qdot


def gravity_vector(model, q):
    """Gravity torques ``dV/dq``."""
    n = model.n
    origins = joint_origins(model, q)
    coms = com_positions(model, q)
    lever = perp(coms[:, None, :] - origins[None, :n, :]) @ model.gravity  # [i, j]
    lever[~_lower_mask(n)] = 0.0
    return -(model.masses @ lever)


def potential_energy(model, q):
    return -float(np.sum(model.masses * (com_positions(model, q) @ model.gravity)))


def kinetic_energy(model, q, qdot):
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * float(qdot @ mass_matrix(model, q) @ qdot)


def point_jacobian(model, q, pt):
    """2 x n Jacobian of the material point ``pt``; distal columns are zero."""
    origins = joint_origins(model, q)
    p, _ = world_point(model, q, pt)
    J = np.zeros((2, model.n))
    J[:, : pt.link + 1] = perp(p - origins[: pt.link + 1]).T
    return J


def tip_jacobian(model, q):
    """2 x n Jacobian of the distal tip of the last link."""
    origins = joint_origins(model, q)
    return perp(origins[-1] - origins[:-1]).T


def frame_jacobian(model, q, joint):
    """3 x n Jacobian (x, y, angle) of the frame at the origin of ``joint``.

    The frame is carried by the links proximal to the joint, so only columns
    ``j < joint`` are populated.
    """
    if not 0 <= joint < model.n:
        raise IndexError(f"joint {joint} out of range for {model.n} joints")
    origins = joint_origins(model, q)
    J = np.zeros((3, model.n))
    J[:2, :joint] = perp(origins[joint] - origins[:joint]).T
    J[2, :joint] = 1.0
    return J


def link_frame_jacobian(model, q, link):
    """3 x n Jacobian of the body frame of ``link`` (origin at its proximal joint).

    Same linear rows as ``frame_jacobian(link)``; the angular row also
    includes the link's own joint.
    """
    J = frame_jacobian(model, q, link)
    J[2, link] = 1.0
    return J


# ---------------------------------------------------------------------------
# boundary geometry


def _edges(length, width):
    """(start corner, outward normal, edge length) in traversal order."""
    h = width / 2.0
    return (
        (np.array([0.0, -h]), np.array([0.0, -1.0]), length),
        (np.array([length, -h]), np.array([1.0, 0.0]), width),
        (np.array([length, h]), np.array([0.0, 1.0]), length),
        (np.array([0.0, h]), np.array([-1.0, 0.0]), width),
    )


def perimeter_point(model, link, s):
    """Boundary point at arc length ``s`` (wrapped modulo the perimeter)."""
    if not 0 <= link < model.n:
        raise IndexError(f"link {link} out of range for {model.n} links")
    L, w = model.lengths[link], model.widths[link]
    per = 2.0 * (L + w)
    s = float(s) % per
    if s >= per:  # fmod rounding can land exactly on the perimeter
        s = 0.0
    # compare against cumulative offsets so corners land on the next edge exactly
    offset = 0.0
    for start, normal, edge_len in _edges(L, w):
        if s < offset + edge_len:
            local = start + (s - offset) * perp(normal)
            return BoundaryPoint(link, s, local, normal.copy())
        offset += edge_len
    start, normal, _ = _edges(L, w)[0]
    return BoundaryPoint(link, 0.0, start.copy(), normal.copy())


def boundary_point_from_local(model, link, local):
    """Project a link-frame point onto the nearest boundary edge."""
    L, w = model.lengths[link], model.widths[link]
    local = np.asarray(local, dtype=float)
    best = None
    offset = 0.0
    for start, normal, edge_len in _edges(L, w):
        tangent = perp(normal)
        u = float(np.clip((local - start) @ tangent, 0.0, edge_len))
        d = float(np.linalg.norm(start + u * tangent - local))
        if best is None or d < best[0] - 1e-15:
            best = (d, offset + u)
        offset += edge_len
    return perimeter_point(model, link, best[1])


def world_point(model, q, pt):
    """World position and world outward normal of a boundary point."""
    theta = link_angles(model, q)[pt.link]
    origin = joint_origins(model, q)[pt.link]
    R = rot(theta)
    return origin + R @ pt.local, R @ pt.outward_normal


def world_to_local(model, q, link, p):
    theta = link_angles(model, q)[link]
    origin = joint_origins(model, q)[link]
    return rot(theta).T @ (np.asarray(p, dtype=float) - origin)


def link_corners(model, q, link):
    """World coordinates of the four rectangle corners in traversal order."""
    theta = link_angles(model, q)[link]
    origin = joint_origins(model, q)[link]
    R = rot(theta)
    return np.array([origin + R @ start for start, _, _ in
                     _edges(model.lengths[link], model.widths[link])])
