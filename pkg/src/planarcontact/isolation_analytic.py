"""Analytic contact isolation and identification.

The residual is resolved into an equivalent force and moment at the frame of
the contacted link's proximal joint.  The force fixes the line of action, the
line is intersected with the link rectangle, and of the (at most two) hits
the one where the force presses into the surface is kept.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import model as rb
from .observer import detect

FORCE_FLOOR = 1e-6
PUSH_TOLERANCE = 1e-9
RANK_RTOL = 1e-8
MIN_JOINTS = 3


class IsolationError(Exception):
    """Base class for isolation failures that yield an invalid estimate."""


class Underdetermined(IsolationError):
    pass


class RankDeficient(IsolationError):
    pass


class ZeroForce(IsolationError):
    pass


class NoIntersection(IsolationError):
    pass


class Ambiguous(IsolationError):
    pass


@dataclass(frozen=True, eq=False)
class ContactEstimate:
    link: Optional[int]
    point: Optional[rb.BoundaryPoint]
    point_world: Optional[np.ndarray]
    force: Optional[np.ndarray]
    valid: bool
    method: str
    reason: str = ""
    residual: float = float("nan")

    @classmethod
    def invalid(cls, method, reason, link=None):
        return cls(link, None, None, None, False, method, reason)


@dataclass(frozen=True)
class Wrench:
    F: np.ndarray
    Mz: float
    residual: float


def _wrench_map(origins, joint):
    """Rows ``[perp(o_joint - o_j)^T, 1]`` mapping a body wrench to joints ``0..joint``."""
    A = np.ones((joint + 1, 3))
    A[:, :2] = rb.perp(origins[joint] - origins[: joint + 1])
    return A


def resolve_wrench(gamma, model, q, joint, origins=None):
    """Least-squares ``[F; Mz]`` at the origin of ``joint`` explaining ``gamma``.

    Only residual components of joints ``0..joint`` are used; the wrench is
    expressed in the body frame of link ``joint`` (world axes).
    """
    rows = joint + 1
    if rows < MIN_JOINTS:
        raise Underdetermined(
            f"contact on link {joint} has only {rows} proximal joint(s), need {MIN_JOINTS}")
    if origins is None:
        origins = rb.joint_origins(model, q)
    b = np.asarray(gamma, dtype=float)[:rows]
    A = _wrench_map(origins, joint)  # rows x 3, equals link_frame_jacobian(...)[:, :rows].T
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"wrench map at joint {joint} is rank deficient")
    sol = Vt.T @ ((U.T @ b) / sv)
    residual = float(np.linalg.norm(A @ sol - b))
    return Wrench(sol[:2], float(sol[2]), residual)


@dataclass(frozen=True)
class Line:
    point: np.ndarray
    direction: np.ndarray


def line_of_action(F, Mz, origin):
    """Points ``r`` with ``(r - origin) x F = Mz``, as foot point plus direction."""
    F = np.asarray(F, dtype=float)
    f2 = float(F @ F)
    if np.sqrt(f2) < FORCE_FLOOR:
        raise ZeroForce("contact force below floor, line of action undefined")
    # perp(F) x F = -|F|^2
    foot = np.asarray(origin, dtype=float) - (Mz / f2) * rb.perp(F)
    return Line(foot, F / np.sqrt(f2))


def _segment_hits(point, direction, corners):
    """Intersections of a line with the closed polygon edges: list of (edge, u)."""
    px, py = float(point[0]), float(point[1])
    dx, dy = float(direction[0]), float(direction[1])
    hits = []
    count = len(corners)
    for e in range(count):
        ax, ay = corners[e]
        bx, by = corners[(e + 1) % count]
        ex, ey = bx - ax, by - ay
        denom = ex * dy - ey * dx
        if abs(denom) < 1e-15:
            continue
        # point + t*direction = a + u*(b - a), crossed with direction
        u = ((px - ax) * dy - (py - ay) * dx) / denom
        if -1e-12 <= u <= 1.0 + 1e-12:
            hits.append((e, min(max(u, 0.0), 1.0)))
    return hits


def _link_frame(model, q, link):
    origin = rb.joint_origins(model, q)[link]
    return origin, rb.rot(rb.link_angles(model, q)[link])


def boundary_hits(model, q, link, line, frame=None):
    """Distinct (BoundaryPoint, world point) pairs where ``line`` crosses ``link``.

    The line is moved into the link frame, where the rectangle is axis aligned.
    """
    origin, R = frame if frame is not None else _link_frame(model, q, link)
    L, w = float(model.lengths[link]), float(model.widths[link])
    h = w / 2.0
    corners = ((0.0, -h), (L, -h), (L, h), (0.0, h))
    offsets = (0.0, L, L + w, 2 * L + w)
    edge_len = (L, w, L, w)
    local_point = R.T @ (line.point - origin)
    local_dir = R.T @ line.direction
    points = []
    for e, u in _segment_hits(local_point, local_dir, corners):
        pt = rb.perimeter_point(model, link, offsets[e] + u * edge_len[e])
        p = origin + R @ pt.local
        if all(np.linalg.norm(p - other) > 1e-9 for _, other in points):
            points.append((pt, p))
    return points


def isolate(gamma, model, q, epsilon=0.1, link=None):
    """Full analytic pipeline; failures come back as an invalid estimate."""
    method = "analytic"
    if link is None:
        det = detect(gamma, epsilon)
        if not det.contact:
            return ContactEstimate.invalid(method, "no contact")
        link = det.last_excited_joint
    try:
        return _isolate(gamma, model, q, link)
    except IsolationError as exc:
        return ContactEstimate.invalid(method, f"{type(exc).__name__}: {exc}", link)


def _isolate(gamma, model, q, link):
    origins = rb.joint_origins(model, q)
    wrench = resolve_wrench(gamma, model, q, link, origins)
    origin = origins[link]
    R = rb.rot(rb.link_angles(model, q)[link])
    line = line_of_action(wrench.F, wrench.Mz, origin)
    hits = boundary_hits(model, q, link, line, (origin, R))
    if not hits:
        raise NoIntersection("line of action misses the link")
    pressing = [(pt, p) for pt, p in hits
                if float(wrench.F @ (R @ pt.outward_normal)) < -PUSH_TOLERANCE]
    if not pressing:
        raise NoIntersection("no candidate point where the force presses on the link")
    if len(pressing) > 1:
        raise Ambiguous(f"{len(pressing)} candidates satisfy the push constraint")
    pt, p = pressing[0]
    return ContactEstimate(link, pt, p, wrench.F.copy(), True, "analytic",
                           residual=wrench.residual)
