"""Single-contact particle filter over link-boundary locations.

Particles are arc-length positions on link perimeters.  Each one is scored by
the best push-only force explaining the residual (a two-variable QP with a
single half-plane constraint), then the set is resampled multinomially and
diffused along the boundary.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import model as rb
from .isolation_analytic import ContactEstimate
from .observer import detect

log = logging.getLogger(__name__)

TIKHONOV = 1e-10
METHOD = "particle_filter"


@dataclass(frozen=True)
class HalfPlane:
    """Admissible forces ``F . normal <= 0`` (pressing on the surface from outside)."""

    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(2)
        norm = math.hypot(n[0], n[1])
        if norm == 0:
            raise ValueError("half-plane normal must be non-zero")
        object.__setattr__(self, "normal", n / norm)

    def contains(self, F, tol=0.0):
        return float(np.asarray(F) @ self.normal) <= tol


@dataclass(frozen=True)
class QPResult:
    F: np.ndarray
    residual: float


def qp_solve(gamma, J, hp):
    """Exact minimizer of ``|gamma - J^T F|^2`` subject to ``F . n <= 0``.

    Unconstrained normal equations first; if that force pulls, the optimum
    lies on the boundary line ``F = t * tangent`` and is found in closed form.
    """
    gamma = np.asarray(gamma, dtype=float)
    J = np.asarray(J, dtype=float)
    b1, b2 = J @ gamma
    a11 = float(J[0] @ J[0])
    a12 = float(J[0] @ J[1])
    a22 = float(J[1] @ J[1])
    trace = a11 + a22
    if trace <= 0.0:
        return QPResult(np.zeros(2), float(gamma @ gamma))
    d11, d22 = a11, a22
    det = a11 * a22 - a12 * a12
    if det <= 1e-12 * trace * trace:
        d11 += TIKHONOV * trace
        d22 += TIKHONOV * trace
        det = d11 * d22 - a12 * a12
    fx = (d22 * b1 - a12 * b2) / det
    fy = (d11 * b2 - a12 * b1) / det
    nx, ny = hp.normal
    if fx * nx + fy * ny > 0.0:
        tx, ty = -ny, nx
        curv = tx * tx * a11 + 2.0 * tx * ty * a12 + ty * ty * a22
        t = (tx * b1 + ty * b2) / curv if curv > 1e-15 * trace else 0.0
        fx, fy = t * tx, t * ty
    F = np.array([fx, fy])
    r = gamma - J.T @ F
    return QPResult(F, float(r @ r))


def measurement_weight(qp_residual, temperature):
    """Unnormalized likelihood ``exp(-residual / (2 T^2))``."""
    return np.exp(-np.asarray(qp_residual, dtype=float) / (2.0 * temperature**2))


def normalize_weights(w):
    """Normalized weights and whether a uniform fallback was needed."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        return np.full(w.size, 1.0 / w.size), True
    return w / total, False


@dataclass(frozen=True)
class Particle:
    location: rb.BoundaryPoint
    weight: float
    solved_force: np.ndarray
    qp_residual: float


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Array-backed particle set; an inactive set holds no particles."""

    links: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    forces: np.ndarray
    residuals: np.ndarray
    active: bool = True
    rng_seed: Optional[int] = None

    @classmethod
    def empty(cls, rng_seed=None):
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=int), z, z, np.zeros((0, 2)), z, False, rng_seed)

    @classmethod
    def from_locations(cls, links, s, rng_seed=None):
        links = np.asarray(links, dtype=int)
        s = np.asarray(s, dtype=float)
        n = s.size
        return cls(links, s, np.full(n, 1.0 / n), np.zeros((n, 2)), np.zeros(n), True, rng_seed)

    def __len__(self):
        return self.s.size

    def particles(self, model):
        return [Particle(rb.perimeter_point(model, int(l), s), float(w), f.copy(), float(r))
                for l, s, w, f, r in zip(self.links, self.s, self.weights, self.forces,
                                         self.residuals)]


@dataclass(frozen=True)
class PFParams:
    n_particles: int = 50
    sigma: float = 0.01
    temperature: float = 0.05
    epsilon: float = 0.1
    dropout_ticks: int = 5
    seed_all_links: bool = False
    mode_window: float = 0.02

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.sigma < 0 or self.temperature <= 0 or self.epsilon <= 0:
            raise ValueError("sigma must be >= 0, temperature and epsilon > 0")
        if self.dropout_ticks < 1:
            raise ValueError("dropout_ticks must be >= 1")


def initial_set(model, first_link, params, rng, rng_seed=None):
    """Evenly spread particles (random common offset) over the suspected link(s)."""
    links = [first_link] + (list(range(first_link + 1, model.n)) if params.seed_all_links else [])
    perims = np.array([model.perimeter(l) for l in links])
    total = perims.sum()
    u = (rng.uniform() + np.arange(params.n_particles)) * total / params.n_particles
    edges = np.concatenate([[0.0], np.cumsum(perims)])
    which = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(links) - 1)
    return ParticleSet.from_locations(np.asarray(links)[which], u - edges[which], rng_seed)


def _perimeters(model, links):
    return 2.0 * (model.lengths[links] + model.widths[links])


def motion_update(pset, sigma, rng, model):
    """Gaussian arc-length step along the boundary, wrapped on each perimeter."""
    if not pset.active or len(pset) == 0:
        return pset
    alpha = rng.normal(0.0, sigma, size=len(pset)) if sigma > 0 else np.zeros(len(pset))
    s = np.mod(pset.s + alpha, _perimeters(model, pset.links))
    return replace(pset, s=s)


def resample(pset, rng):
    """Multinomial draw with replacement, selection probability = weight."""
    n = len(pset)
    if n == 0:
        return pset
    idx = np.sort(rng.choice(n, size=n, replace=True, p=pset.weights))
    return replace(
        pset,
        links=pset.links[idx],
        s=pset.s[idx],
        weights=np.full(n, 1.0 / n),
        forces=pset.forces[idx],
        residuals=pset.residuals[idx],
    )


def _point_geometry(model, q, pt, origins, angles):
    R = rb.rot(angles[pt.link])
    p = origins[pt.link] + R @ pt.local
    n_world = R @ pt.outward_normal
    J = np.zeros((2, model.n))
    J[:, : pt.link + 1] = rb.perp(p - origins[: pt.link + 1]).T
    return p, n_world, J


def weigh(pset, gamma, model, q, temperature):
    """Solve every particle's QP and attach normalized weights.

    Returns the new set and whether the weights degenerated to uniform.
    """
    origins = rb.joint_origins(model, q)
    angles = rb.link_angles(model, q)
    n = len(pset)
    forces = np.zeros((n, 2))
    residuals = np.zeros(n)
    for i in range(n):
        pt = rb.perimeter_point(model, int(pset.links[i]), pset.s[i])
        _, n_world, J = _point_geometry(model, q, pt, origins, angles)
        res = qp_solve(gamma, J, HalfPlane(n_world))
        forces[i] = res.F
        residuals[i] = res.residual
    weights, degenerate = normalize_weights(measurement_weight(residuals, temperature))
    return replace(pset, weights=weights, forces=forces, residuals=residuals), degenerate


@dataclass(frozen=True)
class CloudSummary:
    link: int
    mode_s: float
    mean_s: float
    var_s: float


def _arc_offsets(s, ref, perimeter):
    return np.mod(s - ref + perimeter / 2.0, perimeter) - perimeter / 2.0


def cloud_summary(pset, model):
    """Mode, weighted mean and weighted variance of arc length on the mode's link."""
    mode = _mode_index(pset)
    link = int(pset.links[mode])
    per = model.perimeter(link)
    on_link = pset.links == link
    w = pset.weights[on_link]
    off = _arc_offsets(pset.s[on_link], pset.s[mode], per)
    w = w / w.sum()
    mean_off = float(w @ off)
    var = float(w @ (off - mean_off) ** 2)
    return CloudSummary(link, float(pset.s[mode]), float(np.mod(pset.s[mode] + mean_off, per)), var)


def _mode_index(pset):
    # highest weight; ties go to the lowest (link, s)
    order = np.lexsort((pset.s, pset.links))
    best = order[np.argmax(pset.weights[order])]
    return int(best)


def extract_estimate(pset, gamma, model, q, window=0.02):
    """Weighted mean location near the mode particle and its QP force."""
    if not pset.active or len(pset) == 0:
        return ContactEstimate.invalid(METHOD, "inactive")
    mode = _mode_index(pset)
    link = int(pset.links[mode])
    per = model.perimeter(link)
    off = _arc_offsets(pset.s, pset.s[mode], per)
    near = (pset.links == link) & (np.abs(off) <= window + 1e-12)
    w = pset.weights[near]
    shift = float(w @ off[near] / w.sum()) if w.sum() > 0 else 0.0
    pt = rb.perimeter_point(model, link, pset.s[mode] + shift)
    p, n_world = rb.world_point(model, q, pt)
    res = qp_solve(gamma, rb.point_jacobian(model, q, pt), HalfPlane(n_world))
    return ContactEstimate(link, pt, p, res.F, True, METHOD, residual=res.residual)


@dataclass(frozen=True, eq=False)
class PFStep:
    pset: ParticleSet
    estimate: ContactEstimate
    weighted: Optional[ParticleSet] = None
    summary: Optional[CloudSummary] = None


@dataclass
class ParticleFilter:
    """Stateful wrapper running one filter tick per call to :meth:`step`."""

    model: rb.RobotModel
    params: PFParams = field(default_factory=PFParams)
    seed: int = 0

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.pset = ParticleSet.empty(self.seed)
        self.quiet_ticks = 0
        self.degeneracy_events = 0
        self.reseed_events = 0

    def step(self, gamma, q):
        out = pf_step(self, gamma, q)
        self.pset = out.pset
        return out


def pf_step(pf, gamma, q):
    """One tick: detect, sample (init or motion), weigh, estimate, resample."""
    params, model = pf.params, pf.model
    det = detect(gamma, params.epsilon)
    if not det.contact:
        pf.quiet_ticks += 1
        if not pf.pset.active or pf.quiet_ticks >= params.dropout_ticks:
            return PFStep(ParticleSet.empty(pf.seed), ContactEstimate.invalid(METHOD, "no contact"))
        suspected = int(pf.pset.links.max())
    else:
        pf.quiet_ticks = 0
        suspected = det.last_excited_joint

    pset = pf.pset
    if not pset.active:
        pset = initial_set(model, suspected, params, pf.rng, pf.seed)
    elif pset.links.max() < suspected:
        # the contact is distal to every particle; start over on the new link
        pf.reseed_events += 1
        log.info("contact moved beyond particle links, reseeding on link %d", suspected)
        pset = initial_set(model, suspected, params, pf.rng, pf.seed)
    else:
        pset = motion_update(pset, params.sigma, pf.rng, model)

    weighted, degenerate = weigh(pset, gamma, model, q, params.temperature)
    if degenerate:
        pf.degeneracy_events += 1
        log.warning("all particle weights underflowed, using uniform weights")
    estimate = extract_estimate(weighted, gamma, model, q, params.mode_window)
    summary = cloud_summary(weighted, model)
    return PFStep(resample(weighted, pf.rng), estimate, weighted, summary)
