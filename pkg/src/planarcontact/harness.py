"""End-to-end scenario runs: 1 kHz sim/control/observer, 100 Hz estimators.

The two loops talk through :class:`SnapshotChannel`, which keeps only the
newest ``(t, q, gamma)`` snapshot.  By default they are interleaved in
simulated time, which makes a run a pure function of config and seed.  The
threaded mode runs the estimators on their own thread against a wall-clock
paced simulation and is meant for demos only.
"""
import csv
import io
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import model as rb
from .config import ScenarioConfig
from .control import opspace_torques, scenario_trajectory
from .isolation_analytic import isolate
from .isolation_pf import ParticleFilter
from .observer import ObserverState, detect, observer_update
from .signalproc import design_butterworth2, filter_step
from .sim import SimState, step

log = logging.getLogger(__name__)

TRACE_NAME = "trace.csv"
SUMMARY_NAME = "summary.txt"

# analytic isolator outcome codes written to the trace
STATUS_CODES = {
    "valid": 0,
    "no contact": 1,
    "Underdetermined": 2,
    "RankDeficient": 3,
    "ZeroForce": 4,
    "NoIntersection": 5,
    "Ambiguous": 6,
    "disabled": -1,
}


def _status(estimate):
    if estimate.valid:
        return STATUS_CODES["valid"]
    return STATUS_CODES.get(estimate.reason.split(":")[0], STATUS_CODES["no contact"])


def trace_columns(n):
    cols = ["t", "est_tick"]
    cols += [f"q{j}" for j in range(n)] + [f"qdot{j}" for j in range(n)]
    cols += [f"tau_m{j}" for j in range(n)]
    cols += ["true_contact", "true_link", "true_s", "true_px", "true_py", "true_fx", "true_fy"]
    cols += [f"tau_c{j}" for j in range(n)] + [f"gamma{j}" for j in range(n)]
    cols += ["detected", "excited_joint"]
    cols += ["an_status", "an_link", "an_s", "an_px", "an_py", "an_fx", "an_fy", "an_residual"]
    cols += ["an_px_filt", "an_py_filt", "an_fx_filt", "an_fy_filt"]
    cols += ["pf_valid", "pf_link", "pf_s", "pf_px", "pf_py", "pf_fx", "pf_fy", "pf_qp_residual"]
    cols += ["pf_mode_link", "pf_mode_s", "pf_mean_s", "pf_var_s"]
    cols += ["pf_degeneracy_events", "pf_reseed_events"]
    cols += ["pf_px_filt", "pf_py_filt", "pf_fx_filt", "pf_fy_filt"]
    return cols


def format_value(v):
    return "%.9g" % v


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    q: np.ndarray
    gamma: np.ndarray


class SnapshotChannel:
    """Single-producer single-consumer slot that only keeps the latest item."""

    def __init__(self):
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._item = None
        self._closed = False
        self.published = 0
        self.overwritten = 0

    def put(self, item):
        with self._lock:
            if self._item is not None:
                self.overwritten += 1
            self._item = item
            self.published += 1
            self._ready.notify()

    def take(self, timeout=None):
        """Pop the newest item, blocking up to ``timeout``; None if none or closed."""
        with self._lock:
            if self._item is None and not self._closed:
                self._ready.wait(timeout)
            item, self._item = self._item, None
            return item

    def close(self):
        with self._lock:
            self._closed = True
            self._ready.notify_all()

    @property
    def closed(self):
        return self._closed


@dataclass(frozen=True, eq=False)
class EstimatorOutput:
    step: int
    analytic: Optional[object]
    pf: Optional[object]
    analytic_seconds: float = 0.0
    pf_seconds: float = 0.0


class Estimators:
    """Both isolators behind one call; owns the particle filter state."""

    def __init__(self, model, cfg, method="both"):
        self.model = model
        self.epsilon = cfg.observer.epsilon
        self.use_analytic = method in ("analytic", "both")
        self.pf = None
        if method in ("pf", "both"):
            self.pf = ParticleFilter(model, cfg.particle_filter.params(self.epsilon),
                                     cfg.particle_filter.seed)
        self.analytic_times = []
        self.pf_times = []

    def process(self, snap):
        an = pf_out = None
        ta = tp = 0.0
        if self.use_analytic:
            t0 = time.perf_counter()
            an = isolate(snap.gamma, self.model, snap.q, self.epsilon)
            ta = time.perf_counter() - t0
            self.analytic_times.append(ta)
        if self.pf is not None:
            t0 = time.perf_counter()
            pf_out = self.pf.step(snap.gamma, snap.q)
            tp = time.perf_counter() - t0
            self.pf_times.append(tp)
        return EstimatorOutput(snap.step, an, pf_out, ta, tp)


_NAN2 = (math.nan, math.nan)


def _estimate_fields(est):
    """(link, s, px, py, fx, fy, residual) for an estimate, NaN when invalid."""
    if est is None or not est.valid:
        link = est.link if est is not None and est.link is not None else math.nan
        return (link, math.nan) + _NAN2 + _NAN2 + (math.nan,)
    return (est.link, est.point.s, est.point_world[0], est.point_world[1],
            est.force[0], est.force[1], est.residual)


def _analytic_fields(out):
    if out is None or out.analytic is None:
        return (STATUS_CODES["disabled"],) + (math.nan,) * 7
    return (_status(out.analytic),) + _estimate_fields(out.analytic)


def _pf_fields(out, pf):
    if pf is None:
        return (math.nan,) * 14
    if out is None or out.pf is None:
        est, summary = None, None
    else:
        est, summary = out.pf.estimate, out.pf.summary
    valid = 1 if est is not None and est.valid else 0
    cloud = ((summary.link, summary.mode_s, summary.mean_s, summary.var_s)
             if summary is not None else (math.nan,) * 4)
    return ((valid,) + _estimate_fields(est) + cloud
            + (pf.degeneracy_events, pf.reseed_events))


def _filter_input(fields_):
    """Point and force channels fed to the reporting filter; 0 while invalid."""
    vals = np.asarray(fields_, dtype=float)
    return np.where(np.isfinite(vals), vals, 0.0)


@dataclass
class MethodStats:
    detection_latency: float = math.nan
    steady_force_mean: float = math.nan
    steady_force_max: float = math.nan
    steady_point_mean: float = math.nan
    steady_point_max: float = math.nan
    steady_force_mean_filtered: float = math.nan
    steady_point_mean_filtered: float = math.nan
    peak_transient_force: float = math.nan
    steady_ticks: int = 0
    steady_invalid_ticks: int = 0


@dataclass
class RunSummary:
    scenario: str
    method: str
    duration: float
    impact_time: float
    detected: bool
    max_gamma: float
    analytic: MethodStats
    pf: MethodStats
    ambiguity_events: int = 0
    no_intersection_events: int = 0
    degeneracy_events: int = 0
    reseed_events: int = 0
    failure: str = ""

    @property
    def ok(self):
        return not self.failure

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, MethodStats):
                for g in fields(value):
                    lines.append(f"{f.name}.{g.name} = {getattr(value, g.name)!r}")
            else:
                lines.append(f"{f.name} = {value!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        raw = {}
        for line in text.splitlines():
            if line.strip():
                key, value = line.split(" = ", 1)
                raw[key] = value
        method_fields = {g.name: g.type for g in fields(MethodStats)}

        def parse(value, kind):
            if kind in (str, "str"):
                return value[1:-1].encode().decode("unicode_escape")
            if kind in (bool, "bool"):
                return value == "True"
            if kind in (int, "int"):
                return int(value)
            return float(value)

        stats = {}
        for name in ("analytic", "pf"):
            stats[name] = MethodStats(**{
                g: parse(raw[f"{name}.{g}"], t) for g, t in method_fields.items()})
        kwargs = {}
        for f in fields(cls):
            if f.name in stats:
                kwargs[f.name] = stats[f.name]
            else:
                kwargs[f.name] = parse(raw[f.name], f.type)
        return cls(**kwargs)

    def __eq__(self, other):
        if not isinstance(other, RunSummary):
            return NotImplemented
        # NaN-aware, bit-exact comparison
        return self.to_text() == other.to_text()


# ---------------------------------------------------------------------------
# trace I/O


@dataclass
class Trace:
    """Column-major view of a trace: ``columns[name]`` is a float array."""

    names: list
    columns: dict
    meta: dict

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns[self.names[0]]) if self.names else 0


def parse_trace(text):
    lines = [ln for ln in text.splitlines() if ln]
    meta = {}
    while lines and lines[0].startswith("#"):
        key, value = lines.pop(0)[1:].strip().split("=", 1)
        meta[key.strip()] = value.strip()
    reader = csv.reader(lines)
    names = next(reader)
    data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    data = data.reshape(-1, len(names))
    return Trace(names, {n: data[:, i] for i, n in enumerate(names)}, meta)


def read_trace(path):
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read())


def _meta_header(cfg, method):
    return (f"# scenario = {cfg.scenario}\n# method = {method}\n"
            f"# duration = {cfg.duration!r}\n# transient = {cfg.reporting.transient!r}\n")


# ---------------------------------------------------------------------------
# metrics


def _method_stats(tr, prefix, valid, impact, transient):
    stats = MethodStats()
    if math.isnan(impact):
        return stats
    t = tr["t"]
    tick = tr["est_tick"] == 1
    contact = tr["true_contact"] == 1
    after = t >= impact
    detected = tick & after & valid
    if detected.any():
        stats.detection_latency = float(t[detected][0] - impact)

    def errors(suffix=""):
        fe = np.hypot(tr[f"{prefix}_fx{suffix}"] - tr["true_fx"],
                      tr[f"{prefix}_fy{suffix}"] - tr["true_fy"])
        pe = np.hypot(tr[f"{prefix}_px{suffix}"] - tr["true_px"],
                      tr[f"{prefix}_py{suffix}"] - tr["true_py"])
        return fe, pe

    fe, pe = errors()
    steady = tick & contact & (t >= impact + transient)
    good = steady & valid
    stats.steady_ticks = int(steady.sum())
    stats.steady_invalid_ticks = int((steady & ~valid).sum())
    if good.any():
        stats.steady_force_mean = float(np.mean(fe[good]))
        stats.steady_force_max = float(np.max(fe[good]))
        stats.steady_point_mean = float(np.mean(pe[good]))
        stats.steady_point_max = float(np.max(pe[good]))
        fef, pef = errors("_filt")
        stats.steady_force_mean_filtered = float(np.mean(fef[good]))
        stats.steady_point_mean_filtered = float(np.mean(pef[good]))
    window = tick & after & (t < impact + transient) & valid & contact
    if window.any():
        stats.peak_transient_force = float(np.max(fe[window]))
    return stats


def metrics(trace, transient=None):
    """Summary statistics computed only from the trace columns."""
    if transient is None:
        transient = float(trace.meta.get("transient", 0.5))
    t = trace["t"]
    contact = trace["true_contact"] == 1
    impact = float(t[contact][0]) if contact.any() else math.nan
    n = sum(1 for name in trace.names if name.startswith("gamma"))
    gammas = np.column_stack([trace[f"gamma{j}"] for j in range(n)])
    an_valid = trace["an_status"] == STATUS_CODES["valid"]
    pf_valid = trace["pf_valid"] == 1
    tick = trace["est_tick"] == 1
    last = lambda name: int(trace[name][-1]) if len(trace) and np.isfinite(trace[name][-1]) else 0
    return RunSummary(
        scenario=trace.meta.get("scenario", ""),
        method=trace.meta.get("method", ""),
        duration=float(trace.meta.get("duration", "nan")),
        impact_time=impact,
        detected=bool((trace["detected"] == 1).any()),
        max_gamma=float(np.max(np.abs(gammas))) if gammas.size else 0.0,
        analytic=_method_stats(trace, "an", an_valid, impact, transient),
        pf=_method_stats(trace, "pf", pf_valid, impact, transient),
        ambiguity_events=int((tick & (trace["an_status"] == STATUS_CODES["Ambiguous"])).sum()),
        no_intersection_events=int(
            (tick & (trace["an_status"] == STATUS_CODES["NoIntersection"])).sum()),
        degeneracy_events=last("pf_degeneracy_events"),
        reseed_events=last("pf_reseed_events"),
        failure=trace.meta.get("failure", ""),
    )


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True, eq=False)
class RunResult:
    summary: RunSummary
    trace_text: str
    analytic_times: tuple = ()
    pf_times: tuple = ()
    trace_path: Optional[str] = None
    summary_path: Optional[str] = None


def run(cfg: ScenarioConfig, out_dir=None, threaded=False):
    """Run one scenario; writes ``trace.csv`` and ``summary.txt`` when ``out_dir`` is set.

    Fatal errors inside the loops stop the run; the partial trace is still
    written and the summary carries the failure message.
    """
    model = cfg.robot.build()
    obstacle = cfg.obstacle.build() if cfg.obstacle is not None else None
    method = cfg.method
    n = model.n
    dt = cfg.dt
    n_steps = int(round(cfg.duration * cfg.sim_rate))
    ratio = cfg.steps_per_tick

    q0 = np.asarray(cfg.initial_q, dtype=float)
    state = SimState(rb.JointState(q0, np.zeros(n)))
    anchor = rb.end_effector(model, q0)
    traj = cfg.trajectory_for(anchor)
    brace = np.asarray(cfg.brace_posture if cfg.brace_posture is not None else q0, dtype=float)
    ctrl = cfg.controller
    obs = ObserverState.start(model, q0, np.zeros(n), cfg.observer.gain)
    noise_rng = np.random.default_rng([cfg.particle_filter.seed, 1])
    estimators = Estimators(model, cfg, method)
    filt = design_butterworth2(cfg.reporting.cutoff_hz, cfg.sim_rate, channels=8)
    channel = SnapshotChannel()

    results = SnapshotChannel()
    worker = None
    if threaded:
        worker = threading.Thread(target=_estimator_loop, args=(channel, results, estimators),
                                  daemon=True)
        worker.start()

    buf = io.StringIO()
    buf.write(_meta_header(cfg, method))
    buf.write(",".join(trace_columns(n)) + "\n")
    latest = None
    failure = ""
    wall0 = time.perf_counter()
    try:
        for k in range(n_steps):
            t = k * dt
            q, qdot = state.joints.q, state.joints.qdot
            qdot_meas = qdot
            if cfg.noise.qdot_std > 0:
                qdot_meas = qdot + noise_rng.normal(0.0, cfg.noise.qdot_std, n)
            goal = scenario_trajectory(cfg.scenario, t, traj, ctrl.kp, ctrl.kv)
            posture = q0 if t < cfg.release_time else brace
            tau_m = opspace_torques(model, q, qdot_meas, goal, null_damping=ctrl.null_damping,
                                    null_stiffness=ctrl.null_stiffness, posture=posture)
            tau_meas = tau_m
            if cfg.noise.tau_std > 0:
                tau_meas = tau_m + noise_rng.normal(0.0, cfg.noise.tau_std, n)
            obs = observer_update(obs, model, q, qdot_meas, tau_meas, dt)

            tick = 0
            if k % ratio == 0:
                channel.put(Snapshot(k, t, q.copy(), obs.gamma.copy()))
                if not threaded:
                    latest = estimators.process(channel.take())
                    tick = 1
            if threaded:
                fresh = results.take(timeout=0.0)
                if isinstance(fresh, BaseException):
                    raise fresh
                if fresh is not None:
                    latest, tick = fresh, 1
                _pace(wall0, t + dt)

            state = step(model, state, tau_m, obstacle, dt)
            _write_row(buf, t, tick, q, qdot, tau_m, state.true_contact, obs.gamma,
                       cfg.observer.epsilon, latest, estimators, filt, n)
    except Exception as exc:  # fatal: keep the partial trace, report the failure
        failure = f"{type(exc).__name__}: {exc}"
        log.error("run aborted at t=%.3f: %s", state.t, failure)
    finally:
        channel.close()
        if worker is not None:
            worker.join(timeout=1.0)

    text = buf.getvalue()
    if failure:
        text = f"# failure = {failure}\n" + text
    summary = metrics(parse_trace(text), cfg.reporting.transient)
    result = RunResult(summary, text, tuple(estimators.analytic_times), tuple(estimators.pf_times))
    if out_dir is not None:
        result = write_outputs(result, out_dir)
    return result


def _pace(wall0, t):
    delay = wall0 + t - time.perf_counter()
    if delay > 0:
        time.sleep(delay)


def _estimator_loop(channel, results, estimators):
    while True:
        snap = channel.take(timeout=0.05)
        if snap is None:
            if channel.closed:
                return
            continue
        try:
            results.put(estimators.process(snap))
        except Exception as exc:  # hand over to the sim loop, which aborts
            results.put(exc)
            return


def _write_row(buf, t, tick, q, qdot, tau_m, contact, gamma, epsilon, latest, est, filt, n):
    if contact is not None:
        truth = (1, contact.point.link, contact.point.s, contact.point_world[0],
                 contact.point_world[1], contact.force[0], contact.force[1])
        tau_c = contact.tau
    else:
        truth = (0,) + (math.nan,) * 6
        tau_c = np.zeros(n)
    det = detect(gamma, epsilon)
    an = _analytic_fields(latest if est.use_analytic else None)
    pf = _pf_fields(latest, est.pf)
    smooth = filter_step(filt, _filter_input(an[3:7] + pf[3:7]))
    row = ((t, tick) + tuple(q) + tuple(qdot) + tuple(tau_m) + truth + tuple(tau_c)
           + tuple(gamma) + (int(det.contact), det.last_excited_joint if det.contact else -1)
           + an + tuple(smooth[:4]) + pf + tuple(smooth[4:]))
    buf.write(",".join(format_value(v) for v in row) + "\n")


def write_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, TRACE_NAME)
    summary_path = os.path.join(out_dir, SUMMARY_NAME)
    with open(trace_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.trace_text)
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(result.summary.to_text())
    return RunResult(result.summary, result.trace_text, result.analytic_times,
                     result.pf_times, trace_path, summary_path)
