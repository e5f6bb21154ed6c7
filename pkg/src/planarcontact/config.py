"""Scenario configuration: dataclasses plus a YAML loader with line-precise errors."""
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

import numpy as np
import yaml

from .control import Trajectory
from .isolation_pf import PFParams
from .model import RobotModel
from .sim import Obstacle


class ConfigError(ValueError):
    pass


# bracing posture: link 4 rotated 0.2 rad about the held tip from INITIAL_Q
INITIAL_Q = (0.9, -0.5, -0.4, -0.6)
BRACE_POSTURE = (1.03574, -0.72391, -0.48193, -0.22999)


@dataclass(frozen=True)
class RobotConfig:
    links: int = 4
    length: Tuple[float, ...] = (0.5,)
    width: Tuple[float, ...] = (0.08,)
    mass: Tuple[float, ...] = (1.0,)
    gravity: Tuple[float, float] = (0.0, -9.81)
    joint_damping: float = 0.0

    def build(self):
        n = self.links

        def per_link(values, name):
            arr = np.asarray(values, dtype=float)
            if arr.size == 1:
                return np.full(n, float(arr[0]))
            if arr.size != n:
                raise ConfigError(f"robot.{name} needs 1 or {n} values")
            return arr

        lengths = per_link(self.length, "length")
        widths = per_link(self.width, "width")
        masses = per_link(self.mass, "mass")
        inertias = masses * (lengths**2 + widths**2) / 12.0
        return RobotModel(lengths, widths, masses, inertias, lengths / 2.0,
                          gravity=np.asarray(self.gravity, dtype=float),
                          joint_damping=self.joint_damping)


@dataclass(frozen=True)
class ObstacleConfig:
    center: Tuple[float, float] = (1.3488, 0.3456)
    radius: float = 0.1
    stiffness: float = 1e4
    damping: float = 100.0

    def build(self):
        return Obstacle(np.asarray(self.center, dtype=float), self.radius,
                        self.stiffness, self.damping)


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 100.0
    kv: float = 20.0
    null_stiffness: float = 20.0
    null_damping: float = 5.0


@dataclass(frozen=True)
class TrajectoryConfig:
    radius: float = 0.05
    period: float = 4.0
    phase: float = 0.0
    start: float = 1.0
    ramp: float = 0.5


@dataclass(frozen=True)
class ObserverConfig:
    gain: float = 100.0
    epsilon: float = 0.1


@dataclass(frozen=True)
class ParticleFilterConfig:
    count: int = 50
    sigma: float = 0.01
    temperature: float = 0.05
    seed: int = 0
    dropout_ticks: int = 5
    seed_all_links: bool = False

    def params(self, epsilon):
        return PFParams(self.count, self.sigma, self.temperature, epsilon,
                        self.dropout_ticks, self.seed_all_links)


@dataclass(frozen=True)
class NoiseConfig:
    qdot_std: float = 0.0
    tau_std: float = 0.0


@dataclass(frozen=True)
class ReportingConfig:
    cutoff_hz: float = 15.0
    transient: float = 0.5


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "hold"
    duration: float = 5.0
    sim_rate: int = 1000
    estimator_rate: int = 100
    method: str = "both"
    initial_q: Tuple[float, ...] = INITIAL_Q
    release_time: float = 0.2
    brace_posture: Optional[Tuple[float, ...]] = BRACE_POSTURE
    robot: RobotConfig = field(default_factory=RobotConfig)
    obstacle: Optional[ObstacleConfig] = field(default_factory=ObstacleConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    particle_filter: ParticleFilterConfig = field(default_factory=ParticleFilterConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    reporting: ReportingConfig = field(default_factory=ReportingConfig)
    output_dir: str = "out"

    def __post_init__(self):
        validate(self)

    @property
    def dt(self):
        return 1.0 / self.sim_rate

    @property
    def steps_per_tick(self):
        return self.sim_rate // self.estimator_rate

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)

    def trajectory_for(self, anchor):
        t = self.trajectory
        return Trajectory(self.scenario, anchor, t.radius, t.period, t.phase, t.start,
                          t.ramp)


def validate(cfg):
    """Raise ConfigError on any inconsistency; messages name the offending key."""
    checks = [
        (cfg.scenario in ("hold", "track"), "scenario", "must be 'hold' or 'track'"),
        (cfg.method in ("analytic", "pf", "both"), "method", "must be analytic, pf or both"),
        (cfg.duration > 0, "duration", "must be positive"),
        (cfg.sim_rate > 0 and cfg.estimator_rate > 0, "rates", "must be positive"),
        (cfg.estimator_rate <= cfg.sim_rate and cfg.sim_rate % cfg.estimator_rate == 0,
         "rates.estimator", "must divide the simulation rate"),
        (len(cfg.initial_q) == cfg.robot.links, "initial_q",
         f"needs {cfg.robot.links} joint angles"),
        (cfg.brace_posture is None or len(cfg.brace_posture) == cfg.robot.links,
         "brace.posture", f"needs {cfg.robot.links} joint angles"),
        (cfg.release_time >= 0, "brace.release_time", "must be non-negative"),
        (cfg.controller.kp > 0 and cfg.controller.kv > 0, "controller", "kp, kv must be positive"),
        (cfg.controller.null_stiffness >= 0 and cfg.controller.null_damping >= 0,
         "controller", "null-space gains must be non-negative"),
        (cfg.observer.gain > 0, "observer.gain", "must be positive"),
        (cfg.observer.epsilon > 0, "observer.epsilon", "must be positive"),
        (cfg.noise.qdot_std >= 0 and cfg.noise.tau_std >= 0, "noise", "must be non-negative"),
        (0 < cfg.reporting.cutoff_hz < cfg.sim_rate / 2, "reporting.cutoff_hz",
         "must lie below the Nyquist rate"),
        (cfg.reporting.transient >= 0, "reporting.transient", "must be non-negative"),
        (cfg.trajectory.period > 0, "trajectory.period", "must be positive"),
        (cfg.trajectory.radius >= 0, "trajectory.radius", "must be non-negative"),
        (cfg.trajectory.ramp >= 0, "trajectory.ramp", "must be non-negative"),
    ]
    for ok, key, msg in checks:
        if not ok:
            raise ConfigError(f"{key}: {msg}")
    try:
        cfg.robot.build()
        if cfg.obstacle is not None:
            cfg.obstacle.build()
        cfg.particle_filter.params(cfg.observer.epsilon)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# YAML loading

# file key -> (ScenarioConfig attribute path, converter)
_FLOAT = float


def _floats(v):
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return (float(v),)


def _pair(v):
    out = tuple(float(x) for x in v)
    if len(out) != 2:
        raise ValueError("expected two numbers")
    return out


def _int(v):
    if isinstance(v, bool) or float(v) != int(float(v)):
        raise ValueError("expected an integer")
    return int(float(v))


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


_SCHEMA = {
    "scenario": ("scenario", str),
    "method": ("method", str),
    "duration": ("duration", _FLOAT),
    "rates.sim": ("sim_rate", _int),
    "rates.estimator": ("estimator_rate", _int),
    "initial_q": ("initial_q", _floats),
    "brace.release_time": ("release_time", _FLOAT),
    "brace.posture": ("brace_posture", _floats),
    "robot.links": ("robot.links", _int),
    "robot.length": ("robot.length", _floats),
    "robot.width": ("robot.width", _floats),
    "robot.mass": ("robot.mass", _floats),
    "robot.gravity": ("robot.gravity", _pair),
    "robot.joint_damping": ("robot.joint_damping", _FLOAT),
    "obstacle.center": ("obstacle.center", _pair),
    "obstacle.radius": ("obstacle.radius", _FLOAT),
    "obstacle.stiffness": ("obstacle.stiffness", _FLOAT),
    "obstacle.damping": ("obstacle.damping", _FLOAT),
    "controller.kp": ("controller.kp", _FLOAT),
    "controller.kv": ("controller.kv", _FLOAT),
    "controller.null_stiffness": ("controller.null_stiffness", _FLOAT),
    "controller.null_damping": ("controller.null_damping", _FLOAT),
    "trajectory.radius": ("trajectory.radius", _FLOAT),
    "trajectory.period": ("trajectory.period", _FLOAT),
    "trajectory.phase": ("trajectory.phase", _FLOAT),
    "trajectory.start": ("trajectory.start", _FLOAT),
    "trajectory.ramp": ("trajectory.ramp", _FLOAT),
    "observer.gain": ("observer.gain", _FLOAT),
    "observer.epsilon": ("observer.epsilon", _FLOAT),
    "particle_filter.count": ("particle_filter.count", _int),
    "particle_filter.sigma": ("particle_filter.sigma", _FLOAT),
    "particle_filter.temperature": ("particle_filter.temperature", _FLOAT),
    "particle_filter.seed": ("particle_filter.seed", _int),
    "particle_filter.dropout_ticks": ("particle_filter.dropout_ticks", _int),
    "particle_filter.seed_all_links": ("particle_filter.seed_all_links", _bool),
    "noise.qdot_std": ("noise.qdot_std", _FLOAT),
    "noise.tau_std": ("noise.tau_std", _FLOAT),
    "reporting.cutoff_hz": ("reporting.cutoff_hz", _FLOAT),
    "reporting.transient": ("reporting.transient", _FLOAT),
    "output.dir": ("output_dir", str),
}
_SECTIONS = {key.split(".")[0] for key in _SCHEMA if "." in key}


def _flatten(node, prefix, out, source):
    """Map dotted keys to (python value, line number) from a YAML mapping node."""
    for key_node, value_node in node.value:
        key = f"{prefix}{key_node.value}"
        line = key_node.start_mark.line + 1
        if key in _SECTIONS and key_node.value in _SECTIONS and not prefix:
            if value_node.tag == "tag:yaml.org,2002:null":
                if key == "obstacle":
                    out[key] = (None, line)
                    continue
            if not isinstance(value_node, yaml.MappingNode):
                raise ConfigError(f"{source}:{line}: '{key}' must be a mapping")
            _flatten(value_node, key + ".", out, source)
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{line}: unknown key '{key}'")
        if key in out:
            raise ConfigError(f"{source}:{line}: duplicate key '{key}'")
        out[key] = (yaml.safe_load(yaml.serialize(value_node)), line)


def loads_config(text, source="<config>"):
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
    values = {}
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError(f"{source}:1: top level must be a mapping")
        _flatten(root, "", values, source)
    return build_config(values, source)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), str(path))


def build_config(values, source="<config>"):
    """Assemble a ScenarioConfig from {dotted key: (value, line)}."""
    cfg = ScenarioConfig()
    nested = {}
    top = {}
    lines = {}
    for key, (raw, line) in values.items():
        if key == "obstacle" and raw is None:
            top["obstacle"] = None
            lines["obstacle"] = line
            continue
        attr, conv = _SCHEMA[key]
        try:
            value = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}:{line}: {key}: invalid value {raw!r} ({exc})") from None
        lines[key] = line
        if "." in attr:
            section, name = attr.split(".")
            nested.setdefault(section, {})[name] = value
        else:
            top[attr] = value
    kwargs = dict(top)
    for section, items in nested.items():
        base = getattr(cfg, section)
        if base is None:
            base = {f.name: f.type for f in fields(ScenarioConfig)}[section]
            base = ObstacleConfig()
        kwargs[section] = replace(base, **items)
    try:
        return replace(cfg, **kwargs)
    except ConfigError as exc:
        msg = str(exc)
        key = msg.split(":", 1)[0]
        line = _line_for(key, lines)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {msg}") from None


def _line_for(key, lines):
    if key in lines:
        return lines[key]
    for k, line in lines.items():
        if k.startswith(key + ".") or key.startswith(k + "."):
            return line
    for k, line in sorted(lines.items(), key=lambda kv: kv[1]):
        if k.split(".")[0] == key.split(".")[0]:
            return line
    return None
