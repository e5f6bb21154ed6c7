"""Contact detection, isolation and identification for planar serial arms."""
from .config import ConfigError, ScenarioConfig, load_config, loads_config
from .harness import RunSummary, metrics, read_trace, run
from .isolation_analytic import ContactEstimate, isolate
from .isolation_pf import ParticleFilter, PFParams, qp_solve
from .model import BoundaryPoint, JointState, RobotModel
from .observer import ObserverState, detect, observer_update
from .signalproc import design_butterworth2, filter_step
from .sim import Obstacle, SimState, step

__all__ = [
    "BoundaryPoint", "ConfigError", "ContactEstimate", "JointState", "Obstacle",
    "ObserverState", "ParticleFilter", "PFParams", "RobotModel", "RunSummary",
    "ScenarioConfig", "SimState", "design_butterworth2", "detect", "filter_step",
    "isolate", "load_config", "loads_config", "metrics", "observer_update", "qp_solve",
    "read_trace", "run", "step",
]
