"""Deterministic simulator and control library for autonomous
intraluminal navigation of a tendon-driven continuum robot."""

__version__ = "0.1.0"

from .config import (BackendConfig, ExperimentConfig, PerceptionConfig,
                     config_from_dict, load_config)
from .control import ControlParams, Mode, Observation, control_step
from .errors import ConfigError, IoError, NoLumen, SimError
from .protocol import ProtocolError
from .metrics import (CenteringReport, NavigationReport, SpectralParams,
                      TrialLog, centering_metrics, ldj, nav_errors, ntr,
                      peak_count, sparc)
from .perception import (CameraModel, GeometricBackend, Mask, NoiseConfig,
                         RemoteBackend, render_lumen)
from .plant import ActuatorState, ContinuumParams, TipPose, forward_kinematics
from .sim import TrialResult, TrialRunner
from .world import LumenPath, TubePhantom, build_path, goal_crossed

__all__ = [name for name in dir() if not name.startswith("_")]
