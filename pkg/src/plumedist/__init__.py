"""Source-distance estimation from multi-species molecule counts in a turbulent plume."""

from .core import ConfigError, Particle, RxConfig, SimParams, SurrogateParams, TxConfig, Vec3, distance
from .estimators import LcParams, chi_error, fit_velocity_scale, lc_estimate
from .features import build_feature_vector, compute_r_obs, segment
from .mlp import MlpModel, TrainConfig, mlp_backward, mlp_forward, train
from .plume import PlumeSimulator, simulate
from .receiver import ObservationWindow, count_in_sphere, sample_window
from .trajio import TrajectoryHeader, TrajectorySnapshot, read_snapshots, write_snapshots

__version__ = "0.1.0"
