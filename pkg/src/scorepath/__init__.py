"""Score-function feedback control for path following: sensing, learning, verification and certification."""
from ._kernels import BACKEND
from .errors import ScorePathError
from .kinematics import ControllerParams, SimConfig, State, Trajectory, simulate
from .score import AffineStBSF, LinearScoreModel, compose

__all__ = ["BACKEND", "ScorePathError", "ControllerParams", "SimConfig", "State", "Trajectory", "simulate",
           "AffineStBSF", "LinearScoreModel", "compose"]
__version__ = "0.1.0"
