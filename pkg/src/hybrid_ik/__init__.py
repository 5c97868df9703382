"""Constrained inverse kinematics for redundant, joint-limited chains."""
from importlib import resources

from .errors import (
    DimensionMismatch,
    InvalidConfig,
    OutOfRegion,
    ParseError,
    RegionUnreachable,
    UnknownSolver,
    ValidationError,
)
from .kinematics import (
    KinematicChain,
    Pose,
    PoseError,
    clamp_to_limits,
    forward_kinematics,
    geometric_jacobian,
    is_grasp_success,
    load_chain,
    pose_error,
)

__version__ = "0.1.0"


def bundled_chain_path():
    return resources.files(__package__) / "data" / "nicol_like.json"


def bundled_chain() -> KinematicChain:
    return load_chain(bundled_chain_path())


__all__ = [
    "DimensionMismatch", "InvalidConfig", "KinematicChain", "OutOfRegion", "ParseError", "Pose",
    "PoseError", "RegionUnreachable", "UnknownSolver", "ValidationError", "bundled_chain",
    "bundled_chain_path", "clamp_to_limits", "forward_kinematics", "geometric_jacobian",
    "is_grasp_success", "load_chain", "pose_error",
]
