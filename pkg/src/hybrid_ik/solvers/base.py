"""Result type and time-budget bookkeeping shared by all solvers."""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig
from ..kinematics import (
    KinematicChain,
    Pose,
    PoseError,
    forward_kinematics,
    is_feasible,
    is_grasp_success,
    pose_error,
)


@dataclass
class SolveResult:
    solution: np.ndarray
    error: PoseError
    success: bool
    iterations: int
    elapsed: float
    solver_name: str
    objective: float = math.nan
    success_criterion: str = "grasp"
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver_name,
            "success": self.success,
            "success_criterion": self.success_criterion,
            "solution": [float(v) for v in self.solution],
            "position_error": self.error.position_error,
            "orientation_error_sum": self.error.orientation_error_sum,
            "objective": self.objective,
            "iterations": self.iterations,
            "elapsed": self.elapsed,
            "info": self.info,
        }


class Deadline:
    """Wall-clock budget plus an optional cooperative cancel flag.

    ``budget=math.inf`` disables the clock entirely; solvers then stop only on
    their iteration caps, which keeps runs reproducible.
    """

    def __init__(self, budget: float, cancel: threading.Event | None = None):
        if not budget > 0:
            raise InvalidConfig(f"budget must be > 0, got {budget}")
        self.budget = float(budget)
        self.start = time.perf_counter()
        self.end = self.start + self.budget
        self.cancel = cancel

    def expired(self) -> bool:
        if self.cancel is not None and self.cancel.is_set():
            return True
        return math.isfinite(self.end) and time.perf_counter() >= self.end

    def remaining(self) -> float:
        return self.end - time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def check_seed(chain: KinematicChain, seed) -> np.ndarray:
    seed = np.array(seed if seed is not None else chain.mid_configuration, dtype=float)
    if seed.shape != (chain.dof,):
        from ..errors import DimensionMismatch
        raise DimensionMismatch(f"seed has shape {seed.shape}, chain has {chain.dof} joints")
    if not is_feasible(chain, seed):
        raise InvalidConfig("seed violates joint limits")
    return seed


def make_result(chain: KinematicChain, target: Pose, q: np.ndarray, name: str,
                iterations: int, elapsed: float, objective: float = math.nan,
                **info) -> SolveResult:
    err = pose_error(forward_kinematics(chain, q), target)
    return SolveResult(
        solution=np.array(q, dtype=float),
        error=err,
        success=is_grasp_success(err),
        iterations=int(iterations),
        elapsed=float(elapsed),
        solver_name=name,
        objective=float(objective),
        info=info,
    )
