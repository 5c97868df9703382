"""IK solvers and the name registry used by the CLI and the benchmark."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import UnknownSolver
from ..kinematics import KinematicChain, Pose
from .base import Deadline, SolveResult
from .genetic import GeneticSolverConfig, IslandConfig, solve_genetic
from .jacobian import JacobianSolverConfig, solve_newton_raphson, solve_random_restart
from .race import solve_race
from .sqp import SqpConfig, objective, refine_local, solve_sqp

SOLVER_NAMES = ("newton", "newton-rr", "sqp", "race", "genetic")


@dataclass(frozen=True)
class SolverSettings:
    """Every solver's configuration plus run-wide switches."""

    jacobian: JacobianSolverConfig = field(default_factory=JacobianSolverConfig)
    sqp: SqpConfig = field(default_factory=SqpConfig)
    genetic: GeneticSolverConfig = field(default_factory=GeneticSolverConfig)
    deterministic: bool = False
    rng_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def run_solver(name: str, chain: KinematicChain, target: Pose, seed=None,
               budget: float = 1.0, settings: SolverSettings | None = None,
               rng_seed: int | None = None) -> SolveResult:
    """Dispatch by registry name.

    ``rng_seed`` overrides ``settings.rng_seed`` for the random-restart draws
    and the genetic islands.  In deterministic mode the wall clock is ignored
    and every solver stops on iteration or generation caps.
    """
    if name not in SOLVER_NAMES:
        raise UnknownSolver(f"unknown solver {name!r}; registered: {', '.join(SOLVER_NAMES)}")
    settings = settings or SolverSettings()
    seed_value = settings.rng_seed if rng_seed is None else rng_seed
    clock = math.inf if settings.deterministic else budget
    if name == "newton":
        return solve_newton_raphson(chain, target, seed, settings.jacobian, clock)
    if name == "newton-rr":
        return solve_random_restart(chain, target, seed, settings.jacobian, clock,
                                    np.random.default_rng(seed_value))
    if name == "sqp":
        return solve_sqp(chain, target, seed, settings.sqp, clock)
    if name == "race":
        return solve_race(chain, target, seed, budget, settings.jacobian, settings.sqp,
                          np.random.default_rng(seed_value), deterministic=settings.deterministic)
    cfg = replace(settings.genetic, budget=budget,
                  deterministic_mode=settings.deterministic or settings.genetic.deterministic_mode,
                  island=replace(settings.genetic.island, rng_seed=seed_value))
    return solve_genetic(chain, target, cfg, seed=seed)


__all__ = [
    "Deadline", "GeneticSolverConfig", "IslandConfig", "JacobianSolverConfig", "SOLVER_NAMES",
    "SolveResult", "SolverSettings", "SqpConfig", "objective", "refine_local", "run_solver",
    "solve_genetic", "solve_newton_raphson", "solve_race", "solve_random_restart", "solve_sqp",
]
