"""Run random-restart Newton-Raphson and SQP side by side; first valid answer wins."""
from __future__ import annotations

import math
import threading
import time

import numpy as np

from ..kinematics import KinematicChain, Pose
from .base import Deadline, SolveResult, check_seed
from .jacobian import DEFAULT_JACOBIAN, JacobianSolverConfig, solve_random_restart
from .sqp import DEFAULT_SQP, SqpConfig, solve_sqp


def solve_race(chain: KinematicChain, target: Pose, seed=None, budget: float = 1.0,
               jacobian_cfg: JacobianSolverConfig = DEFAULT_JACOBIAN,
               sqp_cfg: SqpConfig = DEFAULT_SQP, rng: np.random.Generator | None = None,
               deterministic: bool = False, cancel=None) -> SolveResult:
    """Race ``newton-rr`` against ``sqp``.

    A branch wins as soon as its result passes the grasp-success predicate; the
    other branch is cancelled at its next iteration boundary.  With no winner,
    the lower-objective result is returned unsuccessful.  In deterministic
    mode both branches run to their iteration caps one after the other and the
    successful branch with fewer iterations wins (ties go to ``sqp``).
    """
    Deadline(budget)  # validates the budget
    seed = check_seed(chain, seed)
    rng = rng if rng is not None else np.random.default_rng(0)
    t0 = time.perf_counter()

    if deterministic:
        results = {
            "newton-rr": solve_random_restart(chain, target, seed, jacobian_cfg, math.inf, rng),
            "sqp": solve_sqp(chain, target, seed, sqp_cfg, math.inf),
        }
        winners = [r for r in results.values() if r.success]
        winner = min(winners, key=lambda r: (r.iterations, r.solver_name != "sqp"), default=None)
    else:
        results = {}
        lock = threading.Lock()
        first = []
        stop = threading.Event()

        class _Cancel:
            def is_set(self):
                return stop.is_set() or (cancel is not None and cancel.is_set())

        def branch(name, fn):
            res = fn()
            with lock:
                results[name] = res
                if res.success and not first:
                    first.append(res)
                    stop.set()

        threads = [
            threading.Thread(target=branch, args=("newton-rr", lambda: solve_random_restart(
                chain, target, seed, jacobian_cfg, budget, rng, cancel=_Cancel()))),
            threading.Thread(target=branch, args=("sqp", lambda: solve_sqp(
                chain, target, seed, sqp_cfg, budget, cancel=_Cancel()))),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        winner = first[0] if first else None

    if winner is None:
        fallback = min(results.values(), key=lambda r: (r.objective, r.solver_name))
        chosen, label = fallback, None
    else:
        chosen, label = winner, winner.solver_name
    return SolveResult(
        solution=chosen.solution,
        error=chosen.error,
        success=winner is not None,
        iterations=sum(r.iterations for r in results.values()),
        elapsed=time.perf_counter() - t0,
        solver_name="race",
        objective=chosen.objective,
        info={"winner": label, "branches": {k: r.success for k, r in sorted(results.items())}},
    )
