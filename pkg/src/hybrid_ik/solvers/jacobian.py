"""Damped pseudo-inverse Newton-Raphson IK and its random-restart wrapper."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import InvalidConfig
from ..kinematics import (
    KinematicChain,
    Pose,
    clamp_to_limits,
    forward_kinematics,
    is_grasp_success,
    joint_frames,
    pose_error,
)
from ..transforms import rotation_vector
from .base import Deadline, SolveResult, check_seed, make_result
from .sqp import DEFAULT_SQP, objective

STALL_WINDOW = 5
RESTART_DRAWS = 100


@dataclass(frozen=True)
class JacobianSolverConfig:
    max_iterations: int = 200
    damping_lambda: float = 0.05
    step_scale: float = 1.0
    position_tolerance: float = 1e-7  # m
    orientation_tolerance: float = 1e-5  # deg
    stall_threshold: float = 1e-9
    restart_perturbation_sigma: float = 0.3  # rad
    max_restarts: int = 200
    orientation_weight: float = 1.0  # scales the rotational rows; 0 = position only
    max_step: float = 0.2  # rad, cap on the largest joint change per iteration

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfig("max_iterations must be >= 1")
        if self.damping_lambda < 0:
            raise InvalidConfig("damping_lambda must be >= 0")
        if not 0 < self.step_scale <= 1:
            raise InvalidConfig("step_scale must be in (0, 1]")
        if self.position_tolerance <= 0 or self.orientation_tolerance <= 0:
            raise InvalidConfig("tolerances must be > 0")
        if self.stall_threshold < 0 or self.restart_perturbation_sigma < 0:
            raise InvalidConfig("stall_threshold and restart_perturbation_sigma must be >= 0")
        if not self.max_step > 0:
            raise InvalidConfig("max_step must be > 0")
        if self.orientation_weight < 0:
            raise InvalidConfig("orientation_weight must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_JACOBIAN = JacobianSolverConfig()


def twist_error(p_ee, R_ee, target: Pose) -> np.ndarray:
    e = np.empty(6)
    e[:3] = target.position - p_ee
    e[3:] = rotation_vector(target.rotation @ R_ee.T)
    return e


def damped_step(J: np.ndarray, e: np.ndarray, lam: float) -> np.ndarray:
    A = J @ J.T + (lam * lam) * np.eye(J.shape[0])
    try:
        return J.T @ np.linalg.solve(A, e)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(J) @ e


def limit_step(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Clamp into the limits, except that joints whose range covers a full
    turn are continuous: they wrap around instead of sticking at the seam."""
    span = chain.upper - chain.lower
    full = span >= 2.0 * math.pi - 1e-12
    out = clamp_to_limits(chain, q)
    if full.any():
        wrapped = chain.lower + np.mod(q - chain.lower, 2.0 * math.pi)
        out = np.where(full, np.minimum(wrapped, chain.upper), out)
    return out


def _converged(p_ee, R_ee, target, cfg) -> bool:
    err = pose_error(Pose.from_matrix(p_ee, R_ee), target, metric="geodesic")
    return (err.position_error < cfg.position_tolerance
            and (cfg.orientation_weight == 0 or err.orientation_error_sum < cfg.orientation_tolerance))


def selection_objective(cfg: JacobianSolverConfig):
    """SQP objective used to pick the best iterate, with matching orientation weight."""
    if cfg.orientation_weight == 1.0:
        return DEFAULT_SQP
    return replace(DEFAULT_SQP, orientation_weight=DEFAULT_SQP.orientation_weight * cfg.orientation_weight)


def _newton(chain, target, q0, cfg, deadline):
    q = q0.copy()
    sel = selection_objective(cfg)
    w = np.array([1.0, 1.0, 1.0] + [cfg.orientation_weight] * 3)
    best_q, best_f = q.copy(), objective(chain, q, target, sel)
    prev_err = None
    slow = 0
    status = "max_iterations"
    it = 0
    while True:
        origins, axes, p_ee, R_ee = joint_frames(chain, q)
        if _converged(p_ee, R_ee, target, cfg):
            status = "converged"
            break
        if it >= cfg.max_iterations:
            break
        if deadline.expired():
            status = "budget"
            break
        J = np.empty((6, chain.dof))
        J[:3] = np.cross(axes, p_ee - origins).T
        J[3:] = axes.T
        e = twist_error(p_ee, R_ee, target) * w
        dq = cfg.step_scale * damped_step(J * w[:, None], e, cfg.damping_lambda)
        big = float(np.max(np.abs(dq)))
        if big > cfg.max_step:
            dq *= cfg.max_step / big
        q = limit_step(chain, q + dq)
        it += 1
        f = objective(chain, q, target, sel)
        if f < best_f:
            best_q, best_f = q.copy(), f
        err_norm = float(np.linalg.norm(e))
        if prev_err is not None:
            slow = slow + 1 if prev_err - err_norm < cfg.stall_threshold else 0
            if slow >= STALL_WINDOW:
                status = "stall"
                break
        prev_err = err_norm
    return best_q, best_f, it, status, q


def solve_newton_raphson(chain: KinematicChain, target: Pose, seed=None,
                         cfg: JacobianSolverConfig = DEFAULT_JACOBIAN,
                         budget: float = 1.0, cancel=None) -> SolveResult:
    deadline = Deadline(budget, cancel)
    q0 = check_seed(chain, seed)
    q, f, it, status, _ = _newton(chain, target, q0, cfg, deadline)
    return make_result(chain, target, q, "newton", it, deadline.elapsed(), f, status=status)


def _far_seed(chain, optima, sigma, rng):
    q = rng.uniform(chain.lower, chain.upper)
    for _ in range(RESTART_DRAWS):
        if all(np.max(np.abs(q - o)) >= sigma for o in optima):
            break
        q = rng.uniform(chain.lower, chain.upper)
    return q


def solve_random_restart(chain: KinematicChain, target: Pose, seed=None,
                         cfg: JacobianSolverConfig = DEFAULT_JACOBIAN, budget: float = 1.0,
                         rng: np.random.Generator | None = None, cancel=None) -> SolveResult:
    """Newton-Raphson that reseeds away from every stalled configuration.

    Restarts stop on grasp success, on the budget, or after
    ``cfg.max_restarts`` restarts (the only stop when the budget is infinite).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    deadline = Deadline(budget, cancel)
    q_seed = check_seed(chain, seed)
    best = None
    optima = []
    total_it = 0
    restarts = 0
    while True:
        q, f, it, status, last = _newton(chain, target, q_seed, cfg, deadline)
        total_it += it
        if best is None or f < best[1]:
            best = (q, f)
        err = pose_error(forward_kinematics(chain, best[0]), target)
        if is_grasp_success(err) or deadline.expired() or restarts >= cfg.max_restarts:
            break
        optima.append(last)
        q_seed = _far_seed(chain, optima, cfg.restart_perturbation_sigma, rng)
        restarts += 1
    return make_result(chain, target, best[0], "newton-rr", total_it, deadline.elapsed(),
                       best[1], restarts=restarts)
