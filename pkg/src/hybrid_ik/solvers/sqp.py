"""Bound-constrained SQP over the weighted squared pose error.

Each iteration solves a box-constrained quadratic model with a primal
active-set method.  The Hessian is a BFGS approximation that starts from
(and resets to) the Gauss-Newton matrix of the pose residual.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidConfig
from ..kinematics import KinematicChain, Pose, fk_batch, joint_frames, _check_q
from ..transforms import matmul3, rotation_angle, rotation_vector
from .base import Deadline, SolveResult, check_seed, make_result

THETA_CAP = math.pi - 1e-6


@dataclass(frozen=True)
class SqpConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-9
    objective_tolerance: float = 1e-14
    position_weight: float = 1e4  # 1/m^2: 1 cm -> 1.0
    orientation_weight: float = 10.0  # 1/rad^2: ~18 deg -> 1.0; 0 = position only
    finite_difference_step: float = 1e-6
    max_step: float = 0.2  # rad, per-joint trust bound on each QP step

    def __post_init__(self):
        if self.position_weight <= 0 or self.orientation_weight < 0:
            raise InvalidConfig("SQP needs position_weight > 0 and orientation_weight >= 0")
        if self.gradient_tolerance <= 0 or self.objective_tolerance <= 0:
            raise InvalidConfig("SQP tolerances must be > 0")
        if self.max_iterations < 1:
            raise InvalidConfig("max_iterations must be >= 1")
        if not self.max_step > 0:
            raise InvalidConfig("max_step must be > 0")
        if self.finite_difference_step <= 0:
            raise InvalidConfig("finite_difference_step must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_SQP = SqpConfig()


def objective_batch(chain: KinematicChain, Q, target: Pose, cfg: SqpConfig = DEFAULT_SQP) -> np.ndarray:
    """Weighted squared error ``w_p |dp|^2 + w_o theta^2`` for each row of ``Q``."""
    P, R = fk_batch(chain, Q)
    dp = P - target.position
    rel = matmul3(np.swapaxes(np.broadcast_to(target.rotation, R.shape), -1, -2), R)
    theta = rotation_angle(rel)
    return cfg.position_weight * np.sum(dp * dp, axis=-1) + cfg.orientation_weight * theta * theta


def objective(chain: KinematicChain, q, target: Pose, cfg: SqpConfig = DEFAULT_SQP) -> float:
    q = _check_q(chain, q)
    return float(objective_batch(chain, q[None, :], target, cfg)[0])


def objective_and_gradient(chain, q, target: Pose, cfg: SqpConfig = DEFAULT_SQP):
    """Objective, analytic gradient and the Gauss-Newton Hessian at ``q``."""
    origins, axes, p_ee, R_ee = joint_frames(chain, q)
    Jv = np.cross(axes, p_ee - origins)  # (dof, 3)
    Jw = axes
    dp = p_ee - target.position
    # d(theta)/dq_i = u . z_i for the left error R_ee R_t^T, so the orientation
    # gradient is J_w^T r with r the rotation vector of that error.
    r = rotation_vector(R_ee @ target.rotation.T, max_angle=THETA_CAP)
    f = float(objective(chain, q, target, cfg))
    wp, wo = cfg.position_weight, cfg.orientation_weight
    g = 2.0 * wp * (Jv @ dp) + 2.0 * wo * (Jw @ r)
    H = 2.0 * wp * (Jv @ Jv.T) + 2.0 * wo * (Jw @ Jw.T)
    return f, g, H


def numeric_gradient(chain, q, target: Pose, cfg: SqpConfig = DEFAULT_SQP) -> np.ndarray:
    h = cfg.finite_difference_step
    q = np.asarray(q, dtype=float)
    g = np.empty_like(q)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        g[i] = (objective(chain, q + e, target, cfg) - objective(chain, q - e, target, cfg)) / (2 * h)
    return g


def solve_box_qp(H: np.ndarray, g: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 max_iter: int = 100) -> np.ndarray:
    """Minimize ``0.5 d^T H d + g^T d`` subject to ``lo <= d <= hi``.

    ``H`` must be positive definite and ``lo <= 0 <= hi``.  Primal active-set
    method starting from the feasible point ``d = 0``.
    """
    n = g.size
    d = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    fixed |= lo == hi
    fixed |= (lo == 0.0) & (g > 0.0)
    fixed |= (hi == 0.0) & (g < 0.0)
    for _ in range(max_iter):
        free = ~fixed
        if free.any():
            rhs = -(g[free] + H[np.ix_(free, fixed)] @ d[fixed])
            try:
                d_star = np.linalg.solve(H[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                d_star = np.linalg.lstsq(H[np.ix_(free, free)], rhs, rcond=None)[0]
            step = d_star - d[free]
            idx = np.flatnonzero(free)
            alpha, block = 1.0, -1
            for k, i in enumerate(idx):
                if step[k] > 0 and d[i] + step[k] > hi[i]:
                    a = (hi[i] - d[i]) / step[k]
                elif step[k] < 0 and d[i] + step[k] < lo[i]:
                    a = (lo[i] - d[i]) / step[k]
                else:
                    continue
                if a < alpha:
                    alpha, block = a, i
            if block >= 0:
                d[free] = d[free] + alpha * step
                d[block] = hi[block] if step[list(idx).index(block)] > 0 else lo[block]
                fixed[block] = True
                continue
            d[free] = d_star
        # Multipliers of the fixed bounds; release the worst wrong-signed one.
        grad = H @ d + g
        worst, worst_val = -1, 0.0
        for i in np.flatnonzero(fixed):
            if lo[i] == hi[i]:
                continue
            if d[i] == lo[i] and grad[i] < -worst_val:
                worst, worst_val = i, -grad[i]
            elif d[i] == hi[i] and grad[i] > worst_val:
                worst, worst_val = i, grad[i]
        if worst < 0:
            break
        fixed[worst] = False
    return np.minimum(np.maximum(d, lo), hi)


def _projected_gradient(g, q, lower, upper):
    pg = g.copy()
    pg[(q <= lower) & (g > 0)] = 0.0
    pg[(q >= upper) & (g < 0)] = 0.0
    pg[lower == upper] = 0.0
    return pg


def _regularize(H: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.diag(H))), 1.0)
    return H + (1e-9 * scale) * np.eye(H.shape[0])


def sqp_minimize(chain: KinematicChain, target: Pose, q0: np.ndarray, cfg: SqpConfig,
                 max_iterations: int, deadline: Deadline | None = None):
    """Core loop.  Returns ``(q, f, iterations, status)``; ``q`` is always inside the box."""
    lower, upper = chain.lower, chain.upper
    q = np.array(q0, dtype=float)
    f, g, gn = objective_and_gradient(chain, q, target, cfg)
    H = _regularize(gn)
    it = 0
    status = "max_iterations"
    while True:
        if f <= cfg.objective_tolerance:
            status = "objective_tolerance"
            break
        if np.max(np.abs(_projected_gradient(g, q, lower, upper))) <= cfg.gradient_tolerance:
            status = "gradient_tolerance"
            break
        if it >= max_iterations:
            status = "max_iterations"
            break
        if deadline is not None and deadline.expired():
            status = "budget"
            break
        lo = np.maximum(lower - q, -cfg.max_step)
        hi = np.minimum(upper - q, cfg.max_step)
        d = solve_box_qp(H, g, lo, hi)
        slope = float(g @ d)
        if not slope < 0.0:
            # Model gives no descent: restart from the Gauss-Newton model once.
            H = _regularize(gn)
            d = solve_box_qp(H, g, lo, hi)
            slope = float(g @ d)
            if not slope < 0.0:
                status = "stationary"
                break
        alpha = 1.0
        accepted = False
        for _ in range(40):
            q_try = np.minimum(np.maximum(q + alpha * d, lower), upper)
            f_try = objective(chain, q_try, target, cfg)
            if f_try <= f + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        it += 1
        if not accepted or not f_try < f:
            status = "line_search"
            break
        f_new, g_new, gn = objective_and_gradient(chain, q_try, target, cfg)
        s = q_try - q
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y) and sy > 0.0:
            Hs = H @ s
            H = H + np.outer(y, y) / sy - np.outer(Hs, Hs) / float(s @ Hs)
        else:
            H = _regularize(gn)
        q, f, g = q_try, f_new, g_new
    return q, f, it, status


def solve_sqp(chain: KinematicChain, target: Pose, seed=None, cfg: SqpConfig = DEFAULT_SQP,
              budget: float = 1.0, cancel=None) -> SolveResult:
    deadline = Deadline(budget, cancel)
    q0 = check_seed(chain, seed)
    q, f, it, status = sqp_minimize(chain, target, q0, cfg, cfg.max_iterations, deadline)
    return make_result(chain, target, q, "sqp", it, deadline.elapsed(), f, status=status)


def refine_local(chain: KinematicChain, target: Pose, q0, cfg: SqpConfig = DEFAULT_SQP,
                 step_budget: int = 8) -> np.ndarray:
    """At most ``step_budget`` SQP iterations from ``q0``; never returns a worse point."""
    return refine_with_status(chain, target, q0, cfg, step_budget)[0]


def refine_with_status(chain, target, q0, cfg: SqpConfig = DEFAULT_SQP, step_budget: int = 8):
    """Like :func:`refine_local` but also reports whether SQP stopped for a
    reason other than the step cap (so further refinement is pointless)."""
    q0 = check_seed(chain, q0)
    if step_budget <= 0:
        return q0, False
    f0 = objective(chain, q0, target, cfg)
    q, f, _, status = sqp_minimize(chain, target, q0, cfg, step_budget)
    return (q if f < f0 else q0), status != "max_iterations"
