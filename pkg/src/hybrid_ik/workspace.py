"""Grasp targets on the table, rejection-sampled datasets and coverage grids."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import OutOfRegion, ParseError, RegionUnreachable, ValidationError
from .kinematics import (
    KinematicChain,
    Pose,
    Transform,
    forward_kinematics,
    is_grasp_success,
    pose_error,
)
from .solvers import SolverSettings, run_solver
from .transforms import matrix_to_quat, rpy_to_matrix


@dataclass(frozen=True)
class WorkspaceRegion:
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 0.0
    table_height: float = 0.74
    object_height: float = 0.20
    object_radius: float = 0.03

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError("region needs min < max on both axes")
        if self.table_height <= 0 or self.object_height <= 0 or self.object_radius < 0:
            raise ValidationError("region heights must be > 0 and radius >= 0")

    def contains(self, xy) -> bool:
        x, y = xy
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorkspaceRegion":
        return cls(**{k: float(v) for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class GraspSetup:
    """Companion data for a chain: grasp orientation, palm offset, table frame."""

    orientation: np.ndarray  # (w, x, y, z) in the robot base frame
    palm_offset: float = 0.02
    table_to_base: Transform = field(default_factory=Transform.identity)
    region: WorkspaceRegion = field(default_factory=WorkspaceRegion)

    @classmethod
    def from_dict(cls, d: dict) -> "GraspSetup":
        try:
            tb = d.get("table_to_base") or {}
            return cls(
                orientation=matrix_to_quat(rpy_to_matrix(d["grasp_orientation_rpy"])),
                palm_offset=float(d.get("palm_offset", 0.02)),
                table_to_base=Transform.from_xyz_rpy(tb.get("xyz", [0, 0, 0]),
                                                     tb.get("rpy", [0, 0, 0])),
                region=WorkspaceRegion.from_dict(d.get("region", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"grasp setup: malformed ({exc})") from exc

    def to_dict(self) -> dict:
        return {"orientation": [float(v) for v in self.orientation],
                "palm_offset": self.palm_offset,
                "table_to_base": self.table_to_base.to_dict(),
                "region": self.region.to_dict()}


def load_grasp_setup(path) -> GraspSetup:
    try:
        return GraspSetup.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: cannot read grasp setup ({exc})") from exc


def bundled_grasp_setup() -> GraspSetup:
    return load_grasp_setup(resources.files("hybrid_ik") / "data" / "nicol_like.grasp.json")


def grasp_pose_for(region: WorkspaceRegion, target_xy, setup: GraspSetup | None = None) -> Pose:
    """Hand pointing forward, palm against the object's side at half its height."""
    setup = setup or bundled_grasp_setup()
    if not region.contains(target_xy):
        raise OutOfRegion(f"target {tuple(target_xy)} lies outside the workspace region")
    x, y = (float(v) for v in target_xy)
    p_table = np.array([x,
                        y - region.object_radius - setup.palm_offset,
                        region.table_height + region.object_height / 2.0])
    tb = setup.table_to_base
    return Pose(tb.rotation @ p_table + tb.xyz, setup.orientation)


@dataclass
class WorkspaceSample:
    target_xy: np.ndarray
    grasp_pose: Pose
    solution: np.ndarray | None
    accepted: bool
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "target_xy": [float(v) for v in self.target_xy],
            "grasp_pose": self.grasp_pose.to_dict(),
            "solution": None if self.solution is None else [float(v) for v in self.solution],
            "accepted": self.accepted,
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkspaceSample":
        sol = d.get("solution")
        return cls(np.array(d["target_xy"], dtype=float), Pose.from_dict(d["grasp_pose"]),
                   None if sol is None else np.array(sol, dtype=float),
                   bool(d["accepted"]), int(d.get("attempts", 1)))


class CoverageGrid:
    """Accepted/rejected attempt counts on a ``resolution x resolution`` grid.

    ``accepted[i, j]`` counts cell ``i`` along x and ``j`` along y.
    """

    def __init__(self, region: WorkspaceRegion, resolution: int = 20):
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        self.region = region
        self.resolution = resolution
        self.accepted = np.zeros((resolution, resolution), dtype=int)
        self.rejected = np.zeros((resolution, resolution), dtype=int)

    def cell(self, xy) -> tuple[int, int]:
        r, n = self.region, self.resolution
        i = int((xy[0] - r.x_min) / (r.x_max - r.x_min) * n)
        j = int((xy[1] - r.y_min) / (r.y_max - r.y_min) * n)
        return min(max(i, 0), n - 1), min(max(j, 0), n - 1)

    def add(self, xy, accepted: bool) -> None:
        i, j = self.cell(xy)
        if accepted:
            self.accepted[i, j] += 1
        else:
            self.rejected[i, j] += 1

    @property
    def total(self) -> int:
        return int(self.accepted.sum() + self.rejected.sum())

    @property
    def accepted_fraction(self) -> float:
        return float(self.accepted.sum()) / self.total if self.total else 0.0

    def ratio(self) -> np.ndarray:
        tot = self.accepted + self.rejected
        out = np.zeros(tot.shape)
        np.divide(self.accepted, tot, out=out, where=tot > 0)
        return out

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        r, n = self.region, self.resolution
        return (r.x_min + (i + 0.5) * (r.x_max - r.x_min) / n,
                r.y_min + (j + 0.5) * (r.y_max - r.y_min) / n)

    @classmethod
    def from_samples(cls, samples, region, resolution=20) -> "CoverageGrid":
        grid = cls(region, resolution)
        for s in samples:
            grid.add(s.target_xy, s.accepted)
        return grid


def _attempt(job):
    chain, pose, solver, budget, settings, rng_seed = job
    res = run_solver(solver, chain, pose, chain.mid_configuration, budget, settings, rng_seed)
    return res.solution, res.success


def sample_workspace(chain: KinematicChain, region: WorkspaceRegion, n: int,
                     solver: str = "genetic", budget_per_sample: float = 1.0,
                     rng: np.random.Generator | None = None, *,
                     setup: GraspSetup | None = None, settings: SolverSettings | None = None,
                     attempts_per_sample: int = 1, max_attempts: int | None = None,
                     resolution: int = 20, workers: int = 1):
    """Draw table positions until ``n`` grasps are solved.

    Each position gets ``attempts_per_sample`` solver runs (1 = one-shot
    accept/reject); a rejected position is replaced by a fresh draw.  At most
    ``max_attempts`` positions are drawn (default ``20 * n``).  Returns every
    drawn position, accepted or not, plus the coverage grid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if attempts_per_sample < 1:
        raise ValueError("attempts_per_sample must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    setup = setup or bundled_grasp_setup()
    settings = settings or SolverSettings()
    ceiling = max_attempts if max_attempts is not None else 20 * n
    grid = CoverageGrid(region, resolution)
    samples: list[WorkspaceSample] = []
    accepted = 0
    batch = max(1, workers) * 4 if workers > 1 else 1
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while accepted < n and len(samples) < ceiling:
            k = min(batch, ceiling - len(samples))
            draws = []
            for _ in range(k):
                xy = np.array([rng.uniform(region.x_min, region.x_max),
                               rng.uniform(region.y_min, region.y_max)])
                seeds = [int(s) for s in rng.integers(0, 2**63 - 1, size=attempts_per_sample)]
                draws.append((xy, grasp_pose_for(region, xy, setup), seeds))
            jobs = [(chain, pose, solver, budget_per_sample, settings, seeds[0])
                    for _, pose, seeds in draws]
            firsts = list(pool.map(_attempt, jobs)) if pool is not None else map(_attempt, jobs)
            for (xy, pose, seeds), (q, ok) in zip(draws, firsts):
                if accepted >= n:
                    break
                used = 1
                for s in seeds[1:]:
                    if ok:
                        break
                    used += 1
                    q, ok = _attempt((chain, pose, solver, budget_per_sample, settings, s))
                grid.add(xy, ok)
                samples.append(WorkspaceSample(xy, pose, q if ok else None, ok, used))
                accepted += ok
    finally:
        if pool is not None:
            pool.shutdown()
    if accepted == 0:
        err = RegionUnreachable(f"no reachable grasp in {len(samples)} attempts")
        err.grid = grid
        err.samples = samples
        raise err
    return samples, grid


def attempt_targets(chain: KinematicChain, region: WorkspaceRegion, points,
                    solver: str = "genetic", budget_per_sample: float = 1.0, *,
                    setup: GraspSetup | None = None, settings: SolverSettings | None = None,
                    rng_seed: int = 0) -> list[WorkspaceSample]:
    """One accept/reject attempt at each given table position (same rng seed for all)."""
    setup = setup or bundled_grasp_setup()
    settings = settings or SolverSettings()
    out = []
    for xy in points:
        xy = np.asarray(xy, dtype=float)
        pose = grasp_pose_for(region, xy, setup)
        q, ok = _attempt((chain, pose, solver, budget_per_sample, settings, rng_seed))
        out.append(WorkspaceSample(xy, pose, q if ok else None, ok))
    return out


def dataset_digest(samples) -> str:
    """Hash of the accepted targets, the benchmark's actual input."""
    h = hashlib.sha256()
    for s in samples:
        if s.accepted:
            h.update(json.dumps(s.grasp_pose.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def config_digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def save_dataset(path, chain: KinematicChain, region: WorkspaceRegion, samples, *,
                 rng_seed: int, solver: str, settings: SolverSettings | None = None,
                 setup: GraspSetup | None = None) -> None:
    settings = settings or SolverSettings()
    header = {
        "type": "header",
        "chain": chain.name,
        "dof": chain.dof,
        "region": region.to_dict(),
        "rng_seed": rng_seed,
        "solver": solver,
        "solver_config_digest": config_digest(settings.to_dict()),
        "grasp_setup": (setup or bundled_grasp_setup()).to_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def load_dataset(path, chain: KinematicChain | None = None):
    """Read a JSONL dataset; accepted rows are re-verified with FK when ``chain`` is given."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read dataset ({exc.strerror})") from exc
    if not lines:
        raise ParseError(f"{path}: empty dataset")
    try:
        header = json.loads(lines[0])
        samples = [WorkspaceSample.from_dict(json.loads(ln)) for ln in lines[1:] if ln.strip()]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed dataset ({exc})") from exc
    if header.get("type") != "header":
        raise ParseError(f"{path}: first line must be the dataset header")
    if chain is not None:
        if header.get("dof") not in (None, chain.dof):
            raise ValidationError(f"{path}: dataset has dof {header['dof']}, chain has {chain.dof}")
        for k, s in enumerate(samples):
            if not s.accepted:
                continue
            if s.solution is None:
                raise ValidationError(f"{path}: accepted sample {k} has no solution")
            err = pose_error(forward_kinematics(chain, s.solution), s.grasp_pose)
            if not is_grasp_success(err):
                raise ValidationError(
                    f"{path}: accepted sample {k} does not reach its grasp pose "
                    f"({err.position_error:.4g} m, {err.orientation_error_sum:.4g} deg)")
    return header, samples


def emit_coverage_map(grid: CoverageGrid, path) -> tuple[Path, Path]:
    """Write ``<path>.pgm`` (acceptance ratio, P2 ASCII) and ``<path>.csv`` (raw counts).

    Image rows run from ``x_max`` (top) down to ``x_min``; columns from
    ``y_max`` (left) to ``y_min``, i.e. the table seen from above with the
    robot at the bottom.
    """
    if grid.total == 0:
        raise ValueError("coverage grid is empty")
    base = Path(path)
    if base.suffix in (".pgm", ".csv"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    n = grid.resolution
    img = np.rint(255 * grid.ratio()).astype(int)[::-1, ::-1]
    pgm = base.with_suffix(".pgm")
    with pgm.open("w") as fh:
        fh.write(f"P2\n{n} {n}\n255\n")
        for row in img:
            fh.write(" ".join(str(v) for v in row) + "\n")
    csv_path = base.with_suffix(".csv")
    with csv_path.open("w") as fh:
        fh.write("ix,iy,x_center,y_center,accepted,rejected\n")
        for i in range(n):
            for j in range(n):
                x, y = grid.cell_center(i, j)
                fh.write(f"{i},{j},{x:.6f},{y:.6f},{grid.accepted[i, j]},{grid.rejected[i, j]}\n")
    return pgm, csv_path
