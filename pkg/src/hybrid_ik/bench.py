"""Benchmark every solver on the same grasp targets and aggregate the results."""
from __future__ import annotations

import hashlib
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import UnknownSolver
from .kinematics import KinematicChain
from .solvers import SOLVER_NAMES, SolverSettings, run_solver
from .workspace import dataset_digest

# Left out of the report digest: wall-clock fields, and file locations that do
# not change what was computed (the dataset itself is covered by its digest).
DIGEST_EXCLUDED = frozenset({"generated_at", "elapsed", "mean_elapsed", "max_elapsed",
                             "report_digest", "output_dir", "dataset"})


@dataclass
class SolverStats:
    solver: str
    n: int
    successes: int
    mean_position_error: float
    std_position_error: float
    median_position_error: float
    mean_orientation_error: float
    std_orientation_error: float
    median_orientation_error: float
    mean_elapsed: float
    max_elapsed: float

    @property
    def accuracy(self) -> float:
        return self.successes / self.n * 100.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["accuracy"] = self.accuracy
        return d


@dataclass
class BenchmarkReport:
    solvers: dict[str, SolverStats]
    records: list[dict]
    dof: int
    budget: float
    dataset_digest: str
    config: dict = field(default_factory=dict)
    generated_at: str = ""

    def to_dict(self) -> dict:
        d = {
            "generated_at": self.generated_at,
            "dof": self.dof,
            "budget": self.budget,
            "dataset_digest": self.dataset_digest,
            "config": self.config,
            "solvers": {k: v.to_dict() for k, v in self.solvers.items()},
        }
        d["report_digest"] = report_digest(d)
        return d

    def table(self) -> str:
        return format_table(self)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in DIGEST_EXCLUDED}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def report_digest(report: dict) -> str:
    """SHA-256 of the report without the ``DIGEST_EXCLUDED`` fields."""
    blob = json.dumps(_strip_timing(report), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def aggregate(solver: str, records: list[dict]) -> SolverStats:
    """Statistics over all attempts, failed ones included."""
    pos = [r["position_error"] for r in records]
    ori = [r["orientation_error_sum"] for r in records]
    el = [r["elapsed"] for r in records]
    return SolverStats(
        solver=solver,
        n=len(records),
        successes=sum(1 for r in records if r["success"]),
        mean_position_error=statistics.fmean(pos),
        std_position_error=statistics.pstdev(pos),
        median_position_error=statistics.median(pos),
        mean_orientation_error=statistics.fmean(ori),
        std_orientation_error=statistics.pstdev(ori),
        median_orientation_error=statistics.median(ori),
        mean_elapsed=statistics.fmean(el),
        max_elapsed=max(el),
    )


def _bench_job(job):
    index, solver, chain, pose, seed, budget, settings, rng_seed = job
    res = run_solver(solver, chain, pose, seed, budget, settings, rng_seed)
    return {
        "sample": index,
        "solver": solver,
        "success": bool(res.success),
        "position_error": res.error.position_error,
        "orientation_error_sum": res.error.orientation_error_sum,
        "objective": res.objective,
        "iterations": res.iterations,
        "elapsed": res.elapsed,
        "solution": [float(v) for v in res.solution],
    }


def sample_rng_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1, dtype=np.uint64)[0] >> 1)


def run_benchmark(chain: KinematicChain, samples, solver_names, budget: float = 1.0,
                  settings: SolverSettings | None = None, seeds=None, workers: int = 1,
                  config: dict | None = None, progress=None,
                  genetic_early_exit: bool = False) -> BenchmarkReport:
    """Solve every accepted sample with every solver under the same budget and seed.

    ``seeds`` gives one start configuration per accepted sample (default:
    the middle of the joint limits).  Randomised solvers get a per-sample rng
    seed derived from ``settings.rng_seed``, identical across solvers.  The
    genetic solver's early exit is off by default so it spends the whole
    budget (a fixed-time protocol); the report records the choice.
    """
    settings = settings or SolverSettings()
    settings = replace(settings, genetic=replace(settings.genetic, early_exit=genetic_early_exit))
    solver_names = list(solver_names)
    for name in solver_names:
        if name not in SOLVER_NAMES:
            raise UnknownSolver(f"unknown solver {name!r}; registered: {', '.join(SOLVER_NAMES)}")
    targets = [s for s in samples if s.accepted]
    if not targets:
        raise ValueError("benchmark needs at least one accepted sample")
    if seeds is None:
        seeds = [chain.mid_configuration] * len(targets)
    if len(seeds) != len(targets):
        raise ValueError("need one seed per accepted sample")

    jobs = [(i, name, chain, s.grasp_pose, np.asarray(seeds[i], dtype=float), budget, settings,
             sample_rng_seed(settings.rng_seed, i))
            for name in solver_names for i, s in enumerate(targets)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_bench_job, jobs, chunksize=4))
    else:
        records = []
        for k, job in enumerate(jobs):
            records.append(_bench_job(job))
            if progress is not None:
                progress(k + 1, len(jobs))

    stats = {name: aggregate(name, [r for r in records if r["solver"] == name])
             for name in solver_names}
    return BenchmarkReport(
        solvers=stats,
        records=records,
        dof=chain.dof,
        budget=budget,
        dataset_digest=dataset_digest(samples),
        config=dict(config if config is not None else {"settings": settings.to_dict()},
                    genetic_early_exit=genetic_early_exit),
        generated_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    )


HEADERS = ("Experiment", "DoF", "Mean pos. error", "Median pos. error",
           "Mean orient. error", "Median orient. error", "Grasp accuracy", "Mean time")


def format_table(report: BenchmarkReport) -> str:
    rows = []
    for s in report.solvers.values():
        rows.append((
            s.solver,
            str(report.dof),
            f"{s.mean_position_error:.6f} ± {s.std_position_error:.6f}",
            f"{s.median_position_error:.6f}",
            f"{s.mean_orientation_error:.6e} ± {s.std_orientation_error:.6e}",
            f"{s.median_orientation_error:.6e}",
            f"{s.accuracy:.2f} %",
            f"{s.mean_elapsed:.4f} s",
        ))
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(HEADERS)]
    sep = "-+-".join("-" * w for w in widths)
    out = [" | ".join(h.ljust(w) for h, w in zip(HEADERS, widths)), sep]
    out += [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out) + "\n"


def write_report(report: BenchmarkReport, out_dir) -> dict[str, Path]:
    """Write ``report.json``, ``report.txt`` and the per-sample ``bench_log.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "text": out / "report.txt", "log": out / "bench_log.jsonl"}
    paths["json"].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["text"].write_text(report.table())
    with paths["log"].open("w") as fh:
        for r in report.records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return paths


def read_log(path) -> list[dict]:
    return [json.loads(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]
