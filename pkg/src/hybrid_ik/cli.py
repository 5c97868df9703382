"""Command-line entry point: ``hybrid-ik <command> [options]``.

Exit codes: 0 success, 1 solve failure, 2 usage or configuration error.
Machine-readable results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bundled_chain_path
from .bench import run_benchmark, write_report
from .config import build_config, config_keys, load_toml, parse_solver_list
from .errors import IKError
from .kinematics import (
    Pose,
    chain_summary,
    forward_kinematics,
    load_chain,
    with_active_joints,
)
from .solvers import SOLVER_NAMES, run_solver
from .transforms import matrix_to_rpy
from .workspace import (
    CoverageGrid,
    WorkspaceRegion,
    bundled_grasp_setup,
    emit_coverage_map,
    load_dataset,
    load_grasp_setup,
    sample_workspace,
    save_dataset,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _epilog() -> str:
    return ("solvers: " + ", ".join(SOLVER_NAMES) + "\n\nconfig keys (TOML sections):\n  "
            + "\n  ".join(config_keys())
            + "\n\nexit codes: 0 success, 1 solve failure, 2 usage/config error")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run options (override the config file)")
    g.add_argument("--config", help="TOML config file")
    g.add_argument("--chain", help="chain JSON (default: bundled 8-DoF chain)")
    g.add_argument("--grasp-setup", help="grasp companion JSON (default: bundled)")
    g.add_argument("--budget", type=float, help="seconds per solve (default 1.0)")
    g.add_argument("--seed", type=int, dest="rng_seed", help="rng seed (default 0)")
    g.add_argument("--deterministic", action="store_true", default=None,
                   help="ignore the wall clock; stop on iteration/generation caps")
    g.add_argument("--threads", type=int, help="worker cap (default: available cores)")
    g.add_argument("--islands", type=int, help="genetic islands (default: available cores)")
    g.add_argument("--output-dir", help="where files are written (default: out)")
    g.add_argument("--active-joints", type=int,
                   help="solve with only the first N joints; the rest frozen at 0")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="hybrid-ik", description=__doc__.splitlines()[0],
                                     epilog=_epilog(), formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("validate", help="check a chain file and print its summary",
                       epilog=_epilog(), formatter_class=fmt)
    p.add_argument("chain_file", nargs="?", help="chain JSON (default: --chain or bundled)")
    _common(p)

    p = sub.add_parser("fk", help="forward kinematics of a joint vector",
                       epilog=_epilog(), formatter_class=fmt)
    p.add_argument("--q", type=float, nargs="+", required=True, help="joint values [rad]")
    p.add_argument("--degrees", action="store_true", help="--q is given in degrees")
    _common(p)

    p = sub.add_parser("solve", help="solve IK for one target pose",
                       epilog=_epilog(), formatter_class=fmt)
    p.add_argument("--pos", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"),
                   help="target position [m]")
    p.add_argument("--rpy", type=float, nargs=3, required=True, metavar=("R", "P", "Y"),
                   help="target roll pitch yaw [deg]")
    p.add_argument("--solver", help="one of: " + ", ".join(SOLVER_NAMES))
    p.add_argument("--q0", type=float, nargs="+", help="start configuration [rad]")
    _common(p)

    p = sub.add_parser("gen-dataset", help="rejection-sample grasp targets into a JSONL dataset",
                       epilog=_epilog(), formatter_class=fmt)
    p.add_argument("--n", type=int, help="accepted samples wanted (default 500)")
    p.add_argument("--solver", help="solver used to accept/reject (default genetic)")
    p.add_argument("--out", help="dataset path (default <output-dir>/dataset.jsonl)")
    p.add_argument("--resolution", type=int, help="coverage grid cells per side (default 20)")
    _common(p)

    p = sub.add_parser("bench", help="benchmark solvers on a dataset; writes report files",
                       epilog=_epilog(), formatter_class=fmt)
    p.add_argument("--dataset", help="dataset JSONL to benchmark on")
    p.add_argument("--generate", action="store_true", help="sample a fresh dataset first")
    p.add_argument("--n", type=int, help="accepted samples to use (default 500)")
    p.add_argument("--solvers", help="comma-separated list (default newton,sqp,race,genetic)")
    p.add_argument("--solver", help="solver used by --generate (default genetic)")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    p.add_argument("--genetic-early-exit", action="store_true",
                   help="let the genetic solver stop on success (default: spend the budget)")
    _common(p)

    p = sub.add_parser("coverage", help="coverage map (PGM + CSV + PNG) of a dataset or a fresh "
                       "fixed-attempt sampling run", epilog=_epilog(), formatter_class=fmt)
    p.add_argument("--dataset", help="dataset JSONL; omit to sample")
    p.add_argument("--n", type=int, help="attempts to draw when sampling (default 500)")
    p.add_argument("--solver", help="solver used when sampling (default genetic)")
    p.add_argument("--resolution", type=int, help="cells per side (default 20)")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figure")
    _common(p)
    return parser


def _config(args):
    file_data = load_toml(args.config) if args.config else {}
    chain = getattr(args, "chain_file", None) or args.chain
    overrides = {
        "run.chain": chain,
        "run.grasp_setup": args.grasp_setup,
        "run.budget": args.budget,
        "run.rng_seed": args.rng_seed,
        "run.deterministic": args.deterministic,
        "run.threads": args.threads,
        "run.output_dir": args.output_dir,
        "run.active_joints": args.active_joints,
        "run.solver": getattr(args, "solver", None),
        "run.solvers": getattr(args, "solvers", None),
        "run.n": getattr(args, "n", None),
        "run.dataset": getattr(args, "dataset", None),
        "run.resolution": getattr(args, "resolution", None),
        "genetic.islands": args.islands,
    }
    if overrides["run.n"] is not None and overrides["run.n"] < 1:
        raise UsageError(f"--n must be >= 1 (got {overrides['run.n']})")
    return build_config(file_data, overrides)


def _chain(cfg):
    path = cfg.run.chain or bundled_chain_path()
    chain = load_chain(path)
    if cfg.run.active_joints:
        chain = with_active_joints(chain, cfg.run.active_joints)
    return chain


def _setup(cfg):
    setup = load_grasp_setup(cfg.run.grasp_setup) if cfg.run.grasp_setup else bundled_grasp_setup()
    return replace(setup, region=cfg.region)


def _dump(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def cmd_validate(args, cfg) -> int:
    path = cfg.run.chain or bundled_chain_path()
    chain = load_chain(path)
    print("\n".join(chain_summary(chain)))
    return EXIT_OK


def cmd_fk(args, cfg) -> int:
    chain = _chain(cfg)
    q = np.radians(args.q) if args.degrees else np.asarray(args.q, dtype=float)
    pose = forward_kinematics(chain, q)
    out = pose.to_dict()
    out["rpy_deg"] = [float(v) for v in np.degrees(matrix_to_rpy(pose.rotation))]
    _dump(out)
    return EXIT_OK


def cmd_solve(args, cfg) -> int:
    chain = _chain(cfg)
    target = Pose.from_rpy(args.pos, np.radians(args.rpy))
    res = run_solver(cfg.run.solver, chain, target, args.q0, cfg.run.budget, cfg.settings)
    _dump(res.to_dict())
    return EXIT_OK if res.success else EXIT_FAIL


def _generate(cfg, chain, n: int, max_attempts=None):
    setup = _setup(cfg)
    _log(f"sampling {n} grasp targets with {cfg.run.solver} "
         f"({cfg.run.budget:g} s per attempt, {chain.dof} active joints)")
    samples, grid = sample_workspace(
        chain, cfg.region, n, cfg.run.solver, cfg.run.budget,
        np.random.default_rng(cfg.run.rng_seed), setup=setup, settings=cfg.settings,
        max_attempts=max_attempts, resolution=cfg.run.resolution, workers=cfg.run.threads)
    _log(f"accepted {sum(s.accepted for s in samples)} of {len(samples)} drawn positions "
         f"({grid.accepted_fraction:.1%})")
    return setup, samples, grid


def cmd_gen_dataset(args, cfg) -> int:
    chain = _chain(cfg)
    setup, samples, grid = _generate(cfg, chain, cfg.run.n)
    out = Path(args.out) if args.out else Path(cfg.run.output_dir) / "dataset.jsonl"
    save_dataset(out, chain, cfg.region, samples, rng_seed=cfg.run.rng_seed,
                 solver=cfg.run.solver, settings=cfg.settings, setup=setup)
    pgm, csv = emit_coverage_map(grid, out.with_suffix(""))
    from .plotting import plot_coverage
    png = plot_coverage(samples, cfg.region, out.with_suffix(".png"),
                        f"{chain.dof} active joints: {grid.accepted_fraction:.1%} accepted")
    _dump({"dataset": str(out), "accepted": sum(s.accepted for s in samples),
           "drawn": len(samples), "accepted_fraction": grid.accepted_fraction,
           "coverage_pgm": str(pgm), "coverage_csv": str(csv), "coverage_png": str(png)})
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    chain = _chain(cfg)
    out_dir = Path(cfg.run.output_dir)
    if args.generate:
        setup, samples, _ = _generate(cfg, chain, cfg.run.n)
        path = out_dir / "dataset.jsonl"
        save_dataset(path, chain, cfg.region, samples, rng_seed=cfg.run.rng_seed,
                     solver=cfg.run.solver, settings=cfg.settings, setup=setup)
    elif cfg.run.dataset:
        _, samples = load_dataset(cfg.run.dataset, chain)
    else:
        raise UsageError("bench needs --dataset PATH or --generate")
    accepted = [s for s in samples if s.accepted][:cfg.run.n]
    if not accepted:
        raise UsageError("dataset has no accepted samples")
    solvers = parse_solver_list(cfg.run.solvers)
    _log(f"benchmarking {', '.join(solvers)} on {len(accepted)} targets, "
         f"{cfg.run.budget:g} s each")
    report = run_benchmark(chain, accepted, solvers, cfg.run.budget, cfg.settings,
                           workers=cfg.run.threads, config=cfg.to_dict(),
                           genetic_early_exit=args.genetic_early_exit)
    paths = write_report(report, out_dir)
    if not args.no_plots:
        from .plotting import plot_error_distribution
        plot_error_distribution(report.records, out_dir / "errors.png")
    sys.stdout.write(report.table())
    _log("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_coverage(args, cfg) -> int:
    out_dir = Path(cfg.run.output_dir)
    if cfg.run.dataset:
        header, samples = load_dataset(cfg.run.dataset)
        region = WorkspaceRegion.from_dict(header.get("region", {}))
        grid = CoverageGrid.from_samples(samples, region, cfg.run.resolution)
        label = f"dataset {cfg.run.dataset}"
    else:
        chain = _chain(cfg)
        n = cfg.run.n
        try:
            _, samples, grid = _generate(cfg, chain, n, max_attempts=n)
        except IKError as exc:
            if getattr(exc, "grid", None) is None:
                raise
            _log(str(exc))
            samples, grid = exc.samples, exc.grid
        region = cfg.region
        label = f"{chain.dof} active joints"
    base = out_dir / "coverage"
    pgm, csv = emit_coverage_map(grid, base)
    result = {"attempts": grid.total, "accepted": int(grid.accepted.sum()),
              "accepted_fraction": grid.accepted_fraction,
              "coverage_pgm": str(pgm), "coverage_csv": str(csv)}
    if not args.no_plots:
        from .plotting import plot_coverage
        result["coverage_png"] = str(plot_coverage(
            samples, region, base.with_suffix(".png"),
            f"{label}: {grid.accepted_fraction:.1%} accepted"))
    _dump(result)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "fk": cmd_fk,
    "solve": cmd_solve,
    "gen-dataset": cmd_gen_dataset,
    "bench": cmd_bench,
    "coverage": cmd_coverage,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IKError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if "unknown solver" in str(exc):
            print("registered solvers: " + ", ".join(SOLVER_NAMES), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
