import json
import subprocess
import sys

import numpy as np
import pytest

from hybrid_ik import bundled_chain_path, forward_kinematics
from hybrid_ik.bench import HEADERS
from hybrid_ik.cli import _config, build_parser, main
from hybrid_ik.config import build_config, config_keys
from hybrid_ik.errors import InvalidConfig, UnknownSolver
from hybrid_ik.kinematics import chain_to_dict
from hybrid_ik.solvers import SOLVER_NAMES
from hybrid_ik.transforms import matrix_to_rpy


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_bundled(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0 and "dof: 8" in out


def test_validate_broken_spec(capsys, tmp_path, nicol):
    spec = chain_to_dict(nicol)
    spec["joints"][2]["limits"] = {"lower": 1.0, "upper": -1.0}
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(capsys, "validate", str(path))
    assert code == 2 and spec["joints"][2]["name"] in err


def test_validate_missing_file(capsys, tmp_path):
    missing = tmp_path / "nope.json"
    code, _, err = run(capsys, "validate", str(missing))
    assert code == 2 and str(missing) in err


def test_fk_prints_pose(capsys, nicol):
    q = nicol.mid_configuration
    code, out, _ = run(capsys, "fk", "--q", *map(str, q))
    assert code == 0
    assert np.allclose(json.loads(out)["position"], forward_kinematics(nicol, q).position)


def test_solve_success_and_failure(capsys, nicol):
    q = nicol.lower + 0.4 * (nicol.upper - nicol.lower)
    pose = forward_kinematics(nicol, q)
    rpy = np.degrees(matrix_to_rpy(pose.rotation))
    code, out, _ = run(capsys, "solve", "--pos", *map(str, pose.position), "--rpy", *map(str, rpy),
                       "--solver", "genetic", "--budget", "0.5", "--islands", "1")
    assert code == 0 and json.loads(out)["success"] is True
    code, out, _ = run(capsys, "solve", "--pos", "3", "0", "1", "--rpy", "0", "0", "0",
                       "--solver", "newton", "--budget", "0.05")
    assert code == 1 and json.loads(out)["success"] is False


def test_solve_unknown_solver(capsys):
    code, _, err = run(capsys, "solve", "--pos", "0.5", "0", "1", "--rpy", "0", "0", "0",
                       "--solver", "kdl")
    assert code == 2
    assert all(name in err for name in SOLVER_NAMES)


def test_zero_samples_is_a_usage_error(capsys):
    code, _, err = run(capsys, "bench", "--generate", "--n", "0")
    assert code == 2 and "--n" in err


def test_help_lists_solvers_and_keys():
    text = build_parser().format_help()
    for name in SOLVER_NAMES:
        assert name in text
    for key in config_keys():
        assert key in text
    assert "sqp.position_weight" in config_keys() and "run.budget" in config_keys()


def test_config_precedence(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text("[run]\nbudget = 0.3\nrng_seed = 9\n[sqp]\nmax_iterations = 50\n"
                    "[genetic.island]\npopulation_size = 20\n")
    args = build_parser().parse_args(["solve", "--pos", "0", "0", "0", "--rpy", "0", "0", "0",
                                      "--config", str(toml), "--budget", "0.2"])
    cfg = _config(args)
    assert cfg.run.budget == 0.2  # flag beats file
    assert cfg.run.rng_seed == 9 and cfg.settings.sqp.max_iterations == 50  # file beats default
    assert cfg.settings.genetic.island.population_size == 20
    assert cfg.settings.jacobian.max_iterations == 200  # default
    assert cfg.settings.genetic.sqp is cfg.settings.sqp


def test_config_errors(tmp_path):
    with pytest.raises(InvalidConfig):
        build_config({"run": {"bogus": 1}})
    with pytest.raises(InvalidConfig):
        build_config({"sqp": {"max_iterations": "many"}})
    with pytest.raises(InvalidConfig):
        build_config({}, {"run.chain": str(tmp_path / "absent.json")})
    with pytest.raises(UnknownSolver):
        build_config({}, {"run.solver": "kdl"})


def test_bench_generate_writes_four_rows(capsys, tmp_path):
    out_dir = tmp_path / "b"
    code, out, _ = run(capsys, "bench", "--generate", "--n", "3", "--solver", "sqp",
                       "--solvers", "newton,sqp,race,genetic", "--budget", "0.1",
                       "--islands", "1", "--threads", "1", "--output-dir", str(out_dir))
    assert code == 0
    lines = out.strip().splitlines()
    assert [h.strip() for h in lines[0].split("|")] == list(HEADERS)
    assert len(lines) == 6
    report = json.loads((out_dir / "report.json").read_text())
    assert report["config"]["run"]["budget"] == 0.1  # merged config echoed
    for name in ("report.txt", "bench_log.jsonl", "dataset.jsonl", "errors.png"):
        assert (out_dir / name).is_file()

    code, out, _ = run(capsys, "coverage", "--dataset", str(out_dir / "dataset.jsonl"),
                       "--output-dir", str(out_dir), "--resolution", "5")
    assert code == 0
    result = json.loads(out)
    assert result["accepted"] == 3
    assert (out_dir / "coverage.pgm").is_file() and (out_dir / "coverage.png").is_file()


def test_bench_needs_a_dataset(capsys):
    code, _, err = run(capsys, "bench")
    assert code == 2 and "--dataset" in err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hybrid_ik.cli", "validate",
                           str(bundled_chain_path())], capture_output=True, text=True)
    assert proc.returncode == 0 and "dof: 8" in proc.stdout
