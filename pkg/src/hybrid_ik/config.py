"""Run configuration: built-in defaults < TOML file < command-line flags."""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidConfig, ParseError, UnknownSolver
from .solvers import (
    SOLVER_NAMES,
    GeneticSolverConfig,
    IslandConfig,
    JacobianSolverConfig,
    SolverSettings,
    SqpConfig,
)
from .workspace import WorkspaceRegion


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunSection:
    chain: str = ""  # empty: the bundled chain
    grasp_setup: str = ""  # empty: the bundled companion file
    solver: str = "genetic"
    solvers: str = "newton,sqp,race,genetic"
    budget: float = 1.0  # s per solve
    rng_seed: int = 0
    output_dir: str = "out"
    deterministic: bool = False
    threads: int = field(default_factory=default_threads)
    n: int = 500  # desk scale
    dataset: str = ""
    active_joints: int = 0  # 0: all joints
    resolution: int = 20


SECTIONS = {
    "run": RunSection,
    "region": WorkspaceRegion,
    "jacobian": JacobianSolverConfig,
    "sqp": SqpConfig,
    "genetic": GeneticSolverConfig,
    "genetic.island": IslandConfig,
}
# Fields not settable in their own section: nested configs have their own
# section, and budget/determinism/seed always come from [run].
_NESTED = {"genetic": {"island", "sqp", "budget", "deterministic_mode"},
           "genetic.island": {"rng_seed"}}


def config_keys() -> list[str]:
    """Every ``section.key`` accepted in the TOML file."""
    keys = []
    for sec, cls in SECTIONS.items():
        for f in dataclasses.fields(cls):
            if f.name not in _NESTED.get(sec, ()):
                keys.append(f"{sec}.{f.name}")
    return keys


@dataclass(frozen=True)
class RunConfig:
    run: RunSection
    region: WorkspaceRegion
    settings: SolverSettings

    @property
    def chain_path(self) -> str:
        return self.run.chain

    def to_dict(self) -> dict:
        d = {
            "run": dataclasses.asdict(self.run),
            "region": self.region.to_dict(),
            "jacobian": dataclasses.asdict(self.settings.jacobian),
            "sqp": dataclasses.asdict(self.settings.sqp),
            "genetic": {k: v for k, v in dataclasses.asdict(self.settings.genetic).items()
                        if k not in _NESTED["genetic"]},
        }
        d["genetic"]["island"] = {k: v for k, v in
                                  dataclasses.asdict(self.settings.genetic.island).items()
                                  if k not in _NESTED["genetic.island"]}
        return d


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: cannot read config ({exc.strerror})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: invalid TOML ({exc})") from exc


def _flatten(data: dict) -> dict[str, dict]:
    """``{"genetic": {"island": {...}}}`` -> ``{"genetic": {...}, "genetic.island": {...}}``."""
    out: dict[str, dict] = {}
    for sec, body in data.items():
        if not isinstance(body, dict):
            raise InvalidConfig(f"config: top-level key {sec!r} must be a table")
        body = dict(body)
        if sec == "genetic" and isinstance(body.get("island"), dict):
            out["genetic.island"] = body.pop("island")
        out[sec] = body
    return out


def _coerce(cls, section: str, values: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known or key in _NESTED.get(section, ()):
            raise InvalidConfig(f"config: unknown key {section}.{key}")
        default = known[key].default
        if default is dataclasses.MISSING and known[key].default_factory is not dataclasses.MISSING:
            default = known[key].default_factory()
        try:
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError
            elif isinstance(default, int):
                if isinstance(value, bool) or float(value) != int(value):
                    raise TypeError
                value = int(value)
            elif isinstance(default, float):
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
            elif isinstance(default, str):
                value = str(value)
        except (TypeError, ValueError):
            raise InvalidConfig(f"config: {section}.{key} has the wrong type ({value!r})") from None
        kwargs[key] = value
    return kwargs


def build_config(file_data: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, parsed TOML and ``overrides`` (``{"section.key": value}``).

    ``None`` override values are ignored so unset CLI flags fall through.
    """
    merged = {sec: {} for sec in SECTIONS}
    for sec, body in _flatten(file_data or {}).items():
        if sec not in SECTIONS:
            raise InvalidConfig(f"config: unknown section [{sec}]")
        merged[sec].update(body)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        sec, _, key = dotted.rpartition(".")
        merged[sec][key] = value

    try:
        kw = {sec: _coerce(cls, sec, merged[sec]) for sec, cls in SECTIONS.items()}
        run = RunSection(**kw["run"])
        region = WorkspaceRegion(**kw["region"])
        island = IslandConfig(**kw["genetic.island"])
        sqp = SqpConfig(**kw["sqp"])
        settings = SolverSettings(
            jacobian=JacobianSolverConfig(**kw["jacobian"]),
            sqp=sqp,
            genetic=GeneticSolverConfig(island=island, sqp=sqp, **kw["genetic"]),
            deterministic=run.deterministic,
            rng_seed=run.rng_seed,
        )
    except InvalidConfig:
        raise
    except (ValueError, TypeError) as exc:
        raise InvalidConfig(f"config: {exc}") from exc

    if run.solver not in SOLVER_NAMES:
        raise UnknownSolver(f"unknown solver {run.solver!r}; registered: {', '.join(SOLVER_NAMES)}")
    for name in parse_solver_list(run.solvers):
        if name not in SOLVER_NAMES:
            raise UnknownSolver(f"unknown solver {name!r}; registered: {', '.join(SOLVER_NAMES)}")
    if not run.budget > 0:
        raise InvalidConfig("config: run.budget must be > 0")
    if run.threads < 1:
        raise InvalidConfig("config: run.threads must be >= 1")
    if run.n < 1:
        raise InvalidConfig("config: run.n must be >= 1")
    if run.resolution < 1:
        raise InvalidConfig("config: run.resolution must be >= 1")
    for key in ("chain", "grasp_setup", "dataset"):
        value = getattr(run, key)
        if value and not Path(value).is_file():
            raise InvalidConfig(f"config: run.{key} file not found: {value}")
    return RunConfig(run, region, settings)


def parse_solver_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]
