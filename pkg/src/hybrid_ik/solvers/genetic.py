"""Island-model genetic IK with elitism and SQP refinement of the elites.

Each island evolves an isolated population (no migration), so islands act as
niches.  Chromosomes are joint vectors and are always inside the joint limits.
"""
from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import DimensionMismatch, InvalidConfig
from ..kinematics import KinematicChain, Pose, forward_kinematics, pose_error
from .base import Deadline, SolveResult, check_seed, make_result
from .sqp import DEFAULT_SQP, SqpConfig, objective, objective_batch, refine_with_status


@dataclass(frozen=True)
class IslandConfig:
    population_size: int = 64
    elite_count: int = 4
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.15
    mutation_sigma: float = 0.15  # rad
    n_best_refine: int = 3
    refine_step_budget: int = 8
    stagnation_generations: int = 25  # redraw all but the best after this many; 0 = never
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidConfig("population_size must be >= 2")
        if not 0 <= self.elite_count < self.population_size:
            raise InvalidConfig("elite_count must be in [0, population_size)")
        if not 0 <= self.n_best_refine <= self.population_size:
            raise InvalidConfig("n_best_refine must be in [0, population_size]")
        if self.tournament_size < 1:
            raise InvalidConfig("tournament_size must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1]")
        if self.mutation_sigma < 0 or self.refine_step_budget < 0 or self.stagnation_generations < 0:
            raise InvalidConfig("mutation_sigma, refine_step_budget and "
                                "stagnation_generations must be >= 0")


@dataclass(frozen=True)
class GeneticSolverConfig:
    islands: int = field(default_factory=lambda: os.cpu_count() or 1)
    island: IslandConfig = field(default_factory=IslandConfig)
    budget: float = 1.0  # s, wall-clock mode
    success_position_tol: float = 1e-4  # m
    success_orientation_tol: float = 0.1  # deg (roll+pitch+yaw sum)
    deterministic_mode: bool = False
    generations: int = 40  # per island, deterministic mode only
    early_exit: bool = True
    executor: str = "thread"  # or "sequential"
    sqp: SqpConfig = DEFAULT_SQP

    def __post_init__(self):
        if self.islands < 1:
            raise InvalidConfig("islands must be >= 1")
        if not self.budget > 0:
            raise InvalidConfig("budget must be > 0")
        if self.generations < 1:
            raise InvalidConfig("generations must be >= 1")
        if self.executor not in ("thread", "sequential"):
            raise InvalidConfig(f"unknown executor {self.executor!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Individual:
    chromosome: np.ndarray
    fitness: float


@dataclass
class Population:
    """Chromosomes ``(N, dof)`` with cached fitness ``(N,)``, best first.

    ``converged`` marks rows SQP already polished to a stop; they are not
    refined again while they survive unchanged as elites.
    """

    chromosomes: np.ndarray
    fitness: np.ndarray
    converged: np.ndarray | None = None

    def __post_init__(self):
        if self.converged is None:
            self.converged = np.zeros(self.fitness.shape, dtype=bool)

    def __len__(self):
        return self.fitness.size

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[0])

    def individuals(self) -> list[Individual]:
        return [Individual(c.copy(), float(f)) for c, f in zip(self.chromosomes, self.fitness)]

    def sorted(self) -> "Population":
        order = np.argsort(self.fitness, kind="stable")
        return Population(self.chromosomes[order], self.fitness[order], self.converged[order])

    def copy(self) -> "Population":
        return Population(self.chromosomes.copy(), self.fitness.copy(), self.converged.copy())


def init_population(chain: KinematicChain, target: Pose, cfg: IslandConfig,
                    rng: np.random.Generator, sqp: SqpConfig = DEFAULT_SQP) -> Population:
    """Uniform draws inside the joint limits, evaluated and sorted."""
    if cfg.population_size < 2:
        raise InvalidConfig("population_size must be >= 2")
    Q = rng.uniform(chain.lower, chain.upper, size=(cfg.population_size, chain.dof))
    return Population(Q, objective_batch(chain, Q, target, sqp)).sorted()


def evolve_generation(chain: KinematicChain, target: Pose, population: Population,
                      cfg: IslandConfig, rng: np.random.Generator,
                      sqp: SqpConfig = DEFAULT_SQP) -> Population:
    n, dof = population.chromosomes.shape
    if dof != chain.dof:
        raise DimensionMismatch(f"chromosomes have {dof} genes, chain has {chain.dof} joints")
    elites = cfg.elite_count
    m = n - elites
    # The population is sorted, so the lowest index in a tournament wins.
    contenders = rng.integers(0, n, size=(m, 2, cfg.tournament_size))
    parents = contenders.min(axis=-1)
    p1 = population.chromosomes[parents[:, 0]]
    p2 = population.chromosomes[parents[:, 1]]

    cross = rng.random(m) < cfg.crossover_rate
    take_p2 = (rng.random((m, dof)) < 0.5) & cross[:, None]
    children = np.where(take_p2, p2, p1)

    mutate = rng.random((m, dof)) < cfg.mutation_rate
    children = children + mutate * rng.normal(0.0, cfg.mutation_sigma, size=(m, dof))
    children = np.minimum(np.maximum(children, chain.lower), chain.upper)

    Q = np.concatenate([population.chromosomes[:elites], children])
    fit = np.concatenate([population.fitness[:elites],
                          objective_batch(chain, children, target, sqp)])
    done = np.concatenate([population.converged[:elites], np.zeros(m, dtype=bool)])
    return Population(Q, fit, done).sorted()


def refine_elites(chain: KinematicChain, target: Pose, population: Population,
                  cfg: IslandConfig, sqp: SqpConfig = DEFAULT_SQP) -> Population:
    """SQP-polish the ``n_best_refine`` best; replace only on strict improvement."""
    if cfg.n_best_refine == 0 or cfg.refine_step_budget == 0:
        return population
    pop = population.copy()
    for i in range(min(cfg.n_best_refine, len(pop))):
        if pop.converged[i]:
            continue
        q, stopped = refine_with_status(chain, target, pop.chromosomes[i], sqp,
                                        cfg.refine_step_budget)
        f = objective(chain, q, target, sqp)
        if f < pop.fitness[i]:
            pop.chromosomes[i] = q
            pop.fitness[i] = f
        pop.converged[i] = stopped
    return pop.sorted()


class Island:
    """One isolated evolution; its trajectory depends only on its own rng."""

    def __init__(self, chain, target, cfg: IslandConfig, rng, sqp: SqpConfig, seed_q=None):
        self.chain, self.target, self.cfg, self.rng, self.sqp = chain, target, cfg, rng, sqp
        pop = init_population(chain, target, cfg, rng, sqp)
        if seed_q is not None:
            pop.chromosomes[-1] = seed_q
            pop.fitness[-1] = objective(chain, seed_q, target, sqp)
            pop = pop.sorted()
        self.population = refine_elites(chain, target, pop, cfg, sqp)
        self.generations = 0
        self.restarts = 0
        self._stale = 0

    def step(self) -> None:
        before = self.population.best_fitness
        pop = evolve_generation(self.chain, self.target, self.population, self.cfg, self.rng, self.sqp)
        pop = refine_elites(self.chain, self.target, pop, self.cfg, self.sqp)
        self.generations += 1
        self._stale = self._stale + 1 if pop.best_fitness >= before else 0
        limit = self.cfg.stagnation_generations
        if limit and self._stale >= limit and pop.converged[0]:
            # Polished best, no progress: the population has collapsed into
            # one basin.  Keep the best and redraw everything else.
            fresh = init_population(self.chain, self.target, self.cfg, self.rng, self.sqp)
            fresh.chromosomes[0] = pop.chromosomes[0]
            fresh.fitness[0] = pop.fitness[0]
            fresh.converged[0] = True
            pop = refine_elites(self.chain, self.target, fresh.sorted(), self.cfg, self.sqp)
            self.restarts += 1
            self._stale = 0
        self.population = pop

    @property
    def best(self) -> tuple[np.ndarray, float]:
        return self.population.chromosomes[0], self.population.best_fitness

    def solved(self, pos_tol: float, orient_tol: float) -> bool:
        err = pose_error(forward_kinematics(self.chain, self.best[0]), self.target)
        if self.sqp.orientation_weight == 0:  # position-only fitness
            return err.position_error < pos_tol
        return err.position_error < pos_tol and err.orientation_error_sum < orient_tol


def island_seeds(cfg: GeneticSolverConfig) -> list[np.random.Generator]:
    seq = np.random.SeedSequence(cfg.island.rng_seed)
    return [np.random.default_rng(s) for s in seq.spawn(cfg.islands)]


def _run_island(island: Island, cfg: GeneticSolverConfig, deadline: Deadline,
                stop: threading.Event) -> None:
    tol = (cfg.success_position_tol, cfg.success_orientation_tol)
    while True:
        if cfg.early_exit and island.solved(*tol):
            if not cfg.deterministic_mode:
                stop.set()
            return
        if cfg.deterministic_mode:
            if island.generations >= cfg.generations:
                return
        elif deadline.expired() or stop.is_set():
            return
        island.step()


def solve_genetic(chain: KinematicChain, target: Pose, cfg: GeneticSolverConfig | None = None,
                  seed=None, cancel: threading.Event | None = None) -> SolveResult:
    cfg = cfg or GeneticSolverConfig()
    budget = math.inf if cfg.deterministic_mode else cfg.budget
    stop = threading.Event()
    if cfg.deterministic_mode:
        deadline = Deadline(budget)
    else:
        deadline = Deadline(budget, _AnyEvent(stop, *([cancel] if cancel is not None else [])))
    seed_q = None if seed is None else check_seed(chain, seed)

    islands = [Island(chain, target, cfg.island, rng, cfg.sqp, seed_q) for rng in island_seeds(cfg)]

    if cfg.executor == "thread" and cfg.islands > 1:
        with ThreadPoolExecutor(max_workers=cfg.islands) as pool:
            futures = [pool.submit(_run_island, isl, cfg, deadline, stop) for isl in islands]
            for fut in futures:
                fut.result()
    else:
        _run_round_robin(islands, cfg, deadline, stop)

    bests = [isl.best for isl in islands]
    winner = min(range(len(bests)), key=lambda i: (bests[i][1], i))
    q, f = bests[winner]
    return make_result(
        chain, target, q, "genetic",
        iterations=sum(isl.generations for isl in islands),
        elapsed=deadline.elapsed(), objective=f,
        island=winner, generations=[isl.generations for isl in islands],
        island_fitness=[float(b[1]) for b in bests],
        early_exit=cfg.early_exit, deterministic=cfg.deterministic_mode,
    )


def _run_round_robin(islands, cfg, deadline, stop):
    tol = (cfg.success_position_tol, cfg.success_orientation_tol)
    active = list(islands)
    while active:
        still = []
        for isl in active:
            if cfg.early_exit and isl.solved(*tol):
                if not cfg.deterministic_mode:
                    return
                continue
            if cfg.deterministic_mode:
                if isl.generations >= cfg.generations:
                    continue
            elif deadline.expired():
                return
            isl.step()
            still.append(isl)
        active = still


class _AnyEvent:
    """Looks like a ``threading.Event`` that is set when any member is set."""

    def __init__(self, *events):
        self.events = events

    def is_set(self) -> bool:
        return any(e.is_set() for e in self.events)

    def set(self) -> None:
        self.events[0].set()


def with_budget(cfg: GeneticSolverConfig, budget: float) -> GeneticSolverConfig:
    return replace(cfg, budget=budget)
