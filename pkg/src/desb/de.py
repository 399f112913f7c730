"""DE/rand/1 with binomial crossover and optional symmetry breaking.

A generation runs in four phases:

1. symmetry breaking (DE-SB only): one heuristic step per individual towards
   the current best; stored costs stay valid because symmetries leave the
   cost unchanged, so nothing is re-evaluated,
2. all trial vectors are generated from one serial random stream,
3. trials are evaluated in fixed-size chunks, optionally on an executor,
4. synchronous selection against the generation-``G`` population.

All randomness lives in phases 1 and 2, so results do not depend on how
phase 3 is scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .network import CostValue, Topology
from .symmetry import draw_mgod, mgod_apply

__all__ = ["DEConfig", "Individual", "RunResult", "init_population", "de_trial",
           "de_select", "run_de", "EVAL_CHUNK"]

log = logging.getLogger(__name__)

EVAL_CHUNK = 32
DEFAULT_MAX_EVALS = 200_000_000
CROSSOVER_MODES = ("mutant", "target")


@dataclass(frozen=True)
class DEConfig:
    Np: int
    F: float = 0.5
    Cr: float = 0.9
    symmetry_breaking: bool = False
    max_evals: int = DEFAULT_MAX_EVALS
    epsilon0: float = 5e-5
    seed: int = 0
    # "mutant": Cr is the chance a coordinate comes from the mutant (classic DE).
    # "target": Cr is the chance a coordinate is kept from the target.
    crossover: str = "mutant"
    # Re-evaluate after each symmetry phase and check cost neutrality.
    debug: bool = False

    def __post_init__(self):
        if self.Np < 4:
            raise ValueError(f"population size must be at least 4, got {self.Np}")
        if not self.F > 0:
            raise ValueError(f"F must be positive, got {self.F}")
        if not 0 <= self.Cr <= 1:
            raise ValueError(f"Cr must lie in [0, 1], got {self.Cr}")
        if self.max_evals <= 0:
            raise ValueError(f"max_evals must be positive, got {self.max_evals}")
        if not self.epsilon0 > 0:
            raise ValueError(f"epsilon0 must be positive, got {self.epsilon0}")
        if self.crossover not in CROSSOVER_MODES:
            raise ValueError(f"unknown crossover convention {self.crossover!r}")

    @property
    def keep_prob(self) -> float:
        """Probability that a trial coordinate is copied from the target."""
        return self.Cr if self.crossover == "target" else 1.0 - self.Cr


@dataclass(frozen=True)
class Individual:
    position: np.ndarray
    cost: float


@dataclass
class RunResult:
    success: bool
    evals_used: int
    best: Individual
    generations: int
    trace: list[tuple[int, float]] = field(default_factory=list)


def _evaluate(problem, thetas, executor=None):
    """Total costs for a stack of vectors, evaluated in ``EVAL_CHUNK`` pieces.

    Chunk boundaries do not depend on the executor, so serial and
    concurrent evaluation give bitwise identical numbers.
    """
    batch = getattr(problem, "batch", None)
    if batch is None:
        def batch(chunk):
            return np.array([float(problem(t)) for t in chunk])
    chunks = [thetas[i:i + EVAL_CHUNK] for i in range(0, len(thetas), EVAL_CHUNK)]
    if executor is None or len(chunks) == 1:
        parts = [batch(c) for c in chunks]
    else:
        parts = list(executor.map(batch, chunks))
    return np.concatenate(parts).astype(float)


def init_population(config: DEConfig, dim: int, rng: np.random.Generator,
                    problem=None, executor=None):
    """Uniform initial population on ``[-1, 1]^dim``.

    Returns ``(positions, costs)``; ``costs`` is None if no problem is given.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    positions = rng.uniform(-1.0, 1.0, size=(config.Np, dim))
    costs = None if problem is None else _evaluate(problem, positions, executor)
    return positions, costs


def _partners(rng, n_pop, size):
    """Three pairwise distinct indices per row, all different from the row index."""
    rows = np.arange(size)
    taken = rows[:, None]
    out = np.empty((size, 3), dtype=np.intp)
    for c in range(3):
        # uniform over the n_pop - 1 - c indices not yet taken
        r = (rng.random(size) * (n_pop - 1 - c)).astype(np.intp)
        for t in np.sort(taken, axis=1).T:
            r += r >= t
        out[:, c] = r
        taken = np.column_stack([taken, r])
    return out


def de_trial(i, population, rng: np.random.Generator, F: float = 0.5, Cr: float = 0.9,
             crossover: str = "mutant", partners=None, j_rand=None, mask=None) -> np.ndarray:
    """Trial vector for individual ``i``.

    Mutation ``v = x_r1 + F (x_r2 - x_r3)`` with ``r1, r2, r3`` distinct
    from each other and from ``i``. Binomial crossover takes each coordinate
    from ``v`` with probability ``Cr`` (``crossover="mutant"``) or keeps it
    from the target with probability ``Cr`` (``crossover="target"``); the
    coordinate ``j_rand`` always comes from ``v``.

    ``partners``, ``j_rand`` and ``mask`` (True = keep the target
    coordinate) override the random draws.
    """
    population = np.asarray(population, dtype=float)
    n_pop, dim = population.shape
    if n_pop < 4:
        raise ValueError(f"population size must be at least 4, got {n_pop}")
    if partners is None:
        partners = _partners(rng, n_pop, n_pop)[i]
    r1, r2, r3 = partners
    v = population[r1] + F * (population[r2] - population[r3])
    if mask is None:
        keep = Cr if crossover == "target" else 1.0 - Cr
        mask = np.full(dim, keep >= 1.0) if keep in (0.0, 1.0) else rng.random(dim) < keep
    mask = np.array(mask, dtype=bool)
    if j_rand is None:
        j_rand = int(rng.integers(dim))
    mask[j_rand] = False
    return np.where(mask, population[i], v)


def _trials(population, rng, F, keep_prob):
    n_pop, dim = population.shape
    idx = _partners(rng, n_pop, n_pop)
    mutants = population[idx[:, 0]] + F * (population[idx[:, 1]] - population[idx[:, 2]])
    keep = rng.random((n_pop, dim)) < keep_prob
    j_rand = rng.integers(dim, size=n_pop)
    keep[np.arange(n_pop), j_rand] = False
    return np.where(keep, population, mutants)


def de_select(target: Individual, trial, cost_fn) -> Individual:
    """Greedy selection: the trial replaces the target only if strictly cheaper.

    ``cost_fn`` is called once on the trial. NaN costs never win.
    """
    trial = np.asarray(trial, dtype=float)
    cost = cost_fn(trial)
    cost = cost.total if isinstance(cost, CostValue) else float(cost)
    if math.isnan(cost):
        log.warning("trial cost is NaN; keeping target")
        return target
    if cost < target.cost:
        return Individual(trial, cost)
    return target


def run_de(config: DEConfig, problem, topology: Topology | None = None,
           executor=None, sink=None) -> RunResult:
    """Minimize ``problem`` until the best cost reaches ``epsilon0`` or the budget runs out.

    Parameters
    ----------
    config : DEConfig
    problem : callable or object with ``batch``
        Cost over parameter vectors. ``NetworkCost`` provides both ``dim``
        and ``topology``.
    topology : Topology, optional
        Needed for symmetry breaking when ``problem`` carries none.
    executor : concurrent.futures.Executor, optional
        Evaluates trial chunks concurrently; results are unaffected.
    sink : callable, optional
        Receives each ``(eval_count, best_cost)`` checkpoint as it is made.
    """
    topology = topology or getattr(problem, "topology", None)
    dim = getattr(problem, "dim", None) or (topology.dim if topology else None)
    if dim is None:
        raise ValueError("problem dimension unknown; pass a problem with .dim or a topology")
    if config.symmetry_breaking and topology is None:
        raise ValueError("symmetry breaking needs the network topology")

    rng = np.random.default_rng(config.seed)
    trace = []

    def checkpoint(evals, cost):
        trace.append((evals, cost))
        if sink is not None:
            sink(evals, cost)

    n_init = min(config.Np, config.max_evals)
    pop, _ = init_population(config, dim, rng)
    costs = np.full(config.Np, np.inf)
    costs[:n_init] = _evaluate(problem, pop[:n_init], executor)
    costs[np.isnan(costs)] = np.inf
    evals = n_init
    best = int(np.argmin(costs))
    checkpoint(evals, float(costs[best]))
    generations = 0

    while costs[best] > config.epsilon0 and evals < config.max_evals:
        if config.symmetry_breaking:
            reference = pop[best].copy()
            for i, draw in enumerate(draw_mgod(rng, topology, config.Np)):
                mgod_apply(topology, pop[i], reference, draw)
            if config.debug:
                _check_neutral(problem, pop, costs, executor)
        trials = _trials(pop, rng, config.F, config.keep_prob)
        n_eval = min(config.Np, config.max_evals - evals)
        trial_costs = np.full(config.Np, np.nan)
        trial_costs[:n_eval] = _evaluate(problem, trials[:n_eval], executor)

        hits = np.flatnonzero(trial_costs[:n_eval] <= config.epsilon0)
        if hits.size:
            # a serial run stops at the first trial that meets the threshold
            n_eval = int(hits[0]) + 1
            trial_costs[n_eval:] = np.nan
        evals += n_eval

        if np.isnan(trial_costs[:n_eval]).any():
            log.warning("NaN trial cost treated as non-improving")
        better = trial_costs < costs
        pop[better] = trials[better]
        costs[better] = trial_costs[better]
        generations += 1

        prev = costs[best]
        best = int(np.argmin(costs))
        if costs[best] < prev:
            checkpoint(evals, float(costs[best]))

    success = bool(costs[best] <= config.epsilon0)
    if trace[-1][0] != evals:
        checkpoint(evals, float(costs[best]))
    return RunResult(success, evals, Individual(pop[best].copy(), float(costs[best])),
                     generations, trace)


def _check_neutral(problem, pop, costs, executor, rtol=1e-9):
    fresh = _evaluate(problem, pop, executor)
    finite = np.isfinite(costs)
    bad = ~np.isclose(fresh[finite], costs[finite], rtol=rtol, atol=0.0)
    if bad.any():
        raise AssertionError(f"symmetry step changed {bad.sum()} stored costs")
