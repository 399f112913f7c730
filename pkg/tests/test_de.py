import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from desb.datasets import gen_regression
from desb.de import (DEConfig, Individual, _partners, de_select, de_trial, init_population,
                     run_de)
from desb.network import CostValue, NetworkCost, param_norm, parse_topology


@pytest.fixture(scope="module")
def syn5_cost():
    data = gen_regression("syn5")
    return NetworkCost(parse_topology("1-3-1"), data.x_train, data.y_train)


def sphere(theta):
    return float(np.sum(np.asarray(theta) ** 2))


class Sphere:
    def __init__(self, dim):
        self.dim = dim
        self.calls = 0

    def __call__(self, theta):
        self.calls += 1
        return sphere(theta)


def test_mutation_example():
    pop = np.array([[9.0, 9.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    u = de_trial(0, pop, None, F=0.5, Cr=0.0, crossover="target", partners=(1, 2, 3), j_rand=0)
    np.testing.assert_array_equal(u, [0.5, -0.5])


def test_cr_zero_target_convention_gives_mutant(rng):
    pop = rng.normal(size=(6, 5))
    v = pop[1] + 0.5 * (pop[2] - pop[3])
    for j in range(5):
        u = de_trial(0, pop, rng, F=0.5, Cr=0.0, crossover="target", partners=(1, 2, 3), j_rand=j)
        np.testing.assert_array_equal(u, v)


def test_cr_one_target_convention_changes_one_coordinate(rng):
    pop = rng.normal(size=(6, 5))
    for _ in range(20):
        u = de_trial(4, pop, rng, Cr=1.0, crossover="target")
        assert np.count_nonzero(u != pop[4]) == 1


def test_mutant_convention_mirrors_target(rng):
    pop = rng.normal(size=(6, 5))
    v = pop[1] + 0.5 * (pop[2] - pop[3])
    u = de_trial(0, pop, rng, Cr=1.0, crossover="mutant", partners=(1, 2, 3))
    np.testing.assert_array_equal(u, v)
    for _ in range(20):
        u = de_trial(0, pop, rng, Cr=0.0, crossover="mutant")
        assert np.count_nonzero(u != pop[0]) == 1


def test_explicit_mask_with_forced_coordinate():
    pop = np.arange(20.0).reshape(4, 5)
    u = de_trial(0, pop, None, F=1.0, partners=(1, 2, 3), mask=[True] * 5, j_rand=2)
    v = pop[1] + (pop[2] - pop[3])
    np.testing.assert_array_equal(u, [0, 1, v[2], 3, 4])


def test_partners_distinct(rng):
    for n_pop in (4, 5, 17):
        idx = _partners(rng, n_pop, n_pop)
        full = np.column_stack([np.arange(n_pop), idx])
        for row in full:
            assert len(set(row)) == 4
        assert idx.min() >= 0 and idx.max() < n_pop


def test_partners_uniform(rng):
    counts = np.zeros((5, 5))
    for _ in range(4000):
        idx = _partners(rng, 5, 5)
        for i in range(5):
            counts[i, idx[i, 0]] += 1
    # each row's first partner is uniform over the 4 other indices
    off = counts[~np.eye(5, dtype=bool)].reshape(5, 4) / 4000
    np.testing.assert_allclose(off, 0.25, atol=0.03)
    assert np.all(np.diag(counts) == 0)


def test_init_population_in_box(rng):
    pos, costs = init_population(DEConfig(Np=50), 7, rng)
    assert pos.shape == (50, 7) and costs is None
    assert pos.min() >= -1 and pos.max() <= 1


def test_init_population_deterministic():
    a, _ = init_population(DEConfig(Np=10), 3, np.random.default_rng(4))
    b, _ = init_population(DEConfig(Np=10), 3, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)


def test_init_population_costs():
    p = Sphere(3)
    pos, costs = init_population(DEConfig(Np=10), 3, np.random.default_rng(4), problem=p)
    np.testing.assert_allclose(costs, np.sum(pos ** 2, axis=1))
    assert p.calls == 10


def test_small_population_rejected(rng):
    with pytest.raises(ValueError):
        DEConfig(Np=3)
    with pytest.raises(ValueError):
        de_trial(0, np.zeros((3, 2)), rng)


@pytest.mark.parametrize("kwargs", [{"F": 0}, {"Cr": 1.5}, {"max_evals": 0},
                                    {"epsilon0": 0}, {"crossover": "other"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        DEConfig(Np=10, **kwargs)


def test_keep_prob():
    assert DEConfig(Np=10, Cr=0.9).keep_prob == pytest.approx(0.1)
    assert DEConfig(Np=10, Cr=0.9, crossover="target").keep_prob == 0.9


def test_select_strict():
    target = Individual(np.zeros(2), 1.0)
    won = de_select(target, [1.0, 1.0], lambda t: 0.5)
    assert won.cost == 0.5 and np.array_equal(won.position, [1.0, 1.0])
    assert de_select(target, [1.0, 1.0], lambda t: 1.0) is target
    assert de_select(target, [1.0, 1.0], lambda t: CostValue(0.2, 0.1)).cost == pytest.approx(0.3)


def test_select_nan_logged(caplog):
    target = Individual(np.zeros(2), 1.0)
    with caplog.at_level(logging.WARNING, logger="desb.de"):
        assert de_select(target, [1.0, 1.0], lambda t: float("nan")) is target
    assert "NaN" in caplog.text


def test_select_calls_cost_once():
    p = Sphere(2)
    de_select(Individual(np.zeros(2), 1.0), [0.1, 0.1], p)
    assert p.calls == 1


def test_huge_threshold_stops_after_init():
    p = Sphere(4)
    res = run_de(DEConfig(Np=12, epsilon0=1e9), p)
    assert res.success and res.evals_used == 12 and res.generations == 0 and p.calls == 12


def test_sphere_converges_and_counts_evaluations():
    p = Sphere(3)
    res = run_de(DEConfig(Np=20, epsilon0=1e-6, seed=3), p)
    assert res.success and res.best.cost <= 1e-6
    assert res.evals_used == p.calls
    assert res.trace[0][0] == 20 and res.trace[-1][0] == res.evals_used


def test_budget_truncates():
    p = Sphere(5)
    res = run_de(DEConfig(Np=10, epsilon0=1e-300, max_evals=95), p)
    assert not res.success and res.evals_used == 95 == p.calls


def test_budget_smaller_than_population():
    p = Sphere(2)
    res = run_de(DEConfig(Np=10, epsilon0=1e-300, max_evals=4), p)
    assert res.evals_used == 4 == p.calls and np.isfinite(res.best.cost)


def test_trace_monotone(syn5_cost):
    res = run_de(DEConfig(Np=40, epsilon0=1e-3, seed=1, symmetry_breaking=True), syn5_cost)
    evals = [e for e, _ in res.trace]
    costs = [c for _, c in res.trace]
    assert evals == sorted(evals)
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == res.best.cost


def test_elitism_via_sink(syn5_cost):
    seen = []
    run_de(DEConfig(Np=40, epsilon0=1e-3, seed=2), syn5_cost, sink=lambda e, c: seen.append(c))
    assert all(b <= a for a, b in zip(seen, seen[1:]))


@pytest.mark.parametrize("sb", [False, True])
def test_reproducible(syn5_cost, sb):
    cfg = DEConfig(Np=30, epsilon0=1e-3, seed=9, symmetry_breaking=sb, max_evals=6000)
    a, b = run_de(cfg, syn5_cost), run_de(cfg, syn5_cost)
    assert a.trace == b.trace and a.evals_used == b.evals_used
    np.testing.assert_array_equal(a.best.position, b.best.position)


def test_executor_does_not_change_result(syn5_cost):
    cfg = DEConfig(Np=70, epsilon0=1e-3, seed=5, symmetry_breaking=True, max_evals=8000)
    ref = run_de(cfg, syn5_cost)
    with ThreadPoolExecutor(3) as pool:
        par = run_de(cfg, syn5_cost, executor=pool)
    assert par.trace == ref.trace and par.evals_used == ref.evals_used
    np.testing.assert_array_equal(par.best.position, ref.best.position)


def test_symmetry_phase_cost_neutral(syn5_cost):
    # debug mode re-evaluates after every symmetry phase and raises on drift
    cfg = DEConfig(Np=30, epsilon0=1e-3, seed=4, symmetry_breaking=True, debug=True,
                   max_evals=3000)
    run_de(cfg, syn5_cost)


def test_symmetry_breaking_needs_topology():
    with pytest.raises(ValueError):
        run_de(DEConfig(Np=10, symmetry_breaking=True), Sphere(3))


def test_feasible_on_success(syn5_cost):
    res = run_de(DEConfig(Np=80, seed=0, symmetry_breaking=True), syn5_cost)
    assert res.success
    assert param_norm(res.best.position) <= np.sqrt(syn5_cost.dim) + 1e-6
