"""Acceptance criteria 1-8; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
happen; they are also collected in the terminal summary.
"""

import os
from fractions import Fraction

import numpy as np
import pytest

from desb.cli import main
from desb.config import load_config
from desb.de import DEConfig
from desb.experiments import ExperimentConfig, run_experiment
from desb.network import (RIDGE, Topology, hidden_outputs, least_squares_weights, param_norm,
                          parse_topology, penalized_cost)
from desb.symmetry import (SymmetryOp, apply_op, draw_mgod, ideal_separation_bruteforce,
                           mgod_apply)

pytestmark = pytest.mark.slow

INVARIANCE_RTOL = 1e-9
GREEDY_ATOL = 1e-12
GREEDY_RATE = 0.99
LS_TOL = 1e-8
SYN5_MFE = (2e4, 2e5)
SINC_DESB_MFE_MAX = 1e6
SINC_DE_BUDGET = 2_000_000
SINC_SLOWDOWN = 5.0
SINC_DE_QUALIFY = 7
IRIS_MFE = (5e3, 6e4)
IRIS_ACCURACY = 97.0
TEST_MSE = (3e-5, 1.5e-4)


def every_op(top):
    for l in top.hidden_layers:
        for n in range(1, top.size(l) + 1):
            yield SymmetryOp("point", l, (n,))
            for m in range(n + 1, top.size(l) + 1):
                yield SymmetryOp("permutation", l, (n, m))


def test_c1_symmetry_invariance(criterion):
    rng = np.random.default_rng(1)
    worst_rel, norm_exact, checked = 0.0, True, 0
    for spec in ("1-3-1", "1-5-1", "2-3-1-3-1"):
        top = parse_topology(spec)
        x = rng.uniform(-1, 1, (50, top.d))
        y = rng.normal(size=(50, top.q))
        for _ in range(100):
            # spread of norms so the penalty branch is exercised too
            theta = rng.normal(size=top.dim) * rng.uniform(0.2, 3.0)
            base = penalized_cost(top, theta, x, y).total
            norm = param_norm(theta)
            for op in every_op(top):
                moved = apply_op(top, theta, op)
                worst_rel = max(worst_rel, abs(penalized_cost(top, moved, x, y).total - base) / base)
                norm_exact &= param_norm(moved) == norm
                checked += 1
    ok = worst_rel <= INVARIANCE_RTOL and norm_exact
    criterion("C1 symmetry invariance", ok,
              f"{checked} operator applications, max rel cost change {worst_rel:.2e}, "
              f"norm exact={norm_exact}")
    assert ok


def test_c2_mgod(criterion):
    rng = np.random.default_rng(2)
    tops = [parse_topology(s) for s in ("1-2-1", "1-3-1", "1-5-1", "2-3-1-3-1", "4-5-1-5-3")]
    increases = 0
    for t in range(10_000):
        top = tops[t % len(tops)]
        theta = rng.uniform(-1, 1, top.dim)
        ref = rng.uniform(-1, 1, top.dim)
        before = np.linalg.norm(theta - ref)
        mgod_apply(top, theta, ref, draw_mgod(rng, top, 1)[0])
        increases += np.linalg.norm(theta - ref) > before
    monotone = increases == 0

    top = Topology((1, 2, 1))
    reached = 0
    for _ in range(200):
        theta = rng.uniform(-1, 1, top.dim)
        ref = rng.uniform(-1, 1, top.dim)
        _, hat = ideal_separation_bruteforce(top, theta, ref)
        for draw in draw_mgod(rng, top, 1000):
            mgod_apply(top, theta, ref, draw)
        reached += np.linalg.norm(theta - ref) - np.linalg.norm(hat - ref) <= GREEDY_ATOL
    rate = reached / 200
    ok = monotone and rate >= GREEDY_RATE
    criterion("C2 MGOD monotone + greedy reaches ideal separation", ok,
              f"{increases} increases in 10^4 steps; greedy optimum in {reached}/200 = {rate:.0%}, "
              f"required {GREEDY_RATE:.0%}")
    assert ok


def exact_ridge_solution(h, y, ridge):
    """Dense ridge normal equations solved in exact rational arithmetic."""
    k, n = h.shape
    hf = [[Fraction(float(v)) for v in row] for row in h]
    yf = [[Fraction(float(v)) for v in row] for row in y]
    lam = Fraction(ridge)
    # augmented matrix [H^T H + lam I | H^T Y]
    a = [[sum(hf[r][i] * hf[r][j] for r in range(k)) + (lam if i == j else 0)
          for j in range(n)] + [sum(hf[r][i] * yf[r][c] for r in range(k))
                                for c in range(y.shape[1])]
         for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [u - f * v for u, v in zip(a[r], a[col])]
    return np.array([[float(a[i][n + c] / a[i][i]) for i in range(n)]
                     for c in range(y.shape[1])])


def test_c3_least_squares(criterion):
    rng = np.random.default_rng(3)
    worst_w, worst_orth, worst_plain = 0.0, 0.0, 0.0
    for t in range(100):
        n_hidden = int(rng.integers(1, 7))
        k = int(rng.integers(n_hidden + 1, 51))
        q = int(rng.integers(1, 4))
        top = Topology((2, n_hidden, q))
        # a third of the instances use large weights: saturated, ill-conditioned designs
        theta = rng.uniform(-1, 1, top.dim) * (4.0 if t % 3 == 0 else 1.0)
        x = rng.uniform(-1, 1, (k, 2))
        y = rng.normal(size=(k, q))
        h = hidden_outputs(top, theta[None], x)[0]
        w = least_squares_weights(h, y)
        worst_w = max(worst_w, np.max(np.abs(w - exact_ridge_solution(h, y, RIDGE))))
        resid = y - h @ w.T
        # the ridge shifts the stationarity condition to H^T r = ridge * W
        worst_orth = max(worst_orth, np.max(np.abs(h.T @ resid - RIDGE * w.T)))
        worst_plain = max(worst_plain, np.max(np.abs(h.T @ resid)))
    ok = worst_w <= LS_TOL and worst_orth <= LS_TOL
    criterion("C3 least-squares output layer", ok,
              f"max |W - exact| {worst_w:.1e}, max |H^T r - ridge W| {worst_orth:.1e} "
              f"(without the ridge term {worst_plain:.1e})")
    assert ok


@pytest.fixture(scope="module")
def syn5_reports():
    return {v: run_experiment(load_config(preset=f"syn5_131_{v.replace('-', '')}")
                              .experiment(v, runs=20))
            for v in ("de", "de-sb")}


def test_c4_syn5(criterion, syn5_reports):
    de, sb = syn5_reports["de"], syn5_reports["de-sb"]
    ok = (de.robustness == 1 and sb.robustness == 1
          and SYN5_MFE[0] <= de.mfe <= SYN5_MFE[1] and sb.mfe < de.mfe)
    criterion("C4 syn5 1-3-1", ok,
              f"rho DE {de.robustness:g} / DE-SB {sb.robustness:g}; "
              f"MFE DE {de.mfe:.3g} +- {de.sigma_mfe:.2g}, DE-SB {sb.mfe:.3g} +- {sb.sigma_mfe:.2g}")
    assert ok


def sinc_config(variant, max_evals, runs=10):
    de = DEConfig(Np=60, epsilon0=5e-5, max_evals=max_evals)
    return ExperimentConfig("sinc", parse_topology("1-6-1"), variant, de, runs=runs)


@pytest.fixture(scope="module")
def sinc_reports():
    sb = run_experiment(sinc_config("de-sb", SINC_DE_BUDGET))
    # A plain run qualifies iff it needs more than 5x the DE-SB mean (or fails
    # at 2e6). Capping the budget at that threshold decides the same question
    # without spending the full 2e6 on runs already known to qualify.
    cap = min(SINC_DE_BUDGET, int(SINC_SLOWDOWN * sb.mfe)) if sb.mfe else SINC_DE_BUDGET
    return {"de-sb": sb, "de": run_experiment(sinc_config("de", cap)), "cap": cap}


def test_c5_sinc_speedup(criterion, sinc_reports):
    sb, de, cap = sinc_reports["de-sb"], sinc_reports["de"], sinc_reports["cap"]
    sb_ok = sb.robustness == 1 and max(r.evals_used for r in sb.records) < SINC_DESB_MFE_MAX
    qualify = sum(not r.success for r in de.records)
    ok = sb_ok and qualify >= SINC_DE_QUALIFY
    criterion("C5 sinc 1-6-1 speedup direction", ok,
              f"DE-SB rho {sb.robustness:g}, MFE {sb.mfe:.3g}, max {max(r.evals_used for r in sb.records)}; "
              f"plain DE slower than {cap} evals in {qualify}/10 runs")
    assert ok


@pytest.fixture(scope="module")
def iris_report():
    return run_experiment(load_config(preset="iris_433_de").experiment("de", runs=20))


def test_c6_iris(criterion, iris_report):
    rep = iris_report
    ok = (rep.robustness == 1 and IRIS_MFE[0] <= rep.mfe <= IRIS_MFE[1]
          and rep.test_metric_mean >= IRIS_ACCURACY)
    criterion("C6 iris 4-3-3", ok,
              f"rho {rep.robustness:g}, MFE {rep.mfe:.3g} +- {rep.sigma_mfe:.2g}, "
              f"test success {rep.test_metric_mean:.2f}% +- {rep.test_metric_std:.2g} "
              f"(required >= {IRIS_ACCURACY}%)")
    assert ok


def test_c7_test_mse(criterion, syn5_reports, sinc_reports):
    values = []
    for rep in (*syn5_reports.values(), sinc_reports["de-sb"], sinc_reports["de"]):
        values += [r.test_metric for r in rep.successes]
    ok = bool(values) and all(TEST_MSE[0] <= v <= TEST_MSE[1] for v in values)
    criterion("C7 regression test MSE", ok,
              f"{len(values)} successful runs, test MSE in [{min(values):.3g}, {max(values):.3g}]")
    assert ok


def test_c8_determinism(criterion, tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("dataset = sinc\ntopology = 1-3-1\nvariant = both\nNp = 30\n"
                   "epsilon0 = 1e-3\nmax_evals = 20000\nruns = 3\nseed = 11\n")
    outputs = []
    for i, threads in enumerate((0, 0, 2, 3)):
        out = tmp_path / f"out{i}"
        assert main(["bench", str(cfg), "--output-dir", str(out), "--threads", str(threads)]) == 0
        files = {}
        for d, _, names in os.walk(out):
            for n in names:
                p = os.path.join(d, n)
                files[os.path.relpath(p, out)] = open(p, "rb").read()
        outputs.append(files)
    ok = all(o == outputs[0] for o in outputs) and len(outputs[0]) == 2 + 2 * (2 + 3)
    criterion("C8 determinism across runs and --threads", ok,
              f"{len(outputs[0])} files compared over threads 0, 0, 2, 3")
    assert ok
