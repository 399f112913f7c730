"""Command line: ``desb gen | run | bench | presets``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import datasets
from .config import DEFAULT_OUTPUT, OUTPUT_ENV, load_config, preset_names
from .de import run_de
from .experiments import (emit_comparison, emit_report, fmt, load_experiment_data,
                          run_experiment, table_row, test_metric)
from .network import NetworkCost

log = logging.getLogger("desb")


def cmd_gen(args) -> int:
    if args.problem in datasets.REGRESSION_TARGETS:
        data = datasets.gen_regression(args.problem, args.n_train, args.n_test,
                                       datasets.NoiseSpec(args.sigma, args.seed))
    else:
        data = datasets.load_builtin(args.problem)
    out = args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    os.makedirs(out, exist_ok=True)
    paths = datasets.write_dataset(data, os.path.join(out, args.problem))
    print(f"{args.problem}: {len(data.x_train)} train / {len(data.x_test)} test samples "
          f"(d={data.d}, q={data.q})")
    for p in paths:
        print(f"  wrote {p}")
    return 0


def _config(args):
    overrides = {"variant": getattr(args, "variant", None),
                 "output_dir": getattr(args, "output_dir", None),
                 "runs": getattr(args, "runs", None),
                 "seed": getattr(args, "seed", None)}
    return load_config(args.config, args.preset, overrides)


def cmd_run(args) -> int:
    cfg = _config(args)
    if len(cfg.variants) != 1:
        raise ValueError("run takes a single variant; use bench for comparisons")
    exp = cfg.experiment(cfg.variants[0])
    data = load_experiment_data(exp)
    problem = NetworkCost(exp.topology, data.x_train, data.y_train, exp.penalty_mode)
    de_config = exp.run_config(0)
    executor = ThreadPoolExecutor(args.threads) if args.threads > 0 else None
    try:
        result = run_de(de_config, problem, executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()

    out = os.path.join(cfg.resolved_output_dir(), "run")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "trace.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eval_count", "best_total_cost"])
        writer.writerows([[fmt(e), fmt(c)] for e, c in result.trace])
    theta = result.best.position
    w = problem.output_weights(theta)
    with open(os.path.join(out, "params.txt"), "w") as fh:
        fh.write(f"# topology={exp.topology} variant={exp.variant} seed={de_config.seed}\n")
        fh.write("theta " + " ".join(fmt(float(v)) for v in theta) + "\n")
        for row in np.atleast_2d(w):
            fh.write("output_weights " + " ".join(fmt(float(v)) for v in row) + "\n")

    cost = problem.evaluate(theta)
    status = "success" if result.success else "failure"
    print(f"{status}: evals_used={result.evals_used} generations={result.generations}")
    print(f"train mse={cost.mse:.6g} penalty={cost.penalty:.6g} total={cost.total:.6g}")
    metric = test_metric(data, exp.topology, theta, exp.penalty_mode)
    name = "test mse" if data.kind == "regression" else "test success %"
    print(f"{name}={metric:.6g}")
    print(f"wrote {out}")
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = cfg.resolved_output_dir()
    reports = {}
    for variant in cfg.variants:
        report = run_experiment(cfg.experiment(variant), workers=args.threads)
        emit_report(report, os.path.join(out, variant) if len(cfg.variants) > 1 else out)
        print(table_row(report))
        reports[variant] = report
    if len(reports) == 2:
        ratio = emit_comparison(reports["de"], reports["de-sb"], out)
        print("MFE(DE)/MFE(DE-SB) = " + ("NA" if ratio is None else f"{ratio:.3g}"))
    print(f"wrote {out}")
    return 0


def cmd_presets(args) -> int:
    for name in preset_names():
        print(name)
    return 0


def _add_config_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="key=value config file")
    src.add_argument("--preset", help="name of a shipped preset (see 'desb presets')")
    p.add_argument("--variant", choices=["de", "de-sb", "both"], help="override the config variant")
    p.add_argument("--output-dir", help="override output_dir")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--threads", type=int, default=0,
                   help="worker cap; 0 runs sequentially (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="desb", description=(
        "Train fixed-topology tanh networks with differential evolution, "
        "with or without symmetry breaking."))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a benchmark dataset to text files")
    gen.add_argument("--problem", required=True,
                     choices=sorted(datasets.REGRESSION_TARGETS) + list(datasets.CLASSIFICATION_SETS))
    gen.add_argument("--seed", type=int, default=0, help="noise/input seed (regression)")
    gen.add_argument("--sigma", type=float, default=5e-3, help="target noise std (regression)")
    gen.add_argument("--n-train", type=int, default=200)
    gen.add_argument("--n-test", type=int, default=200)
    gen.add_argument("--out", help="output directory")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="one seeded optimization run")
    _add_config_args(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="repeated runs with MFE/robustness summary")
    _add_config_args(bench)
    bench.add_argument("--runs", type=int, help="override the run count")
    bench.set_defaults(func=cmd_bench)

    presets = sub.add_parser("presets", help="list shipped presets")
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"desb {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
