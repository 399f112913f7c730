"""Repeated seeded runs and their MFE / robustness statistics."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import Dataset, classification_success, load_dataset
from .de import DEConfig, run_de
from .network import NetworkCost, Topology, effective_params, hidden_outputs

__all__ = ["ExperimentConfig", "RunRecord", "ExperimentReport", "run_experiment",
           "emit_report", "emit_comparison", "mfe_ratio", "test_metric", "fmt",
           "table_row", "load_experiment_data"]

VARIANTS = ("de", "de-sb")
SUMMARY_COLUMNS = ["dataset", "topology", "variant", "Np", "runs", "successes", "robustness",
                   "MFE", "sigma_MFE", "test_metric", "test_metric_mean", "test_metric_std"]
RUN_COLUMNS = ["run", "seed", "success", "evals_used", "generations", "best_cost",
               "test_metric"]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    topology: Topology
    variant: str
    de: DEConfig
    runs: int = 50
    base_seed: int = 0
    data_seed: int = 0
    sigma: float = 5e-3
    penalty_mode: str = "literal"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.runs < 1:
            raise ValueError(f"runs must be at least 1, got {self.runs}")

    def run_config(self, run: int) -> DEConfig:
        return replace(self.de, seed=self.base_seed + run,
                       symmetry_breaking=self.variant == "de-sb")


@dataclass
class RunRecord:
    run: int
    seed: int
    success: bool
    evals_used: int
    generations: int
    best_cost: float
    test_metric: float | None
    trace: list[tuple[int, float]] = field(default_factory=list)
    best_position: np.ndarray | None = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    kind: str
    records: list[RunRecord]

    @property
    def successes(self) -> list[RunRecord]:
        return [r for r in self.records if r.success]

    @property
    def robustness(self) -> float:
        return len(self.successes) / len(self.records)

    @property
    def mfe(self) -> float | None:
        evals = [r.evals_used for r in self.successes]
        return float(np.mean(evals)) if evals else None

    @property
    def sigma_mfe(self) -> float | None:
        evals = [r.evals_used for r in self.successes]
        return float(np.std(evals, ddof=1)) if len(evals) > 1 else None

    @property
    def test_metric_name(self) -> str:
        return "test_mse" if self.kind == "regression" else "test_success_pct"

    @property
    def test_metric_mean(self) -> float | None:
        vals = [r.test_metric for r in self.successes]
        return float(np.mean(vals)) if vals else None

    @property
    def test_metric_std(self) -> float | None:
        vals = [r.test_metric for r in self.successes]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else None


def test_metric(dataset: Dataset, topology: Topology, theta, penalty_mode="literal") -> float:
    """Test MSE (regression) or winner-takes-all success in percent (classification).

    Output weights are solved on the training partition only.
    """
    cost = NetworkCost(topology, dataset.x_train, dataset.y_train, penalty_mode)
    w = cost.output_weights(theta)
    scaled, _, _ = effective_params(topology, theta, penalty_mode)
    if dataset.kind == "classification":
        return classification_success(topology, scaled, w, dataset.x_test, dataset.y_test)
    h = hidden_outputs(topology, scaled, dataset.x_test)[0]
    resid = dataset.y_test - h @ w.T
    return float(np.mean(resid ** 2))


def load_experiment_data(config: ExperimentConfig) -> Dataset:
    """Dataset of ``config``, checked against its topology."""
    data = load_dataset(config.dataset, seed=config.data_seed, sigma=config.sigma)
    if (data.d, data.q) != (config.topology.d, config.topology.q):
        raise ValueError(f"topology {config.topology} does not fit dataset {config.dataset} "
                         f"(d={data.d}, q={data.q})")
    return data


def _single_run(config: ExperimentConfig, run: int, data: Dataset | None = None) -> RunRecord:
    data = data or load_experiment_data(config)
    problem = NetworkCost(config.topology, data.x_train, data.y_train, config.penalty_mode)
    de_config = config.run_config(run)
    result = run_de(de_config, problem)
    metric = (test_metric(data, config.topology, result.best.position, config.penalty_mode)
              if result.success else None)
    return RunRecord(run, de_config.seed, result.success, result.evals_used, result.generations,
                     result.best.cost, metric, result.trace, result.best.position)


def run_experiment(config: ExperimentConfig, workers: int = 0) -> ExperimentReport:
    """Execute ``config.runs`` independently seeded runs.

    With ``workers > 0`` runs are spread over that many processes; each run
    owns its seed, so the report is identical to the sequential one.
    """
    data = load_experiment_data(config)
    if workers > 0:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_single_run, [config] * config.runs, range(config.runs)))
    else:
        records = [_single_run(config, run, data) for run in range(config.runs)]
    return ExperimentReport(config, data.kind, records)


def mfe_ratio(report_de: ExperimentReport, report_desb: ExperimentReport) -> float:
    """MFE(DE) / MFE(DE-SB)."""
    if report_de.mfe is None or report_desb.mfe is None:
        raise ValueError("MFE undefined: a report has no successful run")
    return report_de.mfe / report_desb.mfe


def fmt(value) -> str:
    """Deterministic text form: ``NA`` for missing, shortest round-trip repr for floats."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _summary_row(report):
    c = report.config
    return [c.dataset, str(c.topology), c.variant, c.de.Np, len(report.records),
            len(report.successes), report.robustness, report.mfe, report.sigma_mfe,
            report.test_metric_name, report.test_metric_mean, report.test_metric_std]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def emit_report(report: ExperimentReport, out_dir) -> str:
    """Write ``summary.csv``, ``runs.csv`` and ``traces/run_NNN.csv`` under ``out_dir``.

    Returns the summary path.
    """
    traces = os.path.join(out_dir, "traces")
    os.makedirs(traces, exist_ok=True)
    summary = os.path.join(out_dir, "summary.csv")
    _write_csv(summary, SUMMARY_COLUMNS, [_summary_row(report)])
    _write_csv(os.path.join(out_dir, "runs.csv"), RUN_COLUMNS,
               [[r.run, r.seed, r.success, r.evals_used, r.generations, r.best_cost,
                 r.test_metric] for r in report.records])
    for r in report.records:
        _write_csv(os.path.join(traces, f"run_{r.run:03d}.csv"),
                   ["eval_count", "best_total_cost"], r.trace)
    return summary


def emit_comparison(report_de: ExperimentReport, report_desb: ExperimentReport, out_dir) -> float | None:
    """Combined two-row summary plus ``ratio.csv``; returns the MFE ratio or None."""
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS,
               [_summary_row(report_de), _summary_row(report_desb)])
    try:
        ratio = mfe_ratio(report_de, report_desb)
    except ValueError:
        ratio = None
    _write_csv(os.path.join(out_dir, "ratio.csv"), ["dataset", "topology", "MFE_DE_over_MFE_DESB"],
               [[report_de.config.dataset, str(report_de.config.topology), ratio]])
    return ratio


def table_row(report: ExperimentReport) -> str:
    """Human-readable summary row: ``[Np, rho] MFE +- sigma``."""
    c = report.config
    mfe = "NA" if report.mfe is None else f"{report.mfe:.3g}"
    sig = "" if report.sigma_mfe is None else f" +- {report.sigma_mfe:.2g}"
    metric = ("" if report.test_metric_mean is None
              else f"  {report.test_metric_name}={report.test_metric_mean:.4g}")
    return f"{c.dataset:12s} {str(c.topology):12s} {c.variant:6s} [{c.de.Np},{report.robustness:g}] {mfe}{sig}{metric}"
