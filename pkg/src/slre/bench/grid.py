"""Experiment grid over methods x labels-per-class x seeds, with N/I/T inference regimes.

Regimes: ``N`` decodes the inductively trained model without constraints,
``I`` decodes the same model under the constraint, ``T`` trains with the test
inputs in the unlabeled pool and decodes without constraints.  The base method
never reads unlabeled data, so its ``T`` numbers are its ``N`` numbers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from slre.bench.metrics import MetricsReport
from slre.bench.synthetic import SyntheticSpec, generate
from slre.train import METHODS, Constraint, TrainConfig, score_split, train

__all__ = ["ExperimentConfig", "CellResult", "GridResults", "run_cell", "run_grid", "REGIMES"]

log = logging.getLogger(__name__)

REGIMES = ("N", "I", "T")
METRICS = ("avg_f1", "tri_f1", "violation_rate")


@dataclass(frozen=True)
class ExperimentConfig:
    spec: SyntheticSpec = field(default_factory=SyntheticSpec)
    methods: tuple = METHODS
    labels: tuple = (3, 5, 10, 15, 25, 50, 75)
    seeds: tuple = (0, 1, 2)
    regimes: tuple = REGIMES
    train: TrainConfig = field(default_factory=TrainConfig)
    constraint_weights: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        bad = set(self.regimes) - set(REGIMES)
        if bad:
            raise ValueError(f"unknown regimes {sorted(bad)}")

    def cells(self) -> list[tuple[str, int, int]]:
        return [(m, n, s) for m in self.methods for n in self.labels for s in self.seeds]

    def train_config(self, method: str, labels: int, seed: int, transductive: bool) -> TrainConfig:
        weight = self.constraint_weights.get(method, self.train.constraint_weight)
        return replace(self.train, method=method, labels_per_class=labels, seed=seed,
                       transductive=transductive, constraint_weight=weight)


@dataclass(frozen=True)
class CellResult:
    method: str
    labels: int
    seed: int
    reports: tuple  # MetricsReport per requested regime


def run_cell(config: ExperimentConfig, method: str, labels: int, seed: int) -> CellResult:
    spec = replace(config.spec, labels_per_class=labels, seed=seed)
    ds = generate(spec)
    constraint = Constraint.from_ontology(spec.ontology)
    tags = dict(method=method, labels_per_class=labels, seed=seed)
    # CoDL's pool is the unlabeled split, which never contains labeled instances
    inductive = train(config.train_config(method, labels, seed, False), ds.labeled, ds.unlabeled,
                      ds.validation, constraint)
    reports = []
    for regime in config.regimes:
        if regime == "N":
            reports.append(score_split(inductive.params, ds.test, constraint, regime="N", **tags))
        elif regime == "I":
            reports.append(score_split(inductive.params, ds.test, constraint, constrained=True,
                                       regime="I", **tags))
        else:
            params = inductive.params
            if method != "base":
                params = train(config.train_config(method, labels, seed, True), ds.labeled,
                               ds.unlabeled, ds.validation, constraint, test_inputs=ds.test).params
            reports.append(score_split(params, ds.test, constraint, regime="T", **tags))
    log.info("cell %s/%d/%d done", method, labels, seed)
    return CellResult(method, labels, seed, tuple(reports))


def _run_cell_args(args):
    return run_cell(*args)


def _stats(values: list[float]) -> tuple[float, float]:
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, stderr


@dataclass
class GridResults:
    config: ExperimentConfig
    cells: list = field(default_factory=list)

    def reports(self) -> list[MetricsReport]:
        return [r for c in self.cells for r in c.reports]

    def values(self, method: str, labels: int, regime: str, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.reports()
                if r.method == method and r.labels_per_class == labels and r.regime == regime]

    def summary(self, method: str, labels: int, regime: str, metric: str) -> tuple[float, float]:
        """Mean and standard error over seeds."""
        vals = self.values(method, labels, regime, metric)
        if not vals:
            raise KeyError((method, labels, regime, metric))
        return _stats(vals)

    def mean(self, method: str, labels: int, regime: str, metric: str) -> float:
        return self.summary(method, labels, regime, metric)[0]

    def table_rows(self, metric: str, scale: float = 100.0) -> list[list[str]]:
        """Rows of a Table-1 style block: one row per method, columns labels x regimes."""
        header = ["method"] + [f"{n}/{g}" for n in self.config.labels for g in self.config.regimes]
        rows = [header]
        for m in self.config.methods:
            row = [m]
            for n in self.config.labels:
                for g in self.config.regimes:
                    try:
                        mean, se = self.summary(m, n, g, metric)
                        row.append(f"{scale * mean:.2f}±{scale * se:.2f}")
                    except KeyError:
                        row.append("")
            rows.append(row)
        return rows

    def write(self, out_dir) -> dict[str, Path]:
        """Write ``results.tsv`` (Table-1 layout), ``runs.tsv`` and ``plot_data.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"results": out / "results.tsv", "runs": out / "runs.tsv", "plot": out / "plot_data.csv"}
        with open(paths["results"], "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            for i, metric in enumerate(METRICS):
                if i:
                    w.writerow([])
                w.writerow([f"# {metric} (percent, mean±stderr over {len(self.config.seeds)} seeds)"])
                w.writerows(self.table_rows(metric))
        with open(paths["runs"], "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["method", "labels", "seed", "regime", *METRICS])
            for r in self.reports():
                w.writerow([r.method, r.labels_per_class, r.seed, r.regime,
                            *(repr(getattr(r, k)) for k in METRICS)])
        with open(paths["plot"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "labels", "regime", "metric", "mean", "stderr"])
            for m in self.config.methods:
                for g in self.config.regimes:
                    for n in self.config.labels:
                        for metric in METRICS:
                            try:
                                mean, se = self.summary(m, n, g, metric)
                            except KeyError:
                                continue
                            w.writerow([m, n, g, metric, repr(mean), repr(se)])
        return paths


def run_grid(config: ExperimentConfig) -> GridResults:
    """Run every (method, labels, seed) cell; results are ordered by cell key regardless of ``jobs``."""
    cells = config.cells()
    if config.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_cell_args, [(config, *c) for c in cells]))
    else:
        results = [run_cell(config, *c) for c in cells]
    results.sort(key=lambda c: (config.methods.index(c.method), c.labels, c.seed))
    return GridResults(config, results)
