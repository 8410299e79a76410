"""Monte Carlo experiment runner: coverage, width, and RMSE per method.

Replications are independent work items with a deterministic seed-to-
replication mapping, so results are identical whatever the worker count
or scheduling order. Aggregates per (scenario, n, n_prime, method) cell
go to a tidy CSV plus a mirroring JSON summary.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import _worker_env
from .errors import ConfigurationError
from .pipeline import analyze
from .ppi import Method
from .synthgen import DEFAULT_N_LARGE, DEFAULT_N_SMALL, generate, scenario_config

DEFAULT_METHODS = (Method.PP_AIPW, Method.BASELINE_D1, Method.BASELINE_D2)
# known assignment probability used when a replication needs an
# RCT-style small dataset for the known-propensity method
RCT_PROPENSITY = 0.5
# a cell whose failure share exceeds this is marked invalid
MAX_FAILURE_SHARE = 0.10

CSV_COLUMNS = ("scenario", "n", "N_prime", "method", "alpha", "M", "coverage",
               "mean_width", "rmse", "mean_estimate", "failures")


@dataclass(frozen=True)
class ExperimentGrid:
    """Cartesian experiment layout: scenarios x dataset sizes."""

    scenarios: tuple[int, ...] = (1, 2, 3)
    n_values: tuple[int, ...] = (DEFAULT_N_SMALL,)
    n_prime_values: tuple[int, ...] = (DEFAULT_N_LARGE,)
    alpha: float = 0.05
    replications: int = 100
    master_seed: int = 0
    methods: tuple[Method, ...] = DEFAULT_METHODS

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("need at least one replication")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if not self.scenarios or not self.n_values or not self.n_prime_values:
            raise ConfigurationError("grid axes must be nonempty")
        for s in self.scenarios:
            if s not in (1, 2, 3):
                raise ConfigurationError(f"unknown scenario {s}")
        for n in self.n_values:
            if n < 2:
                raise ConfigurationError("n must be at least 2")
        for np_ in self.n_prime_values:
            if np_ < 4:
                raise ConfigurationError("N_prime must be at least 4")
        if not self.methods:
            raise ConfigurationError("need at least one method")

    def cells(self):
        for scenario in self.scenarios:
            for n in self.n_values:
                for n_prime in self.n_prime_values:
                    yield scenario, n, n_prime

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentGrid":
        try:
            methods = tuple(Method(m) for m in raw.get("methods",
                            [m.value for m in DEFAULT_METHODS]))
        except ValueError as exc:
            raise ConfigurationError(f"unknown method in config: {exc}") from None
        known = {"scenarios", "n_values", "n_prime_values", "alpha",
                 "replications", "master_seed", "methods"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            scenarios=tuple(raw.get("scenarios", (1, 2, 3))),
            n_values=tuple(raw.get("n_values", (DEFAULT_N_SMALL,))),
            n_prime_values=tuple(raw.get("n_prime_values", (DEFAULT_N_LARGE,))),
            alpha=float(raw.get("alpha", 0.05)),
            replications=int(raw.get("replications", 100)),
            master_seed=int(raw.get("master_seed", 0)),
            methods=methods,
        )


# the paper-style preset: five seeds, all scenarios, default sizes
PAPER_PRESET = ExperimentGrid(replications=5)


@dataclass(frozen=True)
class ReplicationRow:
    """One method's interval from one replication."""

    estimate: float
    lower: float
    upper: float
    width: float
    covered: bool
    oracle_ate: float


def run_replication(scenario: int, n: int, n_prime: int,
                    methods: tuple[Method, ...], seed: int,
                    alpha: float = 0.05) -> dict[Method, ReplicationRow]:
    """One full pipeline pass: generate, fit, score, and build intervals."""
    rct = RCT_PROPENSITY if Method.PP_IPW in methods else None
    cfg = scenario_config(scenario, n=n, n_prime=n_prime, seed=seed,
                          rct_propensity=rct)
    synth = generate(cfg)
    analysis = analyze(synth.d1, synth.d2, alpha=alpha, seed=seed,
                       methods=methods)
    rows = {}
    for method, interval in analysis.intervals.items():
        rows[method] = ReplicationRow(
            estimate=interval.estimate,
            lower=interval.lower,
            upper=interval.upper,
            width=interval.width,
            covered=interval.covers(synth.oracle_ate),
            oracle_ate=synth.oracle_ate,
        )
    return rows


@dataclass(frozen=True)
class CellStats:
    """Aggregated metrics for one (cell, method) pair.

    mean_oracle is carried alongside the spec'd CSV columns (JSON only) so
    that the Monte Carlo bias mean_estimate - mean_oracle stays recoverable
    from the aggregates.
    """

    scenario: int
    n: int
    n_prime: int
    method: str
    alpha: float
    replications: int
    coverage: float
    mean_width: float
    rmse: float
    mean_estimate: float
    failures: int
    valid: bool
    mean_oracle: float = math.nan


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[CellStats, ...]
    failures: tuple[str, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {
            "cells": [asdict(r) for r in self.rows],
            "failures": list(self.failures),
        }


def _replicate_task(args):
    scenario, n, n_prime, method_values, seed, alpha = args
    methods = tuple(Method(v) for v in method_values)
    try:
        rows = run_replication(scenario, n, n_prime, methods, seed, alpha)
    except Exception as exc:  # noqa: BLE001 - failures are data here
        return seed, None, f"seed {seed}: {exc!r}"
    return seed, {m.value: row for m, row in rows.items()}, None


def _aggregate(scenario, n, n_prime, method, alpha, rows, n_failed, m_total):
    count = len(rows)
    covered = sum(r.covered for r in rows)
    widths = [r.width for r in rows]
    sq_errors = [(r.estimate - r.oracle_ate) ** 2 for r in rows]
    estimates = [r.estimate for r in rows]
    oracles = [r.oracle_ate for r in rows]
    return CellStats(
        scenario=scenario, n=n, n_prime=n_prime, method=method.value,
        alpha=alpha, replications=m_total,
        coverage=covered / count if count else math.nan,
        mean_width=sum(widths) / count if count else math.nan,
        rmse=math.sqrt(sum(sq_errors) / count) if count else math.nan,
        mean_estimate=sum(estimates) / count if count else math.nan,
        failures=n_failed,
        valid=n_failed <= MAX_FAILURE_SHARE * m_total,
        mean_oracle=sum(oracles) / count if count else math.nan,
    )


def run_experiment(grid: ExperimentGrid, workers: int = 1,
                   progress=None) -> BenchResult:
    """Execute every cell of the grid.

    Replication r uses seed master_seed + r. Failed replications are
    recorded, excluded from the aggregates, and counted; a cell with more
    than 10% failures is marked invalid. Results are independent of the
    worker count.
    """
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    method_values = tuple(m.value for m in grid.methods)
    all_rows: list[CellStats] = []
    failures: list[str] = []
    for scenario, n, n_prime in grid.cells():
        tasks = [
            (scenario, n, n_prime, method_values, grid.master_seed + r, grid.alpha)
            for r in range(grid.replications)
        ]
        outcomes = []
        if workers == 1:
            for t in tasks:
                outcomes.append(_replicate_task(t))
        else:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                     initializer=_worker_env.limit_blas_threads) as pool:
                outcomes = list(pool.map(_replicate_task, tasks, chunksize=4))
        outcomes.sort(key=lambda item: item[0])
        ok = [(seed, rows) for seed, rows, err in outcomes if rows is not None]
        cell_failures = [err for _, rows, err in outcomes if rows is None]
        failures.extend(
            f"scenario={scenario} n={n} N_prime={n_prime}: {err}"
            for err in cell_failures
        )
        for method in grid.methods:
            rows = [rows_by_method[method.value] for _, rows_by_method in ok]
            all_rows.append(_aggregate(
                scenario, n, n_prime, method, grid.alpha, rows,
                len(cell_failures), grid.replications,
            ))
        if progress is not None:
            progress(scenario, n, n_prime, len(ok), len(cell_failures))
    return BenchResult(rows=tuple(all_rows), failures=tuple(failures))


def write_csv(result: BenchResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in result.rows:
            writer.writerow([
                r.scenario, r.n, r.n_prime, r.method, repr(r.alpha),
                r.replications, repr(r.coverage), repr(r.mean_width),
                repr(r.rmse), repr(r.mean_estimate), r.failures,
            ])


def write_json(result: BenchResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json_dict(), fh, indent=2)
        fh.write("\n")
