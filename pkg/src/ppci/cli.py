"""Command-line interface: estimate, simulate, and bench subcommands.

Exit codes: 0 success, 1 runtime error, 2 usage error. Errors go to
stderr as one JSON object; successful output is JSON (estimate), CSV
files (simulate, bench), or both. All randomness flows from explicit
--seed flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (
    PAPER_PRESET,
    BenchResult,
    ExperimentGrid,
    run_experiment,
    write_csv,
    write_json,
)
from .dataset import CsvSchema, DatasetRole, load_csv, save_csv
from .errors import PpciError
from .pipeline import analyze
from .ppi import Method, pp_interval_finite_pop, pp_interval_shifted
from .synthgen import generate, scenario_config

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose errors become JSON on stderr with exit 2."""

    def error(self, message):
        _emit_error(message, kind="usage")
        raise SystemExit(EXIT_USAGE)


def _emit_error(message: str, kind: str) -> None:
    json.dump({"error": str(message), "kind": kind}, sys.stderr)
    sys.stderr.write("\n")


def _read_column_file(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line))
    return np.array(values)


def _read_bounds_file(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise UsageError(
                    f"bounds file needs 'lower,upper' per line, got {line!r}"
                )
            rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows)


def _infer_schema(path, treatment, outcome, covariates, propensity) -> CsvSchema:
    if covariates:
        cov_names = tuple(covariates.split(","))
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh))
        reserved = {treatment, outcome}
        if propensity:
            reserved.add(propensity)
        cov_names = tuple(c for c in header if c not in reserved)
        if not cov_names:
            raise UsageError(f"no covariate columns left in {path}")
    return CsvSchema(covariates=cov_names, treatment=treatment,
                     outcome=outcome, propensity=propensity)


def _write_or_print(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --------------------------------------------------------------------------
# estimate
# --------------------------------------------------------------------------

def _cmd_estimate(args) -> int:
    if not 0.0 < args.alpha < 1.0:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if not 0.0 < args.clip < 0.5:
        raise UsageError("--clip must lie in (0, 0.5)")
    if args.rct and not args.propensity_col:
        raise UsageError("--rct requires --propensity-col")
    if bool(args.weights_d1) != bool(args.weights_d2):
        raise UsageError("--weights-d1 and --weights-d2 go together")

    schema1 = _infer_schema(args.d1, args.treatment_col, args.outcome_col,
                            args.covariate_cols, args.propensity_col)
    schema2 = _infer_schema(args.d2, args.treatment_col, args.outcome_col,
                            args.covariate_cols, None)
    d1 = load_csv(args.d1, schema1, role=DatasetRole.SMALL_UNCONFOUNDED)
    d2 = load_csv(args.d2, schema2, role=DatasetRole.LARGE_AUXILIARY)

    selected = Method.PP_IPW if args.rct else Method.PP_AIPW
    methods = (selected, Method.BASELINE_D1, Method.BASELINE_D2)
    result = analyze(d1, d2, alpha=args.alpha, n_folds=args.folds,
                     seed=args.seed, ridge_lambda=args.ridge,
                     clip_epsilon=args.clip, methods=methods)
    intervals = [result.intervals[m] for m in methods]

    if args.weights_d1:
        w1 = _read_column_file(args.weights_d1)
        w2 = _read_column_file(args.weights_d2)
        from .cate import evaluate
        tau2_eval = evaluate(result.model, result.model.evaluation_covariates)
        intervals.append(pp_interval_shifted(
            result.scores, result.tau2_on_d1, tau2_eval, w1, w2, args.alpha))

    if args.finite_pop_bounds:
        bounds = _read_bounds_file(args.finite_pop_bounds)
        intervals.append(pp_interval_finite_pop(
            result.rect, result.fit, bounds, args.alpha))

    payload = {"results": [iv.to_json_dict() for iv in intervals]}
    _write_or_print(payload, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    if args.scenario not in (1, 2, 3):
        raise UsageError(f"--scenario must be 1, 2, or 3, got {args.scenario}")
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if args.n2 < 4:
        raise UsageError("--n2 must be at least 4")
    if args.rct_propensity is not None and not 0.0 < args.rct_propensity < 1.0:
        raise UsageError("--rct-propensity must lie in (0, 1)")

    cfg = scenario_config(args.scenario, n=args.n, n_prime=args.n2,
                          seed=args.seed, n_covariates=args.covariates,
                          rct_propensity=args.rct_propensity)
    synth = generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cov_names = tuple(f"x{i}" for i in range(args.covariates))
    schema1 = CsvSchema(covariates=cov_names, treatment="a", outcome="y",
                        propensity="pi" if args.rct_propensity is not None else None)
    schema2 = CsvSchema(covariates=cov_names, treatment="a", outcome="y")
    save_csv(synth.d1, out_dir / "d1.csv", schema1)
    save_csv(synth.d2, out_dir / "d2.csv", schema2)
    meta = {
        "oracle_ate": synth.oracle_ate,
        "sample_ate_d1": synth.sample_ate_d1,
        "scenario": args.scenario,
        "seed": args.seed,
        "n": args.n,
        "N_prime": args.n2,
    }
    if args.rct_propensity is not None:
        meta["rct_propensity"] = args.rct_propensity
    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------

def _load_grid(path) -> ExperimentGrid:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PpciError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise PpciError(f"config {path} must hold a JSON object")
    return ExperimentGrid.from_dict(raw)


def _cmd_bench(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if bool(args.config) == bool(args.preset):
        raise UsageError("give exactly one of --config or --preset")
    grid = PAPER_PRESET if args.preset else _load_grid(args.config)
    out_path = Path(args.out)
    json_path = out_path.with_suffix(".json")

    collected_rows = []
    collected_failures = []

    def flush():
        partial = BenchResult(rows=tuple(collected_rows),
                              failures=tuple(collected_failures))
        write_csv(partial, out_path)
        write_json(partial, json_path)
        return partial

    try:
        for scenario, n, n_prime in grid.cells():
            sub = ExperimentGrid(
                scenarios=(scenario,), n_values=(n,), n_prime_values=(n_prime,),
                alpha=grid.alpha, replications=grid.replications,
                master_seed=grid.master_seed, methods=grid.methods,
            )
            partial = run_experiment(sub, workers=args.workers)
            collected_rows.extend(partial.rows)
            collected_failures.extend(partial.failures)
            flush()
            print(f"cell scenario={scenario} n={n} N_prime={n_prime}: "
                  f"{grid.replications - len(partial.failures)} ok, "
                  f"{len(partial.failures)} failed", file=sys.stderr)
    except KeyboardInterrupt:
        flush()
        _emit_error("interrupted; partial results flushed", kind="runtime")
        return EXIT_RUNTIME

    result = flush()
    if not args.no_figures:
        from .figures import render_bench_figures
        render_bench_figures(result, out_path.parent or Path("."),
                             prefix=out_path.stem)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser wiring
# --------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="ppci", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config-defaults", default=None,
                        help="JSON file of default flag values; explicit "
                             "flags override it")

    est = sub.add_parser("estimate", parents=[common], description=(
        "Prediction-powered interval for two CSV datasets plus both "
        "single-dataset baselines."))
    est.add_argument("--d1", required=True, help="small unconfounded CSV")
    est.add_argument("--d2", required=True, help="large auxiliary CSV")
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--rct", action="store_true",
                     help="use known propensities (IPW scores) for d1")
    est.add_argument("--propensity-col", default=None)
    est.add_argument("--treatment-col", default="a")
    est.add_argument("--outcome-col", default="y")
    est.add_argument("--covariate-cols", default=None,
                     help="comma-separated; default: every other column")
    est.add_argument("--folds", type=int, default=2)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--clip", type=float, default=0.01)
    est.add_argument("--ridge", type=float, default=1e-6)
    est.add_argument("--weights-d1", default=None,
                     help="file of covariate-shift weights, one per d1 row")
    est.add_argument("--weights-d2", default=None,
                     help="weights for the d2 evaluation half, one per row")
    est.add_argument("--finite-pop-bounds", default=None,
                     help="file of 'lower,upper' per d1 row")
    est.add_argument("--out", default=None, help="write JSON here instead of stdout")
    est.set_defaults(func=_cmd_estimate)

    sim = sub.add_parser("simulate", parents=[common], description=(
        "Generate one synthetic dataset pair and its oracle metadata."))
    sim.add_argument("--scenario", type=int, required=True)
    sim.add_argument("--n", type=int, default=200)
    sim.add_argument("--n2", type=int, default=10_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--covariates", type=int, default=1)
    sim.add_argument("--rct-propensity", type=float, default=None,
                     help="assign d1 treatments with this known probability")
    sim.add_argument("--out-dir", required=True)
    sim.set_defaults(func=_cmd_simulate)

    ben = sub.add_parser("bench", parents=[common], description=(
        "Monte Carlo coverage/width/RMSE experiment over a JSON grid."))
    ben.add_argument("--config", default=None, help="experiment grid JSON")
    ben.add_argument("--preset", choices=["paper"], default=None,
                     help="built-in grid: all scenarios, five seeds, "
                          "default sizes")
    ben.add_argument("--workers", type=int, default=1)
    ben.add_argument("--out", default="bench_results.csv")
    ben.add_argument("--no-figures", action="store_true",
                     help="skip rendering PNG charts next to the CSV")
    ben.set_defaults(func=_cmd_bench)
    return parser


def _apply_config_defaults(parser, argv):
    """Seed parser defaults from --config-defaults JSON; explicit flags win."""
    probe = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    probe.add_argument("--config-defaults", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config_defaults:
        return
    raw = json.loads(Path(known.config_defaults).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise UsageError("--config-defaults must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in raw.items()}
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            sub.set_defaults(**{
                k: v for k, v in defaults.items()
                if any(a.dest == k for a in sub._actions)
            })


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    except UsageError as exc:
        _emit_error(str(exc), kind="usage")
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        _emit_error(str(exc), kind="runtime")
        return EXIT_RUNTIME

    try:
        return args.func(args)
    except UsageError as exc:
        _emit_error(str(exc), kind="usage")
        return EXIT_USAGE
    except PpciError as exc:
        _emit_error(str(exc), kind="runtime")
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        _emit_error(str(exc), kind="runtime")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
