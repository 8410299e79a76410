import csv
import json
import math

import pytest

import ppci.bench as bench
from ppci.bench import (
    CSV_COLUMNS,
    ExperimentGrid,
    run_experiment,
    run_replication,
    write_csv,
    write_json,
)
from ppci.errors import ConfigurationError
from ppci.ppi import Method

SMALL_GRID = ExperimentGrid(
    scenarios=(1,), n_values=(40,), n_prime_values=(240,),
    alpha=0.05, replications=3, master_seed=11,
    methods=(Method.PP_AIPW, Method.BASELINE_D1),
)


class TestRunReplication:
    def test_all_methods_finite(self):
        rows = run_replication(1, 40, 240,
                               (Method.PP_AIPW, Method.PP_IPW,
                                Method.BASELINE_D1, Method.BASELINE_D2),
                               seed=0)
        assert len(rows) == 4
        for row in rows.values():
            assert math.isfinite(row.estimate)
            assert row.lower <= row.estimate <= row.upper
            assert row.width >= 0

    def test_deterministic(self):
        args = (2, 40, 240, (Method.PP_AIPW,), 5)
        assert run_replication(*args) == run_replication(*args)

    def test_oracle_predictor_narrows_interval(self):
        # an effect predictor stubbed to the realized truth drives the
        # rectifier variance toward pure treatment noise, so the
        # prediction-powered width cannot exceed the small-data baseline
        import numpy as np

        from ppci.baselines import aipw_ci
        from ppci.nuisance import cross_fit
        from ppci.ppi import measure_of_fit_from_values, pp_interval, rectifier
        from ppci.scores import ScoreKind, score_dataset
        from ppci.synthgen import GpSampler, DEFAULT_OUTCOME_KERNEL, generate, scenario_config

        seed = 3
        out = generate(scenario_config(2, n=200, n_prime=2000, seed=seed))
        # realized per-sample effects, reconstructed from the generator
        n, m = 200, 2200
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
        X = rng.uniform(-1, 1, (m, 1))
        u = rng.uniform(-1, 1, m)
        pts = np.column_stack([X, u])
        sampler = GpSampler(pts, DEFAULT_OUTCOME_KERNEL)
        g0 = sampler.draw(np.random.default_rng(np.random.SeedSequence((seed, 1))))
        g1 = sampler.draw(np.random.default_rng(np.random.SeedSequence((seed, 2))))
        cate = g1 - g0

        nuis = cross_fit(out.d1, 2, seed=1)
        scores = score_dataset(out.d1, nuis, ScoreKind.AIPW)
        r = rectifier(scores, cate[:n])
        fit = measure_of_fit_from_values(cate[n:])
        pp = pp_interval(r, fit, 0.05)
        baseline = aipw_ci(out.d1, 2, seed=1, alpha=0.05)
        assert pp.width <= baseline.width


class TestRunExperiment:
    def test_single_replication_equals_aggregate(self):
        grid = ExperimentGrid(
            scenarios=(1,), n_values=(40,), n_prime_values=(240,),
            replications=1, master_seed=7, methods=(Method.PP_AIPW,),
        )
        result = run_experiment(grid)
        row = result.rows[0]
        rep = run_replication(1, 40, 240, (Method.PP_AIPW,), seed=7)[Method.PP_AIPW]
        assert row.coverage == float(rep.covered)
        assert row.mean_width == pytest.approx(rep.width)
        assert row.mean_estimate == pytest.approx(rep.estimate)
        assert row.rmse == pytest.approx(abs(rep.estimate - rep.oracle_ate))
        assert row.failures == 0 and row.valid

    def test_reproducible_and_worker_invariant(self):
        first = run_experiment(SMALL_GRID, workers=1)
        second = run_experiment(SMALL_GRID, workers=1)
        assert first == second
        parallel = run_experiment(SMALL_GRID, workers=2)
        assert parallel == first

    def test_failures_recorded_and_excluded(self, monkeypatch):
        real = bench.run_replication

        def flaky(scenario, n, n_prime, methods, seed, alpha=0.05):
            if seed == 12:
                raise ConfigurationError("boom")
            return real(scenario, n, n_prime, methods, seed, alpha)

        monkeypatch.setattr(bench, "run_replication", flaky)
        result = run_experiment(SMALL_GRID, workers=1)
        row = result.rows[0]
        assert row.failures == 1
        assert len(result.failures) == 1
        assert "seed 12" in result.failures[0]
        assert not row.valid  # 1/3 > 10%
        # aggregates use only the two surviving seeds
        ok = [real(1, 40, 240, SMALL_GRID.methods, s)[Method.PP_AIPW]
              for s in (11, 13)]
        assert row.mean_width == pytest.approx(
            sum(r.width for r in ok) / 2)

    def test_invalid_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentGrid(scenarios=(9,))
        with pytest.raises(ConfigurationError):
            ExperimentGrid(replications=0)
        with pytest.raises(ConfigurationError):
            ExperimentGrid.from_dict({"unknown_key": 1})


class TestWriters:
    def test_csv_and_json_mirror(self, tmp_path):
        result = run_experiment(SMALL_GRID, workers=1)
        csv_path = tmp_path / "results.csv"
        json_path = tmp_path / "results.json"
        write_csv(result, csv_path)
        write_json(result, json_path)
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + len(result.rows)
        payload = json.loads(json_path.read_text())
        assert len(payload["cells"]) == len(result.rows)
        for cell, row in zip(payload["cells"], result.rows):
            assert cell["coverage"] == pytest.approx(row.coverage)
            assert cell["method"] == row.method
