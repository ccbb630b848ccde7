import json

import numpy as np
import pytest

from unbiased_zakai import builtin_model, oracle_gamma, simulate_observation_path
from unbiased_zakai.errors import ConfigurationError, ResolutionError
from unbiased_zakai.estimators import make_level_distribution
from unbiased_zakai.harness import (ExperimentConfig, MethodConfig, benchmark, build_model, build_path,
                                    ground_truth, loglog_slope, run_point)


def small_config(tmp_path, **over):
    d = {"model": "OU", "data": {"seed": 7, "level": 8, "horizon": 4}, "t": 3, "runs": 6, "seed": 5,
         "ground_truth": {"particles": 2000}, "output_dir": str(tmp_path / "out"),
         "methods": [{"method": "pf", "levels": [1, 2]}, {"method": "mlpf", "levels": [1, 2]},
                     {"method": "st", "levels": [2], "particles": 10, "pilot_draws": 20},
                     {"method": "cs", "levels": [1, 2], "particles": 10, "pilot_draws": 20}]}
    d.update(over)
    return ExperimentConfig.from_dict(d)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        small_config(tmp_path, runs=1)
    with pytest.raises(ConfigurationError):
        small_config(tmp_path, bogus=1)
    with pytest.raises(ConfigurationError):
        MethodConfig("qmc")
    with pytest.raises(ConfigurationError):
        small_config(tmp_path, phi="square")
    f = tmp_path / "c.json"
    f.write_text(json.dumps(small_config(tmp_path).to_dict()))
    assert ExperimentConfig.load(f) == small_config(tmp_path)


def test_ground_truth_h_zero_is_one():
    path = simulate_observation_path(1, 3, 8)
    gt = ground_truth(builtin_model("NonlinearDiffusion", 0.0), path, "one", 3, particles=500)
    assert gt.value == pytest.approx(1.0, abs=1e-15) and gt.source == "pf"


def test_ground_truth_needs_level_eight():
    with pytest.raises(ResolutionError):
        ground_truth(builtin_model("OU"), simulate_observation_path(1, 3, 6), "one", 3)


def test_ground_truth_deterministic():
    path = simulate_observation_path(2, 3, 8)
    m = builtin_model("NonlinearDiffusion")
    a = ground_truth(m, path, "identity", 3, particles=1000)
    b = ground_truth(m, path, "identity", 3, particles=1000)
    assert a.value == b.value


@pytest.mark.slow
def test_ou_ground_truth_cross_check(path7):
    m = builtin_model("OU")
    gt = ground_truth(m, path7, "one", 5, check_runs=10)
    assert gt.source == "oracle"
    assert gt.value == oracle_gamma(m, path7, 8, 5)[0]
    assert abs(gt.pf_value - gt.oracle_value) < 3 * gt.pf_se * np.sqrt(10)


def test_benchmark_bookkeeping(tmp_path):
    cfg = small_config(tmp_path)
    res = benchmark(cfg)
    out = tmp_path / "out"
    assert (out / "results.csv").exists() and (out / "summary.csv").exists()
    assert len(res.results) == cfg.runs * 7
    for row in res.summary:
        if row["method"] == "mlpf":
            counts = [int(n) for n in row["allocation"].split()]
            assert row["mean_cost"] == cfg.t * sum(n * 2 ** l for l, n in enumerate(counts))
        if row["method"] in ("st", "cs"):
            d = make_level_distribution("sigma_constant", row["level"])
            assert row["expected_cost"] == pytest.approx(
                d.expected_cost(row["method"], cfg.t, 10, row["m"]), rel=1e-12)
            assert row["pilot_var"] > 0
    assert np.isfinite(loglog_slope(res.summary, "pf"))
    with pytest.raises(ConfigurationError):
        loglog_slope(res.summary, "st")


def test_rows_reproduce_from_their_seed(tmp_path):
    cfg = small_config(tmp_path)
    res = benchmark(cfg, write=False)
    ctx = (cfg, build_model(cfg), build_path(cfg.data))
    from unbiased_zakai.harness import pilot_constant, plan_point
    for row in res.results[:: cfg.runs]:
        base, mi, pi, r = (int(s) for s in row["seed"].split(":"))
        assert base == cfg.seed
        point = plan_point(ctx, mi, pi, pilot_constant(ctx, mi)[0])
        est, cost = run_point(ctx, point, mi, pi, r)
        assert est == row["estimate"] and cost == row["cost"]


def test_benchmark_worker_count_invariant(tmp_path):
    cfg = small_config(tmp_path)
    a = benchmark(cfg, workers=1, write=False)
    b = benchmark(cfg, workers=2, write=False)
    assert [r["estimate"] for r in a.results] == [r["estimate"] for r in b.results]
    assert a.summary == b.summary


@pytest.mark.slow
def test_pf_mse_decreases_with_level(tmp_path):
    cfg = small_config(tmp_path, runs=200, t=5, data={"seed": 7, "level": 8, "horizon": 5}, methods=[{"method": "pf", "levels": [0, 2, 4]}])
    mse = [r["mse"] for r in benchmark(cfg, write=False).summary]
    assert mse[0] > mse[1] > mse[2]
