import csv
import dataclasses
import json

import numpy as np
import pytest

from stablecir.estimator import EstimatorOptions, ParamBox, maximize
from stablecir.harness import (
    ConfigError,
    ExperimentConfig,
    covariance_errors,
    replica_seed,
    run_experiment,
    run_replica,
    score_identities,
    verify_suite,
)
from stablecir.model import ModelSpec, simulate_path


@pytest.fixture
def small(density_cache, tmp_path):
    cfg = ExperimentConfig.default()
    return dataclasses.replace(
        cfg, n_list=(60, 240), replicas=6, n_starts=1, out_dir=str(tmp_path / "out"), cache_dir=str(density_cache)
    )


def test_config_round_trip(small):
    again = ExperimentConfig.from_dict(json.loads(json.dumps(small.to_dict())))
    assert again == small


def test_config_defaults_fill_missing_keys():
    cfg = ExperimentConfig.from_dict({"schema": 1, "model": {"a1": 1, "a2": 0.5, "a3": 0.3, "q": 1.5, "alpha": 1.5, "x0": 1}})
    assert cfg == ExperimentConfig.default()
    assert cfg.eps_for(1000) == pytest.approx(0.1)


@pytest.mark.parametrize(
    "patch",
    [
        {"schema": 2},
        {"bogus": 1},
        {"replicas": 0},
        {"n_list": [1]},
        {"eps": [0.1]},
        {"m0": 0},
        {"box": [0, 5, -5, 5, 0.0, 5]},
        {"model": {"a1": 1}},
        {"model": {"a1": 1, "a2": 0.5, "a3": -0.3, "q": 1.5, "alpha": 1.5, "x0": 1}},
    ],
)
def test_bad_configs_are_rejected(patch):
    d = {**ExperimentConfig.default().to_dict(), **patch}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d)


def test_load_reports_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_eps_coupling_keeps_m_fixed():
    cfg = dataclasses.replace(ExperimentConfig.default(), m0=2.0)
    for n in (100, 1000):
        eps = cfg.eps_for(n)
        assert n ** (1 / 1.5 - 1) / eps == pytest.approx(2.0)
    explicit = dataclasses.replace(cfg, n_list=(10, 20), eps=(0.5, 0.25))
    assert explicit.eps_for(20) == 0.25


def test_single_replica_matches_manual_pipeline(small, get_law):
    law = get_law(1.5)
    res = run_replica(small, law, 60, 3)
    eps = 60 ** (1 / 1.5 - 1)
    spec = dataclasses.replace(small.model, eps=eps)
    path = simulate_path(spec, 60, substeps=small.substeps, rng=np.random.default_rng(replica_seed(small.master_seed, 60, 3)))
    rep = maximize(path, small.box, eps, 1.5, 1.5, law, opts=EstimatorOptions(n_starts=1), theta_true=(1.0, 0.5, 0.3))
    assert res.ok
    assert res.theta_hat == tuple(rep.theta)
    assert res.s == tuple(rep.standardized_error)


def test_replica_seeds_are_distinct():
    states = {tuple(replica_seed(1, n, r).generate_state(2)) for n in (10, 20) for r in range(50)}
    assert len(states) == 100


def test_experiment_outputs(small):
    summary = run_experiment(small)
    out = small.out_dir
    d = json.loads(open(f"{out}/summary.json").read())
    assert d == json.loads(summary.to_json())
    assert [p["n"] for p in d["per_n"]] == [60, 240]
    for p in d["per_n"]:
        assert p["successes"] + p["failures"] == small.replicas
    rows = list(csv.DictReader(open(f"{out}/replicas.csv")))
    fails = list(csv.DictReader(open(f"{out}/failures.csv")))
    assert len(rows) + len(fails) == 2 * small.replicas
    assert "out_dir" not in d["config"] and "workers" not in d["config"]
    assert d["target"]["condition_ok"] is True
    assert len(d["consistency"]["strictly_decreasing"]) == 3


def test_failures_are_recorded_not_raised(small):
    # starting at zero leaves the first residual undefined
    cfg = dataclasses.replace(small, model=dataclasses.replace(small.model, x0=0.0), n_list=(60,), replicas=3)
    summary = run_experiment(cfg)
    p = summary.per_n[0]
    assert p["failures"] == 3 and p["successes"] == 0


def test_worker_count_does_not_change_outputs(small, tmp_path):
    one = dataclasses.replace(small, out_dir=str(tmp_path / "w1"), workers=1)
    two = dataclasses.replace(small, out_dir=str(tmp_path / "w2"), workers=2)
    run_experiment(one)
    run_experiment(two)
    for name in ("summary.json", "replicas.csv", "failures.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()


def test_covariance_errors():
    target = np.array([[4.0, 1.0], [1.0, 1.0]])
    emp = np.array([[5.0, 1.5], [1.5, 0.9]])
    e = covariance_errors(emp, target)
    assert e["max_relative_entry_error"] == pytest.approx(0.5)
    assert e["max_scaled_entry_error"] == pytest.approx(0.5 / 2.0)
    np.testing.assert_allclose(e["variance_ratio"], [1.25, 0.9])


def test_score_identities_vanish(law15):
    for value in score_identities(law15).values():
        assert abs(value) < 1e-6


def test_verify_default_passes(density_cache):
    cfg = dataclasses.replace(ExperimentConfig.default(), cache_dir=str(density_cache))
    checks = verify_suite(cfg)
    assert {c.status for c in checks} == {"pass"}
    names = {c.name for c in checks}
    assert {"density_normalization", "sigma_positive_definite", "limit_hessian_identity", "limit_stationarity"} <= names


def test_verify_truncated_window_fails_normalization():
    cfg = dataclasses.replace(ExperimentConfig.default(), density_window=(-2.0, 2.0))
    checks = verify_suite(cfg)
    norm = next(c for c in checks if c.name == "density_normalization")
    assert norm.status == "fail" and norm.measured > 0.1


def test_verify_skips_limit_checks_when_condition_fails(density_cache):
    model = ModelSpec(a1=1.0, a2=0.5, a3=0.3, q=1.5, alpha=1.5, eps=0.0, x0=2.0)
    cfg = dataclasses.replace(ExperimentConfig.default(), model=model, cache_dir=str(density_cache))
    checks = {c.name: c for c in verify_suite(cfg)}
    for name in ("sigma_positive_definite", "limit_hessian_identity", "limit_stationarity"):
        assert checks[name].status == "skipped"
        assert checks[name].detail == "condition violated, check skipped"
    assert checks["density_normalization"].status == "pass"
