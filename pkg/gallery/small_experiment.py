"""
A small Monte Carlo experiment
==============================

Run the experiment harness at desk scale and read the summary.
"""

import dataclasses
import json
import tempfile

import numpy as np

from stablecir.harness import ExperimentConfig, run_experiment

cfg = dataclasses.replace(
    ExperimentConfig.default(),
    n_list=(500, 2000),
    replicas=40,
    n_starts=2,
    out_dir=tempfile.mkdtemp(prefix="stablecir_"),
)
summary = run_experiment(cfg)

for row in summary.per_n:
    print(f"n={row['n']}: {row['successes']} fits, median |error| {np.round(row['median_abs_error'], 4)}")
    print("   variance ratio", np.round(row["variance_ratio"], 2))

print("a3 error slope against n:", round(summary.consistency["a3_loglog_slope"], 3))
print("outputs in", cfg.out_dir)

# summary.json holds the same numbers and does not depend on the worker count
saved = json.load(open(f"{cfg.out_dir}/summary.json"))
print("target covariance:\n", np.round(saved["target"]["limit_cov"], 3))
print("empirical at the largest n:\n", np.round(saved["per_n"][-1]["cov_S"], 3))
