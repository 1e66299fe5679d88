"""
Estimating drift and noise scale from one path
==============================================

Simulate a stable-driven square-root process at small noise, fit (a1, a2, a3)
and compare the standardized errors with the limit covariance.
"""

import numpy as np

from stablecir import ModelSpec, ParamBox, build_density, maximize, sigma_matrix, simulate_path

alpha = q = 1.5
n = 4000
# with eps = n^(1/alpha - 1) both drift rates equal sqrt(n)
eps = n ** (1 / alpha - 1)
spec = ModelSpec(a1=1.0, a2=0.5, a3=0.3, q=q, alpha=alpha, eps=eps, x0=1.0)

path = simulate_path(spec, n, substeps=8, rng=np.random.default_rng(3))
print(f"path from {path.values[0]:.2f} to {path.values[-1]:.3f}, min {path.values.min():.3f}")

law = build_density(alpha)
report = maximize(path, ParamBox.default(), eps, alpha, q, law, theta_true=spec.theta)
print("estimate:", np.round(report.theta, 4))
print("standardized error:", np.round(report.standardized_error, 3))
print("local maxima found:", len(report.local_maxima))

# Spread expected for the standardized error
target = sigma_matrix(spec, q, law)
print("limit sd:", np.round(np.sqrt(np.diag(target.limit_cov)), 3))

# The drift block is nearly singular for this path: a1 and a2 are hard to tell
# apart, only a1 - a2 y is pinned down well.
cov = target.limit_cov
print(f"corr(S1, S2) = {cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]):.3f}")
