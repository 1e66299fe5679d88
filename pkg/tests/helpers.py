"""Shared constructions for the test suite."""

import numpy as np

from stablecir.likelihood import Criterion
from stablecir.model import ObservedPath
from stablecir.stable import sample_z


def constructed_path(theta, n, alpha, q, eps, x0=1.0, seed=0):
    """Euler recursion at the observation grid driven by exact stable residuals.

    Each step injects ``z_k`` distributed as ``z0(1)``, so the residuals at the
    true parameter are exactly those draws.
    """
    a1, a2, a3 = theta
    z = sample_z(alpha, np.random.default_rng(seed), size=n)
    y = np.empty(n + 1)
    y[0] = x0
    for k in range(n):
        prev = y[k]
        y[k + 1] = prev + (a1 - a2 * prev) / n + a3 * eps * n ** (-1 / alpha) * prev ** (1 / q) * z[k]
    return ObservedPath(n=n, values=y), z


def grid_maximum(crit: Criterion, box, points: int):
    """Best objective value over a ``points^3`` lattice covering the box."""
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(box.lo, box.hi)]
    best = -np.inf
    best_theta = None
    for a1 in axes[0]:
        for a2 in axes[1]:
            for a3 in axes[2]:
                u = crit.objective((a1, a2, a3))
                if u > best:
                    best, best_theta = u, (a1, a2, a3)
    return best, np.array(best_theta)


ACCEPTANCE_TITLES = {
    1: "density validity",
    2: "score identities",
    3: "derivative correctness",
    4: "limit-object coherence",
    5: "consistency",
    6: "asymptotic normality",
    7: "estimator oracle equivalence",
    8: "determinism",
}
ACCEPTANCE: dict[int, list[tuple[str, bool, float, float]]] = {}


def record(criterion: int, name: str, ok: bool, measured: float, tolerance: float) -> bool:
    """Log one acceptance sub-check; the terminal summary folds them into one line per criterion."""
    ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok), float(measured), float(tolerance)))
    return bool(ok)


def acceptance_lines() -> list[str]:
    lines = []
    for c in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[c]
        bad = [k for k in checks if not k[1]]
        head = f"criterion {c} ({ACCEPTANCE_TITLES[c]}): {'FAIL' if bad else 'PASS'}, {len(checks) - len(bad)}/{len(checks)} checks"
        if bad:
            head += "; failing: " + ", ".join(f"{n} measured {m:.4g} vs {t:.4g}" for n, _, m, t in bad)
        lines.append(head)
    return lines
