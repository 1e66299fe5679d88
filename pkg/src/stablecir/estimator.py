"""Maximum-likelihood-type estimation of ``(a1, a2, a3)`` over a box."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .likelihood import Criterion, ParamPoint, rate
from .model import ObservedPath
from .stable import StableLaw

__all__ = [
    "EstimateReport",
    "EstimatorOptions",
    "LocalMaximum",
    "ParamBox",
    "maximize",
    "standardize",
]

_TIE_TOL = 1e-10


@dataclass(frozen=True)
class ParamBox:
    """Closed search box ``[lo, hi]`` for ``(a1, a2, a3)``."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("box needs three lower and three upper bounds")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("box must be bounded")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi in every coordinate")
        if lo[0] < 0:
            raise ValueError("a1 must stay nonnegative")
        if lo[2] <= 0:
            raise ValueError("the box must exclude a3 = 0")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def default(cls) -> "ParamBox":
        """Wide box ``[0,5] x [-5,5] x [0.01,5]``; not tied to any true value."""
        return cls((0.0, -5.0, 0.01), (5.0, 5.0, 5.0))

    @classmethod
    def from_list(cls, values) -> "ParamBox":
        """``[a1_lo, a1_hi, a2_lo, a2_hi, a3_lo, a3_hi]``."""
        v = [float(x) for x in values]
        if len(v) != 6:
            raise ValueError("box needs six numbers")
        return cls((v[0], v[2], v[4]), (v[1], v[3], v[5]))

    def to_list(self) -> list[float]:
        return [self.lo[0], self.hi[0], self.lo[1], self.hi[1], self.lo[2], self.hi[2]]

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def contains(self, theta) -> bool:
        t = np.asarray(theta, dtype=float)
        return bool(np.all(t >= self.lower) and np.all(t <= self.upper))

    def edge_flags(self, theta, tol: float = 1e-8) -> list[bool]:
        t = np.asarray(theta, dtype=float)
        slack = tol * np.maximum(self.width, 1.0)
        near = (t - self.lower <= slack) | (self.upper - t <= slack)
        return [bool(v) for v in near]


@dataclass(frozen=True)
class EstimatorOptions:
    n_starts: int = 8
    user_start: tuple[float, float, float] | None = None
    xatol: float = 1e-9
    max_iter: int = 2000
    grad_tol: float = 1e-7
    polish_iter: int = 50
    initial_step: float = 0.1


@dataclass(frozen=True)
class LocalMaximum:
    theta: tuple[float, float, float]
    u_value: float
    converged: bool
    iterations: int
    starts: int = 1


@dataclass
class EstimateReport:
    theta_hat: ParamPoint
    u_value: float
    n_starts: int
    converged: bool
    iterations: int
    boundary_hit: list[bool]
    standardized_error: np.ndarray | None = None
    scaled_gradient: np.ndarray | None = None
    local_maxima: list[LocalMaximum] = field(default_factory=list)
    runs: list[LocalMaximum] = field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        return self.theta_hat.as_array()

    def to_dict(self) -> dict:
        out = {
            "theta_hat": asdict(self.theta_hat),
            "u_value": self.u_value,
            "n_starts": self.n_starts,
            "converged": self.converged,
            "iterations": self.iterations,
            "boundary_hit": list(self.boundary_hit),
            "local_maxima": [asdict(m) for m in self.local_maxima],
        }
        if self.standardized_error is not None:
            out["standardized_error"] = [float(v) for v in self.standardized_error]
        if self.scaled_gradient is not None:
            out["scaled_gradient"] = [float(v) for v in self.scaled_gradient]
        return out


def start_points(box: ParamBox, n_starts: int = 8, user_start=None) -> list[np.ndarray]:
    """Box center, the first ``n_starts`` nonzero Halton points, then the user start."""
    starts = [box.center]
    if n_starts > 0:
        unit = qmc.Halton(d=3, scramble=False).random(n_starts + 1)[1:]
        starts.extend(box.lower + unit * box.width)
    if user_start is not None:
        starts.append(box.project(user_start))
    return starts


def _simplex(u0: np.ndarray, step: float) -> np.ndarray:
    sim = [u0]
    for i in range(3):
        v = u0.copy()
        v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
        sim.append(v)
    return np.array(sim)


def _polish(crit: Criterion, law: StableLaw, box: ParamBox, theta, opts: EstimatorOptions):
    """Projected Newton steps on the analytic gradient until the scaled gradient is small."""
    theta = box.project(theta)
    scale = crit.scale_vector()
    u, g = crit.value_and_gradient(theta, law)
    for _ in range(opts.polish_iter):
        lower = theta <= box.lower
        upper = theta >= box.upper
        free = ~((lower & (g < 0)) | (upper & (g > 0)))
        sg = g / scale
        if not free.any() or np.linalg.norm(sg[free]) < opts.grad_tol:
            break
        hess = crit.hessian(theta, law)
        hf = hess[np.ix_(free, free)]
        d = np.zeros(3)
        try:
            np.linalg.cholesky(-hf)
            d[free] = np.linalg.solve(-hf, g[free])
        except np.linalg.LinAlgError:
            d[free] = g[free] / (scale[free] ** 2)
        accepted = False
        step = 1.0
        noise = 1e-13 * max(1.0, abs(u))
        for _ in range(40):
            cand = box.project(theta + step * d)
            u_c, g_c = crit.value_and_gradient(cand, law)
            better = u_c > u + noise
            level = abs(u_c - u) <= noise and np.linalg.norm(g_c / scale) < np.linalg.norm(sg)
            if better or level:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        theta, u, g = cand, u_c, g_c
    return theta, u, g / scale


def _lex_key(item):
    return tuple(item[0])


def maximize(
    path: ObservedPath,
    box: ParamBox,
    eps: float,
    alpha: float,
    q: float,
    law: StableLaw,
    opts: EstimatorOptions | None = None,
    theta_true=None,
    criterion: Criterion | None = None,
) -> EstimateReport:
    """Multi-start maximization of ``U`` over ``box``.

    Each start runs a bounded Nelder-Mead search in box-normalized coordinates
    (points outside the box are projected onto it) followed by a Newton polish
    on the analytic gradient.  The best final value wins; values within 1e-10
    are broken by the lexicographically smallest ``(a1, a2, a3)``.
    """
    opts = EstimatorOptions() if opts is None else opts
    crit = Criterion(path, eps, alpha, q, law) if criterion is None else criterion
    lower, width = box.lower, box.width

    def to_theta(u):
        return lower + np.clip(u, 0.0, 1.0) * width

    def neg_u(u):
        return -crit.objective(to_theta(u), law)

    runs = []
    for s in start_points(box, opts.n_starts, opts.user_start):
        u0 = (s - lower) / width
        res = minimize(
            neg_u,
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * 3,
            options={
                "xatol": opts.xatol,
                "fatol": np.inf,
                "maxiter": opts.max_iter,
                "maxfev": 10 * opts.max_iter,
                "initial_simplex": _simplex(u0, opts.initial_step),
            },
        )
        nm_theta = to_theta(res.x)
        theta, u, sg = _polish(crit, law, box, nm_theta, opts)
        converged = bool(res.nit < opts.max_iter and res.status == 0)
        runs.append((theta, u, converged, int(res.nit), sg))

    best_u = max(r[1] for r in runs)
    ties = [r for r in runs if best_u - r[1] < _TIE_TOL]
    best = min(ties, key=_lex_key)
    theta_hat = best[0]

    maxima: list[LocalMaximum] = []
    for theta, u, conv, nit, _ in sorted(runs, key=lambda r: (-r[1], tuple(r[0]))):
        for i, m in enumerate(maxima):
            if np.max(np.abs((np.array(m.theta) - theta) / width)) < 1e-6:
                maxima[i] = LocalMaximum(m.theta, m.u_value, m.converged, m.iterations, m.starts + 1)
                break
        else:
            maxima.append(LocalMaximum(tuple(float(v) for v in theta), float(u), conv, nit))

    report = EstimateReport(
        theta_hat=ParamPoint(*(float(v) for v in theta_hat)),
        u_value=float(best[1]),
        n_starts=len(runs),
        converged=best[2],
        iterations=best[3],
        boundary_hit=box.edge_flags(theta_hat),
        scaled_gradient=best[4],
        local_maxima=maxima,
        runs=[LocalMaximum(tuple(float(v) for v in r[0]), float(r[1]), r[2], r[3]) for r in runs],
    )
    if theta_true is not None:
        report.standardized_error = standardize(theta_hat, theta_true, path.n, eps, alpha)
    return report


def standardize(theta_hat, theta_true, n: int, eps: float, alpha: float) -> np.ndarray:
    """``(v (a1^ - a1), v (a2^ - a2), sqrt(n) (a3^ - a3))`` with ``v = eps^-1 n^(1/alpha - 1/2)``."""
    th = np.asarray(ParamPoint.coerce(theta_hat).as_array() if isinstance(theta_hat, ParamPoint) else theta_hat, float)
    tt = np.asarray(ParamPoint.coerce(theta_true).as_array() if isinstance(theta_true, ParamPoint) else theta_true, float)
    v = rate(n, eps, alpha)
    return (th - tt) * np.array([v, v, math.sqrt(n)])
