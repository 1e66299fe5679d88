"""Likelihood-type criterion for discretely observed paths.

For ``theta = (a1, a2, a3)`` the standardized one-step residuals are

    Y_k = [y_k - y_{k-1} - a1/n + a2 y_{k-1}/n] / [a3 eps n^(-1/alpha) y_{k-1}^(1/q)]

and the criterion is ``U(theta) = sum_k log p(Y_k) - n log a3``.  The terms of
the full log-likelihood that do not depend on ``theta`` are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ObservedPath
from .stable import StableLaw

__all__ = [
    "Criterion",
    "DegeneratePathError",
    "ParamPoint",
    "Residuals",
    "gradient_u",
    "objective_u",
    "rate",
    "residuals",
    "scaled_hessian",
    "scaled_score",
]


class DegeneratePathError(ValueError):
    """An observation used as a left endpoint is not strictly positive."""


@dataclass(frozen=True)
class ParamPoint:
    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        if not self.a3 > 0:
            raise ValueError("a3 must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3], dtype=float)

    @classmethod
    def coerce(cls, theta) -> "ParamPoint":
        if isinstance(theta, cls):
            return theta
        a1, a2, a3 = (float(v) for v in theta)
        return cls(a1, a2, a3)


@dataclass(frozen=True)
class Residuals:
    y_vec: np.ndarray
    prev: np.ndarray
    prev_pow: np.ndarray


def rate(n: int, eps: float, alpha: float) -> float:
    """Drift rate ``v = eps^-1 n^(1/alpha - 1/2)``."""
    return n ** (1.0 / alpha - 0.5) / eps


class Criterion:
    """Path-dependent pieces of ``U`` precomputed once for repeated evaluation."""

    def __init__(self, path: ObservedPath, eps: float, alpha: float, q: float, law: StableLaw | None = None):
        values = np.asarray(path.values, dtype=float)
        prev = values[:-1]
        if np.any(prev <= 0) or not np.all(np.isfinite(values)):
            bad = int(np.argmax(prev <= 0))
            raise DegeneratePathError(f"y(t_{bad}) = {prev[bad]} is not positive")
        if eps <= 0:
            raise ValueError("eps must be positive")
        if law is not None and not math.isclose(law.alpha, alpha, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"law built for alpha={law.alpha}, criterion uses alpha={alpha}")
        self.n = int(path.n)
        self.eps, self.alpha, self.q = float(eps), float(alpha), float(q)
        self.law = law
        self.prev = prev
        self.prev_pow = prev ** (1.0 / q)
        self.increments = np.diff(values)
        # 1 / (eps n^(-1/alpha) y^(1/q)); a3 enters separately
        self.inv_scale = 1.0 / (eps * self.n ** (-1.0 / alpha) * self.prev_pow)
        self.inc_scaled = self.increments * self.inv_scale
        self.drift1 = self.inv_scale / self.n
        self.drift2 = self.prev * self.inv_scale / self.n
        # N_k = y^(-1/q), M_k = y^(1 - 1/q)
        self.big_n = 1.0 / self.prev_pow
        self.big_m = self.prev / self.prev_pow

    def _law(self, law):
        law = self.law if law is None else law
        if law is None:
            raise ValueError("no density law supplied")
        return law

    def residuals(self, theta) -> np.ndarray:
        a1, a2, a3 = theta
        return (self.inc_scaled - a1 * self.drift1 + a2 * self.drift2) / a3

    def objective(self, theta, law: StableLaw | None = None) -> float:
        law = self._law(law)
        a3 = theta[2]
        y = self.residuals(theta)
        return float(np.sum(law.evaluate(y, 0)[0]) - self.n * math.log(a3))

    def gradient(self, theta, law: StableLaw | None = None) -> np.ndarray:
        law = self._law(law)
        a3 = theta[2]
        y = self.residuals(theta)
        h0 = law.evaluate(y, 1)[1]
        g1 = -np.sum(h0 * self.drift1) / a3
        g2 = np.sum(h0 * self.drift2) / a3
        g3 = -np.sum(h0 * y + 1.0) / a3
        return np.array([g1, g2, g3])

    def value_and_gradient(self, theta, law: StableLaw | None = None):
        law = self._law(law)
        a3 = theta[2]
        y = self.residuals(theta)
        lp, h0 = law.evaluate(y, 1)
        u = float(np.sum(lp) - self.n * math.log(a3))
        g = np.array([
            -np.sum(h0 * self.drift1) / a3,
            np.sum(h0 * self.drift2) / a3,
            -np.sum(h0 * y + 1.0) / a3,
        ])
        return u, g

    def scaled_hessian(self, theta, law: StableLaw | None = None) -> np.ndarray:
        """``V_{eps,n}``: the Hessian of ``U`` divided by ``v^2``, ``v sqrt(n)`` and ``n`` blockwise."""
        law = self._law(law)
        a3 = theta[2]
        y = self.residuals(theta)
        _, h0, h1 = law.evaluate(y, 2)
        h2 = y * h1 + h0
        h3 = y * y * h1 + 2.0 * y * h0 + 1.0
        nn, mm = self.big_n, self.big_m
        c = 1.0 / (a3 * a3 * self.n)
        v = np.empty((3, 3))
        v[0, 0] = c * np.sum(h1 * nn * nn)
        v[0, 1] = v[1, 0] = -c * np.sum(h1 * mm * nn)
        v[1, 1] = c * np.sum(h1 * mm * mm)
        v[0, 2] = v[2, 0] = c * np.sum(h2 * nn)
        v[1, 2] = v[2, 1] = -c * np.sum(h2 * mm)
        v[2, 2] = c * np.sum(h3)
        return v

    def hessian(self, theta, law: StableLaw | None = None) -> np.ndarray:
        """Unscaled Hessian of ``U``."""
        d = self.scale_vector()
        return self.scaled_hessian(theta, law) * np.outer(d, d)

    def scale_vector(self) -> np.ndarray:
        v = rate(self.n, self.eps, self.alpha)
        return np.array([v, v, math.sqrt(self.n)])

    def scaled_score(self, theta, law: StableLaw | None = None) -> np.ndarray:
        """``(U^1 / v, U^2 / v, U^3 / sqrt(n))``."""
        return self.gradient(theta, law) / self.scale_vector()


def residuals(path: ObservedPath, theta, eps: float, alpha: float, q: float) -> Residuals:
    crit = Criterion(path, eps, alpha, q)
    theta = ParamPoint.coerce(theta)
    y = crit.residuals((theta.a1, theta.a2, theta.a3))
    return Residuals(y_vec=y, prev=crit.prev, prev_pow=crit.prev_pow)


def objective_u(path: ObservedPath, theta, eps: float, alpha: float, q: float, law: StableLaw) -> float:
    t = ParamPoint.coerce(theta)
    return Criterion(path, eps, alpha, q, law).objective((t.a1, t.a2, t.a3))


def gradient_u(path: ObservedPath, theta, eps: float, alpha: float, q: float, law: StableLaw) -> np.ndarray:
    """Unscaled partial derivatives ``(dU/da1, dU/da2, dU/da3)``."""
    t = ParamPoint.coerce(theta)
    return Criterion(path, eps, alpha, q, law).gradient((t.a1, t.a2, t.a3))


def scaled_hessian(path: ObservedPath, theta, eps: float, alpha: float, q: float, law: StableLaw) -> np.ndarray:
    t = ParamPoint.coerce(theta)
    return Criterion(path, eps, alpha, q, law).scaled_hessian((t.a1, t.a2, t.a3))


def scaled_score(path: ObservedPath, theta, eps: float, alpha: float, q: float, law: StableLaw) -> np.ndarray:
    t = ParamPoint.coerce(theta)
    return Criterion(path, eps, alpha, q, law).scaled_score((t.a1, t.a2, t.a3))
