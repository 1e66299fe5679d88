"""Limit objects of the estimator: path moments, information matrix, limit criterion.

Notation: ``theta_bar = (a1, a2, a3)`` are the true values, ``y0`` the noise-free
path from ``x0``, and for a candidate ``a``

    Y(a, t)     = (a1_bar - a1) / a3 * y0(t)^(-1/q) + (a2 - a2_bar) / a3 * y0(t)^(1 - 1/q)
    Y0(a, t, x) = m0 * Y(a, t) + a3_bar / a3 * x.

x-integrals run on the density grid (trapezoid, refined when the argument is
compressed) plus quadrature of the right-tail form; t-integrals use 64-point
Gauss-Legendre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .likelihood import ParamPoint
from .model import ModelSpec, condition_c11, y0_limit
from .stable import StableLaw

__all__ = [
    "ConditionError",
    "PositiveDefiniteError",
    "SigmaReport",
    "TailAccuracyError",
    "limit_criterion",
    "limit_hessian",
    "limit_gradient",
    "moments_m",
    "sigma_matrix",
    "v_integrals",
]

_GL_T, _GL_W = np.polynomial.legendre.leggauss(64)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


class ConditionError(ValueError):
    """The nondegeneracy condition on ``(x0, a1, a2)`` fails."""


class PositiveDefiniteError(ArithmeticError):
    """Sigma failed a Cholesky factorization although the condition holds."""


class TailAccuracyError(ArithmeticError):
    """Tail contributions are too large a share of a density integral."""


def _truth(true_params) -> tuple[float, float, float, float]:
    if isinstance(true_params, ModelSpec):
        return true_params.x0, true_params.a1, true_params.a2, true_params.a3
    if isinstance(true_params, dict):
        return tuple(float(true_params[k]) for k in ("x0", "a1", "a2", "a3"))
    x0, a1, a2, a3 = (float(v) for v in true_params)
    return x0, a1, a2, a3


class _Y0:
    __slots__ = ("x0", "a1", "a2")

    def __init__(self, x0, a1, a2):
        self.x0, self.a1, self.a2 = x0, a1, a2


def _y0(x0, a1, a2, t):
    return y0_limit(_Y0(x0, a1, a2), t)


def moments_m(true_params, q: float, i: int, j: int) -> float:
    """``m^{i,j} = int_0^1 y0(t)^(i - j/q) dt`` by adaptive quadrature."""
    x0, a1, a2, _ = _truth(true_params)
    power = i - j / q
    if power < 0 and not condition_c11(x0, a1, a2):
        raise ConditionError("y0 may vanish; negative powers are not integrable")
    return _moment(x0, a1, a2, power)


def _moment(x0, a1, a2, power):
    if x0 == 0.0 and power <= -1.0:
        # y0(t) ~ a1 t near the origin
        raise ConditionError(f"y0 starts at zero; the moment of power {power:.4g} diverges")
    if x0 == 0.0 and power < 0.0:
        # integrable endpoint singularity: factor t^power into the weight
        def ratio(t):
            return (_y0(x0, a1, a2, t) / t) ** power if t > 0 else a1**power

        val, _ = integrate.quad(ratio, 0.0, 1.0, weight="alg", wvar=(power, 0.0), epsabs=1e-12, epsrel=1e-12)
        return float(val)
    val, _ = integrate.quad(lambda t: _y0(x0, a1, a2, t) ** power, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(val)


_GL_U, _GL_UW = np.polynomial.legendre.leggauss(16)


def _right_tail_integral(law: StableLaw, fn, x_from=None) -> float:
    """``int_{x_from}^inf p_tail(x) fn(x) dx`` with the right-tail form of ``p``.

    With ``x = x_from * exp(u)`` the integrand decays like ``exp(-alpha u)``;
    composite Gauss-Legendre on ``u in [0, 40 / alpha]`` (eight panels) then
    leaves a remainder below ``exp(-40)`` of the leading term.  ``fn`` must
    accept arrays.
    """
    x_from = law.window[1] if x_from is None else x_from
    edges = np.linspace(0.0, 40.0 / law.alpha, 9)
    half = 0.5 * (edges[1] - edges[0])
    u = ((edges[:-1] + half)[:, None] + half * _GL_U[None, :]).ravel()
    w = np.tile(half * _GL_UW, 8)
    x = x_from * np.exp(u)
    return float(np.sum(w * x * np.exp(law._right(x, 0)[0]) * fn(x)))


def _trapezoid(h, f):
    return h * (f.sum() - 0.5 * (f[0] + f[-1]))


def v_integrals(law: StableLaw, check_tail: bool = True) -> tuple[float, float, float]:
    """``v1 = int p'^2/p``, ``v2 = int x p'^2/p``, ``v3 = int x^2 p'^2/p - 1``."""
    x, p = law.x, law.p
    h = law._h
    h0 = law.dp / p
    base = h0 * h0 * p
    body = [_trapezoid(h, base * x**k) for k in range(3)]

    def tail_fn(k):
        return lambda t: law._right(t, 1)[1] ** 2 * t**k

    tails = [_right_tail_integral(law, tail_fn(k)) for k in range(3)]
    v = [b + t for b, t in zip(body, tails)]
    if check_tail:
        for k in range(3):
            if abs(tails[k]) > 1e-4 * abs(v[k]):
                raise TailAccuracyError(
                    f"tail share {tails[k] / v[k]:.2e} of the x^{k} information integral; enlarge the window"
                )
    return v[0], v[1], v[2] - 1.0


@dataclass(frozen=True)
class SigmaReport:
    v1: float
    v2: float
    v3: float
    m: dict
    sigma: np.ndarray
    limit_cov: np.ndarray | None
    min_eigenvalue: float
    condition_ok: bool
    drift_block_det: float

    def to_dict(self) -> dict:
        return {
            "v1": self.v1,
            "v2": self.v2,
            "v3": self.v3,
            "m": dict(self.m),
            "sigma": self.sigma.tolist(),
            "limit_cov": None if self.limit_cov is None else self.limit_cov.tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "condition_ok": self.condition_ok,
            "drift_block_det": self.drift_block_det,
        }


def sigma_matrix(true_params, q: float, law: StableLaw, v: tuple[float, float, float] | None = None) -> SigmaReport:
    """Information matrix ``Sigma`` and the limit covariance ``a3^2 Sigma^-1``."""
    x0, a1, a2, a3 = _truth(true_params)
    ok = condition_c11(x0, a1, a2)
    v1, v2, v3 = v_integrals(law) if v is None else v
    pairs = [(0, 1), (1, 1), (0, 2), (1, 2), (2, 2)]
    if ok:
        m = {f"{i},{j}": moments_m((x0, a1, a2, a3), q, i, j) for i, j in pairs}
    else:
        # Degenerate but possibly still positive path (e.g. constant); report Sigma when it is finite.
        positive = min(_y0(x0, a1, a2, 0.0), _y0(x0, a1, a2, 1.0)) > 0
        m = {f"{i},{j}": _moment(x0, a1, a2, i - j / q) if positive else float("nan") for i, j in pairs}
    s = np.array(
        [
            [v1 * m["0,2"], -v1 * m["1,2"], v2 * m["0,1"]],
            [-v1 * m["1,2"], v1 * m["2,2"], -v2 * m["1,1"]],
            [v2 * m["0,1"], -v2 * m["1,1"], v3],
        ]
    )
    drift_det = v1 * v1 * (m["0,2"] * m["2,2"] - m["1,2"] ** 2)
    if not np.all(np.isfinite(s)):
        return SigmaReport(v1, v2, v3, m, s, None, float("nan"), ok, float(drift_det))
    min_eig = float(np.linalg.eigvalsh(s)[0])
    cov = None
    if ok:
        # Without the condition the limit covariance is undefined even if Cholesky succeeds on round-off.
        try:
            factor = linalg.cho_factor(s)
        except linalg.LinAlgError:
            raise PositiveDefiniteError("Sigma is not positive definite under the nondegeneracy condition")
        cov = a3 * a3 * linalg.cho_solve(factor, np.eye(3))
        cov = 0.5 * (cov + cov.T)
    return SigmaReport(v1, v2, v3, m, s, cov, min_eig, ok, float(drift_det))


# ------------------------------------------------------------ limit criterion


def _setup(a, true_params, law):
    x0, b1, b2, b3 = _truth(true_params)
    if not condition_c11(x0, b1, b2):
        raise ConditionError("limit criterion needs the nondegeneracy condition")
    a = ParamPoint.coerce(a)
    y0 = _y0(x0, b1, b2, _GL_T)
    return a, (b1, b2, b3), y0


def _x_grid(law: StableLaw, ratio: float):
    refine = max(1, int(math.ceil(ratio)))
    if refine == 1:
        return law.x, law.p, law._h
    lo, hi = law.window
    x = np.linspace(lo, hi, (law.n_nodes - 1) * refine + 1)
    return x, law.pdf(x), x[1] - x[0]


def _inner(law, x, p, h, shift, ratio, order, fn):
    """``int p(x) fn(Y0) dx`` with ``Y0 = shift + ratio * x``."""
    vals = law.evaluate(shift + ratio * x, order)
    body = _trapezoid(h, p * fn(shift + ratio * x, vals))

    def tail(t):
        y = shift + ratio * t
        return fn(y, law.evaluate(y, order))

    return body + _right_tail_integral(law, tail)


def limit_criterion(a, true_params, q: float, law: StableLaw, m0: float = 1.0) -> float:
    """``U(a) = int_0^1 dt int p(x) log p(Y0(a, t, x)) dx - log a3``."""
    a, (b1, b2, b3), y0 = _setup(a, true_params, law)
    ratio = b3 / a.a3
    x, p, h = _x_grid(law, ratio)
    shifts = m0 * ((b1 - a.a1) / a.a3 * y0 ** (-1.0 / q) + (a.a2 - b2) / a.a3 * y0 ** (1.0 - 1.0 / q))
    inner = np.array([_inner(law, x, p, h, c, ratio, 0, lambda y, v: v[0]) for c in shifts])
    return float(_GL_W @ inner - math.log(a.a3))


def limit_gradient(a, true_params, q: float, law: StableLaw, m0: float = 1.0) -> np.ndarray:
    """Gradient of :func:`limit_criterion`."""
    a, (b1, b2, b3), y0 = _setup(a, true_params, law)
    ratio = b3 / a.a3
    x, p, h = _x_grid(law, ratio)
    nn, mm = y0 ** (-1.0 / q), y0 ** (1.0 - 1.0 / q)
    shifts = m0 * ((b1 - a.a1) / a.a3 * nn + (a.a2 - b2) / a.a3 * mm)
    h0 = np.array([_inner(law, x, p, h, c, ratio, 1, lambda y, v: v[1]) for c in shifts])
    h0y = np.array([_inner(law, x, p, h, c, ratio, 1, lambda y, v: v[1] * y) for c in shifts])
    g1 = -m0 / a.a3 * (_GL_W @ (nn * h0))
    g2 = m0 / a.a3 * (_GL_W @ (mm * h0))
    g3 = -(_GL_W @ h0y + 1.0) / a.a3
    return np.array([g1, g2, g3])


def limit_hessian(a, true_params, q: float, law: StableLaw, m0: float = 1.0) -> np.ndarray:
    """Limit ``V(a)`` of the scaled Hessian.

    Entries integrate ``<H1(Y0), p>``, ``<H2(Y0), p>`` and ``<H3(Y0), p>`` against
    powers of ``y0`` over ``t``, including the ``V^{3,3}`` entry.  For
    ``m0 = 1`` this equals the Hessian of :func:`limit_criterion`; otherwise
    the Hessian is ``D V D`` with ``D = diag(m0, m0, 1)``.
    """
    a, (b1, b2, b3), y0 = _setup(a, true_params, law)
    ratio = b3 / a.a3
    x, p, h = _x_grid(law, ratio)
    nn, mm = y0 ** (-1.0 / q), y0 ** (1.0 - 1.0 / q)
    shifts = m0 * ((b1 - a.a1) / a.a3 * nn + (a.a2 - b2) / a.a3 * mm)

    def h1(y, v):
        return v[2]

    def h2(y, v):
        return y * v[2] + v[1]

    def h3(y, v):
        return y * y * v[2] + 2.0 * y * v[1] + 1.0

    i1 = np.array([_inner(law, x, p, h, c, ratio, 2, h1) for c in shifts])
    i2 = np.array([_inner(law, x, p, h, c, ratio, 2, h2) for c in shifts])
    i3 = np.array([_inner(law, x, p, h, c, ratio, 2, h3) for c in shifts])
    c = 1.0 / (a.a3 * a.a3)
    out = np.empty((3, 3))
    out[0, 0] = c * (_GL_W @ (nn * nn * i1))
    out[0, 1] = out[1, 0] = -c * (_GL_W @ (nn * mm * i1))
    out[1, 1] = c * (_GL_W @ (mm * mm * i1))
    out[0, 2] = out[2, 0] = c * (_GL_W @ (nn * i2))
    out[1, 2] = out[2, 1] = -c * (_GL_W @ (mm * i2))
    out[2, 2] = c * (_GL_W @ i3)
    return out
