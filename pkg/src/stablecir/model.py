"""CIR-type model driven by small spectrally positive stable noise.

    dy(t) = (a1 - a2 y(t)) dt + a3 eps y(t-)^(1/q) dz0(t),    y(0) = x0,

observed at ``t_k = k/n`` on ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .stable import sample_z

__all__ = [
    "ModelSpec",
    "ObservedPath",
    "condition_c11",
    "simulate_path",
    "y0_limit",
]


@dataclass(frozen=True)
class ModelSpec:
    a1: float
    a2: float
    a3: float
    q: float
    alpha: float
    eps: float
    x0: float

    def __post_init__(self):
        if self.a1 < 0 or self.a3 < 0 or self.x0 < 0:
            raise ValueError("a1, a3 and x0 must be nonnegative")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if not 1.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie in (1, 2)")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        # Pathwise uniqueness of a positive strong solution needs this.
        if 1.0 / self.q + 1.0 / self.alpha < 1.0 - 1e-12:
            raise ValueError("existence condition 1/q + 1/alpha >= 1 violated")

    @property
    def theta(self) -> tuple[float, float, float]:
        return (self.a1, self.a2, self.a3)

    @property
    def condition_ok(self) -> bool:
        return condition_c11(self.x0, self.a1, self.a2)

    def to_dict(self) -> dict:
        return asdict(self)


def condition_c11(x0: float, a1: float, a2: float) -> bool:
    """Nondegeneracy of the limit path: y0 > 0 on (0, 1] and not constant.

    Fails when ``x0 = a1/a2`` with ``a2 != 0``, when ``a1 = a2 = 0``, or when
    ``x0 = a1 = 0``.
    """
    if a2 != 0 and math.isclose(x0, a1 / a2, rel_tol=1e-12, abs_tol=1e-15):
        return False
    if a1 == 0 and a2 == 0:
        return False
    if x0 == 0 and a1 == 0:
        return False
    return True


@dataclass(frozen=True)
class ObservedPath:
    """Observations ``values[k] = y(k/n)`` for ``k = 0..n``."""

    n: int
    values: np.ndarray
    seed: int | None = None
    substeps: int = 1
    clamps: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} values, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


def y0_limit(spec: ModelSpec, t):
    """Noise-free path solving ``dy = (a1 - a2 y) dt`` from ``x0``."""
    t = np.asarray(t, dtype=float)
    a1, a2, x0 = spec.a1, spec.a2, spec.x0
    if a2 == 0:
        out = x0 + a1 * t
    else:
        e = np.exp(-a2 * t)
        out = x0 * e + a1 / a2 * (1.0 - e)
    return float(out) if out.ndim == 0 else out


def simulate_path(
    spec: ModelSpec,
    n: int,
    substeps: int = 8,
    rng: np.random.Generator | int | None = None,
) -> ObservedPath:
    """Euler-Maruyama on a grid of step ``1 / (n * substeps)``, kept every substep.

    Each fine step uses an exact stable increment ``h**(1/alpha) * z``.  The
    state is clamped at zero; the number of clamping events is recorded.
    ``rng`` may be a generator or an integer seed (recorded on the path).
    """
    if n < 1 or substeps < 1:
        raise ValueError("n and substeps must be positive")
    seed = None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        rng = np.random.default_rng(seed)

    steps = n * substeps
    h = 1.0 / steps
    a1, a2, a3 = spec.a1, spec.a2, spec.a3
    inv_q = 1.0 / spec.q
    noise_scale = a3 * spec.eps * h ** (1.0 / spec.alpha)
    if noise_scale > 0:
        kicks = (noise_scale * sample_z(spec.alpha, rng, size=steps)).tolist()
    else:
        kicks = [0.0] * steps

    out = [0.0] * (n + 1)
    y = float(spec.x0)
    out[0] = y
    clamps = 0
    k = 0
    for i in range(steps):
        y = y + (a1 - a2 * y) * h + kicks[i] * y**inv_q
        if y < 0.0:
            y = 0.0
            clamps += 1
        if (i + 1) % substeps == 0:
            k += 1
            out[k] = y
    return ObservedPath(n=n, values=np.array(out), seed=seed, substeps=substeps, clamps=clamps)
