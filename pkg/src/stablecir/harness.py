"""Monte Carlo experiments and the invariant battery.

An experiment simulates ``replicas`` paths for every ``n`` in ``n_list``,
estimates each, standardizes against the true values and compares the spread
of the standardized errors with the limit covariance.  Every replica draws
from its own stream ``SeedSequence([master_seed, n, replica])``, so results do
not depend on execution order or worker count.

Config file (JSON)::

    {
      "schema": 1,
      "model": {"a1": 1.0, "a2": 0.5, "a3": 0.3, "q": 1.5, "alpha": 1.5, "x0": 1.0},
      "n_list": [1000, 4000, 16000],
      "eps": null,                 # or one explicit eps per n
      "m0": 1.0,                   # coupling eps = n**(1/alpha - 1) / m0
      "replicas": 300,
      "box": [0, 5, -5, 5, 0.01, 5],
      "substeps": 8,
      "master_seed": 20240611,
      "out_dir": "mc_out",
      "workers": 1,
      "n_starts": 8,
      "density": {"window": null, "n_nodes": 16384, "cache_dir": null}
    }
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import asymptotics
from .estimator import EstimatorOptions, ParamBox, maximize
from .likelihood import Criterion
from .model import ModelSpec, ObservedPath, condition_c11, simulate_path
from .stable import (
    DensityBuildError,
    StableLaw,
    build_density,
    invert_point,
    laplace_exponent,
)

__all__ = [
    "Check",
    "ConfigError",
    "ExperimentConfig",
    "McSummary",
    "ReplicaResult",
    "run_experiment",
    "run_replica",
    "verify_suite",
]

log = logging.getLogger(__name__)

SCHEMA = 1
CSV_COLUMNS = [
    "n", "eps", "replica", "a1_hat", "a2_hat", "a3_hat",
    "S1", "S2", "S3", "u_value", "converged", "boundary_hit", "clamps",
]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n_list: tuple[int, ...] = (1000, 4000, 16000)
    eps: tuple[float, ...] | None = None
    m0: float = 1.0
    replicas: int = 300
    box: ParamBox = field(default_factory=ParamBox.default)
    substeps: int = 8
    master_seed: int = 20240611
    out_dir: str = "mc_out"
    workers: int = 1
    n_starts: int = 8
    density_window: tuple[float, float] | None = None
    density_nodes: int = 2**14
    cache_dir: str | None = None

    def __post_init__(self):
        if not self.n_list or any(int(n) < 2 for n in self.n_list):
            raise ConfigError("n_list needs integers >= 2")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if not self.m0 > 0:
            raise ConfigError("m0 must be positive")
        if self.eps is not None:
            if len(self.eps) != len(self.n_list):
                raise ConfigError("give one eps per n")
            if any(not e > 0 for e in self.eps):
                raise ConfigError("eps values must be positive")
        if self.substeps < 1 or self.workers < 1 or self.n_starts < 0:
            raise ConfigError("substeps and workers must be positive, n_starts nonnegative")

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls(model=ModelSpec(a1=1.0, a2=0.5, a3=0.3, q=1.5, alpha=1.5, eps=0.0, x0=1.0))

    def eps_for(self, n: int) -> float:
        if self.eps is not None:
            return float(self.eps[list(self.n_list).index(n)])
        return n ** (1.0 / self.model.alpha - 1.0) / self.m0

    def theta_true(self) -> np.ndarray:
        return np.array(self.model.theta, dtype=float)

    def to_dict(self) -> dict:
        m = self.model
        return {
            "schema": SCHEMA,
            "model": {"a1": m.a1, "a2": m.a2, "a3": m.a3, "q": m.q, "alpha": m.alpha, "x0": m.x0},
            "n_list": [int(n) for n in self.n_list],
            "eps": None if self.eps is None else [float(e) for e in self.eps],
            "m0": self.m0,
            "replicas": self.replicas,
            "box": self.box.to_list(),
            "substeps": self.substeps,
            "master_seed": self.master_seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "n_starts": self.n_starts,
            "density": {
                "window": None if self.density_window is None else list(self.density_window),
                "n_nodes": self.density_nodes,
                "cache_dir": self.cache_dir,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if d.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported schema {d.get('schema')!r}; expected {SCHEMA}")
        known = {"schema", "model", "n_list", "eps", "m0", "replicas", "box", "substeps",
                 "master_seed", "out_dir", "workers", "n_starts", "density"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            md = d["model"]
            model = ModelSpec(
                a1=float(md["a1"]), a2=float(md["a2"]), a3=float(md["a3"]),
                q=float(md["q"]), alpha=float(md["alpha"]), eps=0.0, x0=float(md["x0"]),
            )
            dens = d.get("density") or {}
            window = dens.get("window")
            kwargs = dict(
                model=model,
                n_list=tuple(int(n) for n in d.get("n_list", (1000, 4000, 16000))),
                eps=None if d.get("eps") is None else tuple(float(e) for e in d["eps"]),
                m0=float(d.get("m0", 1.0)),
                replicas=int(d.get("replicas", 300)),
                box=ParamBox.from_list(d["box"]) if "box" in d else ParamBox.default(),
                substeps=int(d.get("substeps", 8)),
                master_seed=int(d.get("master_seed", 20240611)),
                out_dir=str(d.get("out_dir", "mc_out")),
                workers=int(d.get("workers", 1)),
                n_starts=int(d.get("n_starts", 8)),
                density_window=None if window is None else (float(window[0]), float(window[1])),
                density_nodes=int(dens.get("n_nodes", 2**14)),
                cache_dir=dens.get("cache_dir"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def _build_law(cfg: ExperimentConfig) -> StableLaw:
    return build_density(cfg.model.alpha, window=cfg.density_window, n_nodes=cfg.density_nodes,
                         cache_dir=cfg.cache_dir)


# --------------------------------------------------------------- replicas


@dataclass(frozen=True)
class ReplicaResult:
    n: int
    eps: float
    replica: int
    theta_hat: tuple[float, float, float] | None
    s: tuple[float, float, float] | None
    u_value: float | None
    converged: bool
    boundary_hit: bool
    clamps: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def replica_seed(master_seed: int, n: int, replica: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(n), int(replica)])


def run_replica(cfg: ExperimentConfig, law: StableLaw, n: int, replica: int) -> ReplicaResult:
    """Simulate, estimate and standardize one replica; failures are returned, not raised."""
    eps = cfg.eps_for(n)
    spec = dataclasses.replace(cfg.model, eps=eps)
    rng = np.random.default_rng(replica_seed(cfg.master_seed, n, replica))
    clamps = 0
    try:
        path = simulate_path(spec, n, substeps=cfg.substeps, rng=rng)
        clamps = path.clamps
        rep = maximize(
            path, cfg.box, eps, spec.alpha, spec.q, law,
            opts=EstimatorOptions(n_starts=cfg.n_starts),
            theta_true=cfg.theta_true(),
        )
    except (ValueError, ArithmeticError) as exc:
        return ReplicaResult(n, eps, replica, None, None, None, False, False, clamps,
                             f"{type(exc).__name__}: {exc}")
    return ReplicaResult(
        n=n,
        eps=eps,
        replica=replica,
        theta_hat=tuple(float(v) for v in rep.theta),
        s=tuple(float(v) for v in rep.standardized_error),
        u_value=float(rep.u_value),
        converged=bool(rep.converged),
        boundary_hit=bool(any(rep.boundary_hit)),
        clamps=clamps,
    )


_WORKER: dict = {}


def _worker_init(cfg, law):
    _WORKER["cfg"], _WORKER["law"] = cfg, law


def _worker_run(task):
    n, replica = task
    return run_replica(_WORKER["cfg"], _WORKER["law"], n, replica)


def _run_all(cfg: ExperimentConfig, law: StableLaw) -> list[ReplicaResult]:
    tasks = [(int(n), r) for n in cfg.n_list for r in range(cfg.replicas)]
    if cfg.workers == 1:
        return [run_replica(cfg, law, n, r) for n, r in tasks]
    with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_worker_init, initargs=(cfg, law)) as pool:
        return list(pool.map(_worker_run, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))


# ---------------------------------------------------------------- summary


@dataclass
class McSummary:
    config: dict
    target: dict | None
    per_n: list[dict]
    consistency: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "target": self.target, "per_n": self.per_n, "consistency": self.consistency}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def covariance_errors(emp: np.ndarray, target: np.ndarray) -> dict:
    """Entrywise discrepancies between an empirical and a target covariance."""
    rel = np.abs(emp - target) / np.abs(target)
    d = np.sqrt(np.diag(target))
    scaled = np.abs(emp - target) / np.outer(d, d)
    return {
        "relative": rel,
        "max_relative_entry_error": float(rel.max()),
        "scaled": scaled,
        "max_scaled_entry_error": float(scaled.max()),
        "variance_ratio": np.diag(emp) / np.diag(target),
    }


def _aggregate(cfg, n, rows, failures, target_cov):
    theta = cfg.theta_true()
    out = {
        "n": n,
        "eps": cfg.eps_for(n),
        "m_eps_n": n ** (1.0 / cfg.model.alpha - 1.0) / cfg.eps_for(n),
        "replicas": cfg.replicas,
        "successes": len(rows),
        "failures": len(failures),
        "clamps": int(sum(r.clamps for r in rows) + sum(r.clamps for r in failures)),
        "boundary_hits": int(sum(r.boundary_hit for r in rows)),
        "not_converged": int(sum(not r.converged for r in rows)),
    }
    if not rows:
        return out
    s = np.array([r.s for r in rows])
    th = np.array([r.theta_hat for r in rows])
    out["mean_S"] = s.mean(axis=0)
    out["median_abs_error"] = np.median(np.abs(th - theta), axis=0)
    if len(rows) >= 2:
        emp = np.cov(s.T)
        out["cov_S"] = emp
        out["skewness"] = stats.skew(s, axis=0)
        out["excess_kurtosis"] = stats.kurtosis(s, axis=0)
        if target_cov is not None:
            errs = covariance_errors(emp, target_cov)
            out.update(
                {
                    "max_relative_entry_error": errs["max_relative_entry_error"],
                    "max_scaled_entry_error": errs["max_scaled_entry_error"],
                    "variance_ratio": errs["variance_ratio"],
                }
            )
    return out


def _consistency(per_n):
    ns = [p["n"] for p in per_n if "median_abs_error" in p]
    if len(ns) < 2:
        return {"n": ns}
    med = np.array([p["median_abs_error"] for p in per_n if "median_abs_error" in p])
    decreasing = [bool(np.all(np.diff(med[:, i]) < 0)) for i in range(3)]
    slope = float(np.polyfit(np.log(ns), np.log(med[:, 2]), 1)[0]) if np.all(med[:, 2] > 0) else None
    return {"n": ns, "median_abs_error": med, "strictly_decreasing": decreasing, "a3_loglog_slope": slope}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> McSummary:
    """Run all replicas, write ``replicas.csv``, ``failures.csv`` and ``summary.json``."""
    law = _build_law(cfg)
    target = None
    target_cov = None
    if condition_c11(cfg.model.x0, cfg.model.a1, cfg.model.a2):
        try:
            rep = asymptotics.sigma_matrix(cfg.model, cfg.model.q, law)
        except (ValueError, ArithmeticError) as exc:
            log.warning("no target covariance: %s", exc)
            target = {"error": f"{type(exc).__name__}: {exc}"}
        else:
            target = rep.to_dict()
            target_cov = rep.limit_cov
    else:
        log.warning("nondegeneracy condition fails; no target covariance")

    results = _run_all(cfg, law)
    per_n = []
    for n in cfg.n_list:
        mine = [r for r in results if r.n == n]
        rows = [r for r in mine if r.ok]
        failures = [r for r in mine if not r.ok]
        per_n.append(_aggregate(cfg, int(n), rows, failures, target_cov))
    # where and how wide the run executes does not belong in the reproducible record
    echo = {k: v for k, v in cfg.to_dict().items() if k not in ("out_dir", "workers")}
    echo["density"] = {k: v for k, v in echo["density"].items() if k != "cache_dir"}
    summary = McSummary(config=echo, target=target, per_n=per_n, consistency=_consistency(per_n))

    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "replicas.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in results:
                if r.ok:
                    w.writerow([r.n, repr(r.eps), r.replica, *map(repr, r.theta_hat), *map(repr, r.s),
                                repr(r.u_value), int(r.converged), int(r.boundary_hit), r.clamps])
        with open(out / "failures.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "eps", "replica", "clamps", "error"])
            for r in results:
                if not r.ok:
                    w.writerow([r.n, repr(r.eps), r.replica, r.clamps, r.error])
        (out / "summary.json").write_text(summary.to_json())
    return summary


# ----------------------------------------------------------------- verify


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass", "fail" or "skipped"
    measured: float | None
    tolerance: float | None
    detail: str = ""

    def to_dict(self) -> dict:
        return _clean(dataclasses.asdict(self))


def _check(name, measured, tol, detail=""):
    ok = measured is not None and math.isfinite(measured) and measured <= tol
    return Check(name, "pass" if ok else "fail", measured, tol, detail)


def _window_mass(alpha, window, points=801):
    x = np.linspace(window[0], window[1], points)
    p = np.array([invert_point(alpha, v) for v in x])
    return float(np.trapezoid(p, x))


def score_identities(law: StableLaw) -> dict:
    """``<H0, p>`` and ``int (x H0 + 1) p``; both vanish for a density."""
    h0 = law.dp / law.p
    h = law._h

    def trap(f):
        return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))

    def tail(fn):
        return asymptotics._right_tail_integral(law, fn)

    def h0_tail(t):
        return law._right(t, 1)[1]

    return {
        "score_mean_zero": trap(law.dp) + tail(h0_tail),
        "score_scale_identity": trap((law.x * h0 + 1.0) * law.p) + tail(lambda t: t * h0_tail(t) + 1.0),
    }


def _fd_gradient(f, theta, steps):
    g = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = steps[i]
        g[i] = (f(theta + e) - f(theta - e)) / (2 * steps[i])
    return g


def verify_suite(cfg: ExperimentConfig | None = None) -> list[Check]:
    """Invariant battery; failures are reported as data, never raised."""
    cfg = ExperimentConfig.default() if cfg is None else cfg
    m = cfg.model
    checks: list[Check] = []
    try:
        law = _build_law(cfg)
    except DensityBuildError as exc:
        window = cfg.density_window
        measured = None
        if window is not None:
            measured = abs(_window_mass(m.alpha, window) - 1.0)
        checks.append(Check("density_normalization", "fail", measured, 1e-6, f"density build failed: {exc}"))
        return checks

    checks.append(_check("density_normalization", abs(law.total_mass() - 1.0), 1e-6))
    for lam in (0.5, 1.0):
        body = np.exp(-lam * law.x) * law.p
        lt = float(law._h * (body.sum() - 0.5 * (body[0] + body[-1])))
        exact = math.exp(laplace_exponent(m.alpha, lam))
        checks.append(_check(f"laplace_transform_grid_lambda_{lam}", abs(lt / exact - 1.0), 1e-6))

    for name, value in score_identities(law).items():
        checks.append(_check(name, abs(value), 1e-6))

    try:
        v1, v2, v3 = asymptotics.v_integrals(law)
    except asymptotics.TailAccuracyError as exc:
        checks.append(Check("information_integrals", "fail", None, 1e-4, str(exc)))
        return checks
    checks.append(Check("v3_positive", "pass" if v3 > 0 else "fail", v3, 0.0))
    checks.append(Check("cauchy_schwarz_v", "pass" if v2 * v2 < v1 * v3 else "fail", v2 * v2 - v1 * v3, 0.0))

    # analytic derivatives of U on a short simulated path
    n = 500
    eps = n ** (1.0 / m.alpha - 1.0) / cfg.m0
    spec = dataclasses.replace(m, eps=eps)
    path: ObservedPath = simulate_path(spec, n, substeps=cfg.substeps, rng=np.random.default_rng(cfg.master_seed))
    crit = Criterion(path, eps, m.alpha, m.q, law)
    theta = np.array(m.theta)
    steps = 1e-5 * np.maximum(np.abs(theta), 0.1)
    fd = _fd_gradient(lambda t: crit.objective(t), theta, steps)
    an = crit.gradient(theta)
    checks.append(_check("gradient_fd", float(np.max(np.abs(an - fd) / np.maximum(np.abs(fd), 1.0))), 1e-4))
    fd_h = np.column_stack([
        (crit.gradient(theta + e) - crit.gradient(theta - e)) / (2 * s)
        for e, s in ((np.eye(3)[i] * steps[i], steps[i]) for i in range(3))
    ])
    an_h = crit.hessian(theta)
    denom = np.maximum(np.abs(an_h), 1e-3 * np.abs(an_h).max())
    checks.append(_check("hessian_fd", float(np.max(np.abs(an_h - fd_h) / denom)), 1e-3))

    if not condition_c11(m.x0, m.a1, m.a2):
        for name in ("sigma_positive_definite", "limit_hessian_identity", "limit_stationarity"):
            checks.append(Check(name, "skipped", None, None, "condition violated, check skipped"))
        return checks

    rep = asymptotics.sigma_matrix(m, m.q, law, v=(v1, v2, v3))
    checks.append(Check("sigma_positive_definite", "pass" if rep.min_eigenvalue > 0 else "fail",
                        rep.min_eigenvalue, 0.0))
    vbar = asymptotics.limit_hessian(theta, m, m.q, law)
    checks.append(_check("limit_hessian_identity", float(np.max(np.abs(vbar + rep.sigma / m.a3**2))), 1e-4))
    u = lambda t: asymptotics.limit_criterion(t, m, m.q, law)  # noqa: E731
    g = _fd_gradient(u, theta, np.full(3, 1e-4))
    checks.append(_check("limit_stationarity", float(np.max(np.abs(g))), 1e-4))
    return checks
