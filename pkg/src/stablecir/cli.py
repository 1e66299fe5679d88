"""Command-line entry point: ``stablecir <subcommand> ...``.

Exit status is 0 on success, 2 for bad arguments or configuration and 3 when
``verify`` reports a failed check.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import asymptotics
from .estimator import EstimatorOptions, ParamBox, maximize
from .harness import ConfigError, ExperimentConfig, _clean, run_experiment, verify_suite
from .likelihood import DegeneratePathError
from .model import ModelSpec, ObservedPath, simulate_path
from .stable import DensityBuildError, build_density

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3


def _dump(obj, out):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _density(args):
    window = None if args.window is None else tuple(args.window)
    law = build_density(args.alpha, window=window, n_nodes=args.n_nodes, cache_dir=args.cache_dir)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "p", "dp", "logp"])
        for row in zip(law.x, law.p, law.dp, law.logp):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _simulate(args):
    spec = ModelSpec(a1=args.a1, a2=args.a2, a3=args.a3, q=args.q, alpha=args.alpha, eps=args.eps, x0=args.x0)
    path = simulate_path(spec, args.n, substeps=args.substeps, rng=args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "y"])
        for k, (t, y) in enumerate(zip(path.times, path.values)):
            w.writerow([k, repr(float(t)), repr(float(y))])
    meta = {"spec": spec.to_dict(), "n": args.n, "seed": args.seed, "substeps": args.substeps, "clamps": path.clamps}
    Path(args.out).with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def read_path_csv(path) -> ObservedPath:
    """Read a ``k,t,y`` file written by ``simulate``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read path file: {exc}") from exc
    if not rows or not {"k", "t", "y"} <= set(rows[0]):
        raise ConfigError("path file needs a k,t,y header and at least two rows")
    y = np.array([float(r["y"]) for r in rows])
    t = np.array([float(r["t"]) for r in rows])
    n = len(rows) - 1
    if n < 1 or not np.allclose(t, np.arange(n + 1) / n, rtol=0, atol=1e-9):
        raise ConfigError("observation times must be k/n on [0, 1]")
    return ObservedPath(n=n, values=y)


def _estimate(args):
    path = read_path_csv(args.path)
    box = ParamBox.default() if args.box is None else ParamBox.from_list(args.box)
    window = None if args.window is None else tuple(args.window)
    law = build_density(args.alpha, window=window, cache_dir=args.cache_dir)
    opts = EstimatorOptions(n_starts=args.n_starts, user_start=None if args.start is None else tuple(args.start))
    rep = maximize(path, box, args.eps, args.alpha, args.q, law, opts=opts, theta_true=args.true)
    _dump(rep.to_dict(), args.out)
    return EXIT_OK


def _asymptotics(args):
    x0, a1, a2, a3 = args.params
    law = build_density(args.alpha, cache_dir=args.cache_dir)
    rep = asymptotics.sigma_matrix((x0, a1, a2, a3), args.q, law)
    _dump(rep.to_dict(), args.out)
    return EXIT_OK


def _mc(args):
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out_dir is not None:
        changes["out_dir"] = args.out_dir
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    run_experiment(cfg)
    print(Path(cfg.out_dir) / "summary.json")
    return EXIT_OK


def _verify(args):
    cfg = ExperimentConfig.load(args.config) if args.config else None
    checks = verify_suite(cfg)
    _dump([c.to_dict() for c in checks], args.out)
    return EXIT_VERIFY if any(c.status == "fail" for c in checks) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stablecir", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="tabulate the noise density as CSV")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--n-nodes", type=int, default=2**14)
    p.add_argument("--cache-dir")
    p.add_argument("--out")
    p.set_defaults(func=_density)

    p = sub.add_parser("simulate", help="simulate one observed path")
    for name in ("a1", "a2", "a3", "q", "alpha", "eps", "x0"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--substeps", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file; metadata goes next to it as .json")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("estimate", help="estimate (a1, a2, a3) from a path CSV")
    p.add_argument("--path", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--box", type=float, nargs=6, metavar="B",
                   help="a1_lo a1_hi a2_lo a2_hi a3_lo a3_hi")
    p.add_argument("--n-starts", type=int, default=8)
    p.add_argument("--start", type=float, nargs=3)
    p.add_argument("--true", type=float, nargs=3, help="report standardized errors against these values")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--cache-dir")
    p.add_argument("--out")
    p.set_defaults(func=_estimate)

    p = sub.add_parser("asymptotics", help="information matrix and limit covariance as JSON")
    p.add_argument("--params", type=float, nargs=4, required=True, metavar=("X0", "A1", "A2", "A3"))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--cache-dir")
    p.add_argument("--out")
    p.set_defaults(func=_asymptotics)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=_mc)

    p = sub.add_parser("verify", help="run the invariant battery")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DegeneratePathError, DensityBuildError, asymptotics.ConditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
