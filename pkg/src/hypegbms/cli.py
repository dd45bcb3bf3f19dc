"""Command-line front end.

Exit codes: 0 success, 1 usage/config/input errors, 2 numeric failures,
3 failed validation checks.
"""

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

from . import validation
from .clustering import RunConfig, run_gbms, run_hypegbms
from .data import Dataset, load_csv, make_hierarchical, save_csv
from .errors import ConvergenceFailure, InvalidArgument, InvalidData, NumericDegenerate, ParseError
from .metrics import ari, nmi

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

logger = logging.getLogger("hypegbms")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for numeric failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


@dataclass
class SweepGrid:
    sigmas: List[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 11)])
    curvatures: List[float] = field(default_factory=lambda: [round(-0.1 * k, 1) for k in range(1, 11)])

    def __post_init__(self):
        if not self.sigmas or any(s <= 0 for s in self.sigmas):
            raise InvalidArgument("sweep sigmas must be positive")
        if not self.curvatures or any(c >= 0 for c in self.curvatures):
            raise InvalidArgument("sweep curvatures must be strictly negative")


# --- shared helpers -------------------------------------------------------------


def _load(args) -> Dataset:
    label_column = args.label_column
    return load_csv(args.input, label_column=label_column, has_header=None)


def _config(args, sigma, curvature) -> RunConfig:
    return RunConfig(
        sigma=sigma,
        curvature=curvature if curvature is not None else -1.0,
        epsilon=args.epsilon,
        delta=args.delta,
        gamma=args.gamma,
        max_iter=args.max_iter,
        scale=args.scale,
        seed=args.seed,
    )


def _run(algorithm, features, cfg):
    if algorithm == "gbms":
        return run_gbms(features, cfg)
    return run_hypegbms(features, cfg)


def build_report(algorithm, cfg, result, dataset, wall_time):
    """JSON-ready summary of one run. ``wall_time_s`` is the only non-deterministic field."""
    config = {
        "sigma": cfg.sigma,
        "epsilon": cfg.epsilon,
        "delta": result.delta,
        "delta_given": cfg.delta is not None,
        "gamma": cfg.gamma,
        "max_iter": cfg.max_iter,
        "scale": cfg.scale,
        "entropy_bins_fraction": cfg.entropy_bins_fraction,
        "seed": cfg.seed,
    }
    if algorithm == "hypegbms":
        config["curvature"] = cfg.curvature
    report = {
        "algorithm": algorithm,
        "config": config,
        "n_points": int(dataset.features.shape[0]),
        "n_features": int(dataset.features.shape[1]),
        "num_clusters": result.num_clusters,
        "stop_reason": result.stop_reason.value,
        "converged": result.converged,
        "iterations": result.iterations,
        "avg_movement": [t.avg_movement for t in result.trace],
        "entropy": [t.entropy for t in result.trace],
        "mean_density": [t.mean_density for t in result.trace],
        "wall_time_s": wall_time,
    }
    if dataset.labels is not None:
        report["ari"] = ari(dataset.labels, result.labels)
        report["nmi"] = nmi(dataset.labels, result.labels)
    return report


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


# --- subcommands ------------------------------------------------------------------


def cmd_cluster(args):
    if args.algorithm == "hypegbms" and args.curvature is None:
        raise UsageError("--curvature is required for --algorithm hypegbms")
    dataset = _load(args)
    cfg = _config(args, args.sigma, args.curvature)
    t0 = time.perf_counter()
    result = _run(args.algorithm, dataset.features, cfg)
    wall = time.perf_counter() - t0
    write_labels(args.output, result.labels)
    report = build_report(args.algorithm, cfg, result, dataset, wall)
    text = json.dumps(report, indent=2)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _sweep_cell(job):
    algorithm, features, labels, cfg = job
    result = _run(algorithm, features, cfg)
    return {
        "ari": ari(labels, result.labels),
        "nmi": nmi(labels, result.labels),
        "num_clusters": result.num_clusters,
        "iterations": result.iterations,
    }


def cmd_sweep(args):
    dataset = _load(args)
    if dataset.labels is None:
        raise UsageError("sweep needs ground-truth labels; pass --label-column")
    grid = SweepGrid(
        sigmas=args.sigmas or SweepGrid().sigmas,
        curvatures=args.curvatures or SweepGrid().curvatures,
    )
    curvatures = grid.curvatures if args.algorithm == "hypegbms" else [None]
    cells = [(s, c) for c in curvatures for s in grid.sigmas]
    jobs = [(args.algorithm, dataset.features, dataset.labels, _config(args, s, c)) for s, c in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]

    best = max(range(len(rows)), key=lambda k: (rows[k]["ari"], rows[k]["nmi"], -k))
    lines = ["sigma,curvature,ari,nmi,num_clusters,iterations,best"]
    for k, ((s, c), row) in enumerate(zip(cells, rows)):
        lines.append(
            f"{s!r},{'' if c is None else repr(c)},{row['ari']!r},{row['nmi']!r},"
            f"{row['num_clusters']},{row['iterations']},{int(k == best)}"
        )
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    s, c = cells[best]
    print(f"best: sigma={s} curvature={c} ari={rows[best]['ari']:.4f} nmi={rows[best]['nmi']:.4f}")
    return EXIT_OK


def cmd_validate(args):
    names = args.only or list(validation.CHECKS)
    unknown = [n for n in names if n not in validation.CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(unknown)}; choose from {', '.join(validation.CHECKS)}")
    results = [validation.run_check(name, seed=args.seed) for name in names]
    if args.inject_fault:
        results[0].passed = False
        results[0].detail = "injected fault"
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  {'status':<6}  {'measured':>12}  threshold")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status:<6}  {r.measured:>12.4g}  {r.threshold}  ({r.seconds:.2f}s) {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def cmd_gen(args):
    dataset = make_hierarchical(
        num_root=args.roots,
        children_per_root=args.children,
        points_per_leaf=args.points,
        leaf_spread=args.leaf_spread,
        level_gap=args.level_gap,
        p=args.dim,
        seed=args.seed,
    )
    save_csv(args.output, dataset)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def _add_run_flags(p):
    p.add_argument("--input", required=True, help="CSV file; a non-numeric first row is read as a header")
    p.add_argument("--output", required=True)
    p.add_argument("--algorithm", choices=("hypegbms", "gbms"), default="hypegbms")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--delta", type=float, default=None,
                   help="cluster separation; default 0.1 x median pairwise distance")
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--label-column", default=None, help="column index or header name")
    p.add_argument("--seed", type=int, default=42)


def build_parser():
    parser = _Parser(prog="hypegbms", description="Hyperbolic Gaussian blurring mean-shift clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="cluster one CSV file")
    _add_run_flags(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--curvature", type=float, default=None, help="negative; required for hypegbms")
    p.add_argument("--report", default=None, help="JSON report path (stdout if omitted)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="grid over sigma and curvature")
    _add_run_flags(p)
    p.add_argument("--sigmas", type=_float_list, default=None, help="e.g. 0.2,0.4,0.6")
    p.add_argument("--curvatures", type=_float_list, default=None,
                   help="e.g. --curvatures=-0.5,-1 (use '=' for negative lists)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the self-check suite")
    p.add_argument("--only", action="append", default=None, metavar="CHECK")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="write a synthetic hierarchical dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--roots", type=int, default=2)
    p.add_argument("--children", type=int, default=2)
    p.add_argument("--points", type=int, default=75)
    p.add_argument("--leaf-spread", type=float, default=0.05)
    p.add_argument("--level-gap", type=float, default=4.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgument, InvalidData, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericDegenerate, ConvergenceFailure, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
