"""Command-line front end.

Subcommands: ``estimate``, ``bound``, ``simulate``, ``replicate-fig1``,
``replicate-fig2``.  ``--config FILE`` reads flat ``key=value`` lines
mirroring the long flags; flags given on the command line win.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .bounds import BoundQuery, optimize_bound
from .estimator import SolverConfig, tyler_estimate
from .exceptions import NotConverged, NumericalError, ValidationError
from .experiments import ExperimentConfig, fig1_config, fig2_config, parse_grid, run_campaign, write_campaign
from .sampling import normalize_rows
from .shape import parse_shape_spec, read_matrix_csv, sphericity, write_matrix_csv

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("tylerbound")


def _confidences(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"bad confidence list {text!r}") from None
    if not vals:
        raise ValidationError("empty confidence list")
    for c in vals:
        if not 0 < c < 1:
            raise ValidationError(f"confidence {c} must lie in (0, 1)")
    return vals


def _solver_flags(sp):
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--trace-target", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="tylerbound", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="fit Tyler's estimator to a CSV of samples")
    sp.add_argument("--config")
    sp.add_argument("--input", required=True, help="headerless CSV, one sample per row")
    sp.add_argument("--output", help="write the estimated matrix here as dense CSV")
    _solver_flags(sp)

    sp = sub.add_parser("bound", help="optimized error bound for given n, p and shape statistics")
    sp.add_argument("--config")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--cos-phi0", type=float, default=None)
    sp.add_argument("--lambda-min", type=float, default=None)
    sp.add_argument("--shape", default=None, help="derive cos-phi0 and lambda-min from a shape spec")
    sp.add_argument("--confidence", type=float, default=0.95)
    sp.add_argument("--output")

    sp = sub.add_parser("simulate", help="Monte Carlo campaign over an n or p grid")
    sp.add_argument("--config")
    sp.add_argument("--model", default="acg", choices=["acg", "compound-gaussian"])
    sp.add_argument("--shape", default="identity")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--n-grid")
    sp.add_argument("--p-grid")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--confidence", default="0.95,0.5")
    sp.add_argument("--texture-dof", type=float, default=1.0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--output", default=".", help="output directory")
    _solver_flags(sp)

    for name in ("replicate-fig1", "replicate-fig2"):
        sp = sub.add_parser(name, help=f"preset campaign for {name[10:]}")
        sp.add_argument("--config")
        sp.add_argument("--trials", type=int, default=200)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--output", default=".", help="output directory")
    return parser


def _expand_config(argv):
    """Splice ``key=value`` pairs from ``--config FILE`` in front of the command-line flags."""
    argv = list(argv)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
            del argv[i : i + 2]
            break
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
            del argv[i]
            break
    if path is None:
        return argv
    extra = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            extra += ["--" + key.replace("_", "-"), value]
    cmd = next((i for i, a in enumerate(argv) if not a.startswith("-")), None)
    if cmd is None:
        return extra + argv
    return argv[: cmd + 1] + extra + argv[cmd + 1 :]


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=False)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_estimate(args):
    data = normalize_rows(read_matrix_csv(args.input))
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter, trace_target=args.trace_target)
    try:
        res = tyler_estimate(data, cfg)
    except NotConverged as exc:
        diag = {"error": "NotConverged", "message": str(exc), "iterations": len(exc.residuals),
                "residuals": exc.residuals[-20:]}
        print(json.dumps(diag, indent=2), file=sys.stderr)
        return EXIT_NUMERICAL
    T = res.T
    if args.output:
        write_matrix_csv(args.output, T.entries)
    _emit_json({
        "n": data.n,
        "p": data.p,
        "converged": res.converged,
        "iterations": res.iterations,
        "residual": res.residual,
        "trace_target": res.trace_target,
        "trace_inverse": float(np.trace(T.inverse)),
        "T": T.entries.tolist(),
    })
    return EXIT_OK


def cmd_bound(args):
    cos_phi0, lambda_min = args.cos_phi0, args.lambda_min
    if args.shape is not None:
        stats = sphericity(parse_shape_spec(args.shape, args.p))
        cos_phi0 = stats.cos_phi0 if cos_phi0 is None else cos_phi0
        lambda_min = stats.lambda_min if lambda_min is None else lambda_min
    q = BoundQuery(
        n=args.n,
        p=args.p,
        cos_phi0=1.0 if cos_phi0 is None else cos_phi0,
        lambda_min=1.0 if lambda_min is None else lambda_min,
        confidence=args.confidence,
    )
    _emit_json(optimize_bound(q).to_dict(), args.output)
    return EXIT_OK


def _simulate_config(args):
    if bool(args.n_grid) == bool(args.p_grid):
        raise ValidationError("give exactly one of --n-grid or --p-grid")
    return ExperimentConfig(
        model=args.model,
        shape=args.shape,
        p=args.p,
        n=args.n,
        n_grid=tuple(parse_grid(args.n_grid)) if args.n_grid else (),
        p_grid=tuple(parse_grid(args.p_grid)) if args.p_grid else (),
        trials=args.trials,
        master_seed=args.seed,
        confidences=_confidences(args.confidence),
        tol=args.tol,
        max_iter=args.max_iter,
        trace_target=args.trace_target,
        texture_dof=args.texture_dof,
        n_jobs=args.jobs,
    )


def _report(paths):
    for p in paths:
        print(p)


def cmd_simulate(args):
    result = run_campaign(_simulate_config(args))
    _report(write_campaign(args.output, result))
    return EXIT_OK


def cmd_replicate(args, which):
    make = fig1_config if which == 1 else fig2_config
    cfg, header = make(trials=args.trials, master_seed=args.seed, n_jobs=args.jobs)
    result = run_campaign(cfg, header)
    _report(write_campaign(args.output, result, stem=f"fig{which}"))
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        argv = _expand_config(argv)
    except (OSError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {
        "estimate": cmd_estimate,
        "bound": cmd_bound,
        "simulate": cmd_simulate,
        "replicate-fig1": lambda a: cmd_replicate(a, 1),
        "replicate-fig2": lambda a: cmd_replicate(a, 2),
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
