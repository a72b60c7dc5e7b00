"""``misscov`` command line: gen, estimate, sweep, rate, verify.

Exit codes: 0 success, 1 validation error, 2 invariant failure, 3 runtime failure.
"""
import argparse
import logging
import sys
from pathlib import Path

from . import datagen
from ._backend import BACKEND
from .bench import fit_rate, read_records, records_to_csv, run_sweep, summary_to_csv
from .config import ConfigError, load_experiment_config, parse_estimator_overrides
from .linalg import load_matrix, save_matrix
from .pipeline import EstimatorConfig, estimate_covariance, format_report

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("misscov")


class ValidationError(Exception):
    pass


def parse_spectrum(text):
    """``identity``, ``geometric:GAMMA`` or ``spiked:SPIKE,BULK``."""
    kind, _, args = text.partition(":")
    try:
        if kind == "identity" and not args:
            return datagen.Spectrum.identity()
        if kind == "geometric":
            return datagen.Spectrum.geometric(float(args))
        if kind == "spiked":
            spike, bulk = (float(a) for a in args.split(","))
            return datagen.Spectrum.spiked(spike, bulk)
    except ValueError as exc:
        raise ValidationError(f"--spectrum {text!r}: {exc}") from None
    raise ValidationError(f"--spectrum {text!r}: use identity, geometric:GAMMA or spiked:SPIKE,BULK")


def cmd_gen(args):
    spectrum = parse_spectrum(args.spectrum)
    try:
        spectrum.validate()
        spec = datagen.build_covariance(args.d, spectrum, args.rotation_seed)
        x = datagen.sample(spec, args.N, args.seed, args.dist, args.dof)
        sample = datagen.sparsify(x, args.p, args.seed, datagen.dist_tag(args.dist, args.dof))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    datagen.dump_dataset(sample, args.output)
    if args.sigma_out:
        save_matrix(spec.sigma, args.sigma_out)
    print(f"wrote {sample.n} x {sample.d} dataset to {args.output}")
    return EXIT_OK


def cmd_estimate(args):
    try:
        sample = datagen.load_dataset(args.dataset)
        truth = load_matrix(args.truth) if args.truth else None
    except (OSError, ValueError) as exc:
        raise ValidationError(str(exc)) from None
    overrides = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ValidationError(str(exc)) from None
        overrides = parse_estimator_overrides(text, args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        config = EstimatorConfig(**overrides)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if truth is not None and truth.dim != sample.d:
        raise ValidationError(f"--truth is {truth.dim}x{truth.dim} but the dataset has d={sample.d}")
    report = estimate_covariance(sample, config, truth=truth)
    text = format_report(report)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_experiment_config(args.config)
    records = run_sweep(cfg, workers=args.workers)
    out = args.output or cfg.output_path
    records_to_csv(records, out, record_timing=cfg.record_timing)
    if args.summary:
        summary_to_csv(records, args.summary)
    failed = sum(r.failed for r in records)
    print(f"wrote {len(records)} records to {out} ({failed} failed trials)")
    return EXIT_OK


def cmd_rate(args):
    try:
        records = read_records(Path(args.csv))
    except (OSError, ValueError) as exc:
        raise ValidationError(str(exc)) from None
    if args.p is not None:
        records = [r for r in records if r.p == args.p]
    if args.N is not None:
        records = [r for r in records if r.N == args.N]
    try:
        fit = fit_rate(records, args.x_axis, args.estimator)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    print(f"estimator={args.estimator} x_axis={args.x_axis} slope={fit.slope!r} "
          f"intercept={fit.intercept!r} r_squared={fit.r_squared!r} points={fit.points} "
          f"failures={fit.failures}")
    return EXIT_OK


def cmd_verify(args):
    from .invariants import format_suite, run_invariant_suite

    results = run_invariant_suite(args.seed, quick=args.quick)
    sys.stdout.write(format_suite(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def build_parser():
    ap = argparse.ArgumentParser(prog="misscov", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s (backend: {BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a dataset fixture")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--spectrum", default="identity", help="identity | geometric:GAMMA | spiked:SPIKE,BULK")
    g.add_argument("--rotation-seed", type=int, default=None)
    g.add_argument("--dist", choices=["gaussian", "student_t"], default="gaussian")
    g.add_argument("--dof", type=float, default=None)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--sigma-out", help="also write the true covariance in matrix fixture format")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("estimate", help="estimate the covariance of one dataset")
    e.add_argument("dataset")
    e.add_argument("--config", help="YAML file with estimator settings")
    e.add_argument("--truth", help="true covariance (matrix fixture) to report the error")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="run an experiment config and write CSV")
    s.add_argument("config")
    s.add_argument("--workers", type=int, default=None, help="override the config's worker count")
    s.add_argument("-o", "--output", help="override the config's output_path")
    s.add_argument("--summary", help="also write per-cell quantiles here")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("rate", help="fit log(median error) against log(N) or log(p)")
    r.add_argument("csv")
    r.add_argument("--x-axis", choices=["N", "p"], default="N")
    r.add_argument("--estimator", default="full")
    r.add_argument("--p", type=float, default=None, help="keep only records with this p")
    r.add_argument("--N", type=int, default=None, help="keep only records with this N")
    r.set_defaults(func=cmd_rate)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--quick", action="store_true", help="smaller Monte Carlo batteries")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(exc, FileNotFoundError) else EXIT_RUNTIME
    except Exception as exc:  # runtime failure; keep the message, skip the traceback
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
