"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 IO error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import point_process as pp
from .batch import run_batch, run_batch_results
from .config import parse_config
from .errors import ConfigError, DomainError, InsufficientDataError, StabilityError
from .report import sort_reports, write_report
from .rng import RngSeed
from .solver import dumps_policy

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("liqsim")


def _cmd_simulate_hawkes(args):
    params = pp.HawkesParams(args.base, args.sigma, args.kappa)
    stream = pp.simulate_hawkes(params, args.horizon, RngSeed(args.seed), allow_unstable=args.allow_unstable)
    if args.out:
        pp.write_events(stream, args.out)
        print(f"wrote {len(stream)} events to {args.out}")
    else:
        pp.write_events(stream, "/dev/stdout")
    return EXIT_OK


def _cmd_solve(args):
    configs = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_batch_results(configs, args.threads)
    reports, failed = [], False
    for cfg, res in zip(configs, results):
        if isinstance(res, Exception):
            log.error("%s: %s", cfg.label, res)
            failed = True
            continue
        (out / f"{cfg.label}.policy.json").write_text(dumps_policy(res.grid, res.values, res.policy))
        reports.append(res.report)
        print(f"{cfg.label}: revenue {res.report.revenue:.6g} (se {res.report.revenue_se:.3g})")
    write_report(reports, out / "reports.json", "json")
    return EXIT_NUMERICAL if failed else EXIT_OK


def _cmd_table(args):
    configs = parse_config(args.config)
    reports = run_batch(configs, args.threads)
    if args.sort:
        reports = sort_reports(reports, args.sort)
    write_report(reports, args.out, args.format)
    for r in reports:
        if r.error:
            log.error("%s: %s", r.label, r.error)
    return EXIT_NUMERICAL if any(r.error for r in reports) else EXIT_OK


def _cmd_calibrate(args):
    stream = pp.read_events(args.events)
    if args.init:
        try:
            base, sigma, kappa = (float(x) for x in args.init.split(","))
        except ValueError:
            raise ConfigError("--init expects three comma-separated numbers base,sigma,kappa") from None
        init = pp.HawkesParams(base, sigma, kappa)
    else:
        rate = len(stream) / stream.horizon
        init = pp.HawkesParams(0.5 * rate, 0.5, 1.0)
    fit = pp.fit_mle(stream, init)
    print(json.dumps({
        "base": fit.params.base, "sigma": fit.params.excitation, "kappa": fit.params.decay,
        "log_likelihood": fit.log_likelihood, "converged": fit.converged,
        "iterations": fit.iterations, "events": len(stream), "horizon": stream.horizon,
    }, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liqsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-hawkes", help="simulate an exponential-kernel Hawkes process")
    p.add_argument("--base", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--allow-unstable", action="store_true")
    p.set_defaults(func=_cmd_simulate_hawkes)

    p = sub.add_parser("solve", help="solve every scenario and write policies")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("table", help="write the scenario summary table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--sort", choices=("panel", "label"))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("calibrate", help="fit Hawkes parameters to an event CSV")
    p.add_argument("--events", required=True)
    p.add_argument("--init")
    p.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StabilityError, DomainError, InsufficientDataError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
