"""Command-line entry point: ``nemel validate|run|equilibrium|verify``."""
from __future__ import annotations

import argparse
import contextlib
import os
import sys

from .errors import ConfigError, NumericalError, SnapshotError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SUITE = 4


def _thread_limit():
    raw = os.environ.get("NEMEL_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"NEMEL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"NEMEL_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def cmd_validate(args) -> int:
    from .io import parse_config

    cfg = parse_config(args.config)
    for line in cfg.validity.summary_lines():
        print(line)
    return EXIT_OK if cfg.validity.satisfies_positivity else EXIT_CONFIG


def cmd_run(args) -> int:
    from .io import parse_config
    from .sim import run

    cfg = parse_config(args.config)
    summary = run(cfg, out_dir=args.out, max_steps=args.max_steps,
                  override_validity=args.override_validity, resume=args.resume)
    print(f"verdict: {summary.verdict}")
    print(f"steps: {summary.steps}  t: {summary.t!r}")
    print(f"energy log: {summary.energy_log}")
    print(f"final state: {summary.final_state}")
    print(f"max ||d|-1|: {summary.max_len_dev:.3e}  min c: {summary.min_c:.6g}  mass drift: {summary.mass_drift:.3e}")
    print("residuals: " + ", ".join(f"{k}={v:.3e}" for k, v in summary.residuals.items()))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    from .io import parse_config, require_valid
    from .sim import run_equilibrium

    cfg = parse_config(args.config)
    require_valid(cfg)
    sol, out = run_equilibrium(cfg, out_dir=args.out)
    print(f"written: {out}")
    print("Z: " + ", ".join(f"{z:.17g}" for z in sol.Z))
    print("residuals: " + ", ".join(f"{k}={v:.3e}" for k, v in sol.residuals.items()))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite(args.suite, args.size)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SUITE


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    p = argparse.ArgumentParser(prog="nemel", description="2D simulator for an ion-laden nematic liquid crystal.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a config and print the coefficient report")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="integrate a configured run")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default from config)")
    r.add_argument("--max-steps", type=int, default=None)
    r.add_argument("--override-validity", action="store_true",
                   help="run even if the Leslie coefficients violate the positivity conditions")
    r.add_argument("--resume", action="store_true", help="continue from the latest snapshot in the output directory")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("equilibrium", help="solve for a static equilibrium")
    e.add_argument("config")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("verify", help="run an invariant suite")
    s.add_argument("suite", choices=SUITES)
    s.add_argument("--size", type=int, default=None)
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, SnapshotError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
