"""Command-line entry point ``epi``.

::

    epi run <config> [--set key=value ...]
    epi compare <A.csv> <B.csv> --col <name> [--col-b <name>] [--alpha 0.01] [--floor 0]
    epi preset <name> [--factor 1.0] [--root DIR]
    epi list-presets

Errors print one line ``error: <message>`` on stderr and exit with status 2.
``compare`` and ``preset`` exit with status 1 on FAIL.  The default output
directory is taken from ``EPI_OUTPUT_DIR`` (``./epi_output`` if unset).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load
from .experiment import compare_files, run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epi", description="critical epidemic simulation experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run an experiment config (or a run manifest)")
    run.add_argument("config")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    cmp_ = sub.add_parser("compare", help="two-sample KS verdict for one column of two results files")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--col", required=True)
    cmp_.add_argument("--col-b", default=None)
    cmp_.add_argument("--alpha", type=float, default=0.01)
    cmp_.add_argument("--floor", type=float, default=0.0)
    pre = sub.add_parser("preset", help="run a named acceptance experiment")
    pre.add_argument("name")
    pre.add_argument("--factor", type=float, default=1.0, help="replicate-count multiplier (smoke runs)")
    pre.add_argument("--root", default=None, help="output root (default $EPI_OUTPUT_DIR/presets)")
    sub.add_parser("list-presets", help="list preset names")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "run":
            res = run_experiment(load(args.config, args.overrides))
            print(f"wrote {res.results} ({len(res.rows)} rows) and {res.manifest}")
            return 0
        if args.cmd == "compare":
            if not 0 < args.alpha < 1:
                raise ConfigError("alpha must lie in (0, 1)")
            A, B, v = compare_files(args.a, args.b, args.col, args.alpha, args.floor, args.col_b)
            print(f"column={args.col} n_a={A.n} n_b={B.n} {v.row()}")
            return 0 if v.passed else 1
        from . import presets

        if args.cmd == "list-presets":
            for name, (crit, _) in presets.PRESETS.items():
                print(f"{name:22s} {crit:4s} {presets.describe(name)}")
            return 0
        if args.name not in presets.PRESETS:
            raise ConfigError(f"unknown preset {args.name!r}; available: {', '.join(presets.PRESETS)}")
        if args.factor <= 0:
            raise ConfigError("factor must be positive")
        res = presets.run_preset(args.name, args.root, args.factor)
        return 0 if res.passed else 1
    except (ConfigError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
