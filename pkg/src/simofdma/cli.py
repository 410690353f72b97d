"""Command-line entry point: ``simofdma {nmse,ber,sumrate,single,selftest}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments, selftest
from .config import SCHEMES, ZSTEPS, PROFILES, load_config
from .errors import ConfigError, DomainError, InfeasibleError, SimError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML file with dotted-key overrides")
    common.add_argument("--profile", choices=sorted(PROFILES), default="paper")
    common.add_argument("--seed", type=int, help="base seed (run r uses seed + r)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--scheme", metavar="LIST", help=f"comma-separated subset of {','.join(SCHEMES)}")
    common.add_argument("--inner", choices=("cd", "pccp"), help="per-layer phase solver")
    common.add_argument("--zstep", choices=ZSTEPS, help="assignment step of the joint scheme")
    common.add_argument("--threads", type=int, help="worker processes for Monte-Carlo runs")
    common.add_argument("--runs", type=int, help="Monte-Carlo runs per sweep point")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="simofdma", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("nmse", parents=[common], help="fitting NMSE versus K_c")
    sub.add_parser("ber", parents=[common], help="BER versus transmit power")
    sub.add_parser("sumrate", parents=[common], help="sum rate versus K_c")
    sub.add_parser("single", parents=[common], help="one optimization with trace and heatmap")
    sub.add_parser("selftest", parents=[common], help="run the built-in oracle checks")
    return parser


def resolve_config(args):
    config = load_config(args.config, args.profile)
    overrides = {}
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    if args.out is not None:
        overrides["experiment.out_dir"] = args.out
    if args.scheme:
        overrides["experiment.schemes"] = [s.strip() for s in args.scheme.split(",") if s.strip()]
    if args.inner is not None:
        overrides["optimizer.inner"] = args.inner
    if args.zstep is not None:
        overrides["optimizer.zstep"] = args.zstep
    if args.threads is not None:
        overrides["experiment.threads"] = args.threads
    if args.runs is not None:
        overrides["experiment.runs"] = args.runs
    return config.with_overrides(overrides) if overrides else config


def _print_summary(table, metric):
    print(f"{'scheme':<12} {table.rows[0][1] if table.rows else 'x':>10} {metric + ' mean':>16}")
    for scheme, key, value, seed, m, mv in table.rows:
        if seed == "all" and m == f"{metric}_mean":
            print(f"{scheme:<12} {value!s:>10} {mv:>16.6g}")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        out = config.experiment.out_dir
        if args.verb == "selftest":
            failed = 0
            for name, ok, detail in selftest.run(config.experiment.seed):
                failed += not ok
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            return EXIT_OK if failed == 0 else EXIT_SOLVER
        if args.verb == "single":
            res = experiments.run_single(config, out)
            r = res.record
            print(f"config {config.config_hash()}  K_c={config.experiment.single_kc}  "
                  f"NMSE={r.nmse:.6g}  sum rate={r.sum_rate:.6g}  BER={r.ber:.6g}")
            print(f"heatmap written to {res.heatmap_path}")
            return EXIT_OK
        sweep, metric = {
            "nmse": (experiments.run_nmse_sweep, "nmse"),
            "ber": (experiments.run_ber_sweep, "ber"),
            "sumrate": (experiments.run_sumrate_sweep, "sum_rate"),
        }[args.verb]
        table = sweep(config)
        path = table.write(out)
        _print_summary(table, metric)
        print(f"wrote {path}")
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main():
    sys.exit(run())
