"""Command line interface: ``kdilation {run,list-systems,dilation,spectrum}``."""

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, load_config, _number
from .lyapunov import lyapunov_spectrum
from .report import EXIT_OK, EXIT_STAGE, EXIT_USAGE, run, write_dilation_csv
from .systems import catalog_entries, make_system
from .volume import QuadratureGrid, default_disk_family, default_grid, estimate_dilation


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_list(text):
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _system_from_args(args):
    params = {}
    for item in args.param or ():
        if "=" not in item:
            raise _UsageError(f"--param expects name=value, got {item!r}")
        name, value = item.split("=", 1)
        try:
            params[name.strip()] = _number(value)
        except ValueError:
            raise _UsageError(f"--param {name}: not a number: {value!r}") from None
    try:
        return make_system(args.system, **params)
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc)) from None


def build_parser():
    parser = _Parser(prog="kdilation", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="full verification of d_k <= chi_1 + ... + chi_k")
    p.add_argument("--config", help="INI-style config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. run.seed=3 or system.K=1.5")
    p.add_argument("--output", help="report path (overrides output.report)")

    sub.add_parser("list-systems", help="print the system catalog")

    for name, helptext in (("dilation", "estimate d_k only"), ("spectrum", "Lyapunov spectrum only")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("--system", required=True)
        q.add_argument("--param", action="append", metavar="NAME=VALUE")

    p = sub.choices["dilation"]
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--schedule", type=_int_list, default=[5, 10, 15, 20, 25, 30])
    p.add_argument("--budget", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=None, help="quadrature nodes per axis")
    p.add_argument("--method", choices=("slope", "last"), default="slope")
    p.add_argument("--csv", help="write the (n, best_log_ratio, best_disk_id) series")

    p = sub.choices["spectrum"]
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--transient", type=int, default=1_000)
    p.add_argument("--x0", type=_float_list, default=None)
    return parser


def _cmd_run(args, out):
    overrides = list(args.set)
    if args.output:
        overrides.append(f"output.report={args.output}")
    config = load_config(args.config, overrides)
    report, code = run(config)
    body = report["body"]
    for r in body["results"]:
        print(
            f"k={r['k']}: d_k_hat={r['d_k_hat']:.6f} chi_sum={r['chi_partial_sum']:.6f} "
            f"tol={r['tolerance']} verdict={'PASS' if r['verdict'] else 'FAIL'}",
            file=out,
        )
    if body["failure"]:
        f = body["failure"]
        print(f"stage failure [{f['stage']}] at k={f['k']}: {f['error']}", file=sys.stderr)
    print(f"report written to {config.output}", file=out)
    return code


def _cmd_list(out):
    print(f"{'id':<14} {'d':>2}  {'parameters':<20} ground-truth exponents", file=out)
    for entry in catalog_entries():
        system = entry.builder(**entry.params)
        params = ", ".join(f"{k}={v}" for k, v in entry.params.items())
        truth = "" if system.ground_truth is None else ", ".join(
            f"{c:.6f}" for c in system.ground_truth
        )
        print(f"{entry.id:<14} {entry.d:>2}  {params:<20} {truth}", file=out)
    return EXIT_OK


def _cmd_dilation(args, out):
    system = _system_from_args(args)
    if not 1 <= args.k <= system.d:
        raise _UsageError(f"--k must lie in [1, {system.d}]")
    grid = default_grid(args.k) if args.nodes is None else QuadratureGrid(args.nodes, args.k)
    family = default_disk_family(system, args.k, args.budget, args.seed)
    est = estimate_dilation(system, args.k, family, args.schedule, grid, args.method)
    if args.csv:
        write_dilation_csv(est.records, args.csv)
    json.dump(
        {
            "system": system.id,
            "params": dict(system.params),
            "k": est.k,
            "d_k_hat": est.d_k_hat,
            "d_k_slope": est.d_k_slope,
            "d_k_last": est.d_k_last,
            "records": [
                {"n": n, "best_log_ratio": v, "best_disk_id": i} for n, v, i in est.records
            ],
        },
        out,
        indent=2,
    )
    out.write("\n")
    return EXIT_OK


def _cmd_spectrum(args, out):
    system = _system_from_args(args)
    x0 = system.domain.center() + 0.1234 if args.x0 is None else np.array(args.x0)
    if system.domain.is_torus:
        x0 = system.domain.wrap(x0)
    spec = lyapunov_spectrum(system, x0, args.n, args.transient)
    json.dump(
        {
            "system": system.id,
            "params": dict(system.params),
            "x0": list(map(float, x0)),
            "chis": spec.chis.tolist(),
            "n_used": spec.n_used,
            "transient_discarded": spec.transient_discarded,
            "ground_truth": None if system.ground_truth is None else list(system.ground_truth),
        },
        out,
        indent=2,
    )
    out.write("\n")
    return EXIT_OK


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        if args.command == "run":
            return _cmd_run(args, out)
        if args.command == "list-systems":
            return _cmd_list(out)
        if args.command == "dilation":
            return _cmd_dilation(args, out)
        return _cmd_spectrum(args, out)
    except (_UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        if args.command in ("dilation", "spectrum"):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_STAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
