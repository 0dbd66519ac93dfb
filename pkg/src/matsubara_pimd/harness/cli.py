"""Command line entry point.

Exit status is 0 on success, 2 for usage or configuration errors and 1 for
failures while running.
"""

import argparse
import sys

from ..dynamics import rate_bounds
from .config import OUTPUT_ENV, ConfigError, parse_value, resolve
from .experiments import run_experiment

# Shortcut flags and the dotted config keys they set.
_SHORTCUTS = {
    "potential": "sampler.potential",
    "variant": "sampler.variant",
    "beta": "sampler.beta",
    "n_modes": "sampler.n_modes",
    "d_grid": "sampler.d_grid",
    "a": "sampler.a",
    "gamma": "sampler.gamma",
    "dt": "sampler.dt",
    "seed": "sampler.seed",
    "T": "experiment.T",
    "n_steps": "experiment.n_steps",
    "burn_in": "experiment.burn_in",
    "observable": "experiment.observable",
    "replicas": "experiment.replicas",
    "workers": "experiment.workers",
}

_SUBCOMMANDS = {
    "sample": "sample",
    "timeavg-error": "timeavg_error",
    "correlation": "correlation",
    "radial-density": "radial_density",
    "reference": "reference",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted config key, e.g. sampler.beta=4")
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    p.add_argument("--paper-scale", action="store_true",
                   help="use the long runs and wide sweeps of the original study")
    p.add_argument("--potential")
    p.add_argument("--variant")
    p.add_argument("--beta", type=float)
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--d-grid", dest="d_grid", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=float, help="simulated time")
    p.add_argument("--n-steps", dest="n_steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--observable")
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)


def build_parser():
    parser = _Parser(prog="matsubara-pimd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _SUBCOMMANDS:
        _add_experiment_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    r = sub.add_parser("rates", help="evaluate the dimension-free rate bounds")
    r.add_argument("--m1", type=float)
    r.add_argument("--m2", type=float)
    r.add_argument("--a", type=float, default=1.0)
    r.add_argument("--beta", type=float, required=True)
    r.add_argument("--assumption-iii", dest="assumption_iii", default=True,
                   action=argparse.BooleanOptionalAction,
                   help="whether n_modes <= d_grid holds (default: yes)")
    return parser


def _overrides(args):
    pairs = []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key.strip(), parse_value(value)))
    for flag, key in _SHORTCUTS.items():
        value = getattr(args, flag)
        if value is not None:
            pairs.append((key, value))
    return pairs


def _fmt(x):
    return "undefined" if x is None else repr(x)


def _run_rates(args):
    res = rate_bounds(args.m1, args.m2, args.a, args.beta, args.assumption_iii)
    line = f"lambda1={_fmt(res.lambda1)} lambda2={_fmt(res.lambda2)}"
    for reason in res.reasons:
        line += f"\n  {reason}"
    print(line)


def _summary(record):
    s = record.summary
    if record.experiment == "reference":
        body = " ".join(f"{r['potential']} beta={r['beta']:g} {r['observable']}: "
                        f"quantum={_fmt(r['quantum'])} classical={r['classical']!r}"
                        for r in s["rows"])
    elif record.experiment == "sample":
        body = f"A={s['A']!r} stderr={s['stderr']!r}"
    elif record.experiment == "timeavg_error":
        body = f"max |error|={s['max_abs_error']:.3g}"
    elif record.experiment == "correlation":
        fitted = [r for r in s["rates"] if r["mode"] == 0]
        body = "centroid rates " + ", ".join(
            f"{r['variant']} beta={r['beta']:g} N={r['N']}: {_fmt(r['rate'])}" for r in fitted)
    else:
        body = f"{s.get('n_curves', 0)} densities"
    return f"{record.experiment}: {body} [config {record.config_hash[:12]}] -> {record.files['csv']}"


def run_cli(argv=None):
    """Parse ``argv``, run the command and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "rates":
            _run_rates(args)
            return 0
        cfg = resolve(_SUBCOMMANDS[args.command], args.config, _overrides(args),
                      args.paper_scale)
        if args.output_dir:
            cfg["output"]["dir"] = args.output_dir
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        record = run_experiment(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(_summary(record))
    return 0


def main():
    sys.exit(run_cli())
