"""Command-line interface: gains, run, sweep, compare, plot.

Configs are JSON files or shipped profile names (see ``spikelqr run --help``).
The default output root comes from --out or the SPIKELQR_OUT environment
variable (falling back to ./spikelqr-out).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from spikelqr import dynamics as dyn
from spikelqr import lqr, runner
from spikelqr.config import ConfigError, parse_config, profile_names

DEFAULT_OUT_ENV = "SPIKELQR_OUT"


def _out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(DEFAULT_OUT_ENV, "spikelqr-out"))


def _parse_seeds(text):
    if text is None:
        return None
    return [int(s) for s in text.split(",") if s.strip()]


def cmd_gains(args) -> int:
    config = parse_config(args.config)
    if config.controller.weights is None:
        print("error: config has no LQR weights", file=sys.stderr)
        return 2
    model = dyn.linearize(config.plant)
    K = lqr.lqr_gain(model, config.controller.weights)
    order = dyn.report_order_indices(config.plant.n_links)
    names = (["x", "xdot"]
             + [f"theta_{i + 1}" for i in range(config.plant.n_links)]
             + [f"thetadot_{i + 1}" for i in range(config.plant.n_links)])
    print(f"# feedback gains for {config.name} (u = -K x)")
    for name, value in zip(names, K[order]):
        print(f"{name},{value:.9g}")
    return 0


def cmd_run(args) -> int:
    config = parse_config(args.config)
    out = _out_root(args) / config.name
    summary = runner.run(config, out, seeds=_parse_seeds(args.seeds))
    for seed, info in summary["seeds"].items():
        print(f"seed {seed}: {info['outcome']} -> {info['dir']}")
    if summary["failed"]:
        print("control failure: at least one run ended with a fallen pole",
              file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    values = runner.parse_axis_values(args.axis, args.values)
    out = _out_root(args) / f"{config.name}-{args.axis}"
    rows = runner.sweep(config, args.axis, values, out,
                        seeds=_parse_seeds(args.seeds), workers=args.workers)
    print(f"wrote {out / 'sweep.csv'}")
    for row in rows:
        status = "" if row["n_failed"] == 0 else f"  ({row['n_failed']} failed)"
        po = row.get("po_pct_mean")
        isc = row.get("isc_n2_s_mean")
        print(f"{args.axis}={row['value']}: PO={po if po is None else round(po, 2)}%"
              f" ISC={isc if isc is None else round(isc, 1)}{status}")
    return 0


def cmd_compare(args) -> int:
    config = parse_config(args.config)
    out = _out_root(args) / f"{config.name}-compare"
    rows = runner.compare(config, out, seeds=_parse_seeds(args.seeds))
    print(f"wrote {out / 'compare.csv'}")
    for row in rows:
        ts = row.get("settling_time")
        isc = row.get("isc")
        print(f"{row['controller']}: Ts={ts if ts is None else round(ts, 3)} s"
              f" ISC={isc if isc is None else round(isc, 1)}")
    return 0


def cmd_plot(args) -> int:
    from spikelqr import plots
    try:
        outputs = plots.render_plots(args.run, args.out)
    except plots.MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in outputs:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikelqr",
        description="Spiking-neuron LQR control benchmark for pendula on carts",
        epilog="shipped profiles: " + ", ".join(profile_names()),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gains", help="print the LQR feedback gains for a config")
    p.add_argument("--config", required=True, help="config file or profile name")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("run", help="run one experiment per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", help="comma-separated seed list (default from config)")
    p.add_argument("--out", help=f"output root (default ${DEFAULT_OUT_ENV} or ./spikelqr-out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter axis across seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=runner.SWEEP_AXES)
    p.add_argument("--values", required=True,
                   help="comma-separated values; lo:hi pairs for max_rates")
    p.add_argument("--seeds")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="controller comparison table on one plant")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render plots from run or sweep artifacts")
    p.add_argument("--run", required=True, help="artifact directory")
    p.add_argument("--out", help="plot output directory (default: alongside artifacts)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, lqr.RiccatiConvergenceError, lqr.UncontrollableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
