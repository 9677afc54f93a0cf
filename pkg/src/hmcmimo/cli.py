"""Command-line entry point: ``hmcmimo run`` and ``hmcmimo complexity``."""

import argparse
import sys

from .harness import ConfigError, config_from_mapping, estimate_complexity_report, format_csv, load_config, run_experiment


def _add_experiment_flags(p):
    p.add_argument("--config", help="flat key = value experiment file")
    p.add_argument("--detector", action="append", dest="detectors", metavar="ID",
                   help="detector id (repeatable): hmc-t, hmc-normal, mgs, mmse, ml")
    p.add_argument("--n", type=int, help="transmit antennas")
    p.add_argument("--m", type=int, help="receive antennas")
    p.add_argument("--modulation")
    p.add_argument("--rho", type=float)
    p.add_argument("--snr-start", type=float)
    p.add_argument("--snr-stop", type=float)
    p.add_argument("--snr-step", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--snr-convention", choices=["per-antenna-unit-power", "total-unit-power"])
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any config key, e.g. hmc-t.step_scale=0.8")


def build_parser():
    parser = argparse.ArgumentParser(prog="hmcmimo", description="Monte-Carlo BER sweeps for MIMO detectors.")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run a BER sweep and write a CSV")
    _add_experiment_flags(run)
    run.add_argument("--out", help="CSV output path (default: stdout)")
    run.add_argument("--threads", type=int)
    run.add_argument("--trace", help="write per-trial JSON lines here")
    run.add_argument("--no-timing", action="store_true", help="leave seconds_per_trial empty (byte-reproducible)")
    run.add_argument("--quiet", action="store_true")
    cx = sub.add_parser("complexity", help="print operation counts per detector")
    _add_experiment_flags(cx)
    cx.add_argument("--measure", action="store_true", help="also time one detection per detector")
    return parser


def _overrides(args):
    values = {}
    for key in ("n", "m", "modulation", "rho", "snr_start", "snr_stop", "snr_step", "trials",
                "master_seed", "snr_convention", "out", "threads", "trace"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    if args.detectors:
        values["detectors"] = ",".join(args.detectors)
    if getattr(args, "no_timing", False):
        values["record_timing"] = "false"
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _resolve(args):
    values = _overrides(args)
    if args.config:
        return load_config(args.config, values)
    return config_from_mapping(values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = _resolve(args)
        if args.command == "complexity":
            print(estimate_complexity_report(cfg, measure=args.measure))
            return 0
        records = run_experiment(cfg)
        if cfg.out is None:
            sys.stdout.write(format_csv(records))
        elif not args.quiet:
            print(f"wrote {len(records)} records to {cfg.out}", file=sys.stderr)
    except ConfigError as exc:
        print(f"hmcmimo: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hmcmimo: {exc.strerror or exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
