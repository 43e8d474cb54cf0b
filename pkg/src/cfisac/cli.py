"""Command-line entry point: run, validate, selftest."""
import argparse
import os
import sys

from . import harness
from .scenario import ConfigError, load_config

SWEEP_KEYS = ("sweep_variable", "sweep_values", "sweep_modes")


def _split(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def build_run(args):
    cfg, extras = load_config(args.config, SWEEP_KEYS)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    trials = args.trials if args.trials is not None else cfg.n_mc
    if args.figure:
        cfg, sweep = harness.figure_preset(args.figure, cfg, trials)
    else:
        sweep = harness.SweepSpec(trials_per_point=trials, modes=[cfg.mode],
                                  values=[cfg.pr_over_n0_db])
        if "sweep_variable" in extras:
            sweep.variable = extras["sweep_variable"]
        if "sweep_values" in extras:
            sweep.values = [float(v) for v in _split(extras["sweep_values"])]
        if "sweep_modes" in extras:
            sweep.modes = _split(extras["sweep_modes"])
    cfg.validate()
    return cfg, sweep.validate()


def cmd_run(args):
    cfg, sweep = build_run(args)

    def progress(rec):
        if not args.quiet:
            print("%s %s %s=%g  ser_ul=%.4g pd=%.4g kld_ul=%.4g  (%.1fs)"
                  % (rec.mode, rec.curve, rec.variable, rec.value, rec.ser_ul, rec.pd,
                     rec.kld_ul, rec.wall_time), file=sys.stderr)

    records = harness.run_sweep(cfg, sweep, workers=args.workers,
                                fixed_geometry=args.fixed_geometry, progress=progress)
    harness.emit_csv(records, args.out, timing=args.timing)
    if args.plot_data:
        harness.emit_plot_data(records, args.plot_data, sweep.metrics)
    return 0


def cmd_validate(args):
    try:
        cfg, _ = load_config(args.config, SWEEP_KEYS)
        cfg.validate()
    except (ConfigError, ValueError) as exc:
        print("invalid: %s" % exc, file=sys.stderr)
        return 1
    print("ok: %s, %d APs, %d DL / %d UL users, %d bins" % (cfg.mode, cfg.M, cfg.K_D, cfg.K_U, cfg.T))
    return 0


def cmd_selftest(args):
    import pytest
    here = os.path.dirname(os.path.abspath(__file__))
    tests = os.path.normpath(os.path.join(here, "..", "..", "tests"))
    if not os.path.isdir(tests):
        print("test directory not found next to the package (%s)" % tests, file=sys.stderr)
        return 2
    return pytest.main(["-q", "-m", "not slow", tests, "--ignore",
                        os.path.join(tests, "test_acceptance.py")])


def make_parser():
    p = argparse.ArgumentParser(prog="cfisac", description="Cell-free ISAC Monte-Carlo simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a sweep and write a CSV")
    r.add_argument("--config", required=True)
    r.add_argument("--figure", choices=sorted(harness.FIGURES))
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--fixed-geometry", action="store_true")
    r.add_argument("--out", required=True)
    r.add_argument("--plot-data", help="prefix for per-metric plot files")
    r.add_argument("--timing", action="store_true", help="include wall_time in the CSV")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("selftest", help="run the invariant test suite")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
