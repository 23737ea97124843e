"""Command-line entry point.

    prpsim run SCENARIO.toml [--verbose-records]
    prpsim sweep SPEC.toml [--parallel N] [--aggregate] [--verbose-records]
    prpsim preset NAME [--parallel N] [--aggregate] [--verbose-records] [--seeds 1,2]
    prpsim presets

CSV goes to standard output, diagnostics to standard error. Exit status is
0 on success, 1 for an invalid config, 2 when a run fails.
"""

import argparse
import dataclasses
import sys

from . import __version__
from .config import ConfigError, load_config
from .kernels import BACKEND
from .sweep import (SweepError, SweepSpec, execute, get_preset, load_sweep, presets,
                    record_rows, report_csv, to_csv)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="prpsim", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, parallel=True):
        sp.add_argument("--verbose-records", action="store_true",
                        help="append a per-discovery CSV after a blank line")
        if parallel:
            sp.add_argument("--parallel", type=int, default=1, metavar="N",
                            help="run up to N simulations at once (default 1)")
            sp.add_argument("--aggregate", action="store_true",
                            help="one row per scenario, averaged over seeds")

    run = sub.add_parser("run", help="simulate one scenario file")
    run.add_argument("config")
    common(run, parallel=False)

    sweep = sub.add_parser("sweep", help="run a sweep spec file")
    sweep.add_argument("spec")
    common(sweep)

    preset = sub.add_parser("preset", help="run a built-in experiment grid")
    preset.add_argument("name")
    preset.add_argument("--seeds", help="comma-separated seeds overriding the preset's")
    preset.add_argument("--duration", type=float, help="override sim_duration_s")
    common(preset)

    sub.add_parser("presets", help="list built-in experiment grids")
    return p


def _resolve(args) -> tuple[SweepSpec, int, bool]:
    if args.command == "run":
        cfg = load_config(args.config)
        return SweepSpec(base=cfg, seeds=(cfg.rng_seed,)), 1, False
    if args.command == "sweep":
        return load_sweep(args.spec), args.parallel, args.aggregate
    spec = get_preset(args.name)
    if args.seeds:
        try:
            seeds = tuple(int(s) for s in args.seeds.split(","))
        except ValueError:
            raise ConfigError("--seeds", f"expected comma-separated integers, got {args.seeds!r}")
        spec = dataclasses.replace(spec, seeds=seeds)
    if args.duration is not None:
        spec = dataclasses.replace(spec, base=spec.base.replace(sim_duration_s=args.duration))
    return spec, args.parallel, args.aggregate


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        for name, spec in presets().items():
            print(f"{name}\t{len(spec.runs())} runs\treport={spec.report}")
        return EXIT_OK
    try:
        spec, parallel, aggregated = _resolve(args)
        if parallel < 1:
            raise ConfigError("--parallel", "must be a positive integer")
        configs = spec.runs()
    except ConfigError as exc:
        print(f"prpsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"prpsim: {exc}", file=sys.stderr)
        return EXIT_INVALID

    print(f"prpsim: {len(configs)} run(s), backend={BACKEND}", file=sys.stderr)
    try:
        results = execute(configs, parallel)
    except SweepError as exc:
        print(f"prpsim: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = sys.stdout
    out.write(report_csv(spec, results, aggregated))
    if args.verbose_records:
        out.write("\n")
        out.write(to_csv(*record_rows(results)))
    out.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
