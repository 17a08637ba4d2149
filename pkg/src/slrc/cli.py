"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bench, pipeline, signals, slwave
from .config import load_config, reference_page
from .errors import ConfigError, NumericalError, ParameterError, ShapeError, SlrcError
from .numerics import magnitude_spectrum
from .timeseries import atomic_write_text, read_csv, write_columns_csv, write_csv

log = logging.getLogger("slrc")

OUTPUT_ENV = "SLRC_OUTPUT_ROOT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config file (key = value sections)")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./slrc-out)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key; repeatable")
    common.add_argument("--seed", type=int, help="shortcut for --set experiment.seed=N")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--quiet", action="store_true")
    noise.add_argument("--verbose", action="store_true")

    parser = _Parser(prog="slrc", description="Reservoir-computing forecasting experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen-signal", parents=[common], help="write the configured source signal as CSV")
    spectrum = sub.add_parser("spectrum", parents=[common], help="magnitude spectrum of a t,value CSV")
    spectrum.add_argument("input", help="t,value CSV file")
    train = sub.add_parser("train", parents=[common], help="train and persist a system")
    train.add_argument("--name", default="system.npz", help="file name inside --out")
    forecast = sub.add_parser("forecast", parents=[common], help="train (or load) and forecast")
    forecast.add_argument("--system", help="previously trained system (.npz) to load instead of training")
    forecast.add_argument("--snapshots", type=int, default=0, metavar="K",
                          help="slwave backend: dump the film field every K samples")
    bench_p = sub.add_parser("bench", parents=[common], help="run the reproduction checks")
    bench_p.add_argument("--only", type=int, action="append", metavar="N",
                         help="run only criterion N; repeatable")
    sub.add_parser("calibrate-film", parents=[common], help="sweep film nonlinearity and gain")
    sub.add_parser("config-ref", parents=[common], help="print the configuration reference")
    return parser


def _out_dir(args) -> str:
    out = args.out or os.environ.get(OUTPUT_ENV) or "slrc-out"
    os.makedirs(out, exist_ok=True)
    return out


def _config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    return load_config(args.config, overrides)


def _cmd_gen_signal(args):
    config = _config(args)
    ts = pipeline.make_signal(config.signal)
    path = os.path.join(_out_dir(args), "signal.csv")
    write_csv(ts, path)
    log.info("wrote %d samples to %s", len(ts), path)


def _cmd_spectrum(args):
    try:
        ts = read_csv(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    spec = magnitude_spectrum(ts)
    path = os.path.join(_out_dir(args), "spectrum.csv")
    write_columns_csv(path, ["freq_hz", "magnitude"], [spec.freqs_hz, spec.magnitudes])
    log.info("peak at %.6g Hz; wrote %s", spec.peak_frequency(), path)


def _cmd_train(args):
    system = pipeline.train(_config(args))
    path = os.path.join(_out_dir(args), args.name)
    system.save(path)
    log.info("training NRMSE %.4g; saved %s", system.training_nrmse, path)


def _cmd_forecast(args):
    if args.system:
        if args.config or args.overrides or args.seed is not None:
            raise UsageError("--system cannot be combined with --config/--set/--seed")
        system = pipeline.TrainedSystem.load(args.system)
    else:
        system = pipeline.train(_config(args))
    report = pipeline.forecast(system)
    out = _out_dir(args)
    report.save(out)
    if args.snapshots and system.config.experiment.backend == "slwave":
        surrogate = pipeline.surrogate_for(system, max(report.forecast.values.size, 1))
        drive = system.train.with_values(
            system.normalise(list(system.train.values) + list(surrogate.values)))
        _, snaps = slwave.respond(system.config.slwave, drive, snapshot_every=args.snapshots)
        slwave.write_snapshots(os.path.join(out, "film_snapshots.csv"), snaps, system.config.slwave)
    log.info("NRMSE %.4g over %d samples; report in %s", report.nrmse, len(report.target), out)


def _cmd_bench(args):
    checks = bench.CHECKS
    if args.only:
        checks = [c for i, c in enumerate(bench.CHECKS, start=1) if i in args.only]
    results = []
    for check in checks:
        result = check()
        results.append(result)
        print(result.line(), flush=True)
    path = os.path.join(_out_dir(args), "bench_summary.csv")
    bench.write_summary(results, path)
    log.info("summary written to %s", path)
    if not all(r.ok for r in results):
        raise _BenchFailed(sum(not r.ok for r in results))


class _BenchFailed(Exception):
    pass


def _cmd_calibrate(args):
    config = _config(args)
    params, rows = slwave.calibrate_film(config.slwave)
    out = _out_dir(args)
    write_columns_csv(
        os.path.join(out, "calibration_sweep.csv"),
        ["eps_nl", "drive_gain", "db_2nd", "db_3rd", "ratio_2nd", "passed"],
        [[float(r[i]) for r in rows] for i in range(5)] + [[str(r[5]).lower() for r in rows]],
    )
    keys = ("eps_nl", "drive_gain", "dt_pde", "substeps_per_sample")
    text = "[slwave]\n" + "".join(f"{k} = {getattr(params, k)!r}\n" for k in keys)
    atomic_write_text(os.path.join(out, "calibrated_film.ini"), text)
    print(text, end="")


def _cmd_config_ref(args):
    print(reference_page())


COMMANDS = {
    "gen-signal": _cmd_gen_signal,
    "spectrum": _cmd_spectrum,
    "train": _cmd_train,
    "forecast": _cmd_forecast,
    "bench": _cmd_bench,
    "calibrate-film": _cmd_calibrate,
    "config-ref": _cmd_config_ref,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"slrc: usage error: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"slrc {args.command}: {exc}", file=sys.stderr)
        return 1
    except _BenchFailed as exc:
        print(f"slrc bench: {exc} check(s) failed", file=sys.stderr)
        return 2
    except (NumericalError, ParameterError, ShapeError, SlrcError) as exc:
        print(f"slrc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
