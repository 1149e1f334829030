"""Command-line entry point: ``ionlab <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .core import ConfigError
from .fitting import FitError, SweepPoint, fit_pulse_sweep, fit_sqrt_voltage, fit_trace
from .fluorescence import OscillationModel, model_rate
from .io import (read_sweep, read_trace, read_voltage, write_json, write_model, write_sweep,
                 write_trace, write_voltage)
from .pipelines import (FIGURES, RunManifest, figure_sweep, simulate_trace, sweep_tau,
                        voltage_calibration)
from .sensitivity import GyroParams, sensitivity_report


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("IONLAB_THREADS")
    return int(env) if env else None


def _out(args, default):
    return Path(args.out) if args.out else Path(default)


def _fit_exit(*results):
    return 0 if all(r.converged for r in results) else 1


def cmd_simulate_trace(args):
    cfg = _config(args)
    if args.n_sequences:
        cfg = replace(cfg, n_sequences=args.n_sequences)
    if args.detect_us:
        cfg = replace(cfg, timeline=replace(cfg.timeline, detect_duration=args.detect_us * 1e-6))
    out = _out(args, "trace.csv")
    hist = simulate_trace(cfg, args.seed, _threads(args))
    manifest = RunManifest("simulate-trace", args.seed, cfg.to_dict())
    write_trace(hist, out, {"manifest": manifest.to_dict()})
    print(f"wrote {out} ({hist.counts.sum()} photons in {len(hist)} bins)")
    return 0


def cmd_eval_model(args):
    cfg = _config(args)
    v = args.x_a_um * 1e-6 * cfg.trap.omega_a
    m = OscillationModel(v, args.phi, cfg.trap.omega_a, cfg.laser,
                         mass=cfg.trap.mass if args.cooling else None)
    t = np.linspace(0.0, args.t_max_us * 1e-6, args.n_points)
    out = _out(args, "model.csv")
    write_model(t, model_rate(t, m), out)
    print(f"wrote {out}")
    return 0


def cmd_fit_trace(args):
    cfg = _config(args)
    hist = read_trace(args.input)
    window = tuple(w * 1e-6 for w in args.window_us) if args.window_us else None
    hint = args.hint_um * 1e-6 if args.hint_um is not None else None
    res, x_a = fit_trace(hist, cfg.trap, cfg.laser, window=window, init_hint=hint,
                         fit_background=not args.no_background, cooling=not args.no_cooling)
    out = _out(args, Path(args.input).with_suffix(".fit.json"))
    write_json(res.to_dict(), out)
    print(f"x_a = {x_a * 1e6:.3f} +- {res.extras['sigma_x_a'] * 1e6:.3f} um "
          f"(converged={res.converged}) -> {out}")
    return _fit_exit(res)


def cmd_fit_sweep(args):
    rows = read_sweep(args.input)
    points = [SweepPoint(r, x, s) for r, x, s, status in rows
              if status == "ok" and math.isfinite(x) and s > 0]
    res = fit_pulse_sweep(points, fit_period=args.fit_period)
    out = _out(args, Path(args.input).with_suffix(".fit.json"))
    write_json(res.to_dict(), out)
    print(f"x_d = {res['x_d'] * 1e6:.3f} +- {res.error('x_d') * 1e6:.3f} um -> {out}")
    return _fit_exit(res)


def cmd_fit_voltage(args):
    V, x, s = read_voltage(args.input)
    res = fit_sqrt_voltage(V, x, s, free_offset=args.free_offset)
    out = _out(args, Path(args.input).with_suffix(".fit.json"))
    write_json(res.to_dict(), out)
    print(f"a = {res['a'] * 1e6:.3f} +- {res.error('a') * 1e6:.3f} um/sqrt(V) -> {out}")
    return _fit_exit(res)


def _grid(args):
    if args.tau_values:
        return np.array(args.tau_values, dtype=float)
    start, stop, step = args.tau_grid
    return np.round(np.arange(start, stop + 0.5 * step, step), 10)


def cmd_sweep_tau(args):
    cfg = _config(args)
    detect = args.detect_us * 1e-6 if args.detect_us else None
    rows = sweep_tau(cfg, _grid(args), args.seed, _threads(args), args.n_sequences, detect)
    out = _out(args, "sweep.csv")
    write_sweep(rows, out)
    manifest = RunManifest("sweep-tau", args.seed, cfg.to_dict(),
                           parameters={"tau_over_T": [r[0] for r in rows],
                                       "n_sequences": args.n_sequences or cfg.n_sequences})
    manifest.add_output(out)
    manifest.write(out.with_suffix(".json"))
    bad = sum(r[3] != "ok" for r in rows)
    print(f"wrote {out} ({len(rows)} points, {bad} failed fits)")
    return 1 if bad else 0


def cmd_sensitivity(args):
    p = GyroParams(args.n_kicks, 2 * math.pi / (args.wavelength_nm * 1e-9), args.x_d_um * 1e-6,
                   args.dt_ms * 1e-3, args.repetitions)
    print(json.dumps(sensitivity_report(p)))
    return 0


def cmd_pipeline_figure(args):
    cfg = _config(args)
    outdir = _out(args, f"figure_{args.figure}")
    outdir.mkdir(parents=True, exist_ok=True)
    threads = _threads(args)
    manifest = RunManifest(f"pipeline-figure {args.figure}", args.seed, cfg.to_dict())
    fits = []
    if args.figure == "1c":
        if args.n_sequences:
            cfg = replace(cfg, n_sequences=args.n_sequences)
        hist = simulate_trace(cfg, args.seed, threads)
        write_trace(hist, outdir / "trace.csv")
        res, x_a = fit_trace(hist, cfg.trap, cfg.laser)
        write_json(res.to_dict(), outdir / "fit_trace.json")
        manifest.add_output(outdir / "trace.csv")
        manifest.add_output(outdir / "fit_trace.json")
        fits.append(res)
        print(f"fitted x_a = {x_a * 1e6:.3f} +- {res.extras['sigma_x_a'] * 1e6:.3f} um")
    elif args.figure in ("2", "3a"):
        x_d = 4.7e-6 if args.figure == "2" else 10.5e-6
        n = args.n_sequences or 2000
        rows, res = figure_sweep(cfg, x_d, args.seed, threads, n)
        write_sweep(rows, outdir / "sweep.csv")
        write_json(res.to_dict(), outdir / "fit_sweep.json")
        manifest.parameters.update(x_d_true_um=x_d * 1e6, n_sequences=n)
        manifest.add_output(outdir / "sweep.csv")
        manifest.add_output(outdir / "fit_sweep.json")
        fits.append(res)
        print(f"fitted x_d = {res['x_d'] * 1e6:.3f} +- {res.error('x_d') * 1e6:.3f} um")
    else:
        voltages = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
        n = args.n_sequences or 2000
        rows, res = voltage_calibration(cfg, voltages, args.seed, threads, n)
        write_voltage([r[:3] for r in rows if r[3] == "ok"], outdir / "voltage.csv")
        write_json(res.to_dict(), outdir / "fit_voltage.json")
        manifest.parameters.update(voltages=voltages, n_sequences=n)
        manifest.add_output(outdir / "voltage.csv")
        manifest.add_output(outdir / "fit_voltage.json")
        fits.append(res)
        print(f"fitted a = {res['a'] * 1e6:.3f} +- {res.error('a') * 1e6:.3f} um/sqrt(V)")
    manifest.write(outdir / "manifest.json")
    return _fit_exit(*fits)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads (env IONLAB_THREADS)")
    common.add_argument("--out", help="output file or directory")

    parser = argparse.ArgumentParser(prog="ionlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-trace", parents=[common], help="Monte Carlo fluorescence trace")
    p.add_argument("--n-sequences", type=int)
    p.add_argument("--detect-us", type=float)
    p.set_defaults(func=cmd_simulate_trace)

    p = sub.add_parser("eval-model", parents=[common], help="evaluate the fluorescence model")
    p.add_argument("--x-a-um", type=float, default=8.5)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--t-max-us", type=float, default=14.0)
    p.add_argument("--n-points", type=int, default=1401)
    p.add_argument("--cooling", action="store_true", help="include Doppler-cooling decay")
    p.set_defaults(func=cmd_eval_model)

    p = sub.add_parser("fit-trace", parents=[common], help="fit a trace CSV")
    p.add_argument("input")
    p.add_argument("--window-us", type=float, nargs=2, metavar=("T0", "T1"))
    p.add_argument("--hint-um", type=float)
    p.add_argument("--no-background", action="store_true")
    p.add_argument("--no-cooling", action="store_true")
    p.set_defaults(func=cmd_fit_trace)

    p = sub.add_parser("fit-sweep", parents=[common], help="fit a pulse-duration sweep CSV")
    p.add_argument("input")
    p.add_argument("--fit-period", action="store_true")
    p.set_defaults(func=cmd_fit_sweep)

    p = sub.add_parser("fit-voltage", parents=[common], help="fit a voltage calibration CSV")
    p.add_argument("input")
    p.add_argument("--free-offset", action="store_true")
    p.set_defaults(func=cmd_fit_voltage)

    p = sub.add_parser("sweep-tau", parents=[common], help="simulate and fit a tau/T sweep")
    p.add_argument("--tau-grid", type=float, nargs=3, default=(0.0, 3.0, 0.1),
                   metavar=("START", "STOP", "STEP"))
    p.add_argument("--tau-values", type=float, nargs="+")
    p.add_argument("--n-sequences", type=int)
    p.add_argument("--detect-us", type=float)
    p.set_defaults(func=cmd_sweep_tau)

    p = sub.add_parser("sensitivity", parents=[common], help="gyroscope sensitivity")
    p.add_argument("--n-kicks", type=int, default=100)
    p.add_argument("--wavelength-nm", type=float, default=369.5)
    p.add_argument("--x-d-um", type=float, default=16.9)
    p.add_argument("--dt-ms", type=float, default=1.0)
    p.add_argument("--repetitions", type=int, default=1)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("pipeline-figure", parents=[common], help="regenerate a figure's data")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--n-sequences", type=int)
    p.set_defaults(func=cmd_pipeline_figure)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FitError, ValueError, OSError) as exc:
        print(f"ionlab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
