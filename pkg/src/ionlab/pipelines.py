"""Simulate-and-fit recipes shared by the CLI, the demos and the acceptance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .dynamics import run_accumulation
from .fitting import (FitError, SweepPoint, fit_pulse_sweep, fit_sqrt_voltage, fit_trace)
from .io import file_digest, write_json

SWEEP_DETECT_PERIODS = 6
# synthetic electrode calibration: 0.6 V gives 10.5 um
VOLT_COEFF = 10.5e-6 / math.sqrt(0.6)
FIGURES = ("1c", "2", "3a", "3b")


@dataclass
class RunManifest:
    command: str
    master_seed: int
    config: dict
    version: str = __version__
    outputs: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def add_output(self, path):
        path = Path(path)
        self.outputs[path.name] = file_digest(path)

    def to_dict(self):
        return {"command": self.command, "master_seed": self.master_seed,
                "config": self.config, "version": self.version,
                "parameters": self.parameters, "digests": dict(sorted(self.outputs.items()))}

    def write(self, path):
        write_json(self.to_dict(), path)


def point_seed(master_seed: int, index: int) -> int:
    """Independent master seed for sweep point ``index``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(1, int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def simulate_trace(cfg: RunConfig, master_seed=0, threads=None):
    return run_accumulation(cfg.timeline, cfg.trap, cfg.laser, cfg.n_sequences, cfg.bin_width,
                            master_seed, threads, cfg.background_per_bin)


def sweep_tau(cfg: RunConfig, tau_over_T, master_seed=0, threads=None, n_sequences=None,
              detect_duration=None, x_d=None, fit_kwargs=None):
    """Simulate and fit one trace per pulse duration.

    Returns ``(tau_over_T, x_a, sigma_x, status)`` rows in grid order;
    failed fits give ``nan`` values and the exception name as status.
    """
    period = cfg.trap.period()
    if detect_duration is None:
        detect_duration = SWEEP_DETECT_PERIODS * period
    base = replace(cfg, timeline=replace(cfg.timeline, detect_duration=detect_duration),
                   n_sequences=n_sequences or cfg.n_sequences)
    kwargs = {"fit_background": False}
    kwargs.update(fit_kwargs or {})
    rows = []
    for i, r in enumerate(np.asarray(tau_over_T, dtype=float)):
        point = base.with_pulse(x_d=x_d, tau=float(r) * period)
        hist = simulate_trace(point, point_seed(master_seed, i), threads)
        try:
            res, x_a = fit_trace(hist, point.trap, point.laser, **kwargs)
            status = "ok" if res.converged else "NonConvergence"
            rows.append((float(r), x_a, res.extras["sigma_x_a"], status))
        except FitError as exc:
            rows.append((float(r), math.nan, math.nan, type(exc).__name__))
    return rows


def sweep_points(rows):
    return [SweepPoint(r, x, s) for r, x, s, status in rows
            if status == "ok" and math.isfinite(x) and s > 0]


def figure_sweep(cfg, x_d, master_seed=0, threads=None, n_sequences=2000,
                 grid=np.round(np.arange(0, 3.0001, 0.1), 10)):
    rows = sweep_tau(cfg, grid, master_seed, threads, n_sequences, x_d=x_d)
    fit = fit_pulse_sweep(sweep_points(rows))
    return rows, fit


def voltage_calibration(cfg, voltages, master_seed=0, threads=None, n_sequences=2000):
    """Per-voltage displacement from the amplitude at ``tau = T/2``.

    Returns ``(rows, fit)``; each row is ``(V, x_d, sigma, status)`` with
    ``x_d`` half the fitted amplitude.
    """
    rows = []
    for i, V in enumerate(voltages):
        amp = sweep_tau(cfg, [0.5], point_seed(master_seed, 1000 + i), threads, n_sequences,
                        x_d=VOLT_COEFF * math.sqrt(V))[0]
        rows.append((float(V), 0.5 * amp[1], 0.5 * amp[2], amp[3]))
    good = [r for r in rows if r[3] == "ok"]
    fit = fit_sqrt_voltage([r[0] for r in good], [r[1] for r in good], [r[2] for r in good])
    return rows, fit
