"""JSON run configuration.

Frequencies in the file are ordinary frequencies in MHz, lengths in the
unit named by the key suffix. Example::

    {
      "trap": {"omega_a_mhz": 0.36, "omega_r_mhz": 1.83, "mass_u": 170.936,
               "drift_fraction": 0.0},
      "laser": {"wavelength_nm": 369.5, "linewidth_mhz": 19.6,
                "detuning_mhz": -40.0, "saturation": 15.0, "direction": 1},
      "pulse": {"x_d_um": 4.7, "tau_us": 0.9},
      "timeline": {"detect_duration_us": 4000.0, "dt_ns": 1.0,
                   "detection_efficiency": 0.01, "init_temperature_k": null},
      "run": {"n_sequences": 16715, "bin_width_ns": 100.0,
              "background_per_bin": 0.0}
    }

Every section and key is optional; missing values take the defaults above.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import (AMU, ConfigError, DetectionLaser, DisplacementPulse, TrapConfig,
                   angular_to_mhz)
from .dynamics import DEFAULT_BIN_WIDTH, SequenceTimeline

DEFAULTS = {
    "trap": {"omega_a_mhz": 0.36, "omega_r_mhz": 1.83, "mass_u": 170.936, "drift_fraction": 0.0},
    "laser": {"wavelength_nm": 369.5, "linewidth_mhz": 19.6, "detuning_mhz": -40.0,
              "saturation": 15.0, "direction": 1},
    "pulse": {"x_d_um": 4.7, "tau_us": 0.9},
    "timeline": {"detect_duration_us": 4000.0, "dt_ns": 1.0, "detection_efficiency": 0.01,
                 "init_temperature_k": None},
    "run": {"n_sequences": 16715, "bin_width_ns": DEFAULT_BIN_WIDTH * 1e9,
            "background_per_bin": 0.0},
}


class ConfigFileError(ConfigError):
    """Configuration file problem, with the offending line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    trap: TrapConfig = field(default_factory=lambda: TrapConfig.from_mhz())
    laser: DetectionLaser = field(default_factory=DetectionLaser)
    timeline: SequenceTimeline = field(
        default_factory=lambda: SequenceTimeline(DisplacementPulse(4.7e-6, 0.9e-6)))
    n_sequences: int = 16715
    bin_width: float = DEFAULT_BIN_WIDTH
    background_per_bin: float = 0.0

    def with_pulse(self, x_d=None, tau=None) -> "RunConfig":
        p = self.timeline.pulse
        pulse = DisplacementPulse(p.x_d if x_d is None else x_d, p.tau if tau is None else tau)
        return replace(self, timeline=replace(self.timeline, pulse=pulse))

    def to_dict(self) -> dict:
        """Config in file units, rounded to 12 digits to hide unit-conversion noise."""
        tl = self.timeline
        return _rounded({
            "trap": {"omega_a_mhz": angular_to_mhz(self.trap.omega_a),
                     "omega_r_mhz": angular_to_mhz(self.trap.omega_r),
                     "mass_u": self.trap.mass / AMU,
                     "drift_fraction": self.trap.drift_fraction},
            "laser": {"wavelength_nm": self.laser.wavelength * 1e9,
                      "linewidth_mhz": angular_to_mhz(self.laser.linewidth),
                      "detuning_mhz": angular_to_mhz(self.laser.detuning),
                      "saturation": self.laser.saturation,
                      "direction": self.laser.direction},
            "pulse": {"x_d_um": tl.pulse.x_d * 1e6, "tau_us": tl.pulse.tau * 1e6},
            "timeline": {"detect_duration_us": tl.detect_duration * 1e6, "dt_ns": tl.dt * 1e9,
                         "detection_efficiency": tl.detection_efficiency,
                         "init_temperature_k": tl.init_temperature},
            "run": {"n_sequences": self.n_sequences, "bin_width_ns": self.bin_width * 1e9,
                    "background_per_bin": self.background_per_bin},
        })


def _rounded(d):
    return {k: _rounded(v) if isinstance(v, dict)
            else float(f"{v:.12g}") if isinstance(v, float) else v for k, v in d.items()}


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def from_dict(data: dict, *, text=None, path=None) -> RunConfig:
    """Build a :class:`RunConfig`; ``text`` enables line numbers in errors."""
    if not isinstance(data, dict):
        raise ConfigFileError("top level must be a JSON object", path)
    merged = {}
    for section, defaults in DEFAULTS.items():
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ConfigFileError(f"section {section!r} must be an object", path,
                                  _line_of(text, section))
        unknown = set(given) - set(defaults)
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigFileError(f"unknown key {section}.{key}", path, _line_of(text, key))
        merged[section] = {**defaults, **given}
    extra = set(data) - set(DEFAULTS)
    if extra:
        key = sorted(extra)[0]
        raise ConfigFileError(f"unknown section {key!r}", path, _line_of(text, key))

    def build(section, fn):
        try:
            return fn(merged[section])
        except (ConfigError, TypeError, ValueError) as exc:
            # messages start with the field name, keys add a unit suffix
            first = str(exc).split(" ", 1)[0]
            line = next((_line_of(text, k) for k in merged[section] if k.startswith(first)), None)
            raise ConfigFileError(f"[{section}] {exc}", path, line or _line_of(text, section)) from None

    trap = build("trap", lambda d: TrapConfig.from_mhz(d["omega_a_mhz"], d["omega_r_mhz"],
                                                       d["mass_u"], d["drift_fraction"]))
    laser = build("laser", lambda d: DetectionLaser.from_mhz(d["wavelength_nm"], d["linewidth_mhz"],
                                                             d["detuning_mhz"], d["saturation"],
                                                             d["direction"]))
    pulse = build("pulse", lambda d: DisplacementPulse(d["x_d_um"] * 1e-6, d["tau_us"] * 1e-6))
    timeline = build("timeline", lambda d: SequenceTimeline(
        pulse, d["detect_duration_us"] * 1e-6, d["dt_ns"] * 1e-9, d["detection_efficiency"],
        d["init_temperature_k"]))

    def run_section(d):
        n = d["n_sequences"]
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"n_sequences must be a positive integer, got {n!r}")
        bw = float(d["bin_width_ns"]) * 1e-9
        if not 0 < bw < timeline.detect_duration:
            raise ConfigError("bin_width_ns must be positive and shorter than the detection")
        bg = float(d["background_per_bin"])
        if bg < 0:
            raise ConfigError("background_per_bin must be >= 0")
        return n, bw, bg

    n, bw, bg = build("run", run_section)
    cfg = RunConfig(trap, laser, timeline, n, bw, bg)
    try:
        timeline.validate(trap, laser)
    except ConfigError as exc:
        raise ConfigFileError(str(exc), path, _line_of(text, "dt_ns")) from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"invalid JSON: {exc.msg} (column {exc.colno})", path,
                              exc.lineno) from None
    return from_dict(data, text=text, path=path)


def save_config(cfg: RunConfig, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
