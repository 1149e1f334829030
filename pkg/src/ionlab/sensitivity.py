"""Rotation sensitivity of a displaced-ion Sagnac interferometer.

The sensitivity is ``S = 1 / (2 N_k k x_d sqrt(dt))`` in rad/sqrt(s).
The expression is sometimes printed with an extra factor of hbar next to
``k``; that version does not come out in rad/sqrt(s), while the form
here gives 1.8 deg/sqrt(hour) for N_k = 100,
x_d = 16.9 um and dt = 1 ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import TWO_PI, YB_S_P_WAVELENGTH

RAD_PER_SQRT_S_TO_DEG_PER_SQRT_HOUR = 180.0 / math.pi * math.sqrt(3600.0)


@dataclass(frozen=True)
class GyroParams:
    n_kicks: int
    kick_wavenumber: float = TWO_PI / YB_S_P_WAVELENGTH
    x_d: float = 16.9e-6
    interference_time: float = 1e-3
    n_repetitions: int = 1

    def __post_init__(self):
        for name in ("n_kicks", "kick_wavenumber", "x_d", "interference_time", "n_repetitions"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")


def to_deg_per_sqrt_hour(s_rad: float) -> float:
    return s_rad * RAD_PER_SQRT_S_TO_DEG_PER_SQRT_HOUR


def to_rad_per_sqrt_s(s_deg: float) -> float:
    return s_deg / RAD_PER_SQRT_S_TO_DEG_PER_SQRT_HOUR


def gyro_sensitivity(p: GyroParams) -> float:
    """Single-shot sensitivity in rad/sqrt(s), divided by sqrt(n_repetitions)."""
    s = 1.0 / (2.0 * p.n_kicks * p.kick_wavenumber * p.x_d * math.sqrt(p.interference_time))
    return averaged_sensitivity(s, p.n_repetitions)


def averaged_sensitivity(s: float, n_repetitions: int) -> float:
    if n_repetitions < 1:
        raise ValueError("n_repetitions must be >= 1")
    return s / math.sqrt(n_repetitions)


def sensitivity_report(p: GyroParams) -> dict:
    s = gyro_sensitivity(p)
    return {"rad_per_sqrt_s": s, "deg_per_sqrt_hour": to_deg_per_sqrt_hour(s)}
