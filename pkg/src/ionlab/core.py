"""Physical configuration types and constants.

All frequencies are stored internally as angular frequencies in rad/s.
The ``from_mhz`` constructors accept ordinary frequencies in MHz and
convert at the boundary. Red detuning is a negative ``detuning``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _c

HBAR = _c.hbar
K_B = _c.k
AMU = _c.atomic_mass

YB171_MASS_U = 170.936
YB_S_P_WAVELENGTH = 369.5e-9
YB_S_P_LINEWIDTH = 2 * math.pi * 19.6e6

TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    """Raised when a configuration value is non-finite or out of range."""


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


def mhz_to_angular(f_mhz: float) -> float:
    return TWO_PI * f_mhz * 1e6


def angular_to_mhz(omega: float) -> float:
    return omega / TWO_PI / 1e6


@dataclass(frozen=True)
class TrapConfig:
    """Axial harmonic confinement of a single ion.

    ``omega_r`` is carried for bookkeeping only; the dynamics are 1-D.
    ``drift_fraction`` is the relative change of ``omega_a`` across a full
    accumulation run (see :func:`ionlab.dynamics.run_accumulation`).
    """

    omega_a: float
    mass: float = YB171_MASS_U * AMU
    omega_r: float = TWO_PI * 1.83e6
    drift_fraction: float = 0.0

    def __post_init__(self):
        omega_a = _finite("omega_a", self.omega_a)
        mass = _finite("mass", self.mass)
        drift = _finite("drift_fraction", self.drift_fraction)
        omega_r = _finite("omega_r", self.omega_r)
        if omega_a <= 0:
            raise ConfigError(f"omega_a must be > 0, got {omega_a}")
        if mass <= 0:
            raise ConfigError(f"mass must be > 0, got {mass}")
        if not 0.0 <= drift < 0.1:
            raise ConfigError(f"drift_fraction must lie in [0, 0.1), got {drift}")
        if omega_r < 0:
            raise ConfigError(f"omega_r must be >= 0, got {omega_r}")
        for name, val in (("omega_a", omega_a), ("mass", mass),
                          ("drift_fraction", drift), ("omega_r", omega_r)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_mhz(cls, omega_a_mhz=0.36, omega_r_mhz=1.83, mass_u=YB171_MASS_U,
                 drift_fraction=0.0):
        return cls(omega_a=mhz_to_angular(omega_a_mhz), mass=mass_u * AMU,
                   omega_r=mhz_to_angular(omega_r_mhz),
                   drift_fraction=drift_fraction)

    def period(self) -> float:
        return TWO_PI / self.omega_a

    def with_omega(self, omega_a: float) -> "TrapConfig":
        return TrapConfig(omega_a=omega_a, mass=self.mass, omega_r=self.omega_r,
                          drift_fraction=self.drift_fraction)


@dataclass(frozen=True)
class DetectionLaser:
    """Near-resonant detection/cooling beam along the trap axis."""

    wavelength: float = YB_S_P_WAVELENGTH
    linewidth: float = YB_S_P_LINEWIDTH
    detuning: float = -TWO_PI * 40e6
    saturation: float = 15.0
    direction: int = 1

    def __post_init__(self):
        wavelength = _finite("wavelength", self.wavelength)
        linewidth = _finite("linewidth", self.linewidth)
        detuning = _finite("detuning", self.detuning)
        saturation = _finite("saturation", self.saturation)
        if wavelength <= 0:
            raise ConfigError(f"wavelength must be > 0, got {wavelength}")
        if linewidth <= 0:
            raise ConfigError(f"linewidth must be > 0, got {linewidth}")
        if saturation < 0:
            raise ConfigError(f"saturation must be >= 0, got {saturation}")
        if self.direction not in (1, -1):
            raise ConfigError(f"direction must be +1 or -1, got {self.direction!r}")
        object.__setattr__(self, "wavelength", wavelength)
        object.__setattr__(self, "linewidth", linewidth)
        object.__setattr__(self, "detuning", detuning)
        object.__setattr__(self, "saturation", saturation)
        object.__setattr__(self, "direction", int(self.direction))

    @classmethod
    def from_mhz(cls, wavelength_nm=369.5, linewidth_mhz=19.6, detuning_mhz=-40.0,
                 saturation=15.0, direction=1):
        return cls(wavelength=wavelength_nm * 1e-9,
                   linewidth=mhz_to_angular(linewidth_mhz),
                   detuning=mhz_to_angular(detuning_mhz),
                   saturation=saturation, direction=direction)

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength

    def max_rate(self) -> float:
        """Scattering rate on resonance, ``(Gamma/2) s / (1 + s)``."""
        s = self.saturation
        return 0.5 * self.linewidth * s / (1.0 + s)


@dataclass(frozen=True)
class DisplacementPulse:
    """Square trap-center shift by ``x_d`` held for ``tau`` (ideal edges)."""

    x_d: float
    tau: float

    def __post_init__(self):
        x_d = _finite("x_d", self.x_d)
        tau = _finite("tau", self.tau)
        if x_d < 0:
            raise ConfigError(f"x_d must be >= 0, got {x_d}")
        if tau < 0:
            raise ConfigError(f"tau must be >= 0, got {tau}")
        object.__setattr__(self, "x_d", x_d)
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True)
class IonState:
    """Position relative to the undisplaced trap center, velocity, time."""

    x: float
    v: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "v", "t"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))

    def amplitude(self, omega: float, center: float = 0.0) -> float:
        """Oscillation amplitude about ``center`` for trap frequency ``omega``."""
        return math.hypot(self.x - center, self.v / omega)


def doppler_limit_temperature(laser: DetectionLaser) -> float:
    """Doppler cooling limit ``hbar Gamma / (2 k_B)`` in kelvin."""
    return HBAR * laser.linewidth / (2.0 * K_B)
