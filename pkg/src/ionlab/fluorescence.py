"""Doppler-modulated fluorescence of an oscillating ion and MCS histograms."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import HBAR, TWO_PI, ConfigError, DetectionLaser


@dataclass
class McsHistogram:
    """Photon counts per time bin, accumulated over ``n_sequences`` runs.

    ``background_rate`` is the averaged background level in counts per bin;
    :meth:`net` subtracts it, so net counts can be negative.
    """

    bin_width: float
    counts: np.ndarray
    n_sequences: int = 1
    background_rate: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.bin_width > 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if self.n_sequences < 1:
            raise ValueError("n_sequences must be >= 1")

    def __len__(self):
        return self.counts.size

    def bin_starts(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(self.counts.size)

    def bin_edges(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(self.counts.size + 1)

    def bin_centers(self) -> np.ndarray:
        return self.bin_starts() + 0.5 * self.bin_width

    def net(self) -> np.ndarray:
        return self.counts - self.background_rate

    def __add__(self, other: "McsHistogram") -> "McsHistogram":
        if other.bin_width != self.bin_width or len(other) != len(self):
            raise ValueError("histograms must share the same bin grid")
        return McsHistogram(self.bin_width, self.counts + other.counts,
                            self.n_sequences + other.n_sequences,
                            self.background_rate + other.background_rate, self.t0)


@dataclass(frozen=True)
class OscillationModel:
    """Parameters of the fluorescence-dynamics model.

    ``v`` is the peak velocity of the coherent oscillation, ``scale`` the
    number of detected photons per unit scattering rate in one bin (it
    absorbs detection efficiency, number of sequences and bin width) and
    ``background`` a constant offset in counts per bin. Setting ``mass``
    switches on the Doppler-cooling decay of the amplitude (see
    :class:`CoolingEnvelope`); ``None`` keeps ``v`` constant.
    """

    v: float
    phi: float
    omega_a: float
    laser: DetectionLaser = field(default_factory=DetectionLaser)
    scale: float = 1.0
    background: float = 0.0
    mass: float | None = None

    def __post_init__(self):
        if self.v < 0:
            raise ConfigError(f"v must be >= 0, got {self.v}")
        if not 0.0 <= self.phi < TWO_PI:
            object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        if self.scale < 0:
            raise ConfigError(f"scale must be >= 0, got {self.scale}")
        if self.omega_a <= 0:
            raise ConfigError(f"omega_a must be > 0, got {self.omega_a}")


def _rate_of_velocity(v, laser: DetectionLaser):
    s = laser.saturation
    gamma = laser.linewidth
    detune = laser.detuning - laser.direction * laser.wavenumber * v
    return 0.5 * s * gamma / (1.0 + s + 4.0 * detune**2 / gamma**2)


class CoolingEnvelope:
    """Phase-averaged Doppler cooling of the oscillation amplitude.

    The oscillation energy ``E = m V^2 / 2`` obeys
    ``dE/dt = hbar k <R(v) v> + (4/3) E_rec <R(v)>``, the average taken over
    one period of ``v = V sin(theta)``; the second term is recoil heating
    with isotropic emission. The flow is tabulated once as the time needed
    to cool from a reference energy, so ``V(t; V0)`` is two interpolations.
    Amplitudes below the cooling/heating balance are held constant.
    """

    def __init__(self, laser: DetectionLaser, mass: float, v_max=None, n_grid=4000):
        k = laser.wavenumber
        if v_max is None:
            v_max = 8.0 * (abs(laser.detuning) + laser.linewidth) / k
        self.mass = mass
        theta = (np.arange(256) + 0.5) * TWO_PI / 256
        sin_t = np.sin(theta)
        e_rec = (HBAR * k) ** 2 / (2.0 * mass)

        def power(V):
            v = np.multiply.outer(V, sin_t)
            rate = _rate_of_velocity(v, laser)
            drag = laser.direction * HBAR * k * np.mean(rate * v, axis=-1)
            return drag + (4.0 / 3.0) * e_rec * np.mean(rate, axis=-1)

        V = np.geomspace(v_max, v_max * 1e-4, n_grid)
        P = power(V)
        cooling = P < 0
        # keep the contiguous cooling branch from the top down
        stop = np.argmin(cooling) if not cooling.all() else V.size
        V, P = V[:stop], P[:stop]
        E = 0.5 * mass * V**2
        if V.size < 2:
            self.E = self.tau = None
            return
        dtdE = -1.0 / P
        # E decreasing along the grid; elapsed time grows
        steps = 0.5 * (dtdE[1:] + dtdE[:-1]) * (E[:-1] - E[1:])
        self.E = E[::-1]
        self.tau = np.concatenate([[0.0], np.cumsum(steps)])[::-1]

    def __call__(self, v0, t):
        """Amplitude (peak velocity) at times ``t`` for initial ``v0``."""
        t = np.asarray(t, dtype=float)
        v0 = float(v0)
        sign = -1.0 if v0 < 0 else 1.0
        e0 = 0.5 * self.mass * v0 * v0
        if self.E is None or not self.E[0] < e0 < self.E[-1]:
            return np.full(t.shape, v0)
        tau0 = np.interp(e0, self.E, self.tau)
        e = np.interp(tau0 + np.maximum(t, 0.0), self.tau[::-1], self.E[::-1])
        return sign * np.sqrt(2.0 * e / self.mass)


@lru_cache(maxsize=32)
def cooling_envelope(laser: DetectionLaser, mass: float) -> CoolingEnvelope:
    return CoolingEnvelope(laser, mass)


def lorentzian_rate(t, v, phi, omega_a, laser: DetectionLaser, envelope=None):
    """Scattering rate of an ion whose velocity is ``v sin(omega_a t + phi)``.

    Vectorized over ``t``; ``v`` may be any real (negative values are the
    same curve shifted by half a period). With an ``envelope`` (a
    :class:`CoolingEnvelope`) the peak velocity decays from ``v`` at t = 0.
    """
    s = laser.saturation
    gamma = laser.linewidth
    t = np.asarray(t, dtype=float)
    amp = v if envelope is None else envelope(v, t)
    doppler = TWO_PI * amp * np.sin(omega_a * t + phi) / laser.wavelength
    detune = laser.detuning - doppler
    return 0.5 * s * gamma / (1.0 + s + 4.0 * detune**2 / gamma**2)


def _envelope_for(m):
    return cooling_envelope(m.laser, m.mass) if m.mass is not None else None


def model_rate(t, m: OscillationModel):
    return lorentzian_rate(t, m.v, m.phi, m.omega_a, m.laser, _envelope_for(m))


def oscillation_amplitude(m: OscillationModel) -> float:
    return m.v / m.omega_a


def _check_grid(edges):
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("bin grid must contain at least one bin")
    widths = np.diff(edges)
    if np.any(widths <= 0) or not np.allclose(widths, widths[0], rtol=1e-9, atol=0):
        raise ValueError("bin grid must be uniform and increasing")
    return edges


def bin_averaged_rate(edges, v, phi, omega_a, laser, n_sub=16, envelope=None):
    """Midpoint-rule average of the model rate over each bin."""
    edges = _check_grid(edges)
    if n_sub < 8:
        raise ValueError("n_sub must be >= 8")
    width = edges[1] - edges[0]
    offsets = (np.arange(n_sub) + 0.5) / n_sub * width
    t = edges[:-1, None] + offsets[None, :]
    return lorentzian_rate(t, v, phi, omega_a, laser, envelope).mean(axis=1)


def expected_bin_counts(m: OscillationModel, edges, n_sub=16) -> np.ndarray:
    """Predicted counts per bin: ``scale * <rate>_bin + background``.

    ``edges`` are the ``n + 1`` uniform bin edges in seconds.
    """
    rate = bin_averaged_rate(edges, m.v, m.phi, m.omega_a, m.laser, n_sub, _envelope_for(m))
    return m.scale * rate + m.background


def scale_for(efficiency: float, n_sequences: int, bin_width: float) -> float:
    """Detected photons per bin per unit scattering rate."""
    return efficiency * n_sequences * bin_width


def poisson_trace(m: OscillationModel, edges, rng, n_sequences=1) -> McsHistogram:
    """Draw a synthetic histogram with Poisson counts around the model."""
    edges = _check_grid(edges)
    mu = expected_bin_counts(m, edges)
    counts = rng.poisson(mu)
    return McsHistogram(edges[1] - edges[0], counts, n_sequences, background_rate=m.background,
                        t0=float(edges[0]))


def doppler_excursion(v: float, laser: DetectionLaser) -> float:
    """Peak Doppler shift ``2 pi v / lambda`` in rad/s."""
    return TWO_PI * v / laser.wavelength


def is_saturating(v: float, laser: DetectionLaser) -> bool:
    """True if the Doppler excursion sweeps through resonance (flat tops)."""
    return doppler_excursion(abs(v), laser) > abs(laser.detuning)
