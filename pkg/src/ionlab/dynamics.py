"""Monte Carlo dynamics of a single ion in a displaceable harmonic trap.

The light-off phases (displacement and return) are evolved in closed form.
During detection the motion is integrated with fixed-step RK4 and, after
each step, the ion scatters a photon with probability ``R(v) dt``. A
scatter kicks the ion by one recoil along the beam plus an emission
recoil ``u hbar k / m`` with ``u`` uniform on [-1, 1] (isotropic emission
projected on the axis). Each scatter is detected with probability
``detection_efficiency``.

The per-step functions below (:func:`step_detect`, :func:`evolve_dark`,
:func:`sample_thermal`) are the readable reference path. Bulk simulation
goes through the compiled kernel :func:`_run_one`, which implements the
same rules with the RK4 step written as its exact 2x2 propagation matrix.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng as _rng
from .core import (HBAR, K_B, ConfigError, DetectionLaser, DisplacementPulse, IonState,
                   TrapConfig, doppler_limit_temperature)
from .fluorescence import McsHistogram

DEFAULT_DT = 1e-9
DEFAULT_BIN_WIDTH = 100e-9
DEFAULT_EFFICIENCY = 0.01


class StepSizeError(ConfigError):
    """Integrator step too coarse for the trap period or scattering rate."""


def max_step(trap: TrapConfig, laser: DetectionLaser) -> float:
    """Largest admissible ``dt``: ``min(T / 100, 1 / (10 R_max))``."""
    bound = trap.period() / 100.0
    r_max = laser.max_rate()
    if r_max > 0:
        bound = min(bound, 1.0 / (10.0 * r_max))
    return bound


def check_step(dt: float, trap: TrapConfig, laser: DetectionLaser):
    if not dt > 0:
        raise StepSizeError(f"dt must be > 0, got {dt}")
    # the drifted trap frequency is at most 10% higher
    fastest = trap.with_omega(trap.omega_a * (1.0 + trap.drift_fraction))
    bound = max_step(fastest, laser)
    if dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3e} s exceeds the admissible step {bound:.3e} s")


@dataclass(frozen=True)
class SequenceTimeline:
    """Timing of one cool / displace / return / detect sequence.

    ``init_temperature`` of ``None`` means the Doppler limit of the
    detection transition.
    """

    pulse: DisplacementPulse
    detect_duration: float = 4e-3
    dt: float = DEFAULT_DT
    detection_efficiency: float = DEFAULT_EFFICIENCY
    init_temperature: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.detect_duration) and self.detect_duration > 0):
            raise ConfigError(f"detect_duration must be > 0, got {self.detect_duration}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not 0.0 <= self.detection_efficiency <= 1.0:
            raise ConfigError("detection_efficiency must lie in [0, 1]")
        if self.init_temperature is not None and not self.init_temperature >= 0:
            raise ConfigError("init_temperature must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.detect_duration / self.dt))

    def temperature(self, laser: DetectionLaser) -> float:
        if self.init_temperature is None:
            return doppler_limit_temperature(laser)
        return self.init_temperature

    def validate(self, trap: TrapConfig, laser: DetectionLaser):
        check_step(self.dt, trap, laser)


# ---------------------------------------------------------------- reference path


def scattering_rate(v, laser: DetectionLaser):
    """Photon scattering rate for an ion moving at velocity ``v``."""
    s = laser.saturation
    gamma = laser.linewidth
    detune = laser.detuning - laser.direction * laser.wavenumber * np.asarray(v, dtype=float)
    return 0.5 * s * gamma / (1.0 + s + 4.0 * detune**2 / gamma**2)


def evolve_dark(state: IonState, center: float, duration: float, trap: TrapConfig) -> IonState:
    """Exact harmonic evolution about ``center`` with no light."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    w = trap.omega_a
    theta = w * duration
    c, s = math.cos(theta), math.sin(theta)
    dx = state.x - center
    x = center + dx * c + state.v / w * s
    v = -dx * w * s + state.v * c
    return IonState(x, v, state.t + duration)


def rk4_step(x, v, center, omega, dt):
    """One classical RK4 step of ``x'' = -omega^2 (x - center)``."""

    def f(x_, v_):
        return v_, -omega * omega * (x_ - center)

    k1x, k1v = f(x, v)
    k2x, k2v = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = f(x + dt * k3x, v + dt * k3v)
    x_new = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x_new, v_new


def recoil_velocity(trap: TrapConfig, laser: DetectionLaser) -> float:
    return HBAR * laser.wavenumber / trap.mass


def step_detect(state: IonState, center: float, dt: float, trap: TrapConfig,
                laser: DetectionLaser, efficiency: float, rng: np.random.Generator):
    """Advance one detection step; return ``(new_state, detected)``."""
    check_step(dt, trap, laser)
    x, v = rk4_step(state.x, state.v, center, trap.omega_a, dt)
    detected = False
    p = float(scattering_rate(v, laser)) * dt
    if rng.random() < p:
        u = 2.0 * rng.random() - 1.0
        v += (laser.direction + u) * recoil_velocity(trap, laser)
        detected = rng.random() < efficiency
    return IonState(x, v, state.t + dt), detected


def sample_thermal(trap: TrapConfig, temperature: float, rng: np.random.Generator) -> IonState:
    """Thermal position and velocity at the undisplaced trap center."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    sigma_v = math.sqrt(K_B * temperature / trap.mass)
    sigma_x = sigma_v / trap.omega_a
    if sigma_v == 0.0:
        return IonState(0.0, 0.0, 0.0)
    return IonState(rng.normal(0.0, sigma_x), rng.normal(0.0, sigma_v), 0.0)


def return_amplitude(pulse: DisplacementPulse, trap: TrapConfig, state: IonState | None = None):
    """Oscillation amplitude right after the trap center returns to 0."""
    state = IonState(0.0, 0.0) if state is None else state
    after = evolve_dark(state, pulse.x_d, pulse.tau, trap)
    return after.amplitude(trap.omega_a), after


# ---------------------------------------------------------------- compiled kernel


@njit(cache=True)
def rk4_matrix(omega, dt):
    """RK4 step of the harmonic oscillator as ``(m11, m12, m21)``.

    For ``y = (x - c, v)`` one RK4 step is ``[[m11, m12], [m21, m11]] @ y``.
    """
    q = omega * dt
    m11 = 1.0 - q * q / 2.0 + q * q * q * q / 24.0
    m12 = dt * (1.0 - q * q / 6.0)
    m21 = -omega * omega * dt * (1.0 - q * q / 6.0)
    return m11, m12, m21


@njit(cache=True, nogil=True)
def _run_one(key, omega, sigma_v, x_d, tau, dt, n_steps, rate_a, rate_b, rate_c,
             delta, dk, recoil, direction, efficiency, bin_width, counts, times, final):
    """Simulate one sequence; bin detections into ``counts`` and/or ``times``.

    Returns the number of detected photons. ``counts`` and ``times`` may be
    empty arrays to skip either output; a length-4 ``final`` receives
    position and velocity at detection start and end.
    """
    state = key
    # (i) thermal state at the undisplaced center
    state, g1, g2 = _rng.normal_pair(state)
    v = sigma_v * g2
    x = sigma_v / omega * g1
    # (ii) dark evolution about the displaced center
    th = omega * tau
    c = np.cos(th)
    s = np.sin(th)
    dx = x - x_d
    x = x_d + dx * c + v / omega * s
    v = -dx * omega * s + v * c
    if final.size == 4:
        final[0] = x
        final[1] = v
    # (iv) detection about the original center
    m11, m12, m21 = rk4_matrix(omega, dt)
    nbins = counts.size
    record = times.size > 0
    n_det = 0
    for i in range(n_steps):
        x, v = m11 * x + m12 * v, m21 * x + m11 * v
        d = delta - dk * v
        state, u = _rng.uniform(state)
        # u < R dt without the division
        if u * (rate_b + rate_c * d * d) < rate_a * dt:
            state, u = _rng.uniform(state)
            v += (direction + (2.0 * u - 1.0)) * recoil
            state, u = _rng.uniform(state)
            if u < efficiency:
                t = (i + 1) * dt
                if nbins > 0:
                    b = int(t / bin_width)
                    if b >= nbins:
                        b = nbins - 1
                    counts[b] += 1
                if record:
                    times[n_det] = t
                n_det += 1
    if final.size == 4:
        final[2] = x
        final[3] = v
    return n_det


@njit(cache=True, nogil=True)
def _run_block(keys, omegas, sigma_v, x_d, tau, dt, n_steps, rate_a, rate_b, rate_c,
               delta, dk, recoil, direction, efficiency, bin_width, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    none = np.empty(0)
    for j in range(keys.size):
        _run_one(keys[j], omegas[j], sigma_v, x_d, tau, dt, n_steps, rate_a, rate_b,
                 rate_c, delta, dk, recoil, direction, efficiency, bin_width, counts,
                 none, none)
    return counts


@njit(cache=True, nogil=True)
def _states_block(keys, omegas, sigma_v, x_d, tau, dt, n_steps, rate_a, rate_b, rate_c,
                  delta, dk, recoil, direction, efficiency):
    out = np.empty((keys.size, 4))
    none_i = np.zeros(0, dtype=np.int64)
    none = np.empty(0)
    for j in range(keys.size):
        _run_one(keys[j], omegas[j], sigma_v, x_d, tau, dt, n_steps, rate_a, rate_b,
                 rate_c, delta, dk, recoil, direction, efficiency, 1.0, none_i, none,
                 out[j])
    return out


def _kernel_args(timeline: SequenceTimeline, trap: TrapConfig, laser: DetectionLaser):
    s = laser.saturation
    gamma = laser.linewidth
    sigma_v = math.sqrt(K_B * timeline.temperature(laser) / trap.mass)
    return dict(
        sigma_v=sigma_v, x_d=timeline.pulse.x_d, tau=timeline.pulse.tau, dt=timeline.dt,
        n_steps=timeline.n_steps, rate_a=0.5 * s * gamma, rate_b=1.0 + s,
        rate_c=4.0 / gamma**2, delta=laser.detuning,
        dk=laser.direction * laser.wavenumber, recoil=recoil_velocity(trap, laser),
        direction=float(laser.direction), efficiency=timeline.detection_efficiency,
    )


def _as_key(seed) -> np.uint64:
    if isinstance(seed, np.random.SeedSequence):
        return seed.generate_state(1, dtype=np.uint64)[0]
    return _rng.sequence_key(int(seed), 0)


def run_sequence(timeline: SequenceTimeline, trap: TrapConfig, laser: DetectionLaser,
                 seed=0) -> np.ndarray:
    """Run one sequence and return the detected-photon timestamps (s).

    ``seed`` is an int (stream ``(seed, 0)``) or a SeedSequence. The
    stream is the one :func:`run_accumulation` uses for the same key.
    """
    timeline.validate(trap, laser)
    args = _kernel_args(timeline, trap, laser)
    times = np.empty(timeline.n_steps + 1)
    n = _run_one(_as_key(seed), trap.omega_a, counts=np.zeros(0, dtype=np.int64),
                 times=times, final=np.empty(0), bin_width=1.0, **args)
    return times[:n].copy()


def bin_events(events, bin_width: float, detect_duration: float) -> np.ndarray:
    """Histogram photon timestamps on ``[0, detect_duration]``."""
    nbins = n_bins(bin_width, detect_duration)
    idx = np.minimum((np.asarray(events) / bin_width).astype(np.int64), nbins - 1)
    return np.bincount(idx, minlength=nbins).astype(np.int64)


def n_bins(bin_width: float, detect_duration: float) -> int:
    return max(1, int(math.ceil(detect_duration / bin_width - 1e-9)))


def sequence_omegas(trap: TrapConfig, n_sequences: int) -> np.ndarray:
    """Per-sequence trap frequency under the linear drift model."""
    j = np.arange(n_sequences, dtype=float)
    return trap.omega_a * (1.0 + trap.drift_fraction * j / n_sequences)


def default_threads() -> int:
    env = os.environ.get("IONLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_accumulation(timeline: SequenceTimeline, trap: TrapConfig, laser: DetectionLaser,
                     n_sequences: int, bin_width: float = DEFAULT_BIN_WIDTH,
                     master_seed: int = 0, threads: int | None = None,
                     background_per_bin: float = 0.0) -> McsHistogram:
    """Accumulate ``n_sequences`` independent sequences into an MCS histogram.

    Sequence ``j`` draws from the stream keyed by ``(master_seed, j)`` and
    sees trap frequency ``omega_a (1 + drift_fraction j / n_sequences)``.
    ``background_per_bin`` adds Poisson stray-light counts, in counts per
    bin per sequence, from a separate stream. The result does not depend
    on ``threads``.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    if not bin_width > 0 or bin_width >= timeline.detect_duration:
        raise ValueError("bin_width must be positive and shorter than detect_duration")
    timeline.validate(trap, laser)
    nbins = n_bins(bin_width, timeline.detect_duration)
    args = _kernel_args(timeline, trap, laser)
    omegas = sequence_omegas(trap, n_sequences)
    keys = _rng.sequence_keys(master_seed, 0, n_sequences)

    threads = default_threads() if threads is None else max(1, int(threads))
    chunk = 256
    bounds = [(a, min(a + chunk, n_sequences)) for a in range(0, n_sequences, chunk)]

    def work(b):
        a, z = b
        return _run_block(keys[a:z], omegas[a:z], bin_width=bin_width, nbins=nbins, **args)

    if threads == 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    counts = np.zeros(nbins, dtype=np.int64)
    for part in parts:
        counts += part

    background = 0.0
    if background_per_bin > 0:
        bg_seq = np.random.SeedSequence(int(master_seed), spawn_key=(_rng.BACKGROUND_STREAM,))
        background = background_per_bin * n_sequences
        counts += np.random.default_rng(bg_seq).poisson(background, size=nbins)
    return McsHistogram(bin_width, counts, n_sequences, background_rate=background)


def run_states(timeline: SequenceTimeline, trap: TrapConfig, laser: DetectionLaser,
               n_sequences: int, master_seed: int = 0) -> np.ndarray:
    """Ion state of every sequence at detection start and end.

    Returns an ``(n_sequences, 4)`` array of ``x0, v0, x1, v1`` drawn from
    the same streams as :func:`run_accumulation`.
    """
    timeline.validate(trap, laser)
    keys = _rng.sequence_keys(master_seed, 0, n_sequences)
    return _states_block(keys, sequence_omegas(trap, n_sequences),
                         **_kernel_args(timeline, trap, laser))


def ensemble_amplitude(states: np.ndarray, omega: float) -> tuple:
    """Mean oscillation amplitude at detection start and end."""
    a0 = np.hypot(states[:, 0], states[:, 1] / omega)
    a1 = np.hypot(states[:, 2], states[:, 3] / omega)
    return float(a0.mean()), float(a1.mean())
