import math

import pytest
from hypothesis import given, strategies as st

from ionlab.core import (ConfigError, DetectionLaser, DisplacementPulse, IonState, TrapConfig,
                         angular_to_mhz, doppler_limit_temperature, mhz_to_angular)

# CODATA 2018, typed in so the check does not share the package's constants
HBAR_CODATA = 1.054571817e-34
KB_CODATA = 1.380649e-23


def test_doppler_limit_matches_codata_evaluation():
    gamma = 2 * math.pi * 19.6e6
    expected = HBAR_CODATA * gamma / (2 * KB_CODATA)
    got = doppler_limit_temperature(DetectionLaser(linewidth=gamma))
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(4.7e-4, rel=0.01)


def test_doppler_limit_is_linear_in_linewidth():
    t1 = doppler_limit_temperature(DetectionLaser(linewidth=2 * math.pi * 19.6e6))
    t2 = doppler_limit_temperature(DetectionLaser(linewidth=2 * math.pi * 39.2e6))
    assert t2 == pytest.approx(2 * t1, rel=1e-14)
    assert doppler_limit_temperature(DetectionLaser(linewidth=1e-30)) < 1e-40


@given(st.floats(1e3, 1e9))
def test_period_times_frequency_is_two_pi(omega):
    trap = TrapConfig(omega)
    assert trap.period() * trap.omega_a == pytest.approx(2 * math.pi, rel=1e-15)


@given(st.floats(-1e4, 1e4))
def test_mhz_round_trip(f):
    assert angular_to_mhz(mhz_to_angular(f)) == pytest.approx(f, rel=1e-14, abs=1e-300)


def test_default_trap_period():
    assert TrapConfig.from_mhz(0.36).period() == pytest.approx(1 / 0.36e6, rel=1e-14)


@pytest.mark.parametrize("kwargs", [
    {"omega_a": 0.0}, {"omega_a": -1.0}, {"omega_a": float("nan")},
    {"omega_a": 1e6, "mass": 0.0}, {"omega_a": 1e6, "drift_fraction": -0.01},
    {"omega_a": 1e6, "drift_fraction": 0.2}, {"omega_a": float("inf")},
])
def test_trap_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        TrapConfig(**kwargs)


@pytest.mark.parametrize("kwargs", [
    {"wavelength": 0.0}, {"linewidth": -1.0}, {"saturation": -0.1},
    {"direction": 0}, {"detuning": float("nan")},
])
def test_laser_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        DetectionLaser(**kwargs)


def test_pulse_and_state_validation():
    with pytest.raises(ConfigError):
        DisplacementPulse(-1e-6, 1e-6)
    with pytest.raises(ConfigError):
        DisplacementPulse(1e-6, -1e-6)
    with pytest.raises(ConfigError):
        IonState(float("nan"), 0.0)


def test_laser_from_mhz_uses_angular_units():
    laser = DetectionLaser.from_mhz(detuning_mhz=-40.0, linewidth_mhz=19.6)
    assert laser.detuning == pytest.approx(-2 * math.pi * 40e6)
    assert laser.linewidth == pytest.approx(2 * math.pi * 19.6e6)
    assert laser.max_rate() == pytest.approx(0.5 * laser.linewidth * 15 / 16)


def test_state_amplitude():
    s = IonState(3e-6, 4e-6 * 2.0)
    assert s.amplitude(2.0) == pytest.approx(5e-6)
