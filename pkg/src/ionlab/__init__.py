"""Simulation and analysis of a single trapped ion driven into large oscillation.

A fast square displacement of the axial trap center leaves the ion
oscillating with an amplitude set by the pulse duration. This package
simulates that protocol with a Monte Carlo laser-cooling model, turns the
result into photon-count fluorescence traces, fits the traces back to an
oscillation amplitude and a trap displacement, and evaluates the
rotation sensitivity such an oscillator would give a Sagnac gyroscope.
"""

__version__ = "0.1.0"

from .core import (DetectionLaser, DisplacementPulse, IonState, TrapConfig,  # noqa: E402
                   doppler_limit_temperature)
from .dynamics import (SequenceTimeline, evolve_dark, run_accumulation,  # noqa: E402
                       run_sequence, run_states, sample_thermal, scattering_rate, step_detect)
from .config import RunConfig, load_config, save_config  # noqa: E402
from .fitting import (FitResult, SweepPoint, fit_pulse_sweep, fit_sqrt_voltage,  # noqa: E402
                      fit_trace, levenberg_marquardt)
from .fluorescence import (McsHistogram, OscillationModel, expected_bin_counts,  # noqa: E402
                           model_rate, oscillation_amplitude)
from .sensitivity import GyroParams, averaged_sensitivity, gyro_sensitivity  # noqa: E402
