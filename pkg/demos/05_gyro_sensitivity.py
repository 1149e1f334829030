"""Rotation sensitivity of a large ion oscillator used as a Sagnac gyroscope.

The enclosed area grows with the oscillator size x_d and the momentum
splitting N_k hbar k, so S = 1 / (2 N_k k x_d sqrt(dt)).
"""

# %%
import numpy as np

from ionlab.sensitivity import GyroParams, gyro_sensitivity, to_deg_per_sqrt_hour

base = GyroParams(n_kicks=100, x_d=16.9e-6, interference_time=1e-3)
print(f"single shot: {to_deg_per_sqrt_hour(gyro_sensitivity(base)):.2f} deg/sqrt(h)")
many = GyroParams(100, base.kick_wavenumber, base.x_d, base.interference_time, 30000)
print(f"30000 repetitions: {to_deg_per_sqrt_hour(gyro_sensitivity(many)):.4f} deg/sqrt(h)")

# %% how the figure of merit scales with oscillator size
for x_d in np.array([5, 10, 16.9, 50, 100]) * 1e-6:
    s = to_deg_per_sqrt_hour(gyro_sensitivity(GyroParams(100, x_d=x_d)))
    print(f"x_d = {x_d * 1e6:6.1f} um -> {s:.3f} deg/sqrt(h)")
