"""Calibrate displacement against pulse voltage with a square-root law.

Each voltage is run at tau = T/2, where the amplitude is twice the
displacement; the half-amplitudes are then fitted with a sqrt(V - V0).
The synthetic electrode maps 0.6 V to 10.5 um.
"""

# %%
import numpy as np

from _common import n_seq, plt, save
from ionlab import RunConfig
from ionlab.fitting import fit_sqrt_voltage, sqrt_voltage_model
from ionlab.pipelines import voltage_calibration

volts = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
rows, fit = voltage_calibration(RunConfig(), volts, master_seed=0, n_sequences=n_seq(2000))
for V, x, s, status in rows:
    print(f"{V:.1f} V -> x_d = {x * 1e6:.2f} +- {s * 1e6:.2f} um  {status}")
print(f"a = {fit['a'] * 1e6:.2f} +- {fit.error('a') * 1e6:.2f} um/sqrt(V)")

free = fit_sqrt_voltage([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                        free_offset=True)
print(f"with free offset: a = {free['a'] * 1e6:.2f} um/sqrt(V), V0 = {free['V0'] * 1e3:.1f} mV")

# %%
grid = np.linspace(0, 0.65, 200)
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.errorbar(volts, [r[1] * 1e6 for r in rows], [r[2] * 1e6 for r in rows], fmt="o")
ax.plot(grid, sqrt_voltage_model(grid, fit["a"]) * 1e6)
ax.set(xlabel="pulse voltage (V)", ylabel="x_d (um)")
save(fig, "voltage_calibration.png")
