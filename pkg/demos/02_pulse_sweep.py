"""Scan the pulse length over three trap periods and recover the displacement.

Holding the displaced trap for a whole number of periods returns the ion to
rest, half-integer holds leave twice the displacement. Fitting the measured
amplitudes against x_d sqrt(2 (1 - cos 2 pi tau/T)) recovers x_d.
"""

# %%
import numpy as np

from _common import n_seq, plt, save
from ionlab import RunConfig
from ionlab.fitting import sweep_model
from ionlab.pipelines import figure_sweep

cfg = RunConfig()
rows, fit = figure_sweep(cfg, x_d=4.7e-6, master_seed=0, n_sequences=n_seq(2000))
print(f"x_d = {fit['x_d'] * 1e6:.3f} +- {fit.error('x_d') * 1e6:.3f} um (true 4.7)")
for r, x, s, status in rows[::5]:
    print(f"tau/T = {r:.1f}: {x * 1e6:6.2f} +- {s * 1e6:.2f} um  {status}")

# %%
r = np.array([row[0] for row in rows])
x = np.array([row[1] for row in rows])
s = np.array([row[2] for row in rows])
fine = np.linspace(0, 3, 600)
fig, ax = plt.subplots(figsize=(7, 3.5))
ax.errorbar(r, x * 1e6, s * 1e6, fmt="o", ms=3, label="fitted amplitudes")
ax.plot(fine, sweep_model(fine, fit["x_d"]) * 1e6, label="closed form")
ax.set(xlabel="tau / T", ylabel="amplitude (um)")
ax.legend()
save(fig, "pulse_sweep.png")
