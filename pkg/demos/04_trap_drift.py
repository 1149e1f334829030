"""Why long pulses need a stable trap.

At tau/T near 378 a 0.3 % drift of the trap frequency across the run
shifts the pulse phase by more than a full period between the first and
last sequences, so the dip at integer tau/T washes out.
"""

# %%
import numpy as np
from dataclasses import replace

from _common import n_seq, plt, save
from ionlab import RunConfig
from ionlab.pipelines import sweep_tau

cfg = RunConfig()
grid = np.round(np.arange(377.5, 378.51, 0.1), 10)
curves = {}
for drift in (0.0, 0.003):
    run = replace(cfg, trap=replace(cfg.trap, drift_fraction=drift))
    rows = sweep_tau(run, grid, master_seed=5, n_sequences=n_seq(2000), x_d=4.7e-6)
    curves[drift] = np.array([row[1] for row in rows])
    x = curves[drift]
    print(f"drift {drift:.3f}: dip depth {np.nanmax(x) * 1e6 - np.nanmin(x) * 1e6:.2f} um")

phase_spread = 2 * np.pi * 378 * 0.003
print(f"phase spread across the run at 0.3 % drift: {phase_spread:.1f} rad")

# %%
fig, ax = plt.subplots(figsize=(6, 3.5))
for drift, x in curves.items():
    ax.plot(grid, x * 1e6, "o-", label=f"drift {drift:.1%}")
ax.set(xlabel="tau / T", ylabel="amplitude (um)")
ax.legend()
save(fig, "trap_drift.png")
