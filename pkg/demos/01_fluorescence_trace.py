"""Displace the trap for 0.9 us, then watch the ion fluoresce while it cools.

A 4.7 um shift of the trap center held for 0.9 us leaves the ion swinging
with about 8 um amplitude. Under the red-detuned detection beam the Doppler
shift sweeps the ion through resonance twice per period, which flattens the
tops of the fluorescence signal, and the same beam damps the motion within
about half a millisecond.
"""

# %%
import numpy as np
from dataclasses import replace

from _common import n_seq, plt, save
from ionlab import RunConfig, fit_trace
from ionlab.dynamics import return_amplitude
from ionlab.fluorescence import OscillationModel, expected_bin_counts
from ionlab.pipelines import simulate_trace

cfg = RunConfig()
trap, laser = cfg.trap, cfg.laser
T = trap.period()
amp, _ = return_amplitude(cfg.timeline.pulse, trap)
print(f"trap period {T * 1e6:.3f} us, amplitude after the pulse {amp * 1e6:.2f} um")

# %% Monte Carlo accumulation (16715 sequences, 1 ms of detection)
cfg = replace(cfg, n_sequences=n_seq(16715),
              timeline=replace(cfg.timeline, detect_duration=1e-3))
hist = simulate_trace(cfg, master_seed=1)
print(f"{hist.counts.sum()} photons in {len(hist)} bins")

# %% fit the first five periods
res, x_a = fit_trace(hist, trap, laser)
print(f"fitted amplitude {x_a * 1e6:.2f} +- {res.extras['sigma_x_a'] * 1e6:.2f} um "
      f"(chi2/dof {res.chi2_red:.2f})")

edges = hist.bin_edges()[:int(6 * T / hist.bin_width) + 1]
model = OscillationModel(res["v"], res["phi"], trap.omega_a, laser, res["scale"],
                         res["background"], mass=trap.mass)
pred = expected_bin_counts(model, edges)

# %% plot the decay and the early flat-topped oscillation
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6))
ax1.plot(hist.bin_starts() * 1e3, hist.counts, lw=0.3)
ax1.set(xlabel="detection time (ms)", ylabel="counts / 100 ns")
ax2.step(edges[:-1] * 1e6, hist.counts[:pred.size], where="post", label="Monte Carlo")
ax2.plot(0.5 * (edges[1:] + edges[:-1]) * 1e6, pred, label="model fit")
ax2.set(xlabel="detection time (us)", ylabel="counts / 100 ns")
ax2.legend()
save(fig, "fluorescence_trace.png")

# %% the same beam cools the ion: modulation versus time
for t in (0.0, 0.25e-3, 0.5e-3, 0.75e-3):
    i = int(t / hist.bin_width)
    seg = hist.counts[i:i + int(5 * T / hist.bin_width)]
    print(f"t = {t * 1e3:.2f} ms: excess std {np.sqrt(max(seg.var() - seg.mean(), 0)):.1f} counts")
