"""Monte-Carlo single-electron tunnelling: histograms, probabilities, correlations."""
# %%
import numpy as np

from qpusim import qexp
from qpusim.config import GlobalConfig

cfg = GlobalConfig()
m = cfg.tunneling_model()

# %%
res = qexp.run_trials(m, 78e-3, 10_000, seed=cfg.seed)
h = qexp.histogram(res)
for c, n in zip(h.centers_v, h.counts):
    if n:
        print(f"{c * 1e3:7.0f} mV  {'#' * max(1, n // 100)} {n}")
print("peaks:", h.peak0_v, h.peak1_v)

# %%
p0, p1, dropped = qexp.extract_probabilities(res)
print(f"P0 = {p0:.4f}  P1 = {p1:.4f}  discarded = {dropped}")

# %% [markdown]
# Sweeping the injector step walks P1 from nearly zero up to 95%.

# %%
for row in qexp.probability_sweep(m, np.linspace(33e-3, 78e-3, 10), 10_000, cfg.seed):
    print(f"{row['step_v'] * 1e3:5.1f} mV  P1 {row['p1']:.4f}  P0 {row['p0']:.4f}")

# %%
acf = qexp.autocorrelation(res.states == qexp.STATE_1, 10)
print("ACF of the |1> indicator:", np.round(acf, 3))

# %%
_, de = qexp.charging_energy(35e-18)
print(f"charging energy {de * 1e3:.2f} meV = {qexp.thermal_ratio(de, 3.0):.1f} kT at 3 K")
