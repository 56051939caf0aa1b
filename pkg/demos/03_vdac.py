"""Ramp the two-stage switched-capacitor DAC to 0.4 V, then let it droop."""
# %%
import numpy as np

from qpusim import analog
from qpusim.config import GlobalConfig

a = GlobalConfig().analog

# %%
res = analog.vdac_ramp(a.coarse, a.fine, a.sequencer, a.target_v)
print(f"coarse pairs {res.coarse_pairs}, fine pairs {res.fine_pairs}")
print(f"settled at {res.final_v * 1e3:.4f} mV after {res.settle_time_s * 1e6:.2f} us")

# %%
# The coarse approach is geometric: each pair closes a fixed fraction of the gap.
gap = a.coarse.vref_v - res.v_out_v[: res.coarse_pairs]
print("gap ratio per pair:", np.unique(np.round(gap[1:] / gap[:-1], 9)))
print(f"coarse step near target: {res.coarse.step_up_v() * 1e6:.0f} uV")

# %% [markdown]
# Once the switches open, junction leakage drains the hold capacitor.

# %%
lm = a.leakage()
for hold in (0, 100e-6, 300e-6, 600e-6):
    print(f"hold {hold * 1e6:5.0f} us -> {analog.apply_droop(res.final_v, hold, lm) * 1e3:8.3f} mV")
