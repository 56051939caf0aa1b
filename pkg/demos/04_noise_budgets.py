"""Integrated output noise of the injector and of the detector chain."""
# %%
import numpy as np

from qpusim import noise
from qpusim.config import GlobalConfig

cfg = GlobalConfig().noise

# %%
for label, budget in (
    ("injector", noise.injector_noise_budget(cfg.injector)),
    ("detector", noise.detector_noise_budget(cfg.detector)),
):
    print(label)
    for row in budget.rows:
        print(f"  {row.source:16s} {row.rms_v:.3e} V rms")
    print(f"  {'total':16s} {budget.total_rms_v:.3e} V rms")

# %% [markdown]
# The CDS response vanishes at DC and at every multiple of 1/lambda. The
# closed form agrees with a brute-force sum over sampling images.

# %%
t = noise.CdsTiming()
f = np.geomspace(1e3, 1e8, 9)
for fi, a, b in zip(f, noise.h_cds(f, t), noise.h_cds_alias_sum(f, t)):
    print(f"{fi:10.3g} Hz  closed {a:10.4g}  alias sum {b:10.4g}")
