"""Heat load on the 3 K stage and how it grows with the qubit count."""
# %%
from qpusim import thermal
from qpusim.config import GlobalConfig

sc = GlobalConfig().thermal

# %%
rep = thermal.scenario_load(sc)
for k, v in rep.items.items():
    print(f"{k:16s} {v * 1e3:8.3f} mW")
print(f"{'total':16s} {rep.total_w * 1e3:8.3f} mW  ({rep.budget_fraction:.2%} of budget)")

# %%
print(" x   wires  detectors  load (mW)   with on-chip ADC (mW)")
plain = thermal.scaling_study(sc, [1, 2, 5, 10])
adc = thermal.scaling_study(sc, [1, 2, 5, 10], on_chip_adc=True)
for (m, r), (_, r_adc) in zip(plain, adc):
    print(f"{m:2g}   {r.extra['flex_wires']:5d}  {r.extra['detectors']:9d}  {r.total_w * 1e3:9.2f}   {r_adc.total_w * 1e3:9.2f}")
