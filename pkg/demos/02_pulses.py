"""Sixteen clock phases from a Johnson ring, and pulses cut from pairs of them."""
# %%
from qpusim import pulsegen

F_CLK = 2e9
T = 1 / F_CLK

# %%
phases = pulsegen.generate_phases(F_CLK, 64 * T)
rises = [phases.edges_for(f"ph{i}")[0].time_s for i in range(16)]
print("first rising edges (ps):", [round(t * 1e12) for t in rises])

# %% [markdown]
# AND of two phases gives a narrow pulse, OR a wide one. Together they
# always cover exactly one half-period of the ring.

# %%
print(" sel2   AND (ns)   OR (ns)")
for sel2 in (0, 3, 7, 11, 15):
    w = {}
    for comb in ("AND", "OR"):
        tl = pulsegen.pulse_select(pulsegen.PulseSelectConfig(0, sel2, comb), phases)
        a, b = tl.pulses("leaf0")[0]
        w[comb] = (b - a) * 1e9
    print(f"{sel2:5d}   {w['AND']:8.2f}  {w['OR']:8.2f}")

# %%
# Long pulses come from the set/reset latch instead.
latched = pulsegen.mode_select(pulsegen.SRLatch(), phases, [(10e-9, "set"), (500e-6, "reset")])
(start, stop), = latched.pulses("pulse_out")
print(f"latched pulse width: {(stop - start) * 1e6:.2f} us")

# %%
jittered = pulsegen.apply_jitter(phases, pulsegen.JitterModel(1.5e-12, seed=0))
print(jittered.select("ph0").to_csv())
