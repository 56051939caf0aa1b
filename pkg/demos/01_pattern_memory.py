"""Pattern memory: assemble the bundled control scripts and look at the words.

Run from the repository root:  python3 demos/01_pattern_memory.py
"""
# %%
from qpusim import patgen

# %% [markdown]
# Each script line becomes one 64-bit vector. A script's memory cost is
# just 64 bits times its vector count, so loops are cheap.

# %%
for name in ("script1", "script2", "script3", "script4"):
    prog = patgen.parse_script(patgen.bundled_script(name))
    img = patgen.assemble(prog)
    ticks = patgen.total_ticks(prog)
    print(f"{name}: {img.used_vectors:3d} vectors  {img.utilization_bits:5d} bits  {ticks:6d} ticks")

# %%
# The compact script, word by word.
prog = patgen.parse_script(patgen.bundled_script("script3"))
img = patgen.assemble(prog)
for i, w in enumerate(img.words[: img.used_vectors]):
    print(f"{i:3d}  {int(w):016x}  {patgen.decode_word(int(w), prog.node_table).kind.name}")

# %%
# Decoding the image gives back the same program.
assert patgen.decode(img) == prog
print("round trip ok")
