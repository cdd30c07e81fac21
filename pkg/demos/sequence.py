"""Feed new rows in twelve batches and watch how the error evolves per update.

Run: python3 demos/sequence.py
"""
import warnings

from rrsvd.harness import SequenceConfig, run_sequence
from rrsvd.synthetic import decaying_spectrum

warnings.simplefilter("ignore")

A = decaying_spectrum(240, 60, rate=0.9, seed=1)
runs = {m: run_sequence(A, SequenceConfig(phi=12, k=6, method=m))
        for m in ("rrsvd-a", "rrsvd-b", "zha-simon")}

print("max relative singular-value error after each update")
print("update " + "".join(f"{m:>12}" for m in runs))
for j in range(12):
    print(f"{j + 1:>6} " + "".join(f"{runs[m][j].max_rel_err():>12.2e}" for m in runs))
