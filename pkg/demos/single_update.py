"""Append half the rows of a term-document-like matrix and compare the four updaters.

Run: python3 demos/single_update.py
"""
import warnings

from rrsvd.harness import SequenceConfig, run_single_update
from rrsvd.synthetic import term_document_like

warnings.simplefilter("ignore")

A = term_document_like(400, 150, density=0.06, seed=3)
print(f"matrix {A.shape[0]}x{A.shape[1]}, nnz={A.nnz}; the base is the first {(A.nrows + 1) // 2} rows")
print(f"{'method':<12} {'max rel err':>12} {'max residual':>13} {'lanczos':>8} {'flops':>12}")
for method in ("zha-simon", "vecharynski", "rrsvd-a", "rrsvd-b"):
    rep = run_single_update(A, SequenceConfig(k=10, method=method, r=10))
    print(f"{method:<12} {rep.max_rel_err():>12.2e} {rep.max_residual():>13.2e} "
          f"{rep.lanczos_steps:>8d} {rep.flops['total']:>12,d}")

# rrsvd-a and zha-simon share one subspace, so their numbers agree; the X block
# of rrsvd-b buys accuracy at the price of the CG solves in its build_z phase.
print("\nenhanced basis as r grows:")
for r in (2, 5, 10, 20):
    rep = run_single_update(A, SequenceConfig(k=10, method="rrsvd-b", r=r))
    print(f"  r={r:<3d} max rel err {rep.max_rel_err():.2e}")
