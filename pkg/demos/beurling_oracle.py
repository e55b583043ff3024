"""Spatial truncations of B^m against its Fourier multiplier.

On a smooth, mean-zero test function the truncated principal value sums
over growing annuli approach the multiplier (conj(xi)/xi)^m applied
with zero padding.  The relative L^2 error is printed for each outer radius.
"""
from sparselab.operators import beurling_truncation_study

if __name__ == "__main__":
    for m in (1, 2, 3):
        r = beurling_truncation_study(m)
        errs = "  ".join(f"R={d:.3f}: {e:.2e}" for d, e in zip(r["deltas"], r["errors"]))
        print(f"m={m}: {errs}  monotone={r['monotone']}")
