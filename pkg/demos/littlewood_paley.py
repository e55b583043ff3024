"""Frequency pieces of the Beurling kernel.

The annulus multipliers collapse to one profile under dilation, which is
why a single envelope describes every scale.  Regrouping the annuli with
the schedule N(j) = 2^j gives pieces whose L^2 norms decay geometrically
in N(j-1).  The script prints the collapse error, the envelope exponents
and the piece norms with their fitted decay.
"""
from sparselab.grid import Grid
from sparselab.lpdecomp import (
    get_schedule,
    multiplier_envelope,
    piece_decay_fit,
    scale_invariance_error,
)
from sparselab.operators import get_kernel

if __name__ == "__main__":
    k = get_kernel("beurling:1")
    g = Grid(2, 256, 256.0)
    print(f"dilation collapse error: {scale_invariance_error(k, g):.1e}")
    env = multiplier_envelope(k, g)
    print(f"envelope exponents: low {env['alpha_low']:.2f}, high {env['alpha_high']:.2f}, "
          f"violations {env['violations']:.2%}")
    fit = piece_decay_fit(k, get_schedule("dyadic"), g, J=5)
    for j, nrm in enumerate(fit["norms"]):
        print(f"  piece {j}: norm {nrm:.3e}")
    print(f"log2 norm vs N(j-1): slope {fit['slope']:.3f}, R^2 {fit['r2']:.5f}")
