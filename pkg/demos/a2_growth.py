"""Weighted L^2 norms against the A_2 characteristic.

Computes the truncated Hilbert transform's norm on L^2(|x|^delta) for a
symmetric family of exponents.  The norm is the top singular value of the
weight-conjugated operator.  A log-log fit gives the growth exponent,
which stays below the linear bound.
"""
from sparselab.grid import Grid
from sparselab.normlab import a2_growth_experiment, truncated_cz_operator
from sparselab.operators import get_kernel
from sparselab.weights import power_weight

if __name__ == "__main__":
    g = Grid(1, 1024)
    T = truncated_cz_operator(get_kernel("smooth-dini:hilbert"), g)
    ws = [(d, power_weight(d, g)) for d in (0.0, -0.3, 0.3, -0.6, 0.6, -0.9, 0.9)]
    rep = a2_growth_experiment(T, ws)
    for row in rep.rows:
        print(f"delta {row['param']:+.1f}: [w]_A2 {row['a2']:7.3f}  norm {row['norm']:7.3f}")
    lo, hi = rep.fit["ci"]
    print(f"fitted exponent {rep.fit['exponent']:.2f} (95% CI {lo:.2f}..{hi:.2f})")
