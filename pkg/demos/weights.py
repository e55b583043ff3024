"""Muckenhoupt characteristics of the power weights |x|^delta.

The dyadic supremum is cheap: one prefix-sum pass per level and shift.
The brute-force supremum over all grid intervals costs O(n^2).  The two
differ for strong weights because a dyadic cube only places the
singularity at three relative positions.  The gap is printed next to the
mixed A_p-A_inf characteristics.
"""
from sparselab.grid import Grid
from sparselab.weights import brute_force_ap_1d, characteristics, power_weight

if __name__ == "__main__":
    g = Grid(1, 2048, 2.0)
    print(f"{'delta':>6} {'[w]A2':>8} {'oracle':>8} {'gap':>6} {'[w]Ainf':>8} "
          f"{'{w}':>7} {'(w)':>7}")
    for delta in (-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75):
        w = power_weight(delta, g)
        ch = characteristics(w, 2.0)
        oracle = brute_force_ap_1d(w, 2.0)
        print(f"{delta:>6} {ch.ap:8.4f} {oracle:8.4f} {1 - ch.ap / oracle:6.1%} "
              f"{ch.ainf:8.4f} {ch.braces:7.4f} {ch.parens:7.4f}")
