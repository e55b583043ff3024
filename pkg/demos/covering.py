"""Covering balls by cubes of the shifted dyadic systems.

A single dyadic grid cannot hold a small ball centred on one of its
boundaries inside a cube of comparable size.  The 3^d systems shifted by
multiples of 1/3 always can.  This script covers a few balls, shows the
chosen cube and then runs the randomized check in exact arithmetic.
"""
from fractions import Fraction

from sparselab.dyadic import cover_ball, covering_trials


def show(center, radius):
    q = cover_ball(center, radius)
    lo, hi = q.bounds().as_float()
    print(f"ball c={center} r={radius}: shift {q.alpha}, level {q.level}, "
          f"cube [{lo[0]:.4f}, {hi[0]:.4f})" + ("" if len(center) == 1 else " x ..."))
    print(f"   side / r = {float(q.side) / float(radius):.2f} (always in (6, 12])")


if __name__ == "__main__":
    # centred on the dyadic point 1/2, where the unshifted grid fails
    show((Fraction(1, 2),), Fraction(1, 24))
    show((0.0,), 1.0)
    show((0.3, -0.7), 0.01)
    for d in (1, 2):
        r = covering_trials(d, 2000, seed=d)
        print(f"d={d}: {r['trials']} random balls, "
              f"{r['cover_failures'] + r['within_failures']} failures")
