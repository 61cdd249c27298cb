"""Confirmation-time distribution of a transaction sitting y blocks deep.

Prints the saw-tooth density on a coarse grid, the exact mean next to its
inverse-Gaussian counterpart, and the tail of the number of blocks needed.
Run: python3 demos/analytics_tour.py
"""
import numpy as np

import lundfee as lf


def main():
    p = lf.ClParams(0.0, 0.4)
    print("density of T_0 at c=0.4 (zeros sit at k/c = 2.5, 5.0, ...)")
    for t in np.arange(0.5, 6.01, 0.5):
        f = float(lf.pdf(t, p))
        print(f"  t={t:4.1f}  f={f:.5f}  {'#' * int(200 * f)}")

    print("\nexact mean vs IG mean, c=0.6")
    print("     y   E[T_y]   IG mean   E[S_y]")
    for y in (0.5, 1.0, 2.5, 5.0, 10.0):
        q = lf.ClParams(y, 0.6)
        print(f"  {y:4.1f}  {lf.mean_time(q):7.4f}  {lf.ig_params(q).mean:8.4f}  {lf.expected_undershoot(y, 0.6):7.4f}")

    q = lf.ClParams(1.5, 0.5)
    tails = lf.tail_blocks_all(q, 8)
    print("\nP[N > n] for y=1.5, c=0.5 (at least two blocks are always needed)")
    for n, v in enumerate(tails[:8], start=1):
        print(f"  n={n}  {v:.6f}")
    print(f"  sum of tails = {lf.expected_blocks_from_tail(q):.6f}, E[T] = {lf.mean_time(q):.6f}")

    q = lf.ClParams(2.0, 0.7)
    print(f"\n95% quantile of T at y=2, c=0.7: {lf.quantile_ty(0.95, q):.3f} blocks"
          f" (IG says {lf.ig_quantile(0.95, lf.ig_params(q)):.3f})")


if __name__ == "__main__":
    main()
