"""Batch service queue under fluid and diffusion scaling.

The scaled hitting times approach the CL law (fluid) and an inverse Gaussian
(diffusion) as n grows; the KS column should shrink down the ladder.
Run: python3 demos/scaling_limits.py   (about a minute; 20 repetitions per scale)
"""
import numpy as np

import lundfee as lf


def show(title, rows):
    # one experiment is noisy at this size; the median over repetitions is not
    print(title)
    print("  view     n   median KS   mean")
    groups = {}
    for r in rows:
        groups.setdefault((r.view, r.n), []).append(r)
    for (view, n), rs in groups.items():
        print(f"  {view:6s} {n:5d}   {np.median([r.ks for r in rs]):.4f}   {np.mean([r.mean for r in rs]):7.4f}")


def main():
    det = lf.BsqParams(1.0, 1.0, 1.0, 0, lf.WeightDist.deterministic(0.5))
    rows = lf.fluid_scaling_experiment(det, 2.0, (10, 100, 1000), 2000, seed=1, repetitions=20)
    show("fluid scaling, deterministic weights (c = 0.5, y = 2)", rows)
    print(f"  CL mean E[T_2] = {lf.mean_time(lf.ClParams(2.0, 0.5)):.4f}\n")

    exp = lf.BsqParams(0.5, 1.0, 1.0, 0, lf.WeightDist.exponential(1.0))
    rows = lf.diffusion_scaling_experiment(exp, 1.0, (10, 100, 1000), 2000, seed=2, repetitions=20)
    show("diffusion scaling, exponential weights, target IG(1, 1)", rows)

    # hitting times in the weight and count views coincide path by path
    p = lf.BsqParams(3.0, 1.0, 5.0, 4, lf.WeightDist.uniform(0.5, 1.5))
    hits = [lf.simulate_bsq_hit(p, lf.Seed(9, i)) for i in range(200)]
    print(f"\nper-path views agree on {sum(h.time == h.count_time for h in hits)}/200 paths;"
          f" mean blocks {np.mean([h.blocks for h in hits]):.2f}")


if __name__ == "__main__":
    main()
