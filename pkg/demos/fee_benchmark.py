"""Model-based vs data-driven fee selection on synthetic mempool traces.

Each decision instant gets a hindsight-optimal bucket; both selectors are
scored by how many ladder steps they miss it by.
Run: python3 demos/fee_benchmark.py   (a few seconds per seed)
"""
import lundfee as lf


def main():
    cfg = lf.BenchmarkConfig()
    print(f"ladder {cfg.buckets}, t* = {cfg.t_star} blocks, confidence {cfg.confidence}")
    wins = 0
    for seed in range(5):
        res = lf.run_benchmark(cfg, seed)
        m, d = res.summary("model"), res.summary("data")
        wins += m.pct_optimal > d.pct_optimal
        print(f"seed {seed}: {m.n} instances  model {m.pct_optimal:5.1f}% optimal"
              f"  data {d.pct_optimal:5.1f}% optimal")
    print(f"model ahead on {wins}/5 seeds\n")

    res = lf.run_benchmark(cfg, 0)
    for method in ("model", "data"):
        s = res.summary(method)
        print(method)
        for label, pct, mag in s.rows():
            extra = "" if mag is None or mag != mag else f"  (mean {mag:.2f})"
            print(f"  {label:10s} {pct:5.1f}{extra}")
    print()

    state = {2.0: (0.89, 6.0), 5.0: (0.72, 3.0), 8.0: (0.66, 1.5), 14.0: (0.59, 0.4), 25.0: (0.5, 0.1)}
    for t in (3.0, 6.0, 12.0):
        try:
            rec = lf.model_based_bucket(state, lf.TargetSpec(t))
            print(f"point decision for t*={t:g}: bucket {rec.bucket:g} sat/vB,"
                  f" predicted P[T > t*] = {rec.predicted_tail:.4f}")
        except lf.InfeasibleTargetError as exc:
            print(f"point decision for t*={t:g}: infeasible, best tail {exc.best_tail:.4f}"
                  f" at bucket {exc.best_bucket:g}")


if __name__ == "__main__":
    main()
