"""Mean iterations and resamples against update size on a soft chain.

Fits mean iterations against log2 k and against k and reports the residual
sum of squares of both fits.

    python3 scripts/scaling_sweep.py --n 256 --trials 200
"""
import argparse

import numpy as np

from dynsampler.cli import BenchSpec, bench_rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--ks", default="1,2,4,8,16,32,64")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=4)
    p.add_argument("--mode", choices=("seq", "par"), default="seq")
    args = p.parse_args()

    ks = [int(k) for k in args.ks.split(",")]
    rows = bench_rows(BenchSpec("chain", args.n, 3, args.delta, 0.9, args.seed, None), ks, args.trials, args.mode)
    print("k,mean_iterations,mean_resamples,stderr,resamples_per_k")
    for k, it, rs, se in rows:
        print(f"{k},{it:.4f},{rs:.4f},{se:.4f},{rs / k:.4f}")

    k = np.array(ks, dtype=float)
    it = np.array([r[1] for r in rows])
    log_fit = np.polyfit(np.log2(k), it, 1, full=True)
    lin_fit = np.polyfit(k, it, 1, full=True)
    print(f"# log2 fit: slope={log_fit[0][0]:.4f} rss={log_fit[1][0]:.5f}")
    print(f"# linear fit: slope={lin_fit[0][0]:.4f} rss={lin_fit[1][0]:.5f}")


if __name__ == "__main__":
    main()
