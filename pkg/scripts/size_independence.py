"""Cost of a single-edge update as the graph grows.

Ising and hardcore models on random 3-regular graphs at a fraction of the
regime threshold; one edge is removed and re-inserted per trial.

    python3 scripts/size_independence.py --ns 50,100,200,400 --trials 2000
"""
import argparse

from dynsampler.cli import BenchSpec, bench_rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ns", default="50,100,200")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--scale", type=float, default=0.9)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=6)
    args = p.parse_args()

    print("family,n,mean_iterations,mean_resamples,stderr")
    for family in ("ising", "hardcore"):
        for n in (int(s) for s in args.ns.split(",")):
            spec = BenchSpec(family, n, args.degree, 0.2, args.scale, args.seed, None)
            _, it, rs, se = bench_rows(spec, [1], args.trials)[0]
            print(f"{family},{n},{it:.4f},{rs:.4f},{se:.4f}")


if __name__ == "__main__":
    main()
