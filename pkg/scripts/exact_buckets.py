"""Exact bucket analysis for the conditional-Gibbs check.

Propagates the full law of (X, R) through a few resampling rounds on the
model (e) stream and prints, per round, every (R, X_R) bucket with its mass,
the expected sample count at N runs, the multinomial noise at that count and
the exact TVD to the conditional marginal, for the correct sampler and for
the kappa = 1 mutant.

    python3 scripts/exact_buckets.py --rounds 3 --samples 100000
"""
import argparse

from dynsampler.engine import compute_kappa, unit_kappa
from dynsampler.factor_graph import apply_update, vbl
from dynsampler.instances import soft_instance_e
from dynsampler.oracle import bucket_laws, exact_chain, exact_gibbs, noise_scale, tvd


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--min-bucket", type=int, default=500)
    args = p.parse_args()

    start, updates = soft_instance_e()
    pre = apply_update(apply_update(start, updates[0]), updates[1])
    post = apply_update(pre, updates[2])
    R0 = vbl(pre, updates[2])
    initial = exact_gibbs(pre)

    print("variant,round,R,X_R,mass,expected_count,noise,exact_tvd")
    for name, kappa in (("correct", compute_kappa), ("mutant", unit_kappa)):
        chain = exact_chain(post, initial, R0, args.rounds, kappa)
        for t, dist in enumerate(chain[1:], start=1):
            for (R, tau), (mass, law, target) in sorted(bucket_laws(post, dist).items()):
                count = mass * args.samples
                if count < args.min_bucket:
                    continue
                print(
                    f"{name},{t},{'-'.join(map(str, R)) or 'none'},{''.join(map(str, tau))},"
                    f"{mass:.5f},{count:.0f},{noise_scale(target.size, int(count)):.4f},{tvd(law, target):.4f}"
                )


if __name__ == "__main__":
    main()
