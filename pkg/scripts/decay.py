"""One-step potential decay for the soft, hardcore and Ising samplers.

    python3 scripts/decay.py --trials 10000
"""
import argparse

from dynsampler.convergence import (
    decay_experiment,
    hardcore_decay_experiment,
    ising_beta_threshold,
    ising_decay_experiment,
)
from dynsampler.factor_graph import apply_update
from dynsampler.instances import regular_graph, soft_instance_e
from dynsampler.rng import RngStream
from dynsampler.spin_models import HardcoreModel, HardcoreUpdate, IsingModel, SpinUpdate


def show(label, r):
    print(f"{label},{r.initial_potential},{r.empirical_ratio:.4f},{r.stderr:.4f},{r.bound:.4f},{r.satisfied}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--lam", type=float, default=0.3)
    args = p.parse_args()

    print("experiment,H0,ratio,stderr,bound,satisfied")
    start, updates = soft_instance_e()
    m = start
    for j, u in enumerate(updates):
        show(f"soft_update_{j}", decay_experiment(m, u, args.trials, RngStream(3, ("decay", j)), 0.2))
        m = apply_update(m, u)

    edges = regular_graph(args.n, 3, 33)
    hc = HardcoreModel(args.n, frozenset(edges[3:]), (args.lam,) * args.n)
    show("hardcore", hardcore_decay_experiment(
        hc, HardcoreUpdate(add_edges=frozenset(edges[:3])), args.trials, RngStream(3, ("hc",))))

    beta = ising_beta_threshold(3)
    pre = IsingModel(args.n, {e: beta for e in edges[3:]})
    show("ising", ising_decay_experiment(
        pre, SpinUpdate({e: -beta for e in edges[:3]}), args.trials, RngStream(3, ("ising",))))


if __name__ == "__main__":
    main()
