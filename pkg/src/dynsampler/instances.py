"""Instance generators: random soft factor graphs, chains, regular graphs,
and the fixed small instances used by the verification suite."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import networkx as nx

from .convergence import hardcore_threshold, ising_beta_threshold, soft_threshold
from .factor_graph import GraphicalModel, UpdateRequest, apply_update, dependency_degree
from .rng import RngStream
from .spin_models import HardcoreModel, HardcoreUpdate, IsingModel, PottsModel, SpinUpdate


def soft_table(size: int, lower: float, rng: RngStream) -> tuple[float, ...]:
    """Table with entries in [lower, 1], hitting both ends."""
    entries = [lower + (1 - lower) * rng.random() for _ in range(size)]
    order = list(range(size))
    rng.shuffle(order)
    entries[order[0]] = 1.0
    entries[order[1]] = lower
    return tuple(entries)


def random_soft_model(
    n: int,
    scopes: Sequence[Sequence[int]],
    delta: float,
    rng: RngStream,
    q: int = 2,
    slack: float = 1e-3,
) -> GraphicalModel:
    """Random model on the given scopes whose tables satisfy the soft
    convergence condition for ``delta`` with a small slack."""
    variables = []
    for _ in range(n):
        w = [0.5 + rng.random() for _ in range(q)]
        variables.append([x / sum(w) for x in w])
    skeleton = GraphicalModel.from_factors(variables, [(s, (1.0,) * q ** len(s)) for s in scopes])
    lower = min(1.0, soft_threshold(dependency_degree(skeleton), delta) + slack)
    return GraphicalModel.from_factors(
        variables, [(s, soft_table(q ** len(s), lower, rng)) for s in scopes]
    )


def chain_model(n: int, delta: float, rng: RngStream, q: int = 2) -> GraphicalModel:
    """Path of pairwise soft constraints satisfying the condition for ``delta``."""
    return random_soft_model(n, [(i, i + 1) for i in range(n - 1)], delta, rng, q)


def random_chain_update(model: GraphicalModel, k: int, delta: float, rng: RngStream) -> UpdateRequest:
    """Replace the tables of ``k`` distinct random constraints with fresh
    tables that keep the soft condition."""
    lower = min(1.0, soft_threshold(dependency_degree(model), delta) + 1e-3)
    cids = rng.sample(sorted(model.constraints), k)
    ups = []
    for cid in sorted(cids):
        c = model.constraints[cid]
        ups.append((c.scope, soft_table(len(c.table), lower, rng)))
    return UpdateRequest((), tuple(ups))


def regular_graph(n: int, degree: int, seed: int) -> list[tuple[int, int]]:
    g = nx.random_regular_graph(degree, n, seed=seed)
    return sorted((min(u, v), max(u, v)) for u, v in g.edges())


# --- fixed verification instances --------------------------------------------


@dataclass
class StreamInstance:
    """An initial model, a stream of updates and the sampler family to use."""

    name: str
    kind: str  # "generic", "ising", "potts" or "hardcore"
    initial: object
    updates: list

    def final_model(self):
        from .spin_models import apply_hardcore_update, apply_spin_update

        m = self.initial
        for u in self.updates:
            if self.kind == "generic":
                m = apply_update(m, u)
            elif self.kind == "hardcore":
                m = apply_hardcore_update(m, u)
            else:
                m = apply_spin_update(m, u)
        return m


SOFT_E_SEED = 3001
SOFT_E_SCOPES = ((0, 1, 2, 3), (4, 5))
SOFT_E_SKEW = (0.95, 0.05)


def soft_instance_e() -> tuple[GraphicalModel, list[UpdateRequest]]:
    """Random soft factor graph on 6 binary variables (delta = 0.2) and a
    three-update stream that ends at it.

    The stream adds the two constraints, then moves variable 0 away from a
    skewed prior. That last update makes the boundary correction matter a
    lot, and its resample-set buckets are few and well populated.
    """
    final = random_soft_model(6, SOFT_E_SCOPES, 0.2, RngStream(SOFT_E_SEED))
    c = final.constraints
    weights = [v.weights for v in final.variables]
    start = GraphicalModel.from_factors([SOFT_E_SKEW] + weights[1:], [])
    updates = [
        UpdateRequest((), ((c[0].scope, c[0].table),)),
        UpdateRequest((), ((c[1].scope, c[1].table),)),
        UpdateRequest(((0, weights[0]),), ()),
    ]
    return start, updates


def acceptance_streams() -> list[StreamInstance]:
    out = []
    # (a) single edge, ferromagnetic
    out.append(StreamInstance(
        "ising_edge_b0.8", "ising", IsingModel(2, {}),
        [SpinUpdate({(0, 1): 0.3}), SpinUpdate({(0, 1): -0.2}), SpinUpdate({(0, 1): 0.8})],
    ))
    # (b) anti-ferromagnetic triangle built edge by edge
    out.append(StreamInstance(
        "ising_triangle_b-0.5", "ising", IsingModel(3, {}),
        [SpinUpdate({(0, 1): -0.5}), SpinUpdate({(1, 2): -0.5}), SpinUpdate({(0, 2): -0.5})],
    ))
    # (c) hardcore on a 4-path
    out.append(StreamInstance(
        "hardcore_path4_l0.3", "hardcore", HardcoreModel(4, frozenset(), (0.3,) * 4),
        [HardcoreUpdate(add_edges={(0, 1)}), HardcoreUpdate(add_edges={(1, 2)}),
         HardcoreUpdate(add_edges={(2, 3)})],
    ))
    # (d) Potts q=3 on the 2x2 grid (a 4-cycle)
    out.append(StreamInstance(
        "potts_grid2x2_q3_b0.3", "potts", PottsModel(4, 3, {(0, 1): 0.3}),
        [SpinUpdate({(1, 3): 0.3}), SpinUpdate({(2, 3): 0.3, (0, 1): -0.1}),
         SpinUpdate({(0, 2): 0.3, (0, 1): 0.3})],
    ))
    start, updates = soft_instance_e()
    out.append(StreamInstance("soft_random_n6", "generic", start, updates))
    return out


def cycle_ising(n: int, beta: float) -> IsingModel:
    return IsingModel(n, {(i, (i + 1) % n): beta for i in range(n)})


def regular_ising(n: int, degree: int, scale: float, seed: int) -> IsingModel:
    """Ising on a random regular graph with |beta| = scale * threshold, random signs."""
    beta = scale * ising_beta_threshold(degree)
    rng = RngStream(seed, ("signs",))
    edges = regular_graph(n, degree, seed)
    return IsingModel(n, {e: beta if rng.random() < 0.5 else -beta for e in edges})


def regular_hardcore(n: int, degree: int, scale: float, seed: int) -> HardcoreModel:
    lam = scale * hardcore_threshold(degree)
    return HardcoreModel(n, frozenset(regular_graph(n, degree, seed)), (lam,) * n)
