"""Randomized invariant checks shared by the property suite and the acceptance run."""
from dynsampler.convergence import set_cover
from dynsampler.engine import ResampleState, compute_kappa, local_resample
from dynsampler.factor_graph import GraphicalModel, constraint_partition, incident_constraints
from dynsampler.rng import RngStream
from dynsampler.spin_models import (
    HardcoreModel,
    HardcoreUpdate,
    apply_hardcore_update,
    hardcore_bootstrap_sample,
    hardcore_dynamic_sample,
)


def random_table(rng, size, hard):
    table = [rng.random() for _ in range(size)]
    if hard:
        for i in range(size):
            if rng.random() < 0.3:
                table[i] = 0.0
    top = max(table)
    if top == 0.0:
        table[rng.randrange(size)] = top = 1.0
    return [x / top for x in table]


def random_model(rng: RngStream) -> GraphicalModel:
    n = 2 + rng.randrange(5)
    qs = [2 + rng.randrange(2) for _ in range(n)]
    weights = [[0.05 + rng.random() for _ in range(q)] for q in qs]
    hard = rng.random() < 0.3
    scopes = set()
    for _ in range(1 + rng.randrange(6)):
        size = min(n, 2 + rng.randrange(2))
        scope = tuple(sorted(rng.sample(range(n), size)))
        scopes.add(scope)
    constraints = []
    for scope in sorted(scopes):
        size = 1
        for v in scope:
            size *= qs[v]
        constraints.append((scope, random_table(rng, size, hard)))
    return GraphicalModel.from_factors(weights, constraints)


def random_subset(rng, items):
    return frozenset(v for v in items if rng.random() < 0.5)


def check_generic(rng: RngStream) -> list[str]:
    m = random_model(rng)
    x = tuple(rng.randrange(v.q) for v in m.variables)
    R = random_subset(rng, range(m.n))
    bad = []
    internal, _, incident = constraint_partition(m, R)
    for cid in incident:
        k = compute_kappa(m, x, R, cid)
        if not 0.0 <= k <= 1.0:
            bad.append(f"kappa {k} out of range")
        if cid in internal and k != 1.0:
            bad.append(f"internal kappa {k} != 1")
    try:
        new = local_resample(m, ResampleState(x, R), rng)
    except AssertionError as exc:
        return bad + [str(exc)]
    if any(new.config[v] != x[v] for v in range(m.n) if v not in R):
        bad.append("value outside R changed")
    reach = set()
    for cid in incident_constraints(m, R):
        reach.update(m.constraints[cid].scope)
    if not new.resample_set <= reach:
        bad.append("new resample set escapes vbl(E+(R))")
    return bad


def check_potential(rng: RngStream) -> list[str]:
    m = random_model(rng)
    covered = sorted(v for v in range(m.n) if m.incidence[v])
    small = random_subset(rng, covered)
    big = small | random_subset(rng, covered)
    a, b = set_cover(m, small), set_cover(m, big)
    bad = []
    if not (a.exact and b.exact):
        bad.append("cover not exact on a small model")
    if a.size > b.size:
        bad.append(f"H not monotone: {a.size} > {b.size}")
    if (a.size == 0) != (not small):
        bad.append("H(R) = 0 does not match R empty")
    return bad


def check_hardcore(rng: RngStream) -> list[str]:
    n = 2 + rng.randrange(7)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = frozenset(p for p in pairs if rng.random() < 0.3)
    lam = tuple(0.05 + 2 * rng.random() for _ in range(n))
    pre = HardcoreModel(n, edges, lam)
    add = frozenset(p for p in pairs if p not in edges and rng.random() < 0.3)
    post = apply_hardcore_update(pre, HardcoreUpdate(add_edges=add))
    x0 = hardcore_bootstrap_sample(pre, rng.split("initial"))[0]
    x, _ = hardcore_dynamic_sample(post, x0, sorted(add), rng)
    if any(x[u] and x[v] for u, v in post.edges):
        return ["hardcore output is not an independent set"]
    return []


CHECKS = (check_generic, check_potential, check_hardcore)


def run_case(seed: int) -> list[str]:
    rng = RngStream(seed, ("invariants",))
    out = []
    for check in CHECKS:
        out.extend(f"{check.__name__}: {msg}" for msg in check(rng.split(check.__name__)))
    return out
