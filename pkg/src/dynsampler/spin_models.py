"""Specialised dynamic samplers for Ising, Potts and hardcore models.

Spin encoding: Ising spins are stored as 0/1 and read as -1/+1 in the
formulas, so sigma_u * sigma_v = +1 exactly when the stored values agree.
With that encoding the Ising sampler is the q = 2 case of the Potts sampler,
whose edge weight is exp(beta * (2*[x_u == x_v] - 1)).

Hardcore occupancy is 1 for an occupied vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .engine import BudgetExceeded, ResampleState, TraceStats, default_budget
from .factor_graph import ConstraintFactor, GraphicalModel, UpdateRequest, VariableFactor
from .rng import RngStream


def _edge(u: int, v: int) -> tuple[int, int]:
    u, v = int(u), int(v)
    if u == v:
        raise ValueError(f"self-loop at vertex {u}")
    return (u, v) if u < v else (v, u)


def _adjacency(n: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, ...], ...]:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) outside vertex range {n}")
        adj[u].append(v)
        adj[v].append(u)
    return tuple(tuple(sorted(a)) for a in adj)


def targets_to_vertices(D: Iterable) -> frozenset[int]:
    """vbl(D) for a spin update given as vertices and (u, v) edge pairs."""
    out = set()
    for item in D:
        if isinstance(item, (tuple, list)):
            out.update(int(x) for x in item)
        else:
            out.add(int(item))
    return frozenset(out)


# --- Ising / Potts ----------------------------------------------------------


@dataclass(frozen=True)
class PottsModel:
    n: int
    q: int
    couplings: Mapping[tuple[int, int], float]
    fields: Optional[tuple[tuple[float, ...], ...]] = None
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("Potts models need q >= 2")
        couplings = {}
        for (u, v), beta in dict(self.couplings).items():
            key = _edge(u, v)
            if key in couplings:
                raise ValueError(f"duplicate edge {key}")
            couplings[key] = float(beta)
        fields = self.fields
        if fields is not None:
            fields = tuple(tuple(float(x) for x in f) for f in fields)
            if len(fields) != self.n or any(len(f) != self.q or sum(f) <= 0 for f in fields):
                raise ValueError("fields must give one positive weight vector of length q per vertex")
            fields = tuple(tuple(x / sum(f) for x in f) for f in fields)
        object.__setattr__(self, "couplings", dict(sorted(couplings.items())))
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "adjacency", _adjacency(self.n, couplings))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(self.couplings)

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def beta(self, u: int, v: int) -> float:
        return self.couplings[_edge(u, v)]

    def field_of(self, v: int) -> tuple[float, ...]:
        if self.fields is None:
            return (1.0 / self.q,) * self.q
        return self.fields[v]

    def edge_table(self, beta: float) -> tuple[float, ...]:
        """Normalized q x q table exp(beta*(2*delta - 1) - |beta|)."""
        agree = math.exp(beta - abs(beta))
        disagree = math.exp(-beta - abs(beta))
        return tuple(agree if a == b else disagree for a in range(self.q) for b in range(self.q))


class IsingModel(PottsModel):
    """Ising model with spins stored as 0 (-1) and 1 (+1)."""

    def __init__(self, n: int, couplings: Mapping, fields=None):
        super().__init__(n, 2, couplings, fields)

    def __repr__(self):
        return f"IsingModel(n={self.n}, couplings={self.couplings!r}, fields={self.fields!r})"


@dataclass(frozen=True)
class SpinUpdate:
    """Edge couplings to set (beta = 0 removes the edge) and vertex fields to set."""

    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    fields: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        couplings = {}
        for (u, v), beta in dict(self.couplings).items():
            key = _edge(u, v)
            if key in couplings:
                raise ValueError(f"edge {key} updated twice")
            couplings[key] = float(beta)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "fields", {int(v): tuple(f) for v, f in dict(self.fields).items()})

    def targets(self) -> list:
        return list(self.fields) + list(self.couplings)


def apply_spin_update(model: PottsModel, update: SpinUpdate) -> PottsModel:
    couplings = dict(model.couplings)
    for e, beta in update.couplings.items():
        if beta == 0.0:
            couplings.pop(e, None)
        else:
            couplings[e] = beta
    fields = model.fields
    if update.fields:
        fields = [list(model.field_of(v)) for v in range(model.n)]
        for v, f in update.fields.items():
            fields[v] = list(f)
    if isinstance(model, IsingModel):
        return IsingModel(model.n, couplings, fields)
    return PottsModel(model.n, model.q, couplings, fields)


def spin_to_factor_graph(model: PottsModel) -> GraphicalModel:
    """Variables in vertex order, one constraint per edge in sorted edge order."""
    variables = tuple(VariableFactor(model.q, model.field_of(v)) for v in range(model.n))
    constraints = {
        cid: ConstraintFactor((u, v), model.edge_table(beta), (model.q, model.q))
        for cid, ((u, v), beta) in enumerate(model.couplings.items())
    }
    return GraphicalModel(variables, constraints)


def ising_to_factor_graph(ising: IsingModel) -> GraphicalModel:
    return spin_to_factor_graph(ising)


potts_to_factor_graph = spin_to_factor_graph


def spin_update_request(model: PottsModel, update: SpinUpdate) -> UpdateRequest:
    """The equivalent generic update. A removed edge becomes an all-ones table."""
    var_updates = tuple((v, tuple(f)) for v, f in sorted(update.fields.items()))
    con_updates = tuple(
        ((u, v), model.edge_table(beta)) for (u, v), beta in sorted(update.couplings.items())
    )
    return UpdateRequest(var_updates, con_updates)


def _sample_spin(weights: Sequence[float], u: float) -> int:
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    return len(weights) - 1


def spin_round(
    model: PottsModel,
    x: list,
    R: frozenset,
    rng: RngStream,
    stats: Optional[TraceStats] = None,
) -> frozenset[int]:
    """One round of the two-phase failure scheme, in place on ``x``.

    Every boundary edge survives a first coin with probability
    exp(-|b| - b*s) where s = +1 if the pre-round spins agree else -1; the
    resample set is redrawn; every edge touching it that has not yet failed
    survives a second coin with probability exp(-|b| + b*s) using the new
    spins. Returns the union of failed edges.
    """
    adj = model.adjacency
    couplings = model.couplings
    rand = rng.random
    exp = math.exp
    order = sorted(R)
    incident = sorted({_edge(v, u) for v in order for u in adj[v]})
    failed = set()
    coins = 0
    for e in incident:
        u, v = e
        if u in R and v in R:
            continue
        b = couplings[e]
        s = 1.0 if x[u] == x[v] else -1.0
        coins += 1
        if rand() >= exp(-abs(b) - b * s):
            failed.add(e)
    q = model.q
    if model.fields is None:
        for v in order:
            x[v] = int(rand() * q)
    else:
        for v in order:
            x[v] = _sample_spin(model.fields[v], rand())
    new_R = set()
    for e in incident:
        u, v = e
        if e in failed:
            new_R.add(u)
            new_R.add(v)
            continue
        b = couplings[e]
        s = 1.0 if x[u] == x[v] else -1.0
        coins += 1
        if rand() >= exp(-abs(b) + b * s):
            new_R.add(u)
            new_R.add(v)
    if stats is not None:
        stats.iterations += 1
        stats.variable_resamples += len(order)
        stats.coin_flips += coins
        stats.per_iteration_R_sizes.append(len(order))
    return frozenset(new_R)


def spin_dynamic_sample(
    model: PottsModel,
    X: Sequence[int],
    D: Iterable,
    rng: RngStream,
    budget: Optional[int] = None,
) -> tuple[tuple[int, ...], TraceStats]:
    """Dynamic sampler for Ising/Potts models: repeat :func:`spin_round`
    from R = vbl(D) until no edge fails."""
    R = targets_to_vertices(D)
    if budget is None:
        budget = default_budget(len(R))
    x = list(X)
    stats = TraceStats()
    while R:
        if stats.iterations >= budget:
            raise BudgetExceeded(ResampleState(tuple(x), frozenset(R)), stats, budget)
        R = spin_round(model, x, R, rng, stats)
    return tuple(x), stats


def ising_dynamic_sample(ising: IsingModel, X, D, rng, budget=None):
    return spin_dynamic_sample(ising, X, D, rng, budget)


def potts_dynamic_sample(potts: PottsModel, X, D, rng, budget=None):
    return spin_dynamic_sample(potts, X, D, rng, budget)


def spin_bootstrap_sample(model: PottsModel, rng: RngStream, budget=None):
    """Exact sample: spins from the fields, then every edge added as one update."""
    x = []
    for v in range(model.n):
        x.append(_sample_spin(model.field_of(v), rng.random()))
    return spin_dynamic_sample(model, x, model.edges, rng, budget)


# --- hardcore ---------------------------------------------------------------


@dataclass(frozen=True)
class HardcoreModel:
    n: int
    edges: frozenset[tuple[int, int]]
    fugacity: tuple[float, ...]
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = set()
        for u, v in self.edges:
            e = _edge(u, v)
            if e in edges:
                raise ValueError(f"duplicate edge {e}")
            edges.add(e)
        fugacity = tuple(float(x) for x in self.fugacity)
        if len(fugacity) != self.n or any(not x > 0 for x in fugacity):
            raise ValueError("one positive fugacity per vertex is required")
        object.__setattr__(self, "edges", frozenset(edges))
        object.__setattr__(self, "fugacity", fugacity)
        object.__setattr__(self, "adjacency", _adjacency(self.n, sorted(edges)))

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def is_independent(self, x: Sequence[int]) -> bool:
        return not any(x[u] and x[v] for u, v in self.edges)


@dataclass(frozen=True)
class HardcoreUpdate:
    add_edges: frozenset = frozenset()
    remove_edges: frozenset = frozenset()
    fugacity: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        add = frozenset(_edge(*e) for e in self.add_edges)
        remove = frozenset(_edge(*e) for e in self.remove_edges)
        if add & remove:
            raise ValueError("an edge cannot be added and removed in one update")
        object.__setattr__(self, "add_edges", add)
        object.__setattr__(self, "remove_edges", remove)
        object.__setattr__(self, "fugacity", {int(v): float(l) for v, l in dict(self.fugacity).items()})

    def targets(self) -> list:
        return list(self.fugacity) + sorted(self.add_edges) + sorted(self.remove_edges)


def apply_hardcore_update(model: HardcoreModel, update: HardcoreUpdate) -> HardcoreModel:
    edges = (set(model.edges) | update.add_edges) - update.remove_edges
    fugacity = list(model.fugacity)
    for v, lam in update.fugacity.items():
        fugacity[v] = lam
    return HardcoreModel(model.n, frozenset(edges), tuple(fugacity))


def hardcore_to_factor_graph(hc: HardcoreModel) -> GraphicalModel:
    variables = tuple(VariableFactor(2, (1 / (1 + lam), lam / (1 + lam))) for lam in hc.fugacity)
    constraints = {
        cid: ConstraintFactor(e, (1.0, 1.0, 1.0, 0.0), (2, 2)) for cid, e in enumerate(sorted(hc.edges))
    }
    return GraphicalModel(variables, constraints)


def hardcore_update_request(update: HardcoreUpdate) -> UpdateRequest:
    var_updates = tuple((v, (1 / (1 + lam), lam / (1 + lam))) for v, lam in sorted(update.fugacity.items()))
    con_updates = tuple((e, (1.0, 1.0, 1.0, 0.0)) for e in sorted(update.add_edges)) + tuple(
        (e, (1.0, 1.0, 1.0, 1.0)) for e in sorted(update.remove_edges)
    )
    return UpdateRequest(var_updates, con_updates)


def hardcore_expand(model, config: Sequence[int], R: Iterable[int]) -> frozenset[int]:
    """R together with every neighbour of an occupied vertex of R.

    Reads only R and the values on R. ``model`` is anything exposing
    ``neighbors(v)``: a HardcoreModel or a GraphicalModel.
    """
    R = frozenset(R)
    out = set(R)
    for u in R:
        if config[u] == 1:
            out.update(model.neighbors(u))
    return frozenset(out)


def _incident_vertices(model: HardcoreModel, R: Iterable[int]) -> frozenset[int]:
    """vbl(E+(R)): vertices of edges that touch R."""
    out = set()
    for u in R:
        adj = model.adjacency[u]
        if adj:
            out.add(u)
            out.update(adj)
    return frozenset(out)


def hardcore_round(
    model: HardcoreModel,
    x: list,
    R: frozenset,
    rng: RngStream,
    stats: Optional[TraceStats] = None,
    check_expand: bool = False,
) -> frozenset[int]:
    """One round in place on ``x``: expand, redraw, collect doubly occupied edges."""
    expanded = hardcore_expand(model, x, R)
    if check_expand and expanded != (_incident_vertices(model, R) | R):
        raise AssertionError("expand differs from vbl(E+(R)) after the first round")
    order = sorted(expanded)
    rand = rng.random
    fug = model.fugacity
    for v in order:
        lam = fug[v]
        x[v] = 1 if rand() < lam / (1 + lam) else 0
    adj = model.adjacency
    new_R = set()
    for u in order:
        if x[u]:
            for v in adj[u]:
                if x[v]:
                    new_R.add(u)
                    new_R.add(v)
    if stats is not None:
        stats.iterations += 1
        stats.variable_resamples += len(order)
        stats.per_iteration_R_sizes.append(len(order))
    return frozenset(new_R)


def hardcore_dynamic_sample(
    hc: HardcoreModel,
    X: Sequence[int],
    D: Iterable,
    rng: RngStream,
    budget: Optional[int] = None,
) -> tuple[tuple[int, ...], TraceStats]:
    """Dynamic hardcore sampler: expand around occupied vertices of R, redraw
    the expanded set, and keep the edges with both endpoints occupied."""
    R = targets_to_vertices(D)
    if budget is None:
        budget = default_budget(len(R))
    x = list(X)
    stats = TraceStats()
    while R:
        if stats.iterations >= budget:
            raise BudgetExceeded(ResampleState(tuple(x), R), stats, budget)
        R = hardcore_round(hc, x, R, rng, stats, check_expand=stats.iterations > 0)
    return tuple(x), stats


def hardcore_bootstrap_sample(hc: HardcoreModel, rng: RngStream, budget=None):
    x = [1 if rng.random() < lam / (1 + lam) else 0 for lam in hc.fugacity]
    return hardcore_dynamic_sample(hc, x, sorted(hc.edges), rng, budget)


def hardcore_potential(hc: HardcoreModel, R: Iterable[int]) -> int:
    """Number of edges with both endpoints in R."""
    R = set(R)
    return sum(1 for u in R for v in hc.adjacency[u] if v in R and u < v)
