"""Local resampling, the dynamic sampler loop and the Expand-generalised loop.

Within a round everything is done in ascending id order: correcting factors
for all incident constraints are computed from the pre-round configuration,
then the resample set is redrawn, then one coin is flipped per incident
constraint against the post-round configuration. All draws come from the
single stream owned by the run, so a fixed seed reproduces a run bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

from .factor_graph import (
    Configuration,
    GraphicalModel,
    UpdateRequest,
    apply_update,
    vbl,
)
from .rng import RngStream

PROB_EPS = 1e-12

ExpandStrategy = Callable[[GraphicalModel, Sequence[int], frozenset], frozenset]
KappaFn = Callable[[GraphicalModel, Sequence[int], frozenset, int], float]


@dataclass(frozen=True)
class ResampleState:
    config: Configuration
    resample_set: frozenset[int] = frozenset()

    @property
    def done(self) -> bool:
        return not self.resample_set


@dataclass
class TraceStats:
    iterations: int = 0
    variable_resamples: int = 0
    coin_flips: int = 0
    kappa_evaluations: int = 0
    per_iteration_R_sizes: list[int] = field(default_factory=list)
    per_iteration_potential: Optional[list[int]] = None

    @property
    def total_resamples(self) -> int:
        """Variable redraws plus indicator coins: the cost measure of the algorithm."""
        return self.variable_resamples + self.coin_flips


class BudgetExceeded(RuntimeError):
    def __init__(self, state: ResampleState, stats: TraceStats, budget: int):
        super().__init__(f"resample set still non-empty after {budget} rounds")
        self.state = state
        self.stats = stats
        self.budget = budget


def default_budget(initial_size: int) -> int:
    return int(1000 * (1 + math.log2(1 + initial_size)))


def compute_kappa(model: GraphicalModel, config: Sequence[int], R: frozenset, cid: int) -> float:
    """Correcting factor of constraint ``cid`` given the resample set ``R``.

    Minimum of the table over entries that agree with ``config`` on the part
    of the scope inside ``R``, divided by the current entry; 0/0 is 1.
    """
    c = model.constraints[cid]
    mask = 0
    for i, v in enumerate(c.scope):
        if v in R:
            mask |= 1 << i
    idx = c.index(config)
    current = c.table[idx]
    if current == 0.0:
        return 1.0
    return c.slice_minima(mask)[idx] / current


def unit_kappa(model, config, R, cid) -> float:
    """Correcting factor forced to 1: Moser-Tardos style resampling, which is
    biased. Used as a mutation control by the verification harness."""
    return 1.0


def local_resample(
    model: GraphicalModel,
    state: ResampleState,
    rng: RngStream,
    stats: Optional[TraceStats] = None,
    kappa: KappaFn = compute_kappa,
) -> ResampleState:
    R = state.resample_set
    if not R:
        return state
    constraints = model.constraints
    incidence = model.incidence
    variables = model.variables
    order = sorted(R)
    touched = set()
    for v in order:
        touched.update(incidence[v])
    touched = sorted(touched)

    old = state.config
    kappas = [kappa(model, old, R, cid) for cid in touched]

    x = list(old)
    for v in order:
        x[v] = variables[v].sample(rng)

    rand = rng.random
    new_R = set()
    for cid, k in zip(touched, kappas):
        c = constraints[cid]
        p = k * c.table[c.index(x)]
        if not -PROB_EPS <= p <= 1.0 + PROB_EPS:
            raise AssertionError(f"coin probability {p} out of range for constraint {cid}")
        if rand() >= p:
            new_R.update(c.scope)

    if stats is not None:
        stats.iterations += 1
        stats.variable_resamples += len(order)
        stats.coin_flips += len(touched)
        stats.kappa_evaluations += len(touched)
        stats.per_iteration_R_sizes.append(len(order))
    return ResampleState(tuple(x), frozenset(new_R))


def identity_expand(model, config, R) -> frozenset:
    return R


def gen_resample(
    model: GraphicalModel,
    state: ResampleState,
    strategy: ExpandStrategy,
    rng: RngStream,
    stats: Optional[TraceStats] = None,
    kappa: KappaFn = compute_kappa,
) -> ResampleState:
    """Expand the resample set with ``strategy``, then resample locally."""
    expanded = frozenset(strategy(model, state.config, state.resample_set))
    if not expanded >= state.resample_set:
        raise ValueError("expand strategy must return a superset of the resample set")
    return local_resample(model, ResampleState(state.config, expanded), rng, stats, kappa)


def iterate_rounds(
    model: GraphicalModel,
    state: ResampleState,
    rng: RngStream,
    stats: Optional[TraceStats] = None,
    strategy: Optional[ExpandStrategy] = None,
    kappa: KappaFn = compute_kappa,
) -> Iterator[ResampleState]:
    """Yield the state after each round until the resample set is empty."""
    while state.resample_set:
        if strategy is None:
            state = local_resample(model, state, rng, stats, kappa)
        else:
            state = gen_resample(model, state, strategy, rng, stats, kappa)
        yield state


def dynamic_sample(
    model: GraphicalModel,
    state0: ResampleState,
    rng: RngStream,
    budget: Optional[int] = None,
    strategy: Optional[ExpandStrategy] = None,
    kappa: KappaFn = compute_kappa,
    potential: Optional[Callable[[GraphicalModel, frozenset], int]] = None,
) -> tuple[Configuration, TraceStats]:
    """Resample until the resample set empties.

    ``model`` is the post-update model and ``state0`` is ``(X, vbl(D))`` with
    X drawn from the pre-update Gibbs distribution. Raises
    :class:`BudgetExceeded` after ``budget`` rounds.
    """
    if budget is None:
        budget = default_budget(len(state0.resample_set))
    stats = TraceStats()
    if potential is not None:
        stats.per_iteration_potential = [potential(model, state0.resample_set)]
    state = state0
    for state in iterate_rounds(model, state0, rng, stats, strategy, kappa):
        if potential is not None:
            stats.per_iteration_potential.append(potential(model, state.resample_set))
        if state.resample_set and stats.iterations >= budget:
            raise BudgetExceeded(state, stats, budget)
    return state.config, stats


def product_sample(model: GraphicalModel, rng: RngStream) -> Configuration:
    """Draw from the product of the variable factors (the constraint-free Gibbs law)."""
    return tuple(var.sample(rng) for var in model.variables)


def bootstrap_sample(
    model: GraphicalModel,
    rng: RngStream,
    budget: Optional[int] = None,
    strategy: Optional[ExpandStrategy] = None,
) -> tuple[Configuration, TraceStats]:
    """Exact sample of ``model`` obtained by treating the whole constraint set
    as one update applied to the constraint-free model."""
    x0 = product_sample(model, rng)
    R0 = frozenset(v for v in range(model.n) if model.incidence[v])
    return dynamic_sample(model, ResampleState(x0, R0), rng, budget, strategy)


@dataclass(frozen=True)
class PreparedUpdate:
    model: GraphicalModel
    resample_set: frozenset[int]


def prepare_stream(model: GraphicalModel, updates: Sequence[UpdateRequest]) -> list[PreparedUpdate]:
    """Apply the updates in order, keeping each post-update model and its vbl(D)."""
    steps = []
    for update in updates:
        R0 = vbl(model, update)
        model = apply_update(model, update)
        steps.append(PreparedUpdate(model, R0))
    return steps


def run_prepared_stream(
    steps: Sequence[PreparedUpdate],
    x0: Configuration,
    rng: RngStream,
    strategy: Optional[ExpandStrategy] = None,
    budget: Optional[int] = None,
    kappa: KappaFn = compute_kappa,
) -> tuple[Configuration, list[TraceStats]]:
    x = tuple(x0)
    all_stats = []
    for step in steps:
        try:
            x, stats = dynamic_sample(
                step.model, ResampleState(x, step.resample_set), rng, budget, strategy, kappa
            )
        except BudgetExceeded as exc:
            exc.completed_stats = all_stats
            raise
        all_stats.append(stats)
    return x, all_stats


def run_update_stream(
    model: GraphicalModel,
    x0: Configuration,
    updates: Sequence[UpdateRequest],
    strategy: Optional[ExpandStrategy],
    rng: RngStream,
    budget: Optional[int] = None,
) -> tuple[Configuration, list[TraceStats]]:
    """Thread a sample through a stream of updates. ``x0`` must be a sample
    from the Gibbs distribution of ``model``."""
    model.check_config(x0)
    return run_prepared_stream(prepare_stream(model, updates), x0, rng, strategy, budget)
