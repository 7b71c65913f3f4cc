"""Regime checks and potential-function diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .engine import ResampleState, local_resample, product_sample
from .factor_graph import (
    GraphicalModel,
    UpdateRequest,
    apply_update,
    dependency_degree,
    incident_constraints,
    vbl,
)
from .rng import RngStream
from .spin_models import (
    HardcoreModel,
    HardcoreUpdate,
    PottsModel,
    SpinUpdate,
    apply_hardcore_update,
    apply_spin_update,
    hardcore_bootstrap_sample,
    hardcore_potential,
    hardcore_round,
    spin_bootstrap_sample,
    spin_round,
    spin_to_factor_graph,
    targets_to_vertices,
)

EXACT_COVER_LIMIT = 20


class UncoveredVariable(ValueError):
    pass


@dataclass
class RegimeReport:
    condition: str
    satisfied: bool
    margin: float
    parameters: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "satisfied": self.satisfied,
            "margin": _finite_or_none(self.margin),
            "parameters": {k: _finite_or_none(v) for k, v in self.parameters.items()},
        }


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def soft_threshold(d: int, delta: float) -> float:
    """Smallest admissible table lower bound for dependency degree ``d``."""
    return math.sqrt(1 - (1 - delta) / (d + 1))


def check_soft_condition(model: GraphicalModel, delta: float) -> RegimeReport:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    d = dependency_degree(model)
    threshold = soft_threshold(d, delta)
    b_min = min((c.lower_bound for c in model.constraints.values()), default=1.0)
    margin = b_min - threshold
    return RegimeReport(
        "soft", margin >= 0, margin, {"d": d, "delta": delta, "threshold": threshold, "B_min": b_min}
    )


def solve_alpha(tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Root of alpha = 1 + 2 / (1 + exp(-1/alpha)) by fixed-point iteration.

    The map is a contraction on [2, 3] (derivative below 0.1 there).
    """
    alpha = 2.5
    for _ in range(max_iter):
        nxt = 1 + 2 / (1 + math.exp(-1 / alpha))
        if abs(nxt - alpha) < tol:
            return nxt
        alpha = nxt
    raise RuntimeError("fixed-point iteration for alpha did not converge")


def ising_decay_rate(alpha: float, max_degree: int) -> float:
    return 1 / (alpha * (1 + math.exp(-1 / alpha)) * (alpha * max_degree + 1))


def ising_beta_threshold(max_degree: int, alpha: Optional[float] = None) -> float:
    """Largest |beta| with exp(-2|beta|) >= 1 - 1/(alpha*Delta + 1)."""
    if max_degree == 0:
        return math.inf
    alpha = solve_alpha() if alpha is None else alpha
    return -0.5 * math.log(1 - 1 / (alpha * max_degree + 1))


def check_ising_regime(model: PottsModel) -> RegimeReport:
    """Also used for Potts models, which share the bound."""
    alpha = solve_alpha()
    Delta = model.max_degree
    beta_star = max((abs(b) for b in model.couplings.values()), default=0.0)
    threshold = ising_beta_threshold(Delta, alpha)
    margin = threshold - beta_star
    return RegimeReport(
        "ising" if model.q == 2 else "potts",
        margin >= 0,
        margin,
        {"Delta": Delta, "beta_star": beta_star, "alpha": alpha, "beta_threshold": threshold},
    )


def hardcore_threshold(max_degree: int) -> float:
    if max_degree == 0:
        return math.inf
    return 1 / (math.sqrt(2) * max_degree - 1)


def check_hardcore_regime(model: HardcoreModel) -> RegimeReport:
    Delta = model.max_degree
    lam_max = max(model.fugacity, default=0.0)
    threshold = hardcore_threshold(Delta)
    margin = threshold - lam_max
    return RegimeReport(
        "hardcore", margin >= 0, margin, {"Delta": Delta, "lambda_max": lam_max, "lambda_threshold": threshold}
    )


# --- potential functions ----------------------------------------------------


class Cover(NamedTuple):
    size: int
    exact: bool
    constraints: tuple[int, ...]


def _greedy_cover(R: set, candidates: dict) -> list[int]:
    uncovered = set(R)
    chosen = []
    while uncovered:
        best = max(sorted(candidates), key=lambda c: len(candidates[c] & uncovered))
        chosen.append(best)
        uncovered -= candidates[best]
    return chosen


def _exact_cover(R: set, candidates: dict, upper: list[int]) -> list[int]:
    best = list(upper)
    covering = {v: [c for c in sorted(candidates) if v in candidates[c]] for v in R}

    def search(uncovered: frozenset, chosen: list):
        nonlocal best
        if not uncovered:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        if len(chosen) + 1 >= len(best):
            return
        # branch on the uncovered variable with the fewest options
        v = min(uncovered, key=lambda u: (len(covering[u]), u))
        for c in covering[v]:
            chosen.append(c)
            search(uncovered - candidates[c], chosen)
            chosen.pop()

    search(frozenset(R), [])
    return best


def set_cover(model: GraphicalModel, R) -> Cover:
    """Minimum number of constraints whose scopes cover ``R``.

    Exact branch and bound when at most 20 constraints touch R, otherwise a
    greedy upper bound flagged ``exact=False``.
    """
    R = set(R)
    if not R:
        return Cover(0, True, ())
    for v in R:
        if not model.incidence[v]:
            raise UncoveredVariable(f"variable {v} lies in no constraint")
    candidates = {cid: frozenset(model.constraints[cid].scope) & R for cid in incident_constraints(model, R)}
    greedy = _greedy_cover(R, candidates)
    if len(candidates) > EXACT_COVER_LIMIT:
        return Cover(len(greedy), False, tuple(sorted(greedy)))
    best = _exact_cover(R, candidates, greedy)
    return Cover(len(best), True, tuple(sorted(best)))


def potential_H(model: GraphicalModel, R) -> int:
    return set_cover(model, R).size


def potential_H_hardcore(model, R) -> int:
    """Internal edge count of R. Accepts a HardcoreModel or a pairwise GraphicalModel."""
    if isinstance(model, HardcoreModel):
        return hardcore_potential(model, R)
    R = set(R)
    return sum(
        1 for cid in incident_constraints(model, R) if R.issuperset(model.constraints[cid].scope)
    )


# --- decay experiments --------------------------------------------------------


@dataclass
class DecayReport:
    condition: str
    initial_potential: int
    empirical_ratio: float
    bound: float
    stderr: float
    trials: int
    exact: bool = True

    @property
    def satisfied(self) -> bool:
        return self.empirical_ratio <= self.bound + 3 * self.stderr

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "satisfied": self.satisfied,
            "margin": self.bound + 3 * self.stderr - self.empirical_ratio,
            "empirical_ratio": self.empirical_ratio,
            "bound": self.bound,
            "stderr": self.stderr,
            "trials": self.trials,
        }


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((x - mean) ** 2 for x in values) / (n - 1)
    return mean, math.sqrt(var / n)


def decay_experiment(
    model: GraphicalModel,
    update: UpdateRequest,
    trials: int,
    rng: RngStream,
    delta: float,
    x0=None,
) -> DecayReport:
    """Estimate E[H(R')]/H(R0) for one resampling round from R0 = vbl(D).

    The one-step bound holds for every starting configuration, so each trial
    starts from ``x0`` or a fresh draw from the product of variable factors.
    """
    post = apply_update(model, update)
    R0 = vbl(model, update)
    cover0 = set_cover(post, R0)
    if cover0.size == 0:
        raise ValueError("the update touches no variables")
    values = []
    exact = cover0.exact
    for i in range(trials):
        sub = rng.split("trial", i)
        x = x0 if x0 is not None else product_sample(post, sub)
        new = local_resample(post, ResampleState(tuple(x), R0), sub)
        cover = set_cover(post, new.resample_set)
        exact = exact and cover.exact
        values.append(cover.size)
    mean, se = _mean_stderr(values)
    return DecayReport("soft", cover0.size, mean / cover0.size, 1 - delta, se / cover0.size, trials, exact)


def hardcore_decay_experiment(
    hc: HardcoreModel,
    update: HardcoreUpdate,
    trials: int,
    rng: RngStream,
) -> DecayReport:
    """Estimate E[H_HC(R')]/H_HC(R0) for one round of the hardcore sampler.

    Each trial draws an exact sample of the pre-update model, so the starting
    pair is conditionally Gibbs as the bound requires.
    """
    post = apply_hardcore_update(hc, update)
    R0 = targets_to_vertices(update.targets())
    h0 = hardcore_potential(post, R0)
    if h0 == 0:
        raise ValueError("initial resample set spans no edge")
    values = []
    for i in range(trials):
        sub = rng.split("trial", i)
        x, _ = hardcore_bootstrap_sample(hc, sub)
        x = list(x)
        new_R = hardcore_round(post, x, R0, sub)
        values.append(hardcore_potential(post, new_R))
    mean, se = _mean_stderr(values)
    bound = 1 - 1 / (2 * post.max_degree)
    return DecayReport("hardcore", h0, mean / h0, bound, se / h0, trials)


def ising_decay_experiment(
    model: PottsModel,
    update: SpinUpdate,
    trials: int,
    rng: RngStream,
) -> DecayReport:
    """Estimate E[H(R')]/H(R0) for one round of the Ising/Potts sampler,
    against the bound 1 - delta(alpha, Delta).

    H is the set-cover potential on the edges of the updated model. Each trial
    starts from a fresh exact sample of the pre-update model.
    """
    post = apply_spin_update(model, update)
    fg = spin_to_factor_graph(post)
    R0 = targets_to_vertices(update.targets())
    cover0 = set_cover(fg, R0)
    if cover0.size == 0:
        raise ValueError("the update touches no variables")
    values = []
    exact = cover0.exact
    for i in range(trials):
        sub = rng.split("trial", i)
        x, _ = spin_bootstrap_sample(model, sub)
        x = list(x)
        cover = set_cover(fg, spin_round(post, x, R0, sub))
        exact = exact and cover.exact
        values.append(cover.size)
    mean, se = _mean_stderr(values)
    bound = 1 - ising_decay_rate(solve_alpha(), post.max_degree)
    return DecayReport(
        "ising" if post.q == 2 else "potts", cover0.size, mean / cover0.size, bound, se / cover0.size, trials, exact
    )
