"""Brute-force ground truth: exact Gibbs enumeration, conditional marginals,
distances between distributions and the conditional-Gibbs bucket test."""
from __future__ import annotations

import bisect
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .engine import (
    KappaFn,
    ResampleState,
    compute_kappa,
    local_resample,
)
from .factor_graph import GraphicalModel, UpdateRequest, apply_update, vbl
from .rng import RngStream

MAX_STATES = 2**22
MIN_BUCKET = 500


class StateSpaceTooLarge(ValueError):
    pass


class ZeroPartition(ValueError):
    pass


class SupportMismatch(ValueError):
    pass


@dataclass
class ExactDistribution:
    """Probability vector over ``[q]^variables`` in state-index order."""

    variables: tuple[int, ...]
    shape: tuple[int, ...]
    probs: np.ndarray
    Z: float
    degenerate: bool = False
    _cum: Optional[list] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.probs)

    def index(self, values: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(values), self.shape)) if self.shape else 0

    def state(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape)) if self.shape else ()

    def prob(self, values: Sequence[int]) -> float:
        return float(self.probs[self.index(values)])

    def sample_index(self, rng) -> int:
        if self._cum is None:
            self._cum = np.cumsum(self.probs).tolist()
        i = bisect.bisect_right(self._cum, rng.random() * self._cum[-1])
        return min(i, self.size - 1)

    def sample(self, rng) -> tuple[int, ...]:
        return self.state(self.sample_index(rng))


@dataclass
class EmpiricalDistribution:
    shape: tuple[int, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probs(self) -> np.ndarray:
        return self.counts / max(self.total, 1)

    @classmethod
    def from_samples(cls, shape: Sequence[int], samples: Iterable[Sequence[int]]) -> "EmpiricalDistribution":
        shape = tuple(shape)
        counts = np.zeros(math.prod(shape), dtype=np.int64)
        for s in samples:
            counts[np.ravel_multi_index(tuple(s), shape) if shape else 0] += 1
        return cls(shape, counts)


def _check_size(shape: Sequence[int]) -> None:
    if math.prod(shape) > MAX_STATES:
        raise StateSpaceTooLarge(f"state space of size {math.prod(shape)} exceeds {MAX_STATES}")


def _factor_array(c, positions: Mapping[int, int], ndim: int, fixed: Mapping[int, int]) -> np.ndarray:
    """Broadcastable array of a constraint table over the free axes.

    ``positions`` maps free variables to output axes, ``fixed`` pins the others.
    """
    arr = np.asarray(c.table).reshape(c.shape)
    index = tuple(fixed[v] if v in fixed else slice(None) for v in c.scope)
    arr = arr[index]
    free = [v for v in c.scope if v not in fixed]
    order = sorted(range(len(free)), key=lambda i: positions[free[i]])
    arr = np.transpose(arr, order)
    shape = [1] * ndim
    for i in order:
        shape[positions[free[i]]] = c.shape[c.scope.index(free[i])]
    return arr.reshape(shape)


def _weights(model: GraphicalModel, S: Sequence[int], tau: Mapping[int, int]) -> np.ndarray:
    S = sorted(S)
    shape = tuple(model.variables[v].q for v in S)
    _check_size(shape)
    positions = {v: i for i, v in enumerate(S)}
    w = np.ones(shape, dtype=float)
    for v in S:
        vshape = [1] * len(S)
        vshape[positions[v]] = model.variables[v].q
        w = w * np.asarray(model.variables[v].weights).reshape(vshape)
    inS = set(S)
    for c in model.constraints.values():
        if inS.isdisjoint(c.scope):
            continue
        w = w * _factor_array(c, positions, len(S), tau)
    return w


def exact_gibbs(model: GraphicalModel) -> ExactDistribution:
    w = _weights(model, range(model.n), {})
    Z = float(w.sum())
    if Z <= 0:
        raise ZeroPartition("partition function is zero")
    return ExactDistribution(tuple(range(model.n)), w.shape, (w / Z).ravel(), Z)


def conditional_marginal(
    model: GraphicalModel, S: Iterable[int], tau: Mapping[int, int]
) -> ExactDistribution:
    """Marginal Gibbs law on ``S`` given the boundary condition ``tau`` on the
    rest, built from the variable factors on ``S`` and every constraint that
    meets ``S``. A zero total weight yields a flagged all-zero vector."""
    S = tuple(sorted(S))
    w = _weights(model, S, tau)
    Z = float(w.sum())
    if Z <= 0:
        return ExactDistribution(S, w.shape, np.zeros(w.size), 0.0, degenerate=True)
    return ExactDistribution(S, w.shape, (w / Z).ravel(), Z)


def _as_probs(p) -> np.ndarray:
    if isinstance(p, (ExactDistribution, EmpiricalDistribution)):
        return np.asarray(p.probs, dtype=float)
    return np.asarray(p, dtype=float)


def tvd(p, q) -> float:
    a, b = _as_probs(p), _as_probs(q)
    if a.shape != b.shape:
        raise SupportMismatch(f"supports of size {a.size} and {b.size}")
    return float(0.5 * np.abs(a - b).sum())


def noise_scale(states: int, samples: int) -> float:
    """Typical TVD between an empirical law from ``samples`` draws and the truth."""
    return math.sqrt(states / (2 * math.pi * max(samples, 1)))


def chi_square(empirical: EmpiricalDistribution, exact: ExactDistribution) -> tuple[float, float]:
    """Pearson statistic and p-value over states with positive expected count."""
    n = empirical.total
    expected = exact.probs * n
    keep = expected > 0
    if (empirical.counts[~keep] > 0).any():
        return math.inf, 0.0
    obs = empirical.counts[keep]
    if keep.sum() < 2:
        return 0.0, 1.0
    stat, p = sps.chisquare(obs, expected[keep] * obs.sum() / expected[keep].sum())
    return float(stat), float(p)


# --- conditional Gibbs bucket test ---------------------------------------


def collect_snapshots(
    pre_model: GraphicalModel,
    update: UpdateRequest,
    trials: int,
    rounds: Sequence[int],
    rng: RngStream,
    kappa: KappaFn = compute_kappa,
    initial: Optional[ExactDistribution] = None,
) -> dict[int, list[ResampleState]]:
    """Run the resampling chain on the updated model from an exact sample of
    ``pre_model`` and record the state after each round in ``rounds``.

    Runs that stop early keep their final state (empty resample set).
    """
    post_model = apply_update(pre_model, update)
    R0 = vbl(pre_model, update)
    if initial is None:
        initial = exact_gibbs(pre_model)
    last = max(rounds)
    wanted = set(rounds)
    out = {t: [] for t in rounds}
    for i in range(trials):
        sub = rng.split("trial", i)
        state = ResampleState(initial.sample(sub), R0)
        if 0 in wanted:
            out[0].append(state)
        for t in range(1, last + 1):
            state = local_resample(post_model, state, sub, None, kappa)
            if t in wanted:
                out[t].append(state)
    return out


@dataclass
class BucketResult:
    resample_set: tuple[int, ...]
    boundary: tuple[int, ...]
    count: int
    tvd: float
    noise: float

    def as_dict(self) -> dict:
        return {
            "R": list(self.resample_set),
            "X_R": list(self.boundary),
            "count": self.count,
            "tvd": self.tvd,
            "noise": self.noise,
        }


@dataclass
class ConditionalGibbsReport:
    buckets: list[BucketResult]
    skipped: int
    skipped_samples: int
    tolerance: float
    degenerate_hits: int = 0

    @property
    def max_tvd(self) -> float:
        return max((b.tvd for b in self.buckets), default=0.0)

    @property
    def passed(self) -> bool:
        return self.degenerate_hits == 0 and self.max_tvd <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_tvd": self.max_tvd,
            "tolerance": self.tolerance,
            "buckets_tested": len(self.buckets),
            "buckets_skipped": self.skipped,
            "samples_skipped": self.skipped_samples,
            "degenerate_hits": self.degenerate_hits,
            "buckets": [b.as_dict() for b in self.buckets],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} conditional-gibbs max_tvd={self.max_tvd:.4f} tol={self.tolerance} "
            f"buckets={len(self.buckets)} skipped={self.skipped}"
        )


def conditional_gibbs_test(
    model: GraphicalModel,
    snapshots: Iterable[ResampleState],
    min_bucket: int = MIN_BUCKET,
    tolerance: float = 0.05,
) -> ConditionalGibbsReport:
    """Bucket snapshots by (R, X_R) and compare the law of X outside R with the
    conditional marginal. Buckets smaller than ``min_bucket`` are skipped."""
    buckets = defaultdict(list)
    for st in snapshots:
        R = tuple(sorted(st.resample_set))
        buckets[(R, tuple(st.config[v] for v in R))].append(st.config)
    results = []
    skipped = skipped_samples = degenerate = 0
    for (R, tau_vals), configs in sorted(buckets.items()):
        if len(configs) < min_bucket:
            skipped += 1
            skipped_samples += len(configs)
            continue
        S = tuple(v for v in range(model.n) if v not in set(R))
        target = conditional_marginal(model, S, dict(zip(R, tau_vals)))
        if target.degenerate:
            # a reachable bucket must have a well-defined marginal
            degenerate += 1
            continue
        emp = EmpiricalDistribution.from_samples(target.shape, ([x[v] for v in S] for x in configs))
        results.append(
            BucketResult(R, tau_vals, len(configs), tvd(emp, target), noise_scale(target.size, len(configs)))
        )
    return ConditionalGibbsReport(results, skipped, skipped_samples, tolerance, degenerate)


# --- exact resampling chain ---------------------------------------------------


def exact_round(
    model: GraphicalModel,
    dist: Mapping[tuple, float],
    kappa: KappaFn = compute_kappa,
) -> dict[tuple, float]:
    """Push a distribution over pairs (X, R) through one exact resampling round.

    Keys are ``(config, frozenset R)``. Pairs with empty R are absorbing.
    """
    out = defaultdict(float)
    for (x, R), p in dist.items():
        if p == 0.0:
            continue
        if not R:
            out[(x, R)] += p
            continue
        order = sorted(R)
        touched = sorted({cid for v in order for cid in model.incidence[v]})
        kappas = [kappa(model, x, R, cid) for cid in touched]
        for values in itertools.product(*(range(model.variables[v].q) for v in order)):
            py = p
            y = list(x)
            for v, val in zip(order, values):
                y[v] = val
                py *= model.variables[v].weights[val]
            if py == 0.0:
                continue
            keep = [k * model.constraints[cid].value(y) for cid, k in zip(touched, kappas)]
            y = tuple(y)
            for fails in itertools.product((False, True), repeat=len(touched)):
                pf = py
                new_R = set()
                for cid, f, k in zip(touched, fails, keep):
                    if f:
                        pf *= 1 - k
                        new_R.update(model.constraints[cid].scope)
                    else:
                        pf *= k
                if pf > 0.0:
                    out[(y, frozenset(new_R))] += pf
    return dict(out)


def exact_chain(
    model: GraphicalModel,
    initial: ExactDistribution,
    R0: frozenset,
    rounds: int,
    kappa: KappaFn = compute_kappa,
) -> list[dict[tuple, float]]:
    """Exact laws of (X, R) after rounds 0..rounds, starting from X ~ initial, R = R0."""
    dist = {}
    for i, p in enumerate(initial.probs):
        if p > 0:
            dist[(initial.state(i), frozenset(R0))] = float(p)
    out = [dist]
    for _ in range(rounds):
        dist = exact_round(model, dist, kappa)
        out.append(dist)
    return out


def bucket_laws(
    model: GraphicalModel, dist: Mapping[tuple, float]
) -> dict[tuple, tuple[float, ExactDistribution, ExactDistribution]]:
    """Group an exact (X, R) law by (R, X_R).

    Returns ``{(R, X_R): (mass, conditional law of X outside R, target marginal)}``.
    """
    grouped = defaultdict(dict)
    for (x, R), p in dist.items():
        Rs = tuple(sorted(R))
        grouped[(Rs, tuple(x[v] for v in Rs))][x] = grouped[(Rs, tuple(x[v] for v in Rs))].get(x, 0.0) + p
    out = {}
    for (Rs, tau), configs in grouped.items():
        S = tuple(v for v in range(model.n) if v not in set(Rs))
        target = conditional_marginal(model, S, dict(zip(Rs, tau)))
        mass = sum(configs.values())
        probs = np.zeros(target.size)
        for x, p in configs.items():
            probs[target.index([x[v] for v in S]) if S else 0] += p / mass
        law = ExactDistribution(S, target.shape, probs, mass)
        out[(Rs, tau)] = (mass, law, target)
    return out
