import itertools
import json
import math

import numpy as np
import pytest

from dynsampler.engine import ResampleState, compute_kappa, unit_kappa
from dynsampler.factor_graph import GraphicalModel, UpdateRequest, apply_update, vbl
from dynsampler.instances import random_soft_model, soft_instance_e
from dynsampler.oracle import (
    EmpiricalDistribution,
    StateSpaceTooLarge,
    SupportMismatch,
    ZeroPartition,
    bucket_laws,
    chi_square,
    collect_snapshots,
    conditional_gibbs_test,
    conditional_marginal,
    exact_chain,
    exact_gibbs,
    noise_scale,
    tvd,
)
from dynsampler.rng import RngStream

EQUALITY = (1.0, 0.0, 0.0, 1.0)


def small_model():
    return GraphicalModel.from_factors(
        [(0.3, 0.7), (0.5, 0.5), (0.2, 0.3, 0.5), (0.6, 0.4)],
        [((0, 1), (1.0, 0.4, 0.5, 0.8)), ((1, 2, 3), tuple(0.3 + 0.05 * i for i in range(12))), ((0, 3), (0.9, 1.0, 0.2, 0.6))],
    )


def test_constraint_free_is_product():
    m = GraphicalModel.from_factors([(0.2, 0.8), (0.1, 0.6, 0.3)], [])
    p = exact_gibbs(m)
    assert p.probs == pytest.approx(np.outer([0.2, 0.8], [0.1, 0.6, 0.3]).ravel(), abs=1e-15)
    assert p.Z == pytest.approx(1.0)


def test_hardcore_single_edge_enumeration():
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 2, [((0, 1), (1.0, 1.0, 1.0, 0.0))])
    assert exact_gibbs(m).probs == pytest.approx([1 / 3, 1 / 3, 1 / 3, 0.0], abs=1e-15)


def test_probabilities_sum_to_one():
    p = exact_gibbs(small_model())
    assert abs(p.probs.sum() - 1) < 1e-9 and (p.probs >= 0).all()


def test_state_space_limit():
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 23, [])
    with pytest.raises(StateSpaceTooLarge):
        exact_gibbs(m)


def test_zero_partition():
    neq = (0.0, 1.0, 1.0, 0.0)
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 3, [((0, 1), EQUALITY), ((1, 2), EQUALITY), ((0, 2), neq)])
    with pytest.raises(ZeroPartition):
        exact_gibbs(m)


def test_index_and_state_roundtrip():
    p = exact_gibbs(small_model())
    for i in range(p.size):
        assert p.index(p.state(i)) == i
    assert p.state(1) == (0, 0, 0, 1)


def test_sampling_matches_probs():
    p = exact_gibbs(small_model())
    rng = RngStream(1)
    N = 20_000
    emp = EmpiricalDistribution.from_samples(p.shape, (p.sample(rng) for _ in range(N)))
    assert emp.total == N
    assert tvd(emp, p) < 3 * noise_scale(p.size, N)


# --- conditional marginals ----------------------------------------------------------


def test_marginal_on_everything_is_gibbs():
    m = small_model()
    assert tvd(conditional_marginal(m, range(m.n), {}), exact_gibbs(m)) < 1e-15


def test_marginal_on_nothing_is_point_mass():
    m = small_model()
    p = conditional_marginal(m, (), {0: 1, 1: 0, 2: 2, 3: 1})
    assert p.size == 1 and p.probs[0] == 1.0


def test_degenerate_boundary_flagged():
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 3, [((0, 1), EQUALITY), ((1, 2), EQUALITY)])
    # x0 = 0 and x2 = 1 leave no value for x1
    p = conditional_marginal(m, (1,), {0: 0, 2: 1})
    assert p.degenerate and p.probs.sum() == 0.0
    assert not conditional_marginal(m, (1,), {0: 1, 2: 1}).degenerate


def test_marginal_is_renormalized_slice_exhaustively():
    m = small_model()
    full = exact_gibbs(m)
    for r in range(1, m.n):
        for R in itertools.combinations(range(m.n), r):
            S = tuple(v for v in range(m.n) if v not in R)
            for tau in itertools.product(*(range(m.variables[v].q) for v in R)):
                boundary = dict(zip(R, tau))
                target = conditional_marginal(m, S, boundary)
                # slice of the joint law
                sl = np.zeros(target.size)
                for i in range(full.size):
                    x = full.state(i)
                    if all(x[v] == t for v, t in boundary.items()):
                        sl[target.index([x[v] for v in S])] += full.probs[i]
                assert sl.sum() > 0
                assert tvd(sl / sl.sum(), target) < 1e-12


# --- distances --------------------------------------------------------------------


def test_tvd_examples():
    assert tvd([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert tvd([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert tvd([0.5, 0.5], [0.6, 0.4]) == pytest.approx(0.1)
    with pytest.raises(SupportMismatch):
        tvd([1.0], [0.5, 0.5])


def test_noise_scale_value():
    assert noise_scale(81, 200_000) == pytest.approx(math.sqrt(81 / (2 * math.pi * 200_000)))


def test_chi_square():
    p = exact_gibbs(small_model())
    rng = RngStream(2)
    emp = EmpiricalDistribution.from_samples(p.shape, (p.sample(rng) for _ in range(20_000)))
    stat, pval = chi_square(emp, p)
    assert pval > 1e-3
    bad = EmpiricalDistribution(p.shape, np.roll(emp.counts, 5))
    assert chi_square(bad, p)[1] < 1e-6


def test_chi_square_impossible_state():
    p = exact_gibbs(GraphicalModel.from_factors([(0.5, 0.5)] * 2, [((0, 1), EQUALITY)]))
    assert chi_square(EmpiricalDistribution(p.shape, np.array([5, 1, 0, 5])), p) == (math.inf, 0.0)


# --- conditional Gibbs property --------------------------------------------------------


def three_cycle_soft(seed=5):
    return random_soft_model(3, [(0, 1), (1, 2), (0, 2)], 0.2, RngStream(seed))


def test_round_zero_buckets_trivially_pass():
    post = three_cycle_soft()
    c = post.constraints[2]
    pre = apply_update(post, UpdateRequest((), ((c.scope, (1.0,) * 4),)))
    update = UpdateRequest((), ((c.scope, c.table),))
    snaps = collect_snapshots(pre, update, 5000, (0,), RngStream(3))
    report = conditional_gibbs_test(post, snaps[0])
    assert report.passed
    assert all(b.resample_set == (0, 2) for b in report.buckets)


def test_three_cycle_round_one_within_noise():
    post = three_cycle_soft()
    c = post.constraints[2]
    pre = apply_update(post, UpdateRequest((), ((c.scope, (1.0,) * 4),)))
    snaps = collect_snapshots(pre, UpdateRequest((), ((c.scope, c.table),)), 40_000, (1,), RngStream(4))
    report = conditional_gibbs_test(post, snaps[1])
    assert report.buckets
    for b in report.buckets:
        assert b.tvd < 3 * b.noise


def test_report_json_and_summary():
    post = three_cycle_soft()
    c = post.constraints[2]
    pre = apply_update(post, UpdateRequest((), ((c.scope, (1.0,) * 4),)))
    snaps = collect_snapshots(pre, UpdateRequest((), ((c.scope, c.table),)), 3000, (1,), RngStream(5))
    report = conditional_gibbs_test(post, snaps[1])
    data = json.loads(report.to_json())
    assert set(data) >= {"passed", "max_tvd", "buckets", "buckets_skipped", "samples_skipped"}
    assert data["buckets_skipped"] + len(data["buckets"]) >= 1
    assert sum(b["count"] for b in data["buckets"]) + data["samples_skipped"] == 3000
    assert report.summary().split()[0] in ("PASS", "FAIL")
    assert "max_tvd=" in report.summary()


def test_small_buckets_skipped_not_tested():
    post = three_cycle_soft()
    snaps = [ResampleState((0, 1, 0), frozenset({0}))] * 10
    report = conditional_gibbs_test(post, snaps)
    assert report.buckets == [] and report.skipped == 1 and report.skipped_samples == 10


def test_degenerate_bucket_counted():
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 3, [((0, 1), EQUALITY), ((1, 2), EQUALITY)])
    snaps = [ResampleState((0, 0, 1), frozenset({0, 2}))] * 600
    report = conditional_gibbs_test(m, snaps)
    assert report.degenerate_hits == 1 and not report.passed


# --- exact resampling chain ----------------------------------------------------------


def exact_setup():
    start, updates = soft_instance_e()
    pre = apply_update(apply_update(start, updates[0]), updates[1])
    post = apply_update(pre, updates[2])
    return pre, post, vbl(pre, updates[2])


def test_exact_chain_conserves_mass():
    pre, post, R0 = exact_setup()
    for dist in exact_chain(post, exact_gibbs(pre), R0, 3):
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_exact_chain_is_conditionally_gibbs():
    pre, post, R0 = exact_setup()
    for t, dist in enumerate(exact_chain(post, exact_gibbs(pre), R0, 3)):
        for mass, law, target in bucket_laws(post, dist).values():
            assert tvd(law, target) < 1e-12, t


def test_exact_chain_converges_to_gibbs():
    pre, post, R0 = exact_setup()
    dist = exact_chain(post, exact_gibbs(pre), R0, 3)[-1]
    done = {x: p for (x, R), p in dist.items() if not R}
    mass = sum(done.values())
    target = exact_gibbs(post)
    law = np.zeros(target.size)
    for x, p in done.items():
        law[target.index(x)] += p / mass
    assert tvd(law, target) < 1e-12


def test_exact_chain_mutant_is_biased():
    pre, post, R0 = exact_setup()
    worst = 0.0
    for dist in exact_chain(post, exact_gibbs(pre), R0, 3, unit_kappa)[1:]:
        for mass, law, target in bucket_laws(post, dist).values():
            if mass > 0.01:
                worst = max(worst, tvd(law, target))
    assert worst > 0.05


def test_exact_chain_three_cycle_hard_constraint():
    # a hard constraint exercises the 0/0 convention
    post = GraphicalModel.from_factors(
        [(0.5, 0.5), (0.4, 0.6), (0.7, 0.3)],
        [((0, 1), (1.0, 0.3, 0.3, 1.0)), ((1, 2), (1.0, 1.0, 1.0, 0.0)), ((0, 2), (0.6, 1.0, 1.0, 0.6))],
    )
    pre = apply_update(post, UpdateRequest((), (((1, 2), (1.0,) * 4),)))
    R0 = frozenset({1, 2})
    for dist in exact_chain(post, exact_gibbs(pre), R0, 4, compute_kappa):
        for mass, law, target in bucket_laws(post, dist).values():
            assert tvd(law, target) < 1e-12
