import math

import pytest
from scipy.optimize import brentq

from dynsampler.convergence import (
    UncoveredVariable,
    check_hardcore_regime,
    check_ising_regime,
    check_soft_condition,
    decay_experiment,
    hardcore_decay_experiment,
    hardcore_threshold,
    ising_beta_threshold,
    ising_decay_experiment,
    ising_decay_rate,
    potential_H,
    potential_H_hardcore,
    set_cover,
    soft_threshold,
    solve_alpha,
)
from dynsampler.factor_graph import GraphicalModel, UpdateRequest, vbl
from dynsampler.instances import chain_model, random_chain_update, regular_graph
from dynsampler.rng import RngStream
from dynsampler.spin_models import (
    HardcoreModel,
    HardcoreUpdate,
    IsingModel,
    PottsModel,
    SpinUpdate,
    hardcore_to_factor_graph,
)

ALPHA = brentq(lambda a: a - 1 - 2 / (1 + math.exp(-1 / a)), 2.0, 3.0, xtol=1e-15)


def ones_model(scopes, n):
    return GraphicalModel.from_factors([(0.5, 0.5)] * n, [(s, (1.0,) * 2 ** len(s)) for s in scopes])


def test_soft_threshold_value():
    assert soft_threshold(3, 0.1) == pytest.approx(math.sqrt(0.775), abs=1e-15)
    assert soft_threshold(3, 0.1) == pytest.approx(0.88034, abs=1e-5)


def test_soft_condition_examples():
    assert check_soft_condition(ones_model([(0, 1), (1, 2)], 3), 0.5).satisfied
    hard = GraphicalModel.from_factors([(0.5, 0.5)] * 2, [((0, 1), (1.0, 0.0, 0.0, 1.0))])
    report = check_soft_condition(hard, 0.2)
    assert not report.satisfied and report.margin < 0
    with pytest.raises(ValueError):
        check_soft_condition(hard, 1.0)


def test_soft_margin_sign_matches_flag():
    for seed in range(20):
        m = chain_model(6, 0.2, RngStream(seed))
        for delta in (0.1, 0.2, 0.5, 0.9):
            r = check_soft_condition(m, delta)
            assert r.satisfied == (r.margin >= 0)


def test_alpha_matches_independent_root():
    alpha = solve_alpha()
    assert abs(alpha - (1 + 2 / (1 + math.exp(-1 / alpha)))) < 1e-10
    assert f"{alpha:.2f}" == "2.22"
    assert alpha == pytest.approx(ALPHA, abs=1e-11)


def test_ising_threshold_delta_three():
    expected = -0.5 * math.log(1 - 1 / (3 * ALPHA + 1))
    assert ising_beta_threshold(3) == pytest.approx(expected, abs=1e-11)
    assert ising_beta_threshold(0) == math.inf


def test_ising_regime_examples():
    assert check_ising_regime(IsingModel(3, {})).satisfied
    tri = {(0, 1), (1, 2), (0, 2)}
    at = ising_beta_threshold(2)
    r = check_ising_regime(IsingModel(3, {e: at for e in tri}))
    assert r.satisfied and r.margin == pytest.approx(0.0, abs=1e-15)
    assert not check_ising_regime(IsingModel(3, {e: 5.0 for e in tri})).satisfied
    assert check_ising_regime(PottsModel(3, 3, {e: 0.1 for e in tri})).condition == "potts"


def test_regime_report_serializes_infinity():
    d = check_ising_regime(IsingModel(2, {})).as_dict()
    assert d["parameters"]["beta_threshold"] is None and d["margin"] is None


def test_hardcore_threshold():
    assert hardcore_threshold(3) == pytest.approx(1 / (3 * math.sqrt(2) - 1), abs=1e-12)
    assert hardcore_threshold(3) == pytest.approx(0.3083906, abs=1e-7)
    hc = HardcoreModel(4, frozenset({(0, 1), (0, 2), (0, 3)}), (1.0,) * 4)
    assert not check_hardcore_regime(hc).satisfied
    assert check_hardcore_regime(HardcoreModel(4, hc.edges, (1e-6,) * 4)).satisfied


def test_decay_rate_positive():
    for Delta in range(1, 60):
        assert ising_decay_rate(solve_alpha(), Delta) > 0


# --- potentials ------------------------------------------------------------------


def test_cover_examples():
    m = ones_model([(0, 1), (1, 2), (2, 3)], 4)
    assert potential_H(m, set()) == 0
    assert potential_H(m, {1, 2}) == 1
    assert potential_H(m, {0, 3}) == 2
    assert potential_H(m, {0, 1, 2, 3}) == 2


def test_cover_requires_incident_constraint():
    m = ones_model([(0, 1)], 3)
    with pytest.raises(UncoveredVariable):
        potential_H(m, {2})


def test_greedy_fallback_flagged():
    n = 30
    m = ones_model([(i, i + 1) for i in range(n - 1)], n)
    c = set_cover(m, set(range(n)))
    assert not c.exact and c.size >= 15


def test_greedy_not_below_exact():
    # greedy picks the big triple first and then needs two more
    scopes = [(0, 1, 2), (3, 4), (0, 3), (1, 4), (2, 5)]
    m = GraphicalModel.from_factors([(0.5, 0.5)] * 6, [(s, (1.0,) * 2 ** len(s)) for s in scopes])
    from dynsampler.convergence import _greedy_cover

    R = set(range(6))
    candidates = {cid: frozenset(c.scope) for cid, c in m.constraints.items()}
    assert len(_greedy_cover(R, candidates)) >= set_cover(m, R).size == 3


def test_cover_at_most_update_size():
    base = chain_model(30, 0.2, RngStream(1))
    for k in (1, 3, 7):
        for seed in range(10):
            up = random_chain_update(base, k, 0.2, RngStream(seed))
            assert potential_H(base, vbl(base, up)) <= k


def test_hardcore_potential_examples():
    hc = HardcoreModel(4, frozenset({(0, 1), (1, 2), (0, 2), (2, 3)}), (0.1,) * 4)
    assert potential_H_hardcore(hc, set()) == 0
    assert potential_H_hardcore(hc, {2, 3}) == 1
    assert potential_H_hardcore(hc, {0, 1, 2}) == 3
    assert potential_H_hardcore(hardcore_to_factor_graph(hc), {0, 1, 2}) == 3


# --- decay ----------------------------------------------------------------------------


def test_decay_trivial_tables():
    m = ones_model([(0, 1), (1, 2)], 3)
    up = UpdateRequest((), (((0, 1), (1.0,) * 4),))
    r = decay_experiment(m, up, 200, RngStream(0), 0.2)
    assert r.empirical_ratio == 0.0 and r.satisfied


def test_decay_soft_chain():
    base = chain_model(40, 0.2, RngStream(2))
    up = random_chain_update(base, 5, 0.2, RngStream(3))
    r = decay_experiment(base, up, 2000, RngStream(4), 0.2)
    assert r.satisfied and r.exact
    d = r.as_dict()
    assert set(d) == {"condition", "satisfied", "margin", "empirical_ratio", "bound", "stderr", "trials"}


def test_decay_hardcore():
    edges = regular_graph(20, 3, 7)
    hc = HardcoreModel(20, frozenset(edges[2:]), (hardcore_threshold(3),) * 20)
    r = hardcore_decay_experiment(hc, HardcoreUpdate(add_edges=frozenset(edges[:2])), 2000, RngStream(5))
    assert r.bound == pytest.approx(5 / 6) and r.satisfied


def test_decay_ising():
    edges = regular_graph(20, 3, 8)
    beta = ising_beta_threshold(3)
    pre = IsingModel(20, {e: beta for e in edges[3:]})
    up = SpinUpdate({e: -beta for e in edges[:3]})
    r = ising_decay_experiment(pre, up, 2000, RngStream(6))
    assert r.bound == pytest.approx(1 - ising_decay_rate(ALPHA, 3))
    assert r.satisfied


def test_decay_rejects_empty_update():
    with pytest.raises(ValueError):
        decay_experiment(ones_model([(0, 1)], 2), UpdateRequest(), 10, RngStream(0), 0.2)
