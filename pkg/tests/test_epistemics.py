import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratanalogy import catalog as cat
from stratanalogy.analogy import pushforward_prior, transfer_equilibrium
from stratanalogy.core import Prior, StrategyProfile, find_pure_bne
from stratanalogy.epistemics import (
    AwarenessProfile,
    ComparisonUniverse,
    KnowledgeStructure,
    Link,
    PayoffComparison,
    PayoffEquivalence,
    PayoffSituation,
    check_ck_equilibrium,
    close_comparisons,
    comparison_truth,
    equilibrium_comparison_universe,
    is_closed_under,
    is_common_knowledge,
    knows,
    link_image,
    profile_key,
    transfer_knowledge,
    validity_probe,
)
from stratanalogy.errors import InvalidInputError
from stratanalogy.experiments import ck_instance, cubing_instance, example1_instance, kpa_pair, validity_universe

from .helpers import random_pair


def situation(mech, agent, t, prof):
    return PayoffSituation.make(mech.name, agent, t, prof)


def comparison(mech, agent, t, left, right):
    return PayoffComparison(situation(mech, agent, t, left), situation(mech, agent, t, right))


# basic types

def test_profile_key_is_canonical():
    assert profile_key(("a", "b")) == profile_key({("a", "b"): 1.0})
    assert profile_key({("x",): 0.5, ("y",): 0.5}) == profile_key({("y",): 0.5, ("x",): 0.5, ("z",): 0.0})


def test_comparison_needs_one_head():
    _, X1, _, _ = example1_instance()
    with pytest.raises(InvalidInputError):
        PayoffComparison(situation(X1, 1, 1, ("yes", "no")), situation(X1, 1, -1, ("no", "no")))
    with pytest.raises(InvalidInputError):
        PayoffEquivalence(situation(X1, 1, 1, ("yes", "no")), situation(X1, 2, 1, ("no", "no")))
    PayoffEquivalence(situation(X1, 1, 1, ("yes", "no")), situation(X1, 1, -1, ("no", "no")))


def test_comparison_truth_values():
    _, X1, _, _ = example1_instance()
    U = ComparisonUniverse([X1])
    same = comparison(X1, 1, 1, ("yes", "no"), ("yes", "no"))
    good = comparison(X1, 1, 1, ("yes", "no"), ("no", "no"))
    bad = comparison(X1, 1, -1, ("yes", "no"), ("no", "no"))
    assert comparison_truth(same, U) and comparison_truth(good, U)
    assert not comparison_truth(bad, U)
    for c in (same, good, bad):
        U.add(c)
    assert U.truth == [comparison_truth(c, U) for c in U.comparisons]


def test_universe_dedups_and_rejects_unknown_mechanisms():
    _, X1, _, _ = example1_instance()
    U = ComparisonUniverse([X1])
    c = comparison(X1, 1, 1, ("yes", "no"), ("no", "no"))
    assert U.add(c) == U.add(c) == 0 and len(U) == 1
    stray = PayoffComparison(PayoffSituation.make("nowhere", 1, 1, ("yes", "no")),
                             PayoffSituation.make("nowhere", 1, 1, ("no", "no")))
    with pytest.raises(InvalidInputError):
        U.add(stray)


# closure

def kpa_universe():
    X, X2 = kpa_pair(1, n=2)
    w = cat.witness_kpa(X, X2)
    U = ComparisonUniverse([X, X2])
    link = Link.from_witness(w, X, X2)
    return X, X2, w, U, link


def test_empty_generators_close_to_nothing():
    *_, U, link = kpa_universe()
    assert len(close_comparisons([], [link], U)) == 0
    assert is_closed_under([], [link], U)


def test_generator_maps_to_relabelled_comparison():
    X, X2, w, U, link = kpa_universe()
    # sigma bids 2 at type 3 against an opponent bidding 1; deviation: stay out
    g = U.add(comparison(X, 1, 3, (2, 1), (None, 1)))
    image = comparison(X2, 1, 5, (4, 3), (None, 3))
    assert w.tau[1][5] == 3
    assert link_image(U.comparisons[g], link, X.agents) == [image]
    closed = close_comparisons([g], [link], U)
    assert closed.out_of_universe == [image]
    j = U.add(image)
    closed = close_comparisons([g], [link], U)
    assert set(closed) == {g, j} and closed.out_of_universe == []
    assert U.truth[g] and U.truth[j]
    assert not is_closed_under([g], [link], U)
    assert is_closed_under([g, j], [link], U)
    assert is_closed_under(range(len(U)), [link], U)


def test_closure_follows_links_backwards():
    X, X2, w, U, link = kpa_universe()
    g = U.add(comparison(X, 1, 3, (2, 1), (None, 1)))
    j = U.add(comparison(X2, 1, 5, (4, 3), (None, 3)))
    assert set(close_comparisons([j], [link], U)) == {g, j}
    # a (witness, X, X2) triple works as a link too
    assert set(close_comparisons([j], [(w, X, X2)], U)) == {g, j}


def test_closure_pushes_mixtures_forward():
    X, X2, w, U, link = kpa_universe()
    mix = {(1, None): 0.5, (2, None): 0.5}
    g = U.add(comparison(X, 1, 5, mix, (3, None)))
    j = U.add(comparison(X2, 1, 7, {(3, None): 0.5, (4, None): 0.5}, (5, None)))
    assert j in close_comparisons([g], [link], U)


def test_closure_rejects_bad_indices():
    *_, U, link = kpa_universe()
    with pytest.raises(InvalidInputError):
        close_comparisons([3], [link], U)


def small_universe(seed):
    rng = np.random.default_rng(seed)
    X, X2, w = random_pair(rng, n_actions=2, n_types=2)
    U = ComparisonUniverse([X, X2])
    profiles = list(X.profiles())
    sits = [{p: 1.0} for p in profiles] + [{profiles[0]: 0.5, profiles[-1]: 0.5}]
    link = Link.from_witness(w, X, X2)
    for i in X.agents:
        for t in X.env.type_grids[i]:
            for A, B in itertools.product(sits, repeat=2):
                c = U.add(PayoffComparison(PayoffSituation.make("X", i, t, A), PayoffSituation.make("X", i, t, B)))
                for img in link_image(U.comparisons[c], link, X.agents):
                    U.add(img)
    return U, link, rng


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_closure_is_extensive_monotone_idempotent(seed):
    U, link, rng = small_universe(seed)
    n = len(U)
    R = {k for k in range(n) if rng.random() < 0.2}
    R2 = R | {k for k in range(n) if rng.random() < 0.2}
    c1 = close_comparisons(R, [link], U).members
    c2 = close_comparisons(R2, [link], U).members
    assert R <= c1
    assert c1 <= c2
    assert close_comparisons(c1, [link], U).members == c1
    assert is_closed_under(c1, [link], U)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_witness_closure_preserves_truth(seed):
    U, link, _ = small_universe(seed)
    rep = validity_probe([link], U, trials=20, seed=seed % 1000)
    assert rep.ok and rep.violations == 0


# validity

def test_validity_probe_kpa_links():
    X, X2 = kpa_pair(1, n=2)
    w = cat.witness_kpa(X, X2)
    U = validity_universe(X, X2, w, seed=3, mixtures=2)
    rep = validity_probe([Link.from_witness(w, X, X2)], U, trials=100, seed=3)
    assert rep.trials == 100 and rep.violations == 0


def test_validity_probe_detects_cubing():
    U, link = cubing_instance()
    rep = validity_probe([link], U, trials=100, seed=0)
    assert rep.violations >= 1
    # the flip: a half-half mix of payoffs -2 and 1 beats -1, but its cubed image loses
    mix = {("a",): 0.5, ("b",): 0.5}
    c = PayoffComparison(PayoffSituation.make("Y", 1, "t", mix), PayoffSituation.make("Y", 1, "t", ("c",)))
    img = PayoffComparison(PayoffSituation.make("Ycubed", 1, "t", mix),
                           PayoffSituation.make("Ycubed", 1, "t", ("c",)))
    assert U.truth[U.index(c)] and not U.truth[U.index(img)]


def test_validity_probe_without_links():
    U, _ = cubing_instance()
    assert validity_probe([], U, trials=10).violations == 0


# knowledge

def test_knows():
    w1 = AwarenessProfile.make({1: {0}})
    w2 = AwarenessProfile.make({1: set()})
    has0 = lambda w: 0 in w[1]  # noqa: E731
    assert knows([w1], has0)
    assert not knows([w1, w2], has0)
    assert knows([w1, w2], lambda w: True)


def test_common_knowledge():
    _, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    K = KnowledgeStructure.full(U, [1, 2])
    assert all(is_common_knowledge(k, K) for k in range(len(U)))
    omega = K.sets[2][0]
    K2 = KnowledgeStructure(U, {1: K.sets[1], 2: [omega, omega.without(1, 5)]})
    assert not is_common_knowledge(5, K2) and is_common_knowledge(4, K2)
    single = KnowledgeStructure(U, {1: [AwarenessProfile.make({1: {0, 1}})]})
    for k in range(3):
        assert is_common_knowledge(k, single) == knows(single.sets[1], lambda w: k in w[1])


def test_knowledge_structure_invariants():
    U, _ = cubing_instance()
    with pytest.raises(InvalidInputError):
        KnowledgeStructure(U, {1: []})
    with pytest.raises(InvalidInputError):
        KnowledgeStructure(U, {1: [AwarenessProfile.make({1: {len(U)}})]})


# equilibrium universes and common knowledge of equilibrium

def test_example1_universe():
    _, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    assert len(U) == 8 and all(U.truth)
    mixed = equilibrium_comparison_universe(X1, prior, sigma, deviations={1: [{"yes": 0.5, "no": 0.5}],
                                                                          2: [{"yes": 0.5, "no": 0.5}]})
    assert len(mixed) == 12
    dup = equilibrium_comparison_universe(X1, prior, sigma, deviations={1: ["yes", {"no": 1.0}]})
    assert len(dup) == 8


def test_singleton_universe_is_self_comparisons():
    env = cat.allocation_env([-1, 1])
    X2 = cat.make_coin_mechanism(env)
    sigma = StrategyProfile.pure([1, 2], {i: {-1: "-", 1: "-"} for i in (1, 2)})
    U = equilibrium_comparison_universe(X2, Prior.uniform(env), sigma)
    assert len(U) == 4
    assert all(c.left == c.right for c in U.comparisons)


def test_example1_ck_and_named_failure():
    _, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    K = KnowledgeStructure.full(U, [1, 2])
    rep = check_ck_equilibrium(X1, prior, sigma, K)
    assert rep.ok and rep.checked == 8 and "pure deviation" in rep.note
    omega = K.sets[1][0]
    K_minus = KnowledgeStructure(U, {1: [omega, omega.without(2, 3)], 2: K.sets[2]})
    rep = check_ck_equilibrium(X1, prior, sigma, K_minus)
    assert not rep.ok
    assert [f["index"] for f in rep.failures] == [3]
    assert rep.failures[0]["reason"] == "not common knowledge"


def test_missing_comparisons_count_as_failures():
    _, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    K = KnowledgeStructure.full(U, [1, 2])
    rep = check_ck_equilibrium(X1, prior, sigma, K, deviations={1: [{"yes": 0.5, "no": 0.5}]})
    assert not rep.ok
    assert [f["reason"] for f in rep.failures] == ["not in universe"] * 2


def test_ck_requires_equilibrium():
    _, X1, prior, _ = example1_instance()
    greedy = StrategyProfile.pure([1, 2], {1: {-1: "yes", 1: "yes"}, 2: {-1: "no", 1: "yes"}})
    U = equilibrium_comparison_universe(X1, prior, greedy)
    rep = check_ck_equilibrium(X1, prior, greedy, KnowledgeStructure.full(U, [1, 2]))
    assert not rep.ok and not rep.bne_ok and rep.failures == []


def test_transfer_pipeline():
    X, X2, w, F, FX, sigma = ck_instance()
    sigma2 = transfer_equilibrium(w, sigma)
    U = equilibrium_comparison_universe(X, FX, sigma)
    x_side = range(len(U))
    equilibrium_comparison_universe(X2, F, sigma2, universe=U)
    K = KnowledgeStructure.full(U, X.agents, x_side)
    assert check_ck_equilibrium(X, FX, sigma, K).ok
    assert not check_ck_equilibrium(X2, F, sigma2, K).ok
    K2 = transfer_knowledge(K, [Link.from_witness(w, X, X2)])
    rep = check_ck_equilibrium(X2, F, sigma2, K2)
    assert rep.ok and rep.checked == len(U) - len(x_side)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_ck_is_monotone_in_knowledge(seed):
    rng = np.random.default_rng(seed)
    _, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    n = len(U)
    profiles = [AwarenessProfile.make({j: {k for k in range(n) if rng.random() < 0.9} for j in (1, 2)})
                for _ in range(4)]
    K = KnowledgeStructure(U, {1: profiles[:2], 2: profiles[2:]})
    smaller = KnowledgeStructure(U, {1: profiles[:1], 2: profiles[2:3]})
    if check_ck_equilibrium(X1, prior, sigma, K).ok:
        assert check_ck_equilibrium(X1, prior, sigma, smaller).ok
    for k in range(n):
        if is_common_knowledge(k, K):
            for i in (1, 2):
                assert knows(K.sets[i], lambda w: all(k in w[j] for j in (1, 2)))


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_ck_transfers_along_planted_witness(seed):
    rng = np.random.default_rng(seed)
    X, X2, w = random_pair(rng, n_actions=2, n_types=2)
    F = Prior.uniform(X2.env)
    FX = pushforward_prior(w.tau, F)
    eqs = find_pure_bne(X, FX, tol=0.0)
    if not eqs:
        return
    sigma = eqs[0]
    sigma2 = transfer_equilibrium(w, sigma)
    U = equilibrium_comparison_universe(X, FX, sigma)
    n = len(U)
    equilibrium_comparison_universe(X2, F, sigma2, universe=U)
    K = KnowledgeStructure.full(U, X.agents, range(n))
    assert check_ck_equilibrium(X, FX, sigma, K).ok
    assert check_ck_equilibrium(X2, F, sigma2, transfer_knowledge(K, [Link.from_witness(w, X, X2)])).ok
