import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratanalogy import catalog as cat
from stratanalogy.analogy import verify_witness
from stratanalogy.core import expected_utility
from stratanalogy.errors import GridError, InvalidInputError, RegularityError
from stratanalogy.experiments import (
    input_pair,
    kec_pair,
    linear_pair,
    output_iso_pair,
    ratio_pair,
)
from stratanalogy.search import search_witness


def payment(mech, prof, agent):
    """Expected payment of ``agent`` at a single-item profile."""
    return sum(p * y[1][agent - 1] for y, p in mech.lottery(prof).items())


def win_prob(mech, prof, agent):
    return sum(p for y, p in mech.lottery(prof).items() if y[0] == agent)


# posted price

def test_posted_price_values():
    _, X = cat.make_posted_price({"price": 3, "types": range(11)})
    assert expected_utility(X, 1, 4, ("buy",)) == 1.0
    assert expected_utility(X, 1, 4, ("no",)) == 0.0


def test_posted_price_same_price_gives_identity():
    _, X = cat.make_posted_price({"price": 3, "types": range(11)})
    w = cat.witness_posted_price(X, X)
    assert all(w.tau[1][t] == t for t in range(11))


def test_posted_price_grid_must_be_closed():
    _, X = cat.make_posted_price({"price": 3, "types": range(11)})
    _, X2 = cat.make_posted_price({"price": 5, "types": range(11)})
    with pytest.raises(GridError):
        cat.witness_posted_price(X, X2)


# fpa / dutch

def test_fpa_dutch_map_and_spot_payoffs():
    _, F = cat.make_fpa({"bids": [0, 2, 4, 6, 8, 10], "types": range(11), "ceiling": 10})
    _, D = cat.make_dutch({"stops": [0, 1, 2, 3, 4, 5], "types": range(11), "ceiling": 10, "rate": 2})
    w = cat.witness_fpa_dutch(F, D)
    assert w.alpha[1][4] == 3 and w.alpha[1][10] == 0
    assert [expected_utility(F, i, t, (4, 2)) for i, t in ((1, 5), (2, 3))] == [1.0, 0.0]
    assert [expected_utility(D, i, t, (3, 4)) for i, t in ((1, 5), (2, 3))] == [1.0, 0.0]


def test_dutch_grid_mismatch():
    _, F = cat.make_fpa({"bids": [0, 2, 4], "types": range(5), "ceiling": 10})
    _, D = cat.make_dutch({"stops": [0, 1, 2], "types": range(5), "ceiling": 10, "rate": 2})
    with pytest.raises(GridError):
        cat.witness_fpa_dutch(F, D)


def test_fpa_ties_split_uniformly():
    _, F = cat.make_fpa({"bids": [0, 2], "types": [3], "ceiling": 10})
    assert expected_utility(F, 1, 3, (2, 2)) == 0.5


# kth price

def test_kpa_payments():
    _, X = cat.make_kpa({"k": 1, "reserve": 1, "bids": [1, 2.5, 3], "types": [3, 5]})
    assert win_prob(X, (2.5, None), 1) == 1.0 and payment(X, (2.5, None), 1) == 2.5
    _, Y = cat.make_kpa({"k": 2, "reserve": 0, "bids": [0, 1, 2, 3], "types": [1, 3]})
    assert win_prob(Y, (3, 2), 1) == 1.0 and payment(Y, (3, 2), 1) == 2.0
    # fewer than k participants: the kth bid counts as 0, so the reserve binds
    _, Z = cat.make_kpa({"k": 2, "reserve": 1, "bids": [1, 2], "types": [1, 3]})
    assert payment(Z, (2, None), 1) == 1.0


def test_kpa_witness_spot_check():
    _, X = cat.make_kpa({"k": 1, "reserve": 1, "bids": [1, 2.5, 3], "types": [5, 7]})
    _, X2 = cat.make_kpa({"k": 1, "reserve": 3, "bids": [3, 4.5, 5], "types": [7, 9]})
    w = cat.witness_kpa(X, X2)
    assert w.tau[1][9] == 7 and w.alpha[1][2.5] == 4.5
    assert expected_utility(X, 1, 7, (2.5, None)) == 4.5
    assert expected_utility(X2, 1, 9, (4.5, None)) == 4.5
    assert verify_witness(X, X2, w, 0.0).ok


def test_kpa_witness_rejects_unshifted_grid():
    _, X = cat.make_kpa({"k": 1, "reserve": 1, "bids": [1, 2, 3], "types": [3, 5]})
    _, X2 = cat.make_kpa({"k": 1, "reserve": 3, "bids": [3, 4, 6], "types": [5, 7]})
    with pytest.raises(GridError):
        cat.witness_kpa(X, X2)


def test_kpa_parameter_checks():
    with pytest.raises(InvalidInputError):
        cat.make_kpa({"k": 3, "bids": [0, 1], "types": [1]})
    with pytest.raises(InvalidInputError):
        cat.make_kpa({"k": 1, "reserve": 2, "bids": [1, 2], "types": [1]})
    with pytest.raises(InvalidInputError):
        cat.make_kpa({"k": 1, "bids": [2, 1], "types": [1]})


# entry cost

def test_kec_payoffs():
    _, X = cat.make_kec({"k": 1, "cost": 1, "bids": [0, 1, 2, 3], "types": [2, 6]})
    assert expected_utility(X, 1, 6, (3, None)) == 2.0
    assert expected_utility(X, 2, 2, (3, 1)) == -1.0
    assert expected_utility(X, 2, 2, (3, None)) == 0.0


def test_kec_witness_scale_and_positivity():
    X, X2 = kec_pair(2)
    w = cat.witness_kec(X, X2)
    assert verify_witness(X, X2, w, 1e-12).ok
    assert {k for m in w.kappa.values() for k in m.values()} == {2.0}
    _, Z = cat.make_kec({"k": 2, "cost": 0, "bids": [0, 1, 2, 3], "types": [2, 6]})
    with pytest.raises(InvalidInputError):
        cat.witness_kec(Z, X)


def test_zero_entry_cost_equals_zero_reserve():
    spec = {"k": 2, "bids": [0, 1, 2, 3], "types": [1, 3]}
    _, P = cat.make_kpa({**spec, "reserve": 0})
    _, C = cat.make_kec({**spec, "cost": 0})
    for i in P.agents:
        assert np.array_equal(P.payoffs(i), C.payoffs(i))


# 1.5-price and all-pay

def test_one_half_price():
    _, X = cat.make_one_half_price({"bids": [1, 2, 4], "types": [5]})
    assert payment(X, (4, 2), 1) == 3.0
    assert payment(X, (4, None), 1) == 4.0


def test_one_half_price_reserve_family():
    spec = {"bids": [1, 2, 3], "types": [3, 5]}
    _, X = cat.make_one_half_price({**spec, "reserve": 1})
    _, X2 = cat.make_one_half_price({"reserve": 2, "bids": [2, 3, 4], "types": [4, 6]})
    assert verify_witness(X, X2, cat.witness_one_half_price(X, X2), 1e-12).ok


def test_all_pay_payoffs():
    _, X = cat.make_all_pay_translated({"bids": [0, 1, 2, 3, 4], "types": [3, 5]})
    assert expected_utility(X, 1, 5, (4, 2)) == 1.0
    assert expected_utility(X, 2, 3, (4, 2)) == -2.0


def test_all_pay_translation_charges_losers_the_translated_bid():
    base = {"bids": [0, 1, 2], "types": [1, 3]}
    _, A0 = cat.make_all_pay_translated(base)
    shifted = {"bids": [2, 3, 4], "types": [3, 5], "reserve": 2}
    _, member = cat.make_all_pay_translated({**shifted, "base": 0})
    _, plain = cat.make_all_pay_translated(shifted)
    # a loser at 3 = 1 + 2: the plain all-pay auction at reserve 2 charges 3
    assert payment(plain, (4, 3), 2) == 3.0
    assert payment(member, (4, 3), 2) == 1.0
    assert verify_witness(A0, member, cat.witness_all_pay_translated(A0, member), 1e-12).ok
    with pytest.raises(InvalidInputError):
        cat.witness_all_pay_translated(A0, plain)
    assert not verify_witness(A0, plain, cat._reserve_shift(A0, plain, "all_pay_translated")).ok


# scoring

def test_linear_scores():
    _, X = cat.make_scoring_linear({"weight": 0.5, "quality": [1, 2], "bids": [3, 5], "types": [0]})
    assert X.scores((3, 5)) == [-1.0, -1.5]
    assert X.lottery((3, 5)) == {(1, 3.0): 1.0}


def test_linear_witness_shifts_and_score_scaling():
    X, X2 = linear_pair()
    w = cat.witness_scoring_linear(X, X2)
    assert verify_witness(X, X2, w, 1e-12).ok
    assert [w.alpha[i][1] - 1 for i in (1, 2)] == [2.0, 4.0]
    for prof in X.profiles():
        img = w.map_profile(prof, X.agents)
        for s, s2 in zip(X.scores(prof), X2.scores(img)):
            assert s2 == pytest.approx(0.5 * s, abs=1e-12)


def test_ratio_low_weight_seller_two_never_wins():
    R1, R2 = ratio_pair()
    bound = 0.25 + 0.75 * 1
    for prof in R1.profiles():
        s = R1.scores(prof)
        assert s[1] <= bound < 1.5 <= s[0]
    assert any(win_prob(R2, p, 2) > 0 for p in R2.profiles())
    assert search_witness(R1, R2).status == "none"


def test_scoring_parameter_checks():
    with pytest.raises(InvalidInputError):
        cat.make_scoring_linear({"weight": 1.0, "quality": [1, 2], "bids": [1], "types": [0]})
    with pytest.raises(InvalidInputError):
        cat.make_scoring_ratio({"weight": 0.5, "quality": [1, 2], "bids": [0, 1], "types": [0]})


# pricing

def test_rationing():
    assert cat.proportional_rationing((1, 1), 1.0) == [0.5, 0.5]
    assert cat.proportional_rationing((0.25, 0.5), 1.0) == [0.25, 0.5]


def test_input_pricing_spot_value():
    X, X2 = input_pair()
    w = cat.witness_input_pricing(X, X2)
    for theta in (1.0, 2 ** 0.5, 2.0):
        t = (theta, 0.5)
        lhs = expected_utility(X2, 1, t, (0.5, 0.5))
        rhs = expected_utility(X, 1, w.tau[1][t], (0.5, 0.5))
        assert lhs == pytest.approx(theta - 0.25, abs=1e-12)
        assert rhs == pytest.approx(theta - 0.25, abs=1e-12)
    assert verify_witness(X, X2, w, 1e-12).ok


def test_input_capacity_is_feasible():
    X, _ = input_pair()
    for prof in X.profiles():
        assert sum(cat.proportional_rationing(prof, 1.0)) <= 1 + 1e-12


def test_output_isoelastic_witness():
    X, X2 = output_iso_pair()
    w = cat.witness_output_isoelastic(X, X2)
    assert w.kappa[1][X2.env.type_grids[1][0]] == pytest.approx(2 ** 1.5)
    assert verify_witness(X, X2, w, 1e-12).ok


def test_output_witness_needs_power_tariff():
    spec = {"tariff": {"kind": "polynomial", "coeffs": [0, 1, 1]}, "types": [[1, 0.5]], "requests": [0, 0.5]}
    _, O1 = cat.make_output_pricing({**spec, "efficacy": 1})
    _, O2 = cat.make_output_pricing({**spec, "efficacy": 2, "requests": [0, 1]})
    with pytest.raises(InvalidInputError):
        cat.witness_output_isoelastic(O1, O2)


def test_tariff_regularity():
    with pytest.raises(RegularityError):
        cat.Tariff.from_dict({"kind": "polynomial", "coeffs": [1, 1, 1]}).check_regular([0, 1])
    with pytest.raises(RegularityError):
        cat.Tariff.from_dict({"kind": "polynomial", "coeffs": [0, 2, -0.5]}).check_regular([0, 1])
    with pytest.raises(RegularityError):
        cat.Tariff.from_dict({"kind": "power", "A": 1, "rho": 1}).check_regular([0, 1])
    P = cat.Tariff.from_dict({"kind": "polynomial", "coeffs": [0, 1, 1]})
    assert P.ratio(0.5, 2) == pytest.approx(8 / 3) and P.ratio(1, 2) == 3.0


def test_input_grid_must_be_closed_under_scaling():
    X, _ = input_pair()
    _, bad = cat.make_input_pricing({"efficacy": 2.0, "tariff": {"kind": "power", "A": 1, "rho": 2},
                                     "requests": [0, 0.5, 1], "types": [[1, 0.5], [3, 0.5], [2, 0.5]]})
    with pytest.raises(GridError):
        cat.witness_input_pricing(X, bad)


# optimal reserve

def test_reserve_uniform():
    v = np.linspace(0, 1, 100_001)
    assert abs(cat.optimal_reserve(v, pdf=np.ones_like(v), cdf=v) - 0.5) <= 1e-6
    assert abs(cat.optimal_reserve(v, cdf=v) - 0.5) <= 1e-4
    assert abs(cat.optimal_reserve(v, pdf=np.ones_like(v)) - 0.5) <= 1e-4


def test_reserve_degenerate_point_mass():
    v = np.linspace(0, 2, 2001)
    pdf = np.zeros_like(v)
    pdf[1300] = 1.0
    assert cat.optimal_reserve(v, pdf=pdf) == pytest.approx(v[1300])


def test_reserve_exponential():
    v = np.linspace(0, 12, 120_001)
    r = cat.optimal_reserve(v, pdf=np.exp(-v), cdf=1 - np.exp(-v))
    assert r == pytest.approx(1.0, abs=1e-4)


def test_reserve_irregular_prior_rejected():
    v = np.linspace(0, 1, 1001)
    pdf = np.where(v < 0.5, 1.9, 0.1)  # heavy mass low, thin tail: virtual value dips
    with pytest.raises(RegularityError):
        cat.optimal_reserve(v, pdf=pdf)
    with pytest.raises(InvalidInputError):
        cat.optimal_reserve([0, 0.5, 0.2], cdf=[0, 0.5, 1])


# family plumbing

def test_build_and_families():
    for fam in cat.FAMILIES:
        _, mech = cat.build({"family": fam, "params": cat.FAMILY_DEFAULTS[fam]}, name=fam)
        assert mech.name == fam and mech.provenance == cat.PROVENANCE[fam]
        assert all(np.all(np.isfinite(mech.payoffs(i))) for i in mech.agents)
    with pytest.raises(InvalidInputError):
        cat.FamilySpec("vickrey")


def test_canonical_witness_dispatch():
    X, X2 = kec_pair(1)
    assert cat.canonical_witness(X, X2).meta["family"] == "kec"
    with pytest.raises(InvalidInputError):
        cat.canonical_witness(X, cat.make_kpa(cat.FAMILY_DEFAULTS["kpa"])[1])


STANDARD = {
    "kpa": lambda k, r: cat.make_kpa({"k": k, "n": 3, "reserve": r, "bids": [r + 1, r + 2, r + 3],
                                      "types": [1]})[1],
    "kec": lambda k, r: cat.make_kec({"k": k, "n": 3, "cost": r, "bids": [0, 1, 2],
                                      "types": [1]})[1],
    "one_half_price": lambda k, r: cat.make_one_half_price({"n": 3, "reserve": r, "bids": [r, r + 1, r + 2],
                                                            "types": [1]})[1],
    "all_pay_translated": lambda k, r: cat.make_all_pay_translated({"n": 3, "reserve": r, "base": 0,
                                                                    "bids": [r, r + 1, r + 2], "types": [1]})[1],
}


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(STANDARD)), st.integers(1, 3), st.integers(0, 2), st.data())
def test_standard_auction_axioms(family, k, r, data):
    mech = STANDARD[family](k, r)
    acts = mech.action_sets[1]
    prof = tuple(data.draw(st.sampled_from(acts)) for _ in range(3))
    lot = mech.lottery(prof)
    active = [b for b in prof if b is not None]
    for i, b in enumerate(prof, start=1):
        if b is None:
            assert win_prob(mech, prof, i) == 0 and payment(mech, prof, i) == 0
        else:
            assert payment(mech, prof, i) >= 0
        if win_prob(mech, prof, i) > 0:
            assert b == max(active)
    if active:
        top = [i for i, b in enumerate(prof, start=1) if b is not None and b == max(active)]
        assert all(win_prob(mech, prof, i) == pytest.approx(1 / len(top)) for i in top)
    assert sum(lot.values()) == pytest.approx(1.0)
    # relabelling the bidders relabels the outcome
    for perm in itertools.permutations(range(3)):
        q = tuple(prof[j] for j in perm)
        for pos, j in enumerate(perm, start=1):
            assert payment(mech, q, pos) == pytest.approx(payment(mech, prof, j + 1))
            assert win_prob(mech, q, pos) == pytest.approx(win_prob(mech, prof, j + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.integers(0, 3), st.integers(1, 4))
def test_reserve_witness_verifies_for_any_shift(k, r, d):
    bids, types = [1, 2, 3], [3, 5]
    _, X = cat.make_kpa({"k": k, "reserve": r, "bids": [b + r for b in bids], "types": [t + r for t in types]})
    _, X2 = cat.make_kpa({"k": k, "reserve": r + d, "bids": [b + r + d for b in bids],
                          "types": [t + r + d for t in types]})
    assert verify_witness(X, X2, cat.witness_kpa(X, X2), 1e-12).ok


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.25, 1.5, 3.0]))
def test_kec_witness_verifies_for_any_costs(c, c2):
    X, X2 = kec_pair(1, c=c, c2=c2)
    w = cat.witness_kec(X, X2)
    assert verify_witness(X, X2, w, 1e-12).ok
    assert all(math.isclose(k, c2 / c) for m in w.kappa.values() for k in m.values())
