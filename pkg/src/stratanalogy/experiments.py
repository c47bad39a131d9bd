"""Desk-scale demonstrations of the positive and negative analogy results.

Each demo builds small instances from the catalog, runs the engine, and
returns a :class:`DemoResult` whose ``passed`` flag is computed from its
metrics alone.  Serialisation leaves out wall-clock time so that repeated runs
are byte-identical.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import catalog as cat
from .analogy import (
    AffineAtlas,
    AnalogyWitness,
    DeclaredEquivalence,
    EquivalenceWitness,
    atlas_from_witness,
    check_atlas_validity,
    fit_affine,
    pushforward_prior,
    transfer_dominant,
    transfer_equilibrium,
    verify_equivalence,
    verify_witness,
)
from .core import (
    GAP_TOL,
    Environment,
    Mechanism,
    Prior,
    StrategyProfile,
    check_bne,
    dominant_strategy,
    expected_utility,
    find_pure_bne,
    has_dominant_strategies,
)
from .epistemics import (
    AwarenessProfile,
    ComparisonUniverse,
    KnowledgeStructure,
    Link,
    PayoffComparison,
    PayoffSituation,
    check_ck_equilibrium,
    equilibrium_comparison_universe,
    link_image,
    transfer_knowledge,
    validity_probe,
)
from .errors import InvalidInputError
from .reporting import dumps, label
from .search import search_witness

DOMINANCE_CERT = ("dominance transfer: an analogy carries dominant strategies across, "
                  "so dominance in one mechanism but not the other rules analogy out")
SEARCH_CERT = "exhaustive search: no witness on this finite instance (instance-level only)"
CONSTANCY_CERT = ("payoff constancy: a positive affine image of a constant payoff vector is constant, "
                  "but the paired payoff vectors are not")


@dataclass
class DemoResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    runtime: float = field(default=0.0, compare=False)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "metrics": self.metrics,
                "artifacts": self.artifacts}

    def to_json(self) -> str:
        return dumps(self.as_dict())


DEMOS: dict[str, Callable] = {}


def demo(name):
    def register(fn):
        DEMOS[name] = fn
        return fn
    return register


def run_demo(name: str, seed: int = 0, tol: float = GAP_TOL) -> DemoResult:
    if name not in DEMOS:
        raise InvalidInputError(f"unknown demo {name!r}; known: {', '.join(DEMOS)}")
    start = time.perf_counter()
    metrics, artifacts, passed = DEMOS[name](seed=seed, tol=tol)
    res = DemoResult(name, bool(passed), metrics, artifacts)
    res.runtime = time.perf_counter() - start
    return res


def run_all(seed: int = 0, tol: float = GAP_TOL) -> list:
    return [run_demo(n, seed, tol) for n in DEMOS]


def _witness_table(w: AnalogyWitness) -> dict:
    return {"alpha": {str(i): [[label(a), label(b)] for a, b in m.items()] for i, m in w.alpha.items()},
            "tau": {str(i): [[label(t), label(s)] for t, s in m.items()] for i, m in w.tau.items()},
            "kappa": sorted({float(k) for m in w.kappa.values() for k in m.values()}),
            "lambda": sorted({float(v) for m in w.lam.values() for v in m.values()})}


def _search_metrics(X: Mechanism, X2: Mechanism, tol: float) -> dict:
    r = search_witness(X, X2, tol=tol)
    return {"status": r.status, "nodes": r.nodes}


# instances (shared with the shipped documents and the tests)

FPA_BIDS = [0, 2, 4, 6, 8, 10]


def fpa_dutch_pair(ceiling=10, rate=2, bids=FPA_BIDS, types=range(11)):
    _, F = cat.make_fpa({"bids": list(bids), "types": list(types), "ceiling": ceiling})
    stops = sorted((ceiling - b) / rate for b in bids)
    _, D = cat.make_dutch({"stops": stops, "types": list(types), "ceiling": ceiling, "rate": rate})
    return F, D


def kpa_pair(k: int, n: int = 3, r=1, r2=3, bids=(1, 2, 3), types=(3, 5)):
    d = r2 - r
    _, X = cat.make_kpa({"k": k, "n": n, "reserve": r, "bids": list(bids), "types": list(types)})
    _, X2 = cat.make_kpa({"k": k, "n": n, "reserve": r2, "bids": [b + d for b in bids],
                          "types": [t + d for t in types]})
    return X, X2


def kec_pair(k: int, c=1, c2=2, bids=(0, 1, 2, 3), types=(2, 6), n=2):
    s = c2 / c
    _, X = cat.make_kec({"k": k, "n": n, "cost": c, "bids": list(bids), "types": list(types)})
    _, X2 = cat.make_kec({"k": k, "n": n, "cost": c2, "bids": [s * b for b in bids],
                          "types": [s * t for t in types]})
    return X, X2


TINY_BIDS = [0, 1, 2, 3]
TINY_TYPES = [1, 3]


def tiny_kpa(k: int, r=0):
    return cat.make_kpa({"k": k, "reserve": r, "bids": [b + r for b in TINY_BIDS],
                         "types": [t + r for t in TINY_TYPES]})[1]


def tiny_kec(k: int, c=1):
    return cat.make_kec({"k": k, "cost": c, "bids": TINY_BIDS, "types": TINY_TYPES})[1]


def linear_pair(l1=0.5, l2=0.25, q=(1, 2), bids=(1, 2, 3), costs=(0, 1)):
    shift = 1 / l2 - 1 / l1
    _, X = cat.make_scoring_linear({"weight": l1, "quality": list(q), "bids": list(bids),
                                    "types": list(costs)})
    _, X2 = cat.make_scoring_linear({
        "weight": l2, "quality": list(q),
        "bids": {i + 1: [b + shift * qi for b in bids] for i, qi in enumerate(q)},
        "types": {i + 1: [c + shift * qi for c in costs] for i, qi in enumerate(q)}})
    return X, X2


def ratio_pair(l1=0.25, l2=0.75, q=(2, 1), bids=(1, 2, 3), costs=(0, 0.5)):
    spec = {"quality": list(q), "bids": list(bids), "types": list(costs)}
    return (cat.make_scoring_ratio({**spec, "weight": l1})[1],
            cat.make_scoring_ratio({**spec, "weight": l2})[1])


SQRT2 = 2 ** 0.5


def input_pair(e=1.0, e2=2.0, gamma=0.5, thetas=(1.0, SQRT2, 2.0), requests=(0, 0.5, 1)):
    eta = e2 / e
    tariff = {"kind": "power", "A": 1.0, "rho": 2.0}
    X2types = [(th, gamma) for th in thetas]
    Xtypes = [(th * eta ** gamma, gamma) for th in thetas]
    _, X = cat.make_input_pricing({"efficacy": e, "tariff": tariff, "requests": list(requests), "types": Xtypes})
    _, X2 = cat.make_input_pricing({"efficacy": e2, "tariff": tariff, "requests": list(requests),
                                    "types": X2types})
    return X, X2


def output_iso_pair(e=1.0, e2=2.0, A=2.0, rho=1.5, gamma=0.5, thetas=(1.0, 2.0), requests=(0, 0.5, 1)):
    eta = e2 / e
    tariff = {"kind": "power", "A": A, "rho": rho}
    Xtypes = [(th, gamma) for th in thetas]
    X2types = [(th * eta ** (rho - gamma), gamma) for th in thetas]
    _, X = cat.make_output_pricing({"efficacy": e, "tariff": tariff, "requests": list(requests), "types": Xtypes})
    _, X2 = cat.make_output_pricing({"efficacy": e2, "tariff": tariff,
                                     "requests": [eta * a for a in requests], "types": X2types})
    return X, X2


BREAK_TARIFF = {"kind": "polynomial", "coeffs": [0.0, 1.0, 1.0]}  # P(x) = x^2 + x


def output_break_pair(types=((1.0, 0.5), (2.0, 0.5))):
    spec = {"tariff": BREAK_TARIFF, "types": [list(t) for t in types]}
    return (cat.make_output_pricing({**spec, "efficacy": 1.0, "requests": [0, 0.5, 1]})[1],
            cat.make_output_pricing({**spec, "efficacy": 2.0, "requests": [0, 1, 2]})[1])


def posted_pair(P=3, P2=5):
    _, X = cat.make_posted_price({"price": P, "types": list(range(0, 11))})
    _, X2 = cat.make_posted_price({"price": P2, "types": list(range(P2 - P, 11 + P2 - P))})
    return X, X2


# demos

@demo("fpa_dutch_equivalence")
def _fpa_dutch(seed, tol):
    F, D = fpa_dutch_pair()
    w = cat.witness_fpa_dutch(F, D)
    rep = verify_equivalence(F, D, w, tol)
    # exact arithmetic: all payoffs are rationals on this grid
    exact_gap = max(abs(Fraction(F.payoffs(i)[idx]) - Fraction(D.payoffs(i)[_alpha_index(F, D, w.alpha, idx)]))
                    for i in F.agents for idx in np.ndindex(*F.payoffs(i).shape))
    wrong = EquivalenceWitness({i: {a: a / 2 for a in FPA_BIDS} for i in F.agents})
    control = verify_equivalence(F, D, wrong, tol)
    metrics = {"worst_gap": rep.worst_gap, "exact_gap": str(exact_gap), "alpha_of_4": w.alpha[1][4],
               "wrong_sign_ok": control.ok, "wrong_sign_violation": control.first_violation}
    return metrics, {"alpha": {str(i): [[a, b] for a, b in m.items()] for i, m in w.alpha.items()}}, \
        rep.ok and rep.worst_gap <= 1e-12 and exact_gap == 0 and not control.ok


def _alpha_index(X, X2, alpha, idx):
    t, prof = idx[0], idx[1:]
    return (t,) + tuple(X2.action_index(j, alpha[j][X.action_sets[j][b]]) for j, b in zip(X.agents, prof))


@demo("posted_price_family")
def _posted(seed, tol):
    X, X2 = posted_pair()
    w = cat.witness_posted_price(X, X2)
    rep = verify_witness(X, X2, w, 0.0)
    buy, no = expected_utility(X, 1, 4, ("buy",)), expected_utility(X, 1, 4, ("no",))
    metrics = {"worst_gap": rep.worst_gap, "u_buy_at_4": buy, "u_no_at_4": no}
    return metrics, {"witness": _witness_table(w)}, rep.ok and rep.worst_gap == 0 and (buy, no) == (1.0, 0.0)


@demo("kpa_reserve_family")
def _kpa_family(seed, tol):
    metrics, artifacts, ok = {}, {}, True
    for k in (1, 2):
        X, X2 = kpa_pair(k)
        w = cat.witness_kpa(X, X2)
        rep = verify_witness(X, X2, w, 1e-12)
        metrics[f"k{k}_worst_gap"] = rep.worst_gap
        ok &= rep.ok
    X, X2 = kpa_pair(1, n=2)
    s = search_witness(X, X2, tol=tol, kappa_const=True, lambda_zero=True)
    metrics["search_status"], metrics["search_nodes"] = s.status, s.nodes
    ok &= s.found and verify_witness(X, X2, s.witness, tol).ok
    if s.found:
        artifacts["found_witness"] = _witness_table(s.witness)
    tr = _transfer_bne(X, X2, tol)
    metrics.update(tr[0])
    return metrics, artifacts, ok and tr[1]


def _transfer_bne(X, X2, tol, w=None):
    """Every pure BNE of X under tau#F carries to a BNE of X2 under F."""
    w = w if w is not None else cat.canonical_witness(X, X2)
    F = Prior.uniform(X2.env)
    FX = pushforward_prior(w.tau, F)
    eqs = find_pure_bne(X, FX, tol)
    gaps = [check_bne(X2, F, transfer_equilibrium(w, s), tol) for s in eqs]
    ok = bool(eqs) and all(g.ok for g in gaps)
    return {"bne_found": len(eqs), "bne_transferred_ok": sum(g.ok for g in gaps),
            "bne_worst_gap": max((g.worst_gap for g in gaps), default=0.0)}, ok


@demo("kec_family")
def _kec_family(seed, tol):
    metrics, ok = {}, True
    for k in (1, 2):
        X, X2 = kec_pair(k)
        w = cat.witness_kec(X, X2)
        rep = verify_witness(X, X2, w, 1e-12)
        fit = fit_affine(X, X2, w.alpha, w.tau, tol)
        kappas = sorted({v for m in fit[0].values() for v in m.values()}) if fit else []
        lams = sorted({v for m in fit[1].values() for v in m.values()}) if fit else []
        metrics[f"k{k}_worst_gap"] = rep.worst_gap
        metrics[f"k{k}_fitted_kappa"] = kappas
        metrics[f"k{k}_fitted_lambda"] = lams
        ok &= rep.ok and fit is not None and np.allclose(kappas, [2.0]) and np.allclose(lams, [0.0])
    return metrics, {}, ok


def _dominance_block(X, X2, tol) -> dict:
    return {f"{X.name}_dominant": has_dominant_strategies(X, tol),
            f"{X2.name}_dominant": has_dominant_strategies(X2, tol)}


@demo("kec_zero_break")
def _kec_zero(seed, tol):
    P0, C1 = tiny_kpa(2), tiny_kec(2)
    same = all(np.array_equal(P0.payoffs(i), tiny_kec(2, c=0).payoffs(i)) for i in P0.agents)
    dom = _dominance_block(P0, C1, tol)
    s = _search_metrics(P0, C1, tol)
    separated = dom[f"{P0.name}_dominant"] and not dom[f"{C1.name}_dominant"]
    certs = ([DOMINANCE_CERT] if separated else []) + ([SEARCH_CERT] if s["status"] == "none" else [])
    metrics = {**dom, "kec0_equals_kpa0": same, "search": s, "certificates": certs}
    return metrics, {}, same and len(certs) >= 2


@demo("different_k_break")
def _different_k(seed, tol):
    P1, P2 = tiny_kpa(1), tiny_kpa(2)
    P2r = tiny_kpa(2, r=1)
    dom = {"2PA_dominant": has_dominant_strategies(P2, tol), "1PA_dominant": has_dominant_strategies(P1, tol),
           "2PA_r1_dominant": has_dominant_strategies(P2r, tol)}
    s = _search_metrics(P1, P2, tol)
    separated = dom["2PA_dominant"] and dom["2PA_r1_dominant"] and not dom["1PA_dominant"]
    certs = ([DOMINANCE_CERT] if separated else []) + ([SEARCH_CERT] if s["status"] == "none" else [])
    truthful = dominant_strategy(P2, 1, tol)
    metrics = {**dom, "search": s, "certificates": certs,
               "2PA_strategy": [[label(t), label(a)] for t, a in truthful.items()] if truthful else None}
    return metrics, {}, len(certs) >= 2


@demo("equilibrium_transfer")
def _eq_transfer(seed, tol):
    X, X2 = kpa_pair(1, n=2)
    metrics, ok = _transfer_bne(X, X2, tol)
    # dominant strategies of 2PA(1) carry over to 2PA(3)
    Y, Y2 = kpa_pair(2, n=2, bids=(1, 2, 3, 4, 5), types=(3, 5))
    w = cat.witness_kpa(Y, Y2)
    s = {i: dominant_strategy(Y, i, tol) for i in Y.agents}
    s2 = transfer_dominant(w, Y, Y2, s, tol)
    metrics["dominant_transfer"] = [[label(t), label(a)] for t, a in s2[1].items()]
    truthful = all(a == t for t, a in s2[1].items())
    return metrics, {}, ok and truthful


def ck_instance():
    """kPA(1) -> kPA(3) with two bidders, a uniform prior on the target types."""
    X, X2 = kpa_pair(1, n=2)
    w = cat.witness_kpa(X, X2)
    F = Prior.uniform(X2.env)
    FX = pushforward_prior(w.tau, F)
    sigma = find_pure_bne(X, FX)[0]
    return X, X2, w, F, FX, sigma


@demo("ck_transfer")
def _ck_transfer(seed, tol):
    X, X2, w, F, FX, sigma = ck_instance()
    sigma2 = transfer_equilibrium(w, sigma)
    U = equilibrium_comparison_universe(X, FX, sigma)
    x_side = list(range(len(U)))
    equilibrium_comparison_universe(X2, F, sigma2, universe=U)
    K = KnowledgeStructure.full(U, X.agents, x_side)
    before_X = check_ck_equilibrium(X, FX, sigma, K, tol=tol)
    before_X2 = check_ck_equilibrium(X2, F, sigma2, K, tol=tol)
    links = [Link.from_witness(w, X, X2)]
    K2 = transfer_knowledge(K, links)
    after_X2 = check_ck_equilibrium(X2, F, sigma2, K2, tol=tol)
    metrics = {"universe_size": len(U), "x_comparisons": len(x_side),
               "ck_on_X": before_X.ok, "ck_on_X2_before_closure": before_X2.ok,
               "ck_on_X2_after_closure": after_X2.ok, "checked_on_X2": after_X2.checked}
    artifacts = {"sigma": {str(i): [[label(t), label(a)] for t, a in m.items()] for i, m in sigma.as_pure().items()},
                 "sigma_transferred": {str(i): [[label(t), label(a)] for t, a in m.items()]
                                       for i, m in sigma2.as_pure().items()}}
    return metrics, artifacts, before_X.ok and not before_X2.ok and after_X2.ok


def example1_instance():
    env = cat.allocation_env([-1, 1])
    X1 = cat.make_ask_mechanism(env)
    prior = Prior.uniform(env)
    sigma = StrategyProfile.pure([1, 2], {i: {-1: "no", 1: "yes"} for i in (1, 2)})
    return env, X1, prior, sigma


@demo("example1_ck")
def _example1(seed, tol):
    env, X1, prior, sigma = example1_instance()
    U = equilibrium_comparison_universe(X1, prior, sigma)
    K = KnowledgeStructure.full(U, X1.agents)
    full = check_ck_equilibrium(X1, prior, sigma, K, tol=tol)
    omega = K.sets[1][0]
    K_minus = KnowledgeStructure(U, {1: [omega.without(2, 0)], 2: K.sets[2]})
    broken = check_ck_equilibrium(X1, prior, sigma, K_minus, tol=tol)
    named = [f["index"] for f in broken.failures]
    metrics = {"universe_size": len(U), "all_true": all(U.truth), "ck_full": full.ok,
               "ck_after_removal": broken.ok, "failures_named": named}
    return metrics, {}, full.ok and not broken.ok and named == [0] and len(U) == 8


@demo("scoring_linear_family")
def _linear(seed, tol):
    X, X2 = linear_pair()
    w = cat.witness_scoring_linear(X, X2)
    rep = verify_witness(X, X2, w, 1e-12)
    ratios = set()
    for prof in X.profiles():
        img = w.map_profile(prof, X.agents)
        for s, s2 in zip(X.scores(prof), X2.scores(img)):
            ratios.add(round(s2 / s, 12) if s else None)
    shifts = [X2.action_sets[i][0] - X.action_sets[i][0] for i in X.agents]
    metrics = {"worst_gap": rep.worst_gap, "bid_shifts": shifts, "score_ratios": sorted(ratios - {None})}
    return metrics, {"witness": _witness_table(w)}, rep.ok and shifts == [2.0, 4.0] and ratios - {None} == {0.5}


def _win_profiles(mech: Mechanism, seller) -> int:
    count = 0
    for prof in mech.profiles():
        if any(y[0] == seller and p > 0 for y, p in mech.lottery(prof).items()):
            count += 1
    return count


@demo("scoring_ratio_break")
def _ratio(seed, tol):
    R1, R2 = ratio_pair()
    wins1, wins2 = _win_profiles(R1, 2), _win_profiles(R2, 2)
    const1 = all(np.ptp(R1.payoffs(2)[k]) == 0 for k in range(R1.payoffs(2).shape[0]))
    const2 = all(np.ptp(R2.payoffs(2)[k]) == 0 for k in range(R2.payoffs(2).shape[0]))
    s = _search_metrics(R1, R2, tol)
    certs = ([CONSTANCY_CERT] if const1 and not const2 else []) + ([SEARCH_CERT] if s["status"] == "none" else [])
    metrics = {"seller2_wins_low_weight": wins1, "seller2_wins_high_weight": wins2,
               "score_bound_seller2": 0.25 + 0.75 * 1, "search": s, "certificates": certs}
    return metrics, {}, wins1 == 0 and wins2 > 0 and len(certs) >= 2


@demo("pricing_input_family")
def _input(seed, tol):
    X, X2 = input_pair()
    w = cat.witness_input_pricing(X, X2)
    rep = verify_witness(X, X2, w, 1e-12)
    th = 1.0
    spot = expected_utility(X2, 1, (th, 0.5), (0.5, 0.5))
    capacity = max(sum(cat.proportional_rationing(p, 1.0)) for p in X.profiles())
    metrics = {"worst_gap": rep.worst_gap, "spot_theta_1": spot, "max_total_capacity": capacity}
    return metrics, {"witness": _witness_table(w)}, rep.ok and abs(spot - 0.75) <= 1e-12 and capacity <= 1 + 1e-12


@demo("pricing_output_isoelastic")
def _output_iso(seed, tol):
    X, X2 = output_iso_pair()
    w = cat.witness_output_isoelastic(X, X2)
    rep = verify_witness(X, X2, w, 1e-12)
    # brute-force re-evaluation of the defining identity, independent of verify_witness
    gap = 0.0
    for i in X.agents:
        for t, s in w.tau[i].items():
            for prof in X.profiles():
                lhs = _direct_pricing_payoff(X2, i, t, w.map_profile(prof, X.agents), X2.spec.require("efficacy"))
                rhs = w.kappa[i][t] * _direct_pricing_payoff(X, i, s, prof, X.spec.require("efficacy"))
                gap = max(gap, abs(lhs - rhs - w.lam[i][t]))
    metrics = {"worst_gap": rep.worst_gap, "brute_force_gap": gap, "kappa": w.kappa[1][X2.env.type_grids[1][0]]}
    return metrics, {"witness": _witness_table(w)}, rep.ok and gap <= 1e-12


def _direct_pricing_payoff(mech, i, v, prof, e):
    theta, gamma = v
    tot = sum(prof)
    x = prof[i - 1] * min(1.0, e / tot) if tot > 0 else 0.0
    return theta * x ** gamma - mech.tariff(x)


@demo("pricing_output_break")
def _output_break(seed, tol):
    P = cat.Tariff.from_dict(BREAK_TARIFF)
    eta = 2.0
    r1, r2 = Fraction(P(eta * 0.5)).limit_denominator(1000) / Fraction(P(0.5)).limit_denominator(1000), \
        Fraction(P(eta * 1.0)) / Fraction(P(1.0))
    O1, O2 = output_break_pair()
    s = _search_metrics(O1, O2, tol)
    nonconstant = r1 != r2
    certs = (["ratio test: P(eta x)/P(x) is not constant, so the tariff is not isoelastic"] if nonconstant else []) \
        + ([SEARCH_CERT] if s["status"] == "none" else [])
    metrics = {"ratio_at_half": str(r1), "ratio_at_one": str(r2), "search": s, "certificates": certs}
    return metrics, {}, r1 == Fraction(8, 3) and r2 == 3 and len(certs) >= 2


@demo("optimal_reserve_uniform")
def _reserve(seed, tol):
    v = np.linspace(0.0, 1.0, 100_000)
    r = cat.optimal_reserve(v, pdf=np.ones_like(v), cdf=v)
    return {"reserve": r, "error": abs(r - 0.5)}, {}, abs(r - 0.5) <= 1e-6


def validity_universe(X: Mechanism, X2: Mechanism, w: AnalogyWitness, seed: int = 0, mixtures: int = 4):
    """Pure and random two-point mixed comparisons at every X head plus their images in X2."""
    rng = np.random.default_rng(seed)
    U = ComparisonUniverse([X, X2])
    profiles = list(X.profiles())
    for i in X.agents:
        for t in X.env.type_grids[i]:
            sits = [{p: 1.0} for p in profiles]
            for _ in range(mixtures):
                a, b = rng.choice(len(profiles), size=2, replace=False)
                q = float(rng.integers(1, 4)) / 4
                sits.append({profiles[a]: q, profiles[b]: 1 - q})
            for A, B in itertools.product(sits, repeat=2):
                c = PayoffComparison(PayoffSituation.make(X.name, i, t, A), PayoffSituation.make(X.name, i, t, B))
                U.add(c)
    for c in list(U.comparisons):
        for img in link_image(c, Link.from_witness(w, X, X2), X.agents):
            U.add(img)
    return U


def cubing_instance():
    """One agent, three actions with payoffs -2, 1, -1, and a twin whose payoffs are cubed."""
    env = Environment.from_table([1], {1: ["t"]}, ["o1", "o2", "o3", "o4"],
                                 {(1, "t", "o1"): -2.0, (1, "t", "o2"): 1.0, (1, "t", "o3"): -1.0,
                                  (1, "t", "o4"): -8.0}, name="cubing")
    X = Mechanism(env, {1: ["a", "b", "c"]}, {("a",): {"o1": 1.0}, ("b",): {"o2": 1.0}, ("c",): {"o3": 1.0}},
                  name="Y")
    X3 = Mechanism(env, {1: ["a", "b", "c"]}, {("a",): {"o4": 1.0}, ("b",): {"o2": 1.0}, ("c",): {"o3": 1.0}},
                   name="Ycubed")
    link = Link("Y", "Ycubed", {1: {"a": "a", "b": "b", "c": "c"}}, {1: {"t": "t"}})
    U = ComparisonUniverse([X, X3])
    sits = [{("a",): 1.0}, {("b",): 1.0}, {("c",): 1.0}, {("a",): 0.5, ("b",): 0.5}]
    for mid in ("Y", "Ycubed"):
        for A, B in itertools.product(sits, repeat=2):
            U.add(PayoffComparison(PayoffSituation.make(mid, 1, "t", A), PayoffSituation.make(mid, 1, "t", B)))
    return U, link


@demo("validity_preservation")
def _validity(seed, tol):
    X, X2 = kpa_pair(1, n=2)
    w = cat.witness_kpa(X, X2)
    U = validity_universe(X, X2, w, seed)
    probe = validity_probe([Link.from_witness(w, X, X2)], U, trials=100, seed=seed)
    atlas = atlas_from_witness(w, X, X2)
    declared = [DeclaredEquivalence((X.name, 1, s), float(X.payoffs(1)[X.env.type_index(1, s)].flat[0]),
                                    (X2.name, 1, t), float(X2.payoffs(1)[X2.env.type_index(1, t)].flat[0]))
                for t, s in w.tau[1].items()]
    atlas_rep = check_atlas_validity(atlas, declared, tol)
    CU, link = cubing_instance()
    adv = validity_probe([link], CU, trials=100, seed=seed)
    metrics = {"universe_size": len(U), "trials": probe.trials, "violations": probe.violations,
               "atlas_ok": atlas_rep.ok, "cubing_violations": adv.violations}
    return metrics, {"cubing_counterexample": adv.counterexamples[:1]}, \
        probe.violations == 0 and probe.trials >= 100 and atlas_rep.ok and adv.violations >= 1
