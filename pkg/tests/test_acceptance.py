"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import contextlib
import time
from fractions import Fraction

import numpy as np
import pytest

from stratanalogy import catalog as cat
from stratanalogy import experiments as ex
from stratanalogy.analogy import pushforward_prior, transfer_equilibrium, verify_equivalence, verify_witness
from stratanalogy.core import Prior, check_bne, find_pure_bne, has_dominant_strategies
from stratanalogy.io import Document
from stratanalogy.search import search_witness

from .conftest import DATA

# search node goldens on the shipped negative documents
NODE_GOLDENS = {("tiny_1pa_2pa.yaml", "1PA", "2PA"): 0, ("tiny_kpa0_kec1.yaml", "2PA0", "2EC1"): 0}


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def run(n: int, label: str, limit: float):
        start = time.perf_counter()
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"
        except BaseException as exc:
            with capsys.disabled():
                print(f"\nFAIL criterion {n}: {label} ({exc})")
            raise
        with capsys.disabled():
            print(f"\nPASS criterion {n}: {label} ({elapsed:.2f}s)")
    return run


def test_c01_fpa_dutch(criterion):
    with criterion(1, "first-price and Dutch auctions are equivalent", 1.0):
        F, D = ex.fpa_dutch_pair()
        assert F.action_sets[1] == [0, 2, 4, 6, 8, 10] and len(F.agents) == 2
        rep = verify_equivalence(F, D, cat.witness_fpa_dutch(F, D), 1e-12)
        assert rep.ok and rep.worst_gap <= 1e-12


def test_c02_posted_price(criterion):
    with criterion(2, "posted price P=3 is analogous to P=5", 1.0):
        X, X2 = ex.posted_pair(3, 5)
        rep = verify_witness(X, X2, cat.witness_posted_price(X, X2), 0.0)
        assert rep.ok and rep.worst_gap == 0


def test_c03_kpa_reserve(criterion):
    with criterion(3, "kPA reserve family and transferred BNE", 10.0):
        for k in (1, 2):
            X, X2 = ex.kpa_pair(k, n=3, r=1, r2=3)
            rep = verify_witness(X, X2, cat.witness_kpa(X, X2), 1e-12)
            assert rep.ok and rep.worst_gap <= 1e-12
        X, X2 = ex.kpa_pair(1, n=3)
        w = cat.witness_kpa(X, X2)
        F = Prior.uniform(X2.env)
        eqs = find_pure_bne(X, pushforward_prior(w.tau, F))
        assert eqs
        for sigma in eqs:
            assert check_bne(X2, F, transfer_equilibrium(w, sigma), 1e-9).ok


def test_c04_kec(criterion):
    with criterion(4, "kEC family with kappa = c'/c", 1.0):
        for k in (1, 2):
            X, X2 = ex.kec_pair(k, c=1, c2=2)
            w = cat.witness_kec(X, X2)
            assert {v for m in w.kappa.values() for v in m.values()} == {2.0}
            rep = verify_witness(X, X2, w, 1e-12)
            assert rep.ok and rep.worst_gap <= 1e-12


def test_c05_dominance_separations(criterion):
    with criterion(5, "dominance separates 2PA from 1PA(0) and 2EC(1)", 5.0):
        for r in (0, 1, 2):
            assert has_dominant_strategies(ex.tiny_kpa(2, r))
        assert not has_dominant_strategies(ex.tiny_kpa(1, 0))
        assert not has_dominant_strategies(ex.tiny_kec(2, 1))
        for name in ("different_k_break", "kec_zero_break"):
            res = ex.run_demo(name)
            assert res.passed and ex.DOMINANCE_CERT in res.metrics["certificates"]


def test_c06_exhaustive_non_witness(criterion):
    with criterion(6, "exhaustive search finds no witness on shipped tiny documents", 10.0):
        for (fname, a, b), golden in NODE_GOLDENS.items():
            doc = Document.load(DATA / fname)
            X, X2 = doc.mechanism(a), doc.mechanism(b)
            first, second = search_witness(X, X2), search_witness(X, X2)
            assert first.status == "none" and first.witness is None
            assert first.nodes == second.nodes == golden


def test_c07_scoring(criterion):
    with criterion(7, "scoring auctions: linear analogy and ratio break", 5.0):
        X, X2 = ex.linear_pair(0.5, 0.25, q=(1, 2))
        rep = verify_witness(X, X2, cat.witness_scoring_linear(X, X2), 1e-12)
        assert rep.ok and rep.worst_gap <= 1e-12
        R1, R2 = ex.ratio_pair(0.25, 0.75, q=(2, 1))
        assert ex._win_profiles(R1, 2) == 0
        assert ex._win_profiles(R2, 2) > 0
        assert search_witness(R1, R2).status == "none"


def test_c08_pricing(criterion):
    with criterion(8, "input and output pricing analogies and the non-isoelastic break", 5.0):
        X, X2 = ex.input_pair(1.0, 2.0)
        grid = sorted(t[0] for t in X2.env.type_grids[1])
        assert np.allclose(np.diff(np.log(grid)), np.log(2) / 2)  # geometric
        rep = verify_witness(X, X2, cat.witness_input_pricing(X, X2), 1e-12)
        assert rep.ok and rep.worst_gap <= 1e-12
        m = ex.run_demo("pricing_output_isoelastic").metrics
        assert m["worst_gap"] <= 1e-12 and m["brute_force_gap"] <= 1e-12
        m = ex.run_demo("pricing_output_break").metrics
        assert Fraction(m["ratio_at_half"]) == Fraction(8, 3) and Fraction(m["ratio_at_one"]) == 3
        assert m["search"]["status"] == "none"


def test_c09_validity(criterion):
    with criterion(9, "witness links preserve validity; cubing link breaks it", 10.0):
        m = ex.run_demo("validity_preservation").metrics
        assert m["trials"] >= 100 and m["violations"] == 0
        assert m["cubing_violations"] >= 1


def test_c10_epistemics(criterion):
    with criterion(10, "common knowledge of equilibrium and its transfer", 5.0):
        m = ex.run_demo("example1_ck").metrics
        assert m["ck_full"] and not m["ck_after_removal"] and m["failures_named"] == [0]
        m = ex.run_demo("ck_transfer").metrics
        assert m["ck_on_X"] and not m["ck_on_X2_before_closure"] and m["ck_on_X2_after_closure"]


def test_c11_optimal_reserve(criterion):
    with criterion(11, "optimal reserve for uniform values is 1/2", 1.0):
        v = np.linspace(0.0, 1.0, 100_000)
        r = cat.optimal_reserve(v, pdf=np.ones_like(v), cdf=v)
        assert abs(r - 0.5) <= 1e-6
