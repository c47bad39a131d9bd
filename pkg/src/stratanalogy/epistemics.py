"""Payoff comparisons, closure under witness links, and common knowledge.

Everything lives in a finite :class:`ComparisonUniverse`: a registry of
mechanisms plus an indexed list of comparisons with cached truth values.
Awareness profiles and knowledge structures refer to comparisons by index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .analogy import AnalogyWitness, invert
from .core import (
    GAP_TOL,
    Mechanism,
    Prior,
    StrategyProfile,
    as_mixed,
    check_bne,
    expected_utility,
    opponent_distribution,
    product_profile,
    pushforward,
    validate_lottery,
)
from .errors import InvalidInputError

TRUTH_TOL = 1e-12
KEY_DIGITS = 12

RESTRICTION_NOTE = ("deviations are limited to the declared finite list, which always "
                    "contains every pure deviation")


def profile_key(profile) -> tuple:
    """Canonical hashable form of a MixedProfile (zero-mass entries dropped)."""
    prof = as_mixed(profile)
    return tuple(sorted(((tuple(a), round(float(p), KEY_DIGITS)) for a, p in prof.items() if p > 0),
                        key=repr))


@dataclass(frozen=True)
class PayoffSituation:
    mech: str
    agent: object
    type_pt: object
    profile: tuple  # canonical key, see profile_key

    @classmethod
    def make(cls, mech, agent, type_pt, profile) -> "PayoffSituation":
        return cls(mech, agent, type_pt, profile_key(profile))

    @property
    def head(self) -> tuple:
        return (self.mech, self.agent, self.type_pt)

    def mixed(self) -> dict:
        return {a: p for a, p in self.profile}


@dataclass(frozen=True)
class PayoffComparison:
    """``left >= right``; both sides share mechanism, agent and type."""

    left: PayoffSituation
    right: PayoffSituation

    def __post_init__(self):
        if self.left.head != self.right.head:
            raise InvalidInputError("a payoff comparison needs the same mechanism, agent and type on both sides")

    @property
    def head(self) -> tuple:
        return self.left.head


@dataclass(frozen=True)
class PayoffEquivalence:
    left: PayoffSituation
    right: PayoffSituation

    def __post_init__(self):
        if self.left.agent != self.right.agent:
            raise InvalidInputError("a payoff equivalence relates situations of one agent")


class ComparisonUniverse:
    """Registered mechanisms and an indexed list of comparisons with truth values."""

    def __init__(self, mechanisms: Mapping | Iterable = ()):
        self.mechanisms: dict = {}
        self.comparisons: list = []
        self.truth: list = []
        self.meta: list = []
        self._index: dict = {}
        items = mechanisms.items() if isinstance(mechanisms, Mapping) else ((m.name, m) for m in mechanisms)
        for mid, m in items:
            self.register(m, mid)

    def register(self, mech: Mechanism, mech_id: str | None = None) -> str:
        mid = mech_id if mech_id is not None else mech.name
        if mid in self.mechanisms and self.mechanisms[mid] is not mech:
            raise InvalidInputError(f"mechanism id {mid!r} is already registered")
        self.mechanisms[mid] = mech
        return mid

    def __len__(self):
        return len(self.comparisons)

    def __contains__(self, c: PayoffComparison) -> bool:
        return c in self._index

    def index(self, c: PayoffComparison) -> int | None:
        return self._index.get(c)

    def add(self, c: PayoffComparison, **meta) -> int:
        if c in self._index:
            return self._index[c]
        truth = self.evaluate(c)
        self._index[c] = len(self.comparisons)
        self.comparisons.append(c)
        self.truth.append(truth)
        self.meta.append(meta)
        return len(self.comparisons) - 1

    def value(self, s: PayoffSituation) -> float:
        try:
            mech = self.mechanisms[s.mech]
        except KeyError:
            raise InvalidInputError(f"unknown mechanism id {s.mech!r}") from None
        return expected_utility(mech, s.agent, s.type_pt, s.mixed())

    def evaluate(self, c: PayoffComparison) -> bool:
        return self.value(c.left) >= self.value(c.right) - TRUTH_TOL

    def true_indices(self) -> frozenset:
        return frozenset(k for k, v in enumerate(self.truth) if v)

    def describe(self, k: int) -> dict:
        c = self.comparisons[k]
        return {"index": k, "mech": c.left.mech, "agent": c.left.agent, "type": c.left.type_pt,
                "left": [[list(a), p] for a, p in c.left.profile],
                "right": [[list(a), p] for a, p in c.right.profile], **self.meta[k]}


def comparison_truth(c: PayoffComparison, universe: ComparisonUniverse) -> bool:
    """Whether ``U[left] >= U[right]`` (inclusive, up to 1e-12)."""
    return universe.evaluate(c)


# links between mechanisms

@dataclass
class Link:
    """Action and type correspondences from mechanism ``src`` to ``dst``.

    ``tau[i]`` maps dst types to src types, as in an analogy witness.  A link
    built from a verified witness carries an affine payoff map; links built
    directly (e.g. from a non-affine payoff transform) are allowed for testing.
    """

    src: str
    dst: str
    alpha: dict
    tau: dict

    @classmethod
    def from_witness(cls, w: AnalogyWitness, X: Mechanism | str, X2: Mechanism | str) -> "Link":
        return cls(_mid(X), _mid(X2), w.alpha, w.tau)

    def reverse(self) -> "Link":
        return Link(self.dst, self.src, {i: invert(m) for i, m in self.alpha.items()},
                    {i: invert(m) for i, m in self.tau.items()})

    def heads(self, mech: str, agent, type_pt):
        """Images of a head ``(mech, agent, type)`` along this link (0 or more)."""
        if mech != self.src or agent not in self.tau:
            return []
        return [t for t, s in self.tau[agent].items() if s == type_pt]


def _mid(m) -> str:
    return m if isinstance(m, str) else m.name


def _as_links(links) -> list:
    out = []
    for item in links:
        if isinstance(item, Link):
            out.append(item)
        else:
            w, X, X2 = item
            out.append(Link.from_witness(w, X, X2))
    # every link is usable in both directions
    return out + [l.reverse() for l in out]


def link_image(c: PayoffComparison, link: Link, agents: list) -> list:
    out = []
    for t in link.heads(c.left.mech, c.left.agent, c.left.type_pt):
        sides = []
        for s in (c.left, c.right):
            mixed = pushforward(s.mixed(), lambda a: tuple(link.alpha[i][x] for i, x in zip(agents, a)))
            sides.append(PayoffSituation.make(link.dst, s.agent, t, mixed))
        out.append(PayoffComparison(*sides))
    return out


@dataclass
class ClosureResult:
    members: frozenset
    out_of_universe: list = field(default_factory=list)

    def __contains__(self, k):
        return k in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)


def close_comparisons(generators: Iterable[int], links, universe: ComparisonUniverse) -> ClosureResult:
    """Least set containing ``generators`` and closed under transfer along ``links``.

    Images not present in the universe are collected in ``out_of_universe``.
    """
    links = _as_links(links)
    members = set(generators)
    for k in members:
        if not 0 <= k < len(universe):
            raise InvalidInputError(f"comparison index {k} out of range")
    missing: dict = {}
    frontier = sorted(members)
    while frontier:
        nxt = []
        for k in frontier:
            c = universe.comparisons[k]
            agents = universe.mechanisms[c.left.mech].agents
            for link in links:
                for img in link_image(c, link, agents):
                    j = universe.index(img)
                    if j is None:
                        missing.setdefault(img, None)
                    elif j not in members:
                        members.add(j)
                        nxt.append(j)
        frontier = nxt
    return ClosureResult(frozenset(members), list(missing))


def is_closed_under(R: Iterable[int], links, universe: ComparisonUniverse) -> bool:
    R = frozenset(R)
    return close_comparisons(R, links, universe).members == R


@dataclass
class ValidityReport:
    trials: int
    violations: int
    counterexamples: list

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"ok": self.ok, "trials": self.trials, "violations": self.violations,
                "counterexamples": self.counterexamples}


def validity_probe(links, universe: ComparisonUniverse, trials: int = 100, seed: int = 0,
                   max_examples: int = 5) -> ValidityReport:
    """Close random subsets of true comparisons and look for derived false ones."""
    rng = np.random.default_rng(seed)
    true = sorted(universe.true_indices())
    links = list(links)
    count, examples = 0, []
    for _ in range(trials):
        pick = [k for k, keep in zip(true, rng.random(len(true)) < 0.5) if keep]
        closed = close_comparisons(pick, links, universe)
        bad = sorted(k for k in closed.members if not universe.truth[k])
        if bad:
            count += 1
            if len(examples) < max_examples:
                examples.append({"generators": pick, "false": bad})
    return ValidityReport(trials, count, examples)


# knowledge

@dataclass(frozen=True)
class AwarenessProfile:
    """Per agent, the comparison indices that agent is aware of."""

    sets: Mapping

    @classmethod
    def make(cls, sets: Mapping) -> "AwarenessProfile":
        return cls({a: frozenset(v) for a, v in sets.items()})

    def __getitem__(self, agent) -> frozenset:
        return self.sets.get(agent, frozenset())

    def __hash__(self):
        return hash(tuple(sorted((repr(a), v) for a, v in self.sets.items())))

    def validate(self, universe: ComparisonUniverse) -> None:
        n = len(universe)
        for a, v in self.sets.items():
            if any(not 0 <= k < n for k in v):
                raise InvalidInputError(f"awareness of agent {a!r} refers to an index out of range")

    def without(self, agent, k: int) -> "AwarenessProfile":
        sets = dict(self.sets)
        sets[agent] = frozenset(sets.get(agent, frozenset()) - {k})
        return AwarenessProfile(sets)


@dataclass
class KnowledgeStructure:
    """Per agent, the nonempty set of awareness profiles that agent considers possible."""

    universe: ComparisonUniverse
    sets: dict

    def __post_init__(self):
        for a, profiles in self.sets.items():
            if not profiles:
                raise InvalidInputError(f"knowledge set of agent {a!r} is empty")
            for w in profiles:
                w.validate(self.universe)

    @property
    def agents(self) -> list:
        return list(self.sets)

    @classmethod
    def full(cls, universe: ComparisonUniverse, agents, members: Iterable[int] | None = None):
        """Every agent sure that every agent is aware of ``members``."""
        members = frozenset(range(len(universe)) if members is None else members)
        omega = AwarenessProfile({a: members for a in agents})
        return cls(universe, {a: [omega] for a in agents})


def knows(K_i: Iterable[AwarenessProfile], event: Callable[[AwarenessProfile], bool]) -> bool:
    """Agent knows ``event`` iff every profile the agent considers possible satisfies it."""
    return all(event(w) for w in K_i)


def is_common_knowledge(k: int, K: KnowledgeStructure) -> bool:
    agents = K.agents

    def everyone_aware(w: AwarenessProfile) -> bool:
        return all(k in w[j] for j in agents)

    return all(knows(K.sets[i], everyone_aware) for i in agents)


def equilibrium_comparison_universe(mech: Mechanism, prior: Prior, sigma: StrategyProfile,
                                    deviations: Mapping | None = None,
                                    universe: ComparisonUniverse | None = None,
                                    mech_id: str | None = None) -> ComparisonUniverse:
    """Comparisons 'sigma_j(t) beats deviation d' for every agent, positive-mass type and deviation.

    All pure deviations are always included; ``deviations`` adds own-action
    lotteries per agent.
    """
    universe = universe if universe is not None else ComparisonUniverse()
    mid = universe.register(mech, mech_id)
    for c, meta in _equilibrium_comparisons(mech, mid, prior, sigma, deviations):
        universe.add(c, **meta)
    return universe


def _deviation_list(mech: Mechanism, agent, deviations) -> list:
    devs = [{a: 1.0} for a in mech.action_sets[agent]]
    for d in (deviations or {}).get(agent, []):
        d = validate_lottery(as_mixed_lottery(d), mech.action_sets[agent], what="deviation")
        if all(_lottery_key(d) != _lottery_key(x) for x in devs):
            devs.append(d)
    return devs


def as_mixed_lottery(d) -> dict:
    return dict(d) if isinstance(d, Mapping) else {d: 1.0}


def _lottery_key(d: Mapping) -> tuple:
    return tuple(sorted(((a, round(p, KEY_DIGITS)) for a, p in d.items() if p > 0), key=repr))


def _equilibrium_comparisons(mech, mid, prior, sigma, deviations):
    for agent in mech.agents:
        pos = mech.agents.index(agent)
        marg = prior.marginal(agent)
        for t in mech.env.type_grids[agent]:
            if marg.get(t, 0.0) <= 0:
                continue
            opp = opponent_distribution(sigma, prior, agent, t)
            left = PayoffSituation.make(mid, agent, t, product_profile(sigma.lottery(agent, t), opp, pos))
            for d in _deviation_list(mech, agent, deviations):
                right = PayoffSituation.make(mid, agent, t, product_profile(d, opp, pos))
                yield PayoffComparison(left, right), {"deviation": [[a, p] for a, p in _lottery_key(d)]}


@dataclass
class CKReport:
    ok: bool
    bne_ok: bool
    checked: int
    failures: list
    note: str = RESTRICTION_NOTE

    def as_dict(self) -> dict:
        return {"ok": self.ok, "bne_ok": self.bne_ok, "checked": self.checked,
                "failures": self.failures, "note": self.note}


def check_ck_equilibrium(mech: Mechanism, prior: Prior, sigma: StrategyProfile, K: KnowledgeStructure,
                         deviations: Mapping | None = None, tol: float = GAP_TOL,
                         mech_id: str | None = None) -> CKReport:
    """Is it common knowledge under ``K`` that ``sigma`` is an equilibrium?

    Every equilibrium comparison must be in ``K``'s universe and be common
    knowledge; comparisons absent from the universe count as failures.
    """
    bne = check_bne(mech, prior, sigma, tol)
    universe = K.universe
    mid = mech_id if mech_id is not None else _registered_id(universe, mech)
    failures, checked = [], 0
    for c, meta in _equilibrium_comparisons(mech, mid, prior, sigma, deviations):
        checked += 1
        k = universe.index(c)
        if k is None:
            failures.append({"index": None, "reason": "not in universe", "agent": c.left.agent,
                             "type": c.left.type_pt, **meta})
        elif not is_common_knowledge(k, K):
            failures.append({**universe.describe(k), "reason": "not common knowledge"})
    return CKReport(bne.ok and not failures, bne.ok, checked, failures)


def _registered_id(universe: ComparisonUniverse, mech: Mechanism) -> str:
    for mid, m in universe.mechanisms.items():
        if m is mech:
            return mid
    return mech.name


def transfer_awareness(w: AwarenessProfile, links, universe: ComparisonUniverse) -> AwarenessProfile:
    """Close each agent's awareness set under the links."""
    return AwarenessProfile({a: close_comparisons(v, links, universe).members for a, v in w.sets.items()})


def transfer_knowledge(K: KnowledgeStructure, links) -> KnowledgeStructure:
    """Agents who reason along the links: every possible awareness profile is closed."""
    return KnowledgeStructure(K.universe, {a: [transfer_awareness(w, links, K.universe) for w in ws]
                                           for a, ws in K.sets.items()})
