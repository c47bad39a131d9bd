"""Finite environments, mechanisms, priors and strategies.

Everything here is exact enumeration over finite grids.  A mechanism caches,
per agent, a dense payoff tensor ``U[t, a_1, ..., a_N]`` holding the expected
utility of type ``t`` at each pure action profile; mixed quantities are
contractions of that tensor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetError, ConditioningError, InvalidInputError

PROB_TOL = 1e-12
GAP_TOL = 1e-9
ENUMERATION_CAP = 2_000_000

Label = Hashable
Lottery = dict  # label -> probability
MixedProfile = dict  # action profile tuple -> probability


def validate_lottery(lottery: Mapping, support: Iterable | None = None,
                     what: str = "lottery", tol: float = PROB_TOL) -> dict:
    """Check nonnegativity and normalisation; return a plain dict copy."""
    if not lottery:
        raise InvalidInputError(f"{what} is empty")
    allowed = None if support is None else set(support)
    total = 0.0
    for label, p in lottery.items():
        if allowed is not None and label not in allowed:
            raise InvalidInputError(f"{what}: unknown label {label!r}")
        if not (p >= -tol) or math.isnan(p):
            raise InvalidInputError(f"{what}: negative probability {p} on {label!r}")
        total += p
    if abs(total - 1.0) > tol * max(1, len(lottery)):
        raise InvalidInputError(f"{what}: probabilities sum to {total!r}, not 1")
    return dict(lottery)


def point_mass(label) -> dict:
    return {label: 1.0}


def pushforward(lottery: Mapping, mapping: Mapping | Callable) -> dict:
    """Image of a lottery under a label map; masses of colliding images add."""
    f = mapping.__getitem__ if isinstance(mapping, Mapping) else mapping
    out: dict = {}
    for label, p in lottery.items():
        image = f(label)
        out[image] = out.get(image, 0.0) + p
    return out


@dataclass
class Environment:
    """Agents, type grids and Bernoulli utilities.

    ``utility(agent, type_point, outcome)`` must be defined for every agent,
    every point of that agent's grid and every outcome a mechanism can
    produce.  Type points and outcomes are opaque hashable values.
    """

    agents: list
    type_grids: dict
    utility: Callable[[Any, Any, Any], float]
    outcomes: list | None = None
    name: str = ""

    def __post_init__(self):
        self.agents = list(self.agents)
        if not self.agents:
            raise InvalidInputError("environment needs at least one agent")
        if len(set(self.agents)) != len(self.agents):
            raise InvalidInputError("duplicate agent identifiers")
        grids = {}
        for agent in self.agents:
            if agent not in self.type_grids:
                raise InvalidInputError(f"no type grid for agent {agent!r}")
            grid = list(self.type_grids[agent])
            if not grid:
                raise InvalidInputError(f"empty type grid for agent {agent!r}")
            if len(set(grid)) != len(grid):
                raise InvalidInputError(f"duplicate type points for agent {agent!r}")
            grids[agent] = grid
        self.type_grids = grids
        self._agent_pos = {a: k for k, a in enumerate(self.agents)}
        self._type_pos = {a: {t: k for k, t in enumerate(g)} for a, g in grids.items()}

    @classmethod
    def from_table(cls, agents, type_grids, outcomes, table: Mapping, name: str = ""):
        """Build from an explicit ``(agent, type, outcome) -> utility`` table."""
        table = dict(table)
        for agent in agents:
            for t in type_grids[agent]:
                for y in outcomes:
                    if (agent, t, y) not in table:
                        raise InvalidInputError(
                            f"utility missing for agent {agent!r}, type {t!r}, outcome {y!r}")

        def utility(agent, t, y):
            try:
                return table[(agent, t, y)]
            except KeyError:
                raise InvalidInputError(
                    f"utility undefined for agent {agent!r}, type {t!r}, outcome {y!r}") from None

        env = cls(agents, type_grids, utility, list(outcomes), name)
        env.table = table
        return env

    def agent_index(self, agent) -> int:
        try:
            return self._agent_pos[agent]
        except KeyError:
            raise InvalidInputError(f"unknown agent {agent!r}") from None

    def type_index(self, agent, type_pt) -> int:
        try:
            return self._type_pos[agent][type_pt]
        except KeyError:
            raise InvalidInputError(f"type {type_pt!r} not in grid of agent {agent!r}") from None

    def with_type_grids(self, type_grids: Mapping, name: str | None = None) -> "Environment":
        """Same utilities and agents, different finite type grids."""
        env = Environment(self.agents, dict(type_grids), self.utility, self.outcomes,
                          self.name if name is None else name)
        if hasattr(self, "table"):
            env.table = self.table
        return env

    def compatible(self, other: "Environment") -> bool:
        """Whether two environments describe the same agents and utilities.

        Type grids may differ: finite grids cannot be closed under the
        translations and scalings that witnesses use.
        """
        if self is other or (self.agents == other.agents and self.utility is other.utility):
            return True
        if self.agents != other.agents:
            return False
        mine, theirs = getattr(self, "table", None), getattr(other, "table", None)
        if mine is None or theirs is None:
            return False
        return all(theirs[k] == v for k, v in mine.items() if k in theirs)


class Mechanism:
    """Action sets plus an outcome rule returning finite-support lotteries.

    ``outcome_rule`` is either a callable on action profiles (tuples in agent
    order) or a mapping from profiles to lotteries.
    """

    def __init__(self, env: Environment, action_sets: Mapping, outcome_rule,
                 name: str = "X", provenance: str | None = None, spec=None):
        self.env = env
        self.name = name
        self.provenance = provenance
        self.spec = spec
        self.action_sets = {}
        for agent in env.agents:
            if agent not in action_sets:
                raise InvalidInputError(f"no action set for agent {agent!r}")
            acts = list(action_sets[agent])
            if not acts:
                raise InvalidInputError(f"empty action set for agent {agent!r}")
            if len(set(acts)) != len(acts):
                raise InvalidInputError(f"duplicate actions for agent {agent!r}")
            self.action_sets[agent] = acts
        self._action_pos = {a: {x: k for k, x in enumerate(acts)}
                            for a, acts in self.action_sets.items()}
        if isinstance(outcome_rule, Mapping):
            table = dict(outcome_rule)
            for prof in self.profiles():
                if prof not in table:
                    raise InvalidInputError(f"outcome rule undefined at profile {prof!r}")
            self._rule = table.__getitem__
            self.table = table
        else:
            self._rule = outcome_rule
        self._payoffs: dict = {}

    def __repr__(self):
        return f"Mechanism({self.name!r}, shape={self.shape})"

    @property
    def agents(self) -> list:
        return self.env.agents

    @property
    def shape(self) -> tuple:
        return tuple(len(self.action_sets[a]) for a in self.agents)

    def profiles(self):
        return itertools.product(*(self.action_sets[a] for a in self.agents))

    def action_index(self, agent, action) -> int:
        try:
            return self._action_pos[agent][action]
        except KeyError:
            raise InvalidInputError(f"action {action!r} not available to agent {agent!r}") from None

    def profile_index(self, profile: Sequence) -> tuple:
        if len(profile) != len(self.agents):
            raise InvalidInputError(f"profile {profile!r} has wrong length")
        return tuple(self.action_index(a, x) for a, x in zip(self.agents, profile))

    def lottery(self, profile) -> dict:
        return validate_lottery(self._rule(tuple(profile)), what=f"outcome lottery at {profile!r}")

    def payoffs(self, agent) -> np.ndarray:
        """Dense tensor ``U[t, a_1, ..., a_N]`` for ``agent`` (cached)."""
        if agent not in self._payoffs:
            self._build_payoffs()
        return self._payoffs[agent]

    def _build_payoffs(self):
        env = self.env
        tensors = {a: np.zeros((len(env.type_grids[a]),) + self.shape) for a in self.agents}
        ranges = [range(n) for n in self.shape]
        for idx in itertools.product(*ranges):
            profile = tuple(self.action_sets[a][k] for a, k in zip(self.agents, idx))
            lot = self.lottery(profile)
            for agent in self.agents:
                for ti, t in enumerate(env.type_grids[agent]):
                    tensors[agent][(ti,) + idx] = sum(
                        p * env.utility(agent, t, y) for y, p in lot.items() if p)
        self._payoffs = tensors

    def payoff_vector(self, agent, type_pt) -> np.ndarray:
        """Flattened payoffs over pure profiles (C order) for one type."""
        ti = self.env.type_index(agent, type_pt)
        return self.payoffs(agent)[ti].reshape(-1)


def as_mixed(profile) -> dict:
    """Accept either a pure profile tuple or a MixedProfile mapping."""
    if isinstance(profile, Mapping):
        return dict(profile)
    return {tuple(profile): 1.0}


def mixed_to_array(mech: Mechanism, profile) -> np.ndarray:
    arr = np.zeros(mech.shape)
    prof = validate_lottery(as_mixed(profile), what="mixed profile")
    for a, p in prof.items():
        arr[mech.profile_index(a)] += p
    return arr


def expected_utility(mech: Mechanism, agent, type_pt, profile) -> float:
    """Expected utility of ``agent`` with ``type_pt`` under a (mixed) profile."""
    ti = mech.env.type_index(agent, type_pt)
    U = mech.payoffs(agent)[ti]
    total = 0.0
    for a, p in validate_lottery(as_mixed(profile), what="mixed profile").items():
        if p:
            total += p * U[mech.profile_index(a)]
    return float(total)


def product_profile(own: Mapping, opp: Mapping, position: int = 0) -> dict:
    """Independent product of an own-action lottery and an opponent lottery.

    Opponent profiles are tuples over the other agents in agent order;
    ``position`` is the own agent's slot in the full profile.
    """
    own = validate_lottery(own, what="own lottery")
    opp = validate_lottery(opp, what="opponent lottery")
    out: dict = {}
    for a, p in own.items():
        for rest, q in opp.items():
            rest = tuple(rest)
            prof = rest[:position] + (a,) + rest[position:]
            out[prof] = out.get(prof, 0.0) + p * q
    return out


@dataclass
class StrategyProfile:
    """Per agent, a map from type points to lotteries over actions."""

    agents: list
    maps: dict

    @classmethod
    def pure(cls, agents, choice: Mapping) -> "StrategyProfile":
        return cls(list(agents), {a: {t: {x: 1.0} for t, x in choice[a].items()} for a in agents})

    def lottery(self, agent, type_pt) -> dict:
        try:
            return self.maps[agent][type_pt]
        except KeyError:
            raise InvalidInputError(f"strategy undefined for agent {agent!r}, type {type_pt!r}") from None

    def is_pure(self) -> bool:
        return all(len([p for p in lot.values() if p > 0]) == 1
                   for m in self.maps.values() for lot in m.values())

    def as_pure(self) -> dict:
        """``{agent: {type: action}}``; only meaningful for pure profiles."""
        return {a: {t: max(lot, key=lot.get) for t, lot in m.items()} for a, m in self.maps.items()}

    def validate(self, mech: Mechanism) -> None:
        for agent in mech.agents:
            if agent not in self.maps:
                raise InvalidInputError(f"strategy missing agent {agent!r}")
            for t in mech.env.type_grids[agent]:
                validate_lottery(self.lottery(agent, t), mech.action_sets[agent],
                                 what=f"strategy of agent {agent!r} at type {t!r}")


@dataclass
class Prior:
    """Probability mass over type profiles (tuples in agent order).

    ``marginals`` is set for independent priors; it must reproduce ``pmf``.
    """

    agents: list
    pmf: dict
    marginals: dict | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.agents = list(self.agents)
        self.pmf = validate_lottery(self.pmf, what="prior")
        if self.marginals is not None:
            for agent, marg in self.marginals.items():
                validate_lottery(marg, what=f"marginal of agent {agent!r}")
            for prof, p in self.pmf.items():
                q = math.prod(self.marginals[a][t] for a, t in zip(self.agents, prof))
                if abs(p - q) > PROB_TOL:
                    raise InvalidInputError("ipv marginals do not reproduce the prior pmf")

    @property
    def ipv(self) -> bool:
        return self.marginals is not None

    @classmethod
    def product(cls, agents, marginals: Mapping) -> "Prior":
        agents = list(agents)
        margs = {a: validate_lottery(marginals[a], what=f"marginal of {a!r}") for a in agents}
        pmf = {}
        for prof in itertools.product(*(list(margs[a]) for a in agents)):
            p = math.prod(margs[a][t] for a, t in zip(agents, prof))
            if p > 0:
                pmf[prof] = p
        return cls(agents, pmf, margs)

    @classmethod
    def uniform(cls, env: Environment) -> "Prior":
        return cls.product(env.agents, {a: {t: 1.0 / len(g) for t in g}
                                        for a, g in env.type_grids.items()})

    def marginal(self, agent) -> dict:
        if self.marginals is not None:
            return dict(self.marginals[agent])
        k = self.agents.index(agent)
        out: dict = {}
        for prof, p in self.pmf.items():
            out[prof[k]] = out.get(prof[k], 0.0) + p
        return out

    def conditional(self, agent, type_pt) -> dict:
        """Distribution of the opponents' type tuple given ``agent``'s type."""
        key = (agent, type_pt)
        if key in self._cache:
            return self._cache[key]
        k = self.agents.index(agent)
        if self.marginals is not None:
            if self.marginals[agent].get(type_pt, 0.0) <= 0:
                raise ConditioningError(f"type {type_pt!r} of agent {agent!r} has zero probability")
            others = [a for a in self.agents if a != agent]
            out = {}
            for prof in itertools.product(*(list(self.marginals[a]) for a in others)):
                p = math.prod(self.marginals[a][t] for a, t in zip(others, prof))
                if p > 0:
                    out[prof] = p
        else:
            mass = 0.0
            joint: dict = {}
            for prof, p in self.pmf.items():
                if prof[k] == type_pt and p > 0:
                    rest = prof[:k] + prof[k + 1:]
                    joint[rest] = joint.get(rest, 0.0) + p
                    mass += p
            if mass <= 0:
                raise ConditioningError(f"type {type_pt!r} of agent {agent!r} has zero probability")
            out = {r: p / mass for r, p in joint.items()}
        self._cache[key] = out
        return out


def opponent_distribution(sigma: StrategyProfile, prior: Prior, agent, type_pt) -> dict:
    """Distribution over opponents' action tuples conditional on ``type_pt``."""
    others = [a for a in prior.agents if a != agent]
    if prior.ipv:
        # independent types: mix each opponent's strategy over its marginal
        prior.conditional(agent, type_pt)  # raises on zero-probability types
        per_agent = []
        for j in others:
            mix: dict = {}
            for t, q in prior.marginals[j].items():
                if q <= 0:
                    continue
                for x, p in sigma.lottery(j, t).items():
                    mix[x] = mix.get(x, 0.0) + q * p
            per_agent.append(mix)
        out = {}
        for combo in itertools.product(*(list(m.items()) for m in per_agent)):
            prof = tuple(x for x, _ in combo)
            out[prof] = math.prod(p for _, p in combo)
        return out
    out = {}
    for types, q in prior.conditional(agent, type_pt).items():
        lots = [sigma.lottery(j, t) for j, t in zip(others, types)]
        for combo in itertools.product(*(list(l.items()) for l in lots)):
            prof = tuple(x for x, _ in combo)
            out[prof] = out.get(prof, 0.0) + q * math.prod(p for _, p in combo)
    return out


def _own_payoffs(mech: Mechanism, agent, type_pt, opp: Mapping) -> np.ndarray:
    """Expected payoff of each own pure action against an opponent lottery."""
    i = mech.env.agent_index(agent)
    U = np.moveaxis(mech.payoffs(agent)[mech.env.type_index(agent, type_pt)], i, 0)
    others = [a for a in mech.agents if a != agent]
    dense = np.zeros(U.shape[1:])
    for prof, p in opp.items():
        dense[tuple(mech.action_index(a, x) for a, x in zip(others, prof))] += p
    return np.tensordot(U, dense, axes=U.ndim - 1) if U.ndim > 1 else U.copy()


@dataclass
class BNEReport:
    ok: bool
    worst_gap: float
    violations: list
    skipped_types: list

    def as_dict(self) -> dict:
        return {"ok": self.ok, "worst_gap": self.worst_gap,
                "violations": [list(v) for v in self.violations],
                "skipped_types": [list(s) for s in self.skipped_types]}


def check_bne(mech: Mechanism, prior: Prior, sigma: StrategyProfile, tol: float = GAP_TOL) -> BNEReport:
    """Verify a Bayes-Nash equilibrium against all pure unilateral deviations."""
    sigma.validate(mech)
    worst = 0.0
    violations, skipped = [], []
    for agent in mech.agents:
        marg = prior.marginal(agent)
        for t in mech.env.type_grids[agent]:
            if marg.get(t, 0.0) <= 0:
                skipped.append((agent, t))
                continue
            vec = _own_payoffs(mech, agent, t, opponent_distribution(sigma, prior, agent, t))
            own = sigma.lottery(agent, t)
            value = sum(p * vec[mech.action_index(agent, x)] for x, p in own.items())
            best = int(np.argmax(vec))
            gap = float(vec[best] - value)
            worst = max(worst, gap)
            if gap > tol:
                violations.append((agent, t, mech.action_sets[agent][best]))
    return BNEReport(not violations, worst, violations, skipped)


def count_pure_profiles(mech: Mechanism) -> int:
    return math.prod(len(mech.action_sets[a]) ** len(mech.env.type_grids[a]) for a in mech.agents)


def find_pure_bne(mech: Mechanism, prior: Prior, tol: float = GAP_TOL,
                  cap: int = ENUMERATION_CAP) -> list[StrategyProfile]:
    """All pure-strategy BNE, in lexicographic order of the grids."""
    count = count_pure_profiles(mech)
    if count > cap:
        raise BudgetError(f"{count} pure strategy profiles exceed the cap {cap}", count)
    agents = mech.agents
    grids = [mech.env.type_grids[a] for a in agents]
    n = len(agents)
    margs = [prior.marginal(a) for a in agents]
    live = [[k for k, t in enumerate(g) if margs[i].get(t, 0.0) > 0] for i, g in enumerate(grids)]
    moved = [np.moveaxis(mech.payoffs(a), i + 1, 1) for i, a in enumerate(agents)]
    conds = {}
    for i, a in enumerate(agents):
        others = [j for j in range(n) if j != i]
        for k in live[i]:
            cond = prior.conditional(a, grids[i][k])
            conds[i, k] = [([mech.env.type_index(agents[j], t) for j, t in zip(others, ts)], q)
                           for ts, q in cond.items()]
    per_agent = [list(itertools.product(range(len(mech.action_sets[a])), repeat=len(grids[i])))
                 for i, a in enumerate(agents)]
    found = []
    opp_shape = [tuple(mech.shape[j] for j in range(n) if j != i) for i in range(n)]
    for combo in itertools.product(*per_agent):
        ok = True
        for i in range(n):
            others = [j for j in range(n) if j != i]
            for k in live[i]:
                dense = np.zeros(opp_shape[i])
                for tidx, q in conds[i, k]:
                    dense[tuple(combo[j][tj] for j, tj in zip(others, tidx))] += q
                U = moved[i][k]
                vec = np.tensordot(U, dense, axes=U.ndim - 1) if U.ndim > 1 else U
                if vec.max() - vec[combo[i][k]] > tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            choice = {a: {t: mech.action_sets[a][combo[i][k]] for k, t in enumerate(grids[i])}
                      for i, a in enumerate(agents)}
            found.append(StrategyProfile.pure(agents, choice))
    return found


def dominant_strategy(mech: Mechanism, agent, tol: float = GAP_TOL) -> dict | None:
    """A pure map type -> action optimal against every opposing pure profile, or None."""
    i = mech.env.agent_index(agent)
    acts = mech.action_sets[agent]
    out = {}
    for ti, t in enumerate(mech.env.type_grids[agent]):
        U = np.moveaxis(mech.payoffs(agent)[ti], i, 0).reshape(len(acts), -1)
        best = U.max(axis=0)
        ok = np.all(U >= best - tol, axis=1)
        if not ok.any():
            return None
        out[t] = acts[int(np.argmax(ok))]
    return out


def has_dominant_strategies(mech: Mechanism, tol: float = GAP_TOL) -> bool:
    return all(dominant_strategy(mech, a, tol) is not None for a in mech.agents)


def is_dominant(mech: Mechanism, agent, strategy: Mapping, tol: float = GAP_TOL) -> bool:
    """Check a (possibly mixed) strategy ``type -> lottery`` for dominance."""
    i = mech.env.agent_index(agent)
    acts = mech.action_sets[agent]
    for ti, t in enumerate(mech.env.type_grids[agent]):
        lot = strategy[t]
        if not isinstance(lot, Mapping):
            lot = {lot: 1.0}
        U = np.moveaxis(mech.payoffs(agent)[ti], i, 0).reshape(len(acts), -1)
        value = sum(p * U[mech.action_index(agent, x)] for x, p in lot.items())
        if np.any(U.max(axis=0) - value > tol):
            return False
    return True
