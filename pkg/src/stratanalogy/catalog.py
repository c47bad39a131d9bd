"""Discretised mechanism families and their canonical witnesses.

Each ``make_*`` constructor returns ``(Environment, Mechanism)`` built from a
:class:`FamilySpec`.  Witness constructors take the two mechanisms they relate
and fail with :class:`GridError` when the finite grids are not mapped onto
each other exactly by the family's map; grids are never snapped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .analogy import AnalogyWitness, EquivalenceWitness
from .core import Environment, Mechanism
from .errors import GridError, InvalidInputError, RegularityError

NO_BID = None  # the nonparticipation action

FAMILIES = (
    "posted_price", "fpa", "dutch", "kpa", "kec", "one_half_price", "all_pay_translated",
    "scoring_linear", "scoring_ratio", "input_pricing", "output_pricing",
)

PROVENANCE = {
    "posted_price": "posted-price example: buy or do not buy at price P",
    "fpa": "first-price auction with bounded bids, the highest bid wins and pays that bid",
    "dutch": "Dutch clock auction in reduced normal form (stopping times)",
    "kpa": "kth-price auction with reserve r, winner pays max(a^(k), r)",
    "kec": "kth-price auction with entry cost c, every participant pays c",
    "one_half_price": "1.5-price auction: winner pays the mean of the two highest bids",
    "all_pay_translated": "bid/type translation of the all-pay auction",
    "scoring_linear": "first-score procurement auction, score -lambda*b + (1-lambda)*q",
    "scoring_ratio": "first-score procurement auction, score lambda*min(b)/b + (1-lambda)*q",
    "input_pricing": "capacity requests, proportional rationing, tariff on capacity",
    "output_pricing": "output requests, proportional rationing, tariff on output",
}

MATCH_TOL = 1e-12


@dataclass
class FamilySpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown mechanism family {self.family!r}")

    def get(self, key, default=None):
        return self.params.get(key, default)

    def require(self, key):
        if key not in self.params:
            raise InvalidInputError(f"{self.family}: missing parameter {key!r}")
        return self.params[key]


def build(spec: FamilySpec | Mapping, name: str | None = None) -> tuple[Environment, Mechanism]:
    if not isinstance(spec, FamilySpec):
        spec = FamilySpec(spec["family"], dict(spec.get("params", {})))
    env, mech = CONSTRUCTORS[spec.family](spec)
    if name is not None:
        mech.name = name
    return env, mech


def _spec(spec, family) -> FamilySpec:
    if isinstance(spec, FamilySpec):
        return spec
    return FamilySpec(family, dict(spec))


def _agents(spec: FamilySpec, default: int = 2) -> list:
    n = int(spec.get("n", default))
    if n < 1:
        raise InvalidInputError("agent count must be positive")
    return list(range(1, n + 1))


def _per_agent(spec: FamilySpec, key: str, agents: list) -> dict:
    """A grid given once for everybody or as ``{agent: grid}``."""
    value = spec.require(key)
    if isinstance(value, Mapping):
        grids = {a: list(value[a]) for a in agents}
    else:
        grids = {a: list(value) for a in agents}
    for a, g in grids.items():
        if not g:
            raise InvalidInputError(f"{spec.family}: empty {key} grid for agent {a}")
        if any(not (y > x) for x, y in zip(g, g[1:])):
            raise InvalidInputError(f"{spec.family}: {key} grid for agent {a} is not strictly increasing")
    return grids


def _tie_winners(values: dict, best: Callable) -> list:
    top = best(values.values())
    return [a for a, v in values.items() if abs(v - top) <= MATCH_TOL * max(1.0, abs(top))]


def _split(winners: list, outcome_for: Callable, tie: str) -> dict:
    if tie == "first":
        return {outcome_for(winners[0]): 1.0}
    if tie != "uniform":
        raise InvalidInputError(f"unknown tie-breaking rule {tie!r}")
    out: dict = {}
    for w in winners:
        y = outcome_for(w)
        out[y] = out.get(y, 0.0) + 1.0 / len(winners)
    return out


# single-item environment: outcome (winner or None, payments tuple)

def single_item_utility(agent, value, outcome) -> float:
    winner, payments = outcome
    return (value if winner == agent else 0.0) - payments[agent - 1]


def single_item_env(agents: list, types: Mapping) -> Environment:
    return Environment(agents, types, single_item_utility, name="single_item")


def _pay_vector(n: int, charges: Mapping) -> tuple:
    return tuple(float(charges.get(a, 0.0)) for a in range(1, n + 1))


def kth_highest(bids, k: int) -> float:
    ranked = sorted(bids, reverse=True)
    return ranked[k - 1] if len(ranked) >= k else 0.0


def make_posted_price(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "posted_price")
    price = float(spec.require("price"))
    if price < 0:
        raise InvalidInputError("posted price must be nonnegative")
    env = single_item_env([1], {1: list(spec.require("types"))})

    def rule(profile):
        if profile[0] == "buy":
            return {(1, (price,)): 1.0}
        return {(None, (0.0,)): 1.0}

    mech = Mechanism(env, {1: ["buy", "no"]}, rule, name=f"PP({price:g})",
                     provenance=PROVENANCE["posted_price"], spec=spec)
    return env, mech


def make_fpa(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "fpa")
    agents = _agents(spec)
    n = len(agents)
    bids = _per_agent(spec, "bids", agents)
    top = spec.get("ceiling")
    for g in bids.values():
        if min(g) < 0 or (top is not None and max(g) > float(top)):
            raise InvalidInputError("first-price bids must lie in [0, ceiling]")
    tie = spec.get("tie", "uniform")
    env = single_item_env(agents, _per_agent(spec, "types", agents))

    def rule(profile):
        offered = dict(zip(agents, profile))
        winners = _tie_winners(offered, max)
        return _split(winners, lambda w: (w, _pay_vector(n, {w: offered[w]})), tie)

    return env, Mechanism(env, bids, rule, name="FPA", provenance=PROVENANCE["fpa"], spec=spec)


def make_dutch(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "dutch")
    agents = _agents(spec)
    n = len(agents)
    ceiling = float(spec.require("ceiling"))
    rate = float(spec.require("rate"))
    if rate <= 0:
        raise InvalidInputError("clock rate must be positive")
    stops = _per_agent(spec, "stops", agents)
    for g in stops.values():
        if min(g) < 0 or max(g) > ceiling / rate + MATCH_TOL:
            raise InvalidInputError("stopping times must lie in [0, ceiling/rate]")
    tie = spec.get("tie", "uniform")
    env = single_item_env(agents, _per_agent(spec, "types", agents))

    def rule(profile):
        chosen = dict(zip(agents, profile))
        winners = _tie_winners(chosen, min)
        return _split(winners, lambda w: (w, _pay_vector(n, {w: ceiling - rate * chosen[w]})), tie)

    return env, Mechanism(env, stops, rule, name="Dutch", provenance=PROVENANCE["dutch"], spec=spec)


def _standard_auction(spec, payments: Callable, name: str, min_bid: float):
    """Nonparticipation plus active bids; highest participant wins.

    ``payments(winner, active)`` returns ``{agent: payment}`` where ``active``
    maps participating agents to their bids.
    """
    agents = _agents(spec)
    n = len(agents)
    bids = _per_agent(spec, "bids", agents)
    for g in bids.values():
        if min(g) < min_bid - MATCH_TOL:
            raise InvalidInputError(f"{spec.family}: active bids must be at least {min_bid:g}")
    tie = spec.get("tie", "uniform")
    env = single_item_env(agents, _per_agent(spec, "types", agents))

    def rule(profile):
        active = {a: b for a, b in zip(agents, profile) if b is not NO_BID}
        if not active:
            return {(None, _pay_vector(n, {})): 1.0}
        winners = _tie_winners(active, max)
        return _split(winners, lambda w: (w, _pay_vector(n, payments(w, active))), tie)

    actions = {a: [NO_BID] + bids[a] for a in agents}
    return env, Mechanism(env, actions, rule, name=name, provenance=PROVENANCE[spec.family], spec=spec)


def make_kpa(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "kpa")
    k = int(spec.require("k"))
    r = float(spec.get("reserve", 0.0))
    if k < 1 or k > int(spec.get("n", 2)):
        raise InvalidInputError("price index k must be in 1..N")
    if r < 0:
        raise InvalidInputError("reserve must be nonnegative")

    def payments(w, active):
        return {w: max(kth_highest(active.values(), k), r)}

    return _standard_auction(spec, payments, f"{k}PA({r:g})", r)


def make_kec(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "kec")
    k = int(spec.require("k"))
    c = float(spec.require("cost"))
    if c < 0:
        raise InvalidInputError("entry cost must be nonnegative")
    if k < 1 or k > int(spec.get("n", 2)):
        raise InvalidInputError("price index k must be in 1..N")

    def payments(w, active):
        out = {a: c for a in active}
        out[w] = kth_highest(active.values(), k) + c
        return out

    return _standard_auction(spec, payments, f"{k}EC({c:g})", 0.0)


def make_one_half_price(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "one_half_price")
    r = float(spec.get("reserve", 0.0))

    def payments(w, active):
        ranked = sorted(active.values(), reverse=True)
        price = ranked[0] if len(ranked) == 1 else (ranked[0] + ranked[1]) / 2
        return {w: max(price, r)}

    return _standard_auction(spec, payments, f"1.5PA({r:g})", r)


def make_all_pay_translated(spec) -> tuple[Environment, Mechanism]:
    """Member of the all-pay family translated from base reserve ``base`` to ``reserve``.

    With shift ``d = reserve - base`` the winner pays the bid placed and a losing
    participant bidding ``b`` pays ``b - d``.  ``reserve == base`` is the
    ordinary all-pay auction.
    """
    spec = _spec(spec, "all_pay_translated")
    r = float(spec.get("reserve", 0.0))
    d = r - float(spec.get("base", r))

    def payments(w, active):
        out = {a: b - d for a, b in active.items()}
        out[w] = active[w]
        return out

    return _standard_auction(spec, payments, f"AP({r:g}|{r - d:g})", r)


# procurement: outcome (winning seller, payment), types are costs

def procurement_utility(agent, cost, outcome) -> float:
    winner, price = outcome
    return price - cost if winner == agent else 0.0


def _scoring(spec, score: Callable, name: str):
    agents = _agents(spec)
    lam = float(spec.require("weight"))
    if not 0 < lam < 1:
        raise InvalidInputError("score weight must lie in (0, 1)")
    q = [float(v) for v in spec.require("quality")]
    if len(q) != len(agents) or min(q) <= 0:
        raise InvalidInputError("need one positive quality score per seller")
    bids = _per_agent(spec, "bids", agents)
    tie = spec.get("tie", "uniform")
    env = Environment(agents, _per_agent(spec, "types", agents), procurement_utility, name="procurement")

    def rule(profile):
        scores = {a: score(lam, q, profile, p) for p, a in enumerate(agents)}
        winners = _tie_winners(scores, max)
        return _split(winners, lambda w: (w, float(profile[w - 1])), tie)

    mech = Mechanism(env, bids, rule, name=f"{name}({lam:g})", provenance=PROVENANCE[spec.family], spec=spec)
    mech.scores = lambda profile: [score(lam, q, profile, p) for p in range(len(agents))]
    return env, mech


def linear_score(lam, q, profile, p) -> float:
    return -lam * profile[p] + (1 - lam) * q[p]


def ratio_score(lam, q, profile, p) -> float:
    return lam * min(profile) / profile[p] + (1 - lam) * q[p]


def make_scoring_linear(spec) -> tuple[Environment, Mechanism]:
    return _scoring(_spec(spec, "scoring_linear"), linear_score, "L")


def make_scoring_ratio(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "scoring_ratio")
    for g in _per_agent(spec, "bids", _agents(spec)).values():
        if min(g) <= 0:
            raise InvalidInputError("ratio-score bids must be strictly positive")
    return _scoring(spec, ratio_score, "R")


# pricing: types are power value functions (theta, gamma) meaning theta * x**gamma

@dataclass(frozen=True)
class Tariff:
    """Closed-form tariff: ``power`` (A x^rho) or ``polynomial`` (coefficients, low first)."""

    kind: str
    A: float = 1.0
    rho: float = 2.0
    coeffs: tuple = ()

    def __call__(self, x: float) -> float:
        if self.kind == "power":
            return self.A * x ** self.rho
        return float(np.polynomial.polynomial.polyval(x, self.coeffs))

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tariff":
        if isinstance(d, Tariff):
            return d
        kind = d.get("kind")
        if kind == "power":
            return cls("power", A=float(d["A"]), rho=float(d["rho"]))
        if kind == "polynomial":
            return cls("polynomial", coeffs=tuple(float(c) for c in d["coeffs"]))
        raise InvalidInputError(f"unknown tariff kind {kind!r}")

    def as_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "A": self.A, "rho": self.rho}
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}

    def check_regular(self, grid) -> None:
        """P(0)=0, strictly increasing and strictly convex on the grid's range."""
        if self.kind == "power":
            if not (self.A > 0 and self.rho > 1):
                raise RegularityError("power tariff needs A > 0 and rho > 1")
            return
        poly = np.polynomial.Polynomial(self.coeffs)
        if abs(poly(0.0)) > MATCH_TOL:
            raise RegularityError("tariff must vanish at 0")
        pts = np.asarray(sorted(set(float(g) for g in grid) | {0.0}))
        d1, d2 = poly.deriv(1), poly.deriv(2)
        if np.any(d1(pts[pts > 0]) <= 0) or np.any(d2(pts) <= 0):
            raise RegularityError("tariff must be strictly increasing and strictly convex")

    def ratio(self, x: float, eta: float) -> float:
        return self(eta * x) / self(x)


def pricing_utility(agent, value_fn, outcome) -> float:
    theta, gamma = value_fn
    x, p = outcome
    xi = x[agent - 1]
    return (theta * xi ** gamma if xi > 0 else 0.0) - p[agent - 1]


def _value_types(spec, agents) -> dict:
    """Types are (theta, gamma) pairs, given once or per agent; duplicates are rejected."""
    raw = spec.require("types")
    if isinstance(raw, Mapping):
        grids = {a: [tuple(map(float, v)) for v in raw[a]] for a in agents}
    else:
        grids = {a: [tuple(map(float, v)) for v in raw] for a in agents}
    for g in grids.values():
        if not g or len(set(g)) != len(g):
            raise InvalidInputError("value-type grids must be nonempty and duplicate-free")
        for theta, gamma in g:
            if theta < 0 or not 0 < gamma <= 1:
                raise InvalidInputError("value types need theta >= 0 and gamma in (0, 1]")
    return grids


def proportional_rationing(profile, capacity: float) -> list:
    """Scale requests by min{1, capacity / total}."""
    total = sum(profile)
    factor = 1.0 if total <= capacity else capacity / total
    return [a * factor for a in profile]


def _pricing_setup(spec, upper: float):
    agents = _agents(spec)
    tariff = Tariff.from_dict(spec.require("tariff"))
    requests = _per_agent(spec, "requests", agents)
    for g in requests.values():
        if min(g) < 0 or max(g) > upper * (1 + MATCH_TOL):
            raise InvalidInputError(f"requests must lie in [0, {upper:g}]")
    tariff.check_regular([x for g in requests.values() for x in g] + [upper])
    env = Environment(agents, _value_types(spec, agents), pricing_utility, name="capacity")
    return env, tariff, requests


def _efficacy(spec) -> float:
    e = float(spec.require("efficacy"))
    if e <= 0:
        raise InvalidInputError("efficacy must be positive")
    return e


def make_input_pricing(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "input_pricing")
    e = _efficacy(spec)
    env, tariff, requests = _pricing_setup(spec, 1.0)

    def rule(profile):
        z = proportional_rationing(profile, 1.0)
        return {(tuple(e * zi for zi in z), tuple(tariff(zi) for zi in z)): 1.0}

    mech = Mechanism(env, requests, rule, name=f"In({e:g})", provenance=PROVENANCE["input_pricing"], spec=spec)
    mech.tariff = tariff
    return env, mech


def make_output_pricing(spec) -> tuple[Environment, Mechanism]:
    spec = _spec(spec, "output_pricing")
    e = _efficacy(spec)
    env, tariff, requests = _pricing_setup(spec, e)

    def rule(profile):
        x = proportional_rationing(profile, e)
        return {(tuple(x), tuple(tariff(xi) for xi in x)): 1.0}

    mech = Mechanism(env, requests, rule, name=f"Out({e:g})", provenance=PROVENANCE["output_pricing"], spec=spec)
    mech.tariff = tariff
    return env, mech


CONSTRUCTORS = {
    "posted_price": make_posted_price,
    "fpa": make_fpa,
    "dutch": make_dutch,
    "kpa": make_kpa,
    "kec": make_kec,
    "one_half_price": make_one_half_price,
    "all_pay_translated": make_all_pay_translated,
    "scoring_linear": make_scoring_linear,
    "scoring_ratio": make_scoring_ratio,
    "input_pricing": make_input_pricing,
    "output_pricing": make_output_pricing,
}


# canonical witnesses

def _match(value, grid, what: str):
    """The grid point equal to ``value`` (numbers within MATCH_TOL, tuples componentwise)."""
    for g in grid:
        if _close(value, g):
            return g
    raise GridError(f"{what}: {value!r} is not on the target grid")


def _close(u, v) -> bool:
    if isinstance(u, tuple) or isinstance(v, tuple):
        return isinstance(u, tuple) and isinstance(v, tuple) and len(u) == len(v) and \
            all(_close(a, b) for a, b in zip(u, v))
    if u is None or v is None or isinstance(u, str) or isinstance(v, str):
        return u == v
    return abs(u - v) <= MATCH_TOL * max(1.0, abs(u), abs(v))


def _bijection(domain, target, f: Callable, what: str) -> dict:
    table = {x: _match(f(x), target, what) for x in domain}
    if len(set(table.values())) != len(target) or len(domain) != len(target):
        raise GridError(f"{what}: grids are not in bijection under the family map")
    return table


def _witness(X: Mechanism, X2: Mechanism, act: Callable, typ: Callable, kappa: float = 1.0,
             lam: float = 0.0, family: str = "") -> AnalogyWitness:
    alpha, tau, ks, ls = {}, {}, {}, {}
    for i in X.agents:
        alpha[i] = _bijection(X.action_sets[i], X2.action_sets[i], lambda a: act(i, a), f"alpha[{i}]")
        tau[i] = _bijection(X2.env.type_grids[i], X.env.type_grids[i], lambda t: typ(i, t), f"tau[{i}]")
        ks[i] = {t: kappa for t in X2.env.type_grids[i]}
        ls[i] = {t: lam for t in X2.env.type_grids[i]}
    return AnalogyWitness(alpha, tau, ks, ls, meta={"family": family})


def _shift_types(d):
    def typ(i, t):
        return t - d
    return typ


def witness_posted_price(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """P -> P2: identity on actions, tau(t) = t + (P - P2)."""
    P, P2 = float(X.spec.require("price")), float(X2.spec.require("price"))
    return _witness(X, X2, lambda i, a: a, lambda i, t: t + (P - P2), family="posted_price")


def witness_fpa_dutch(X: Mechanism, X2: Mechanism) -> EquivalenceWitness:
    """Bid a maps to the stopping time at which the clock reaches a."""
    ceiling, rate = float(X2.spec.require("ceiling")), float(X2.spec.require("rate"))
    if X.env.type_grids != X2.env.type_grids:
        raise GridError("FPA and Dutch must share type grids")
    alpha = {i: _bijection(X.action_sets[i], X2.action_sets[i], lambda a: (ceiling - a) / rate,
                           f"alpha[{i}]") for i in X.agents}
    return EquivalenceWitness(alpha)


def _reserve_shift(X, X2, family):
    d = float(X2.spec.get("reserve", 0.0)) - float(X.spec.get("reserve", 0.0))

    def act(i, a):
        return NO_BID if a is NO_BID else a + d

    return _witness(X, X2, act, _shift_types(d), family=family)


def witness_kpa(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """kPA(r) -> kPA(r2): shift active bids up and types down by r2 - r."""
    if int(X.spec.require("k")) != int(X2.spec.require("k")):
        raise InvalidInputError("reserve witnesses relate auctions with the same k")
    return _reserve_shift(X, X2, "kpa")


def witness_one_half_price(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    return _reserve_shift(X, X2, "one_half_price")


def witness_all_pay_translated(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """Members sharing a base auction are bid/type translations of each other."""
    def base(m):
        return float(m.spec.get("base", m.spec.get("reserve", 0.0)))
    if base(X) != base(X2):
        raise InvalidInputError("translated all-pay members must share the base auction")
    return _reserve_shift(X, X2, "all_pay_translated")


def witness_kec(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """kEC(c) -> kEC(c2): bids scale by c2/c, types by c/c2, kappa = c2/c."""
    c, c2 = float(X.spec.require("cost")), float(X2.spec.require("cost"))
    if c <= 0 or c2 <= 0:
        raise InvalidInputError("entry-cost witnesses need strictly positive costs")
    if int(X.spec.require("k")) != int(X2.spec.require("k")):
        raise InvalidInputError("entry-cost witnesses relate auctions with the same k")
    ratio = c2 / c

    def act(i, a):
        return NO_BID if a is NO_BID else ratio * a

    return _witness(X, X2, act, lambda i, t: t / ratio, kappa=ratio, family="kec")


def witness_scoring_linear(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """L(l1) -> L(l2): seller i shifts bids by (1/l2 - 1/l1) q_i and costs back."""
    l1, l2 = float(X.spec.require("weight")), float(X2.spec.require("weight"))
    q = [float(v) for v in X.spec.require("quality")]
    if q != [float(v) for v in X2.spec.require("quality")]:
        raise InvalidInputError("linear-score witness needs identical quality scores")
    shift = 1.0 / l2 - 1.0 / l1
    return _witness(X, X2, lambda i, b: b + shift * q[i - 1], lambda i, c: c - shift * q[i - 1],
                    family="scoring_linear")


def witness_input_pricing(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """In(e) -> In(e2): identity on requests, v_theta -> v_(theta * eta^gamma)."""
    eta = float(X2.spec.require("efficacy")) / float(X.spec.require("efficacy"))
    if Tariff.from_dict(X.spec.require("tariff")) != Tariff.from_dict(X2.spec.require("tariff")):
        raise InvalidInputError("input-pricing witness needs a common tariff")
    return _witness(X, X2, lambda i, a: a, lambda i, v: (v[0] * eta ** v[1], v[1]), family="input_pricing")


def witness_output_isoelastic(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """Out(e) -> Out(e2) under P = A x^rho: a -> eta a, v_theta -> v_(theta eta^(gamma-rho)), kappa = eta^rho."""
    tariff = Tariff.from_dict(X.spec.require("tariff"))
    if tariff.kind != "power" or tariff != Tariff.from_dict(X2.spec.require("tariff")):
        raise InvalidInputError("the output witness exists only for a common isoelastic tariff")
    eta = float(X2.spec.require("efficacy")) / float(X.spec.require("efficacy"))
    rho = tariff.rho
    return _witness(X, X2, lambda i, a: eta * a, lambda i, v: (v[0] * eta ** (v[1] - rho), v[1]),
                    kappa=eta ** rho, family="output_pricing")


WITNESSES = {
    "posted_price": witness_posted_price,
    "kpa": witness_kpa,
    "kec": witness_kec,
    "one_half_price": witness_one_half_price,
    "all_pay_translated": witness_all_pay_translated,
    "scoring_linear": witness_scoring_linear,
    "input_pricing": witness_input_pricing,
    "output_pricing": witness_output_isoelastic,
}


def canonical_witness(X: Mechanism, X2: Mechanism) -> AnalogyWitness:
    """Dispatch on the families of two catalog mechanisms."""
    if X.spec is None or X2.spec is None:
        raise InvalidInputError("canonical witnesses exist only between catalog mechanisms")
    f, f2 = X.spec.family, X2.spec.family
    if (f, f2) == ("fpa", "dutch"):
        return witness_fpa_dutch(X, X2).as_analogy(X2)
    if f != f2 or f not in WITNESSES:
        raise InvalidInputError(f"no canonical witness from {f} to {f2}")
    return WITNESSES[f](X, X2)


# grid helpers

def shifted(grid, d: float) -> list:
    return [g + d for g in grid]


def geometric_grid(start: float, ratio: float, count: int) -> list:
    return [start * ratio ** k for k in range(count)]


# regular-prior optimal reserve

def optimal_reserve(grid, pdf=None, cdf=None, tol: float = 1e-9) -> float:
    """Zero of the virtual value v - (1 - F(v)) / f(v) on a sampled regular prior.

    Give the density, the cdf, or both on an increasing grid.  Points with
    zero density are outside the support and ignored.
    """
    v = np.asarray(grid, dtype=float)
    if v.ndim != 1 or v.size < 1 or np.any(np.diff(v) <= 0):
        raise InvalidInputError("grid must be strictly increasing")
    if pdf is None and cdf is None:
        raise InvalidInputError("need a density or a cdf")
    if pdf is None:
        F = np.asarray(cdf, dtype=float)
        f = np.gradient(F, v) if v.size > 1 else np.ones(1)
    else:
        f = np.asarray(pdf, dtype=float)
        if cdf is None:
            steps = np.concatenate([[0.0], np.cumsum((f[1:] + f[:-1]) / 2 * np.diff(v))])
            total = steps[-1]
            F = steps / total if total > 0 else np.where(f > 0, 0.0, 0.0)
            if total <= 0:
                # a single atom
                F = np.where(np.arange(v.size) >= int(np.argmax(f)), 1.0, 0.0)
                F[int(np.argmax(f))] = 0.0
        else:
            F = np.asarray(cdf, dtype=float)
    support = f > 0
    if not support.any():
        raise InvalidInputError("density vanishes on the whole grid")
    vs, phi = v[support], (v - (1.0 - F) / np.where(support, f, 1.0))[support]
    if np.any(np.diff(phi) < -tol * max(1.0, float(np.abs(phi).max()))):
        raise RegularityError("virtual value is not weakly increasing (irregular prior)")
    idx = np.nonzero(phi >= 0)[0]
    if idx.size == 0:
        return float(vs[-1])
    k = int(idx[0])
    if k == 0 or phi[k] == 0:
        return float(vs[k])
    # linear interpolation between the bracketing support points
    a, b = phi[k - 1], phi[k]
    return float(vs[k - 1] + (vs[k] - vs[k - 1]) * (-a) / (b - a))


# the two-agent allocation toy: ask-for-it versus a coin flip

def allocation_env(types) -> Environment:
    """Two agents, outcomes 1, 2 or None (discarded), utility t * 1{y = i}."""
    def utility(agent, t, y):
        return float(t) if y == agent else 0.0
    return Environment([1, 2], {1: list(types), 2: list(types)}, utility, outcomes=[1, 2, None],
                       name="allocation")


def make_ask_mechanism(env: Environment) -> Mechanism:
    """Each agent says yes or no; a lone yes gets the good, otherwise it is discarded."""
    def rule(profile):
        if profile == ("yes", "no"):
            return {1: 1.0}
        if profile == ("no", "yes"):
            return {2: 1.0}
        return {None: 1.0}
    return Mechanism(env, {1: ["yes", "no"], 2: ["yes", "no"]}, rule, name="X1")


def make_coin_mechanism(env: Environment) -> Mechanism:
    """No choices; the good goes to either agent with probability one half."""
    return Mechanism(env, {1: ["-"], 2: ["-"]}, lambda profile: {1: 0.5, 2: 0.5}, name="X2")


# parameters used when a document refers to a family as "builtin:<family>"
TINY = {"bids": [0, 1, 2, 3], "types": [1, 3]}
FAMILY_DEFAULTS = {
    "posted_price": {"price": 3, "types": list(range(11))},
    "fpa": {"bids": [0, 2, 4, 6, 8, 10], "types": list(range(11)), "ceiling": 10},
    "dutch": {"stops": [0, 1, 2, 3, 4, 5], "types": list(range(11)), "ceiling": 10, "rate": 2},
    "kpa": {"k": 1, "reserve": 0, **TINY},
    "kec": {"k": 2, "cost": 1, **TINY},
    "one_half_price": {"reserve": 0, **TINY},
    "all_pay_translated": {"reserve": 0, **TINY},
    "scoring_linear": {"weight": 0.5, "quality": [1, 2], "bids": [1, 2, 3], "types": [0, 1]},
    "scoring_ratio": {"weight": 0.25, "quality": [2, 1], "bids": [1, 2, 3], "types": [0, 0.5]},
    "input_pricing": {"efficacy": 1, "tariff": {"kind": "power", "A": 1, "rho": 2},
                      "requests": [0, 0.5, 1], "types": [[1, 0.5], [2, 0.5]]},
    "output_pricing": {"efficacy": 1, "tariff": {"kind": "power", "A": 2, "rho": 1.5},
                       "requests": [0, 0.5, 1], "types": [[1, 0.5], [2, 0.5]]},
}
