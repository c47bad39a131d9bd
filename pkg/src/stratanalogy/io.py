"""Declarative YAML documents: mechanisms, priors, strategies, witnesses, knowledge, atlases.

Numbers are written as decimal strings (``repr`` of the float, so they
round-trip exactly) and read back from either strings or YAML numbers.  Labels
follow the same rule; the string ``"none"`` stands for nonparticipation.
Validation uses a JSON schema so errors name the offending path.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from . import catalog as cat
from .analogy import AffineAtlas, AnalogyWitness, DeclaredEquivalence, EquivalenceWitness
from .core import Environment, Mechanism, Prior, StrategyProfile
from .errors import InvalidInputError, SchemaError

SCHEMA_VERSION = 1
BUILTIN = "builtin:"

_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$")

_scalar = {"type": ["string", "number", "integer", "boolean", "null"]}
_label = {"anyOf": [_scalar, {"type": "array"}]}
_number = {"type": ["string", "number", "integer"]}
_pairs = {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}}
_per_agent_pairs = {"type": "object", "additionalProperties": _pairs}

SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"enum": [SCHEMA_VERSION, str(SCHEMA_VERSION)]},
        "description": {"type": "string"},
        "mechanisms": {"type": "object", "additionalProperties": {"anyOf": [
            {"type": "string", "pattern": "^builtin:"},
            {"type": "object", "required": ["family"], "additionalProperties": False,
             "properties": {"family": {"type": "string"}, "params": {"type": "object"}}},
            {"type": "object", "required": ["table"], "additionalProperties": False, "properties": {
                "table": {"type": "object", "additionalProperties": False,
                          "required": ["agents", "types", "outcomes", "utility", "actions", "rule"],
                          "properties": {
                              "agents": {"type": "array", "minItems": 1, "items": _scalar},
                              "types": {"type": "object", "additionalProperties": {"type": "array"}},
                              "outcomes": {"type": "array", "items": _label},
                              "utility": {"type": "array", "items": {"type": "array", "minItems": 4,
                                                                     "maxItems": 4}},
                              "actions": {"type": "object", "additionalProperties": {"type": "array"}},
                              "rule": {"type": "array", "items": {"type": "array", "minItems": 2,
                                                                  "maxItems": 2}}}}}},
        ]}},
        "priors": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["mechanism"], "additionalProperties": False,
            "properties": {"mechanism": {"type": "string"}, "uniform": {"type": "boolean"},
                           "marginals": _per_agent_pairs, "pmf": _pairs}}},
        "strategies": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["mechanism"], "additionalProperties": False,
            "properties": {"mechanism": {"type": "string"}, "pure": _per_agent_pairs,
                           "mixed": _per_agent_pairs}}},
        "witnesses": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["from", "to"], "additionalProperties": False,
            "properties": {"from": {"type": "string"}, "to": {"type": "string"},
                           "kind": {"enum": ["analogy", "equivalence"]},
                           "canonical": {"type": "boolean"},
                           "alpha": _per_agent_pairs, "tau": _per_agent_pairs,
                           "kappa": {"anyOf": [_number, _per_agent_pairs]},
                           "lambda": {"anyOf": [_number, _per_agent_pairs]}}}},
        "epistemic": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["mechanism", "prior", "strategy"], "additionalProperties": False,
            "properties": {"mechanism": {"type": "string"}, "prior": {"type": "string"},
                           "strategy": {"type": "string"},
                           "deviations": {"type": "object", "additionalProperties": {"type": "array"}},
                           "knowledge": {"anyOf": [{"enum": ["full"]}, {"type": "object"}]},
                           "links": {"type": "array", "items": {"type": "string"}},
                           "target": {"type": "object", "required": ["mechanism", "prior"],
                                      "additionalProperties": False,
                                      "properties": {"mechanism": {"type": "string"},
                                                     "prior": {"type": "string"},
                                                     "witness": {"type": "string"}}}}}},
        "atlas": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["links"], "additionalProperties": False,
            "properties": {
                "links": {"type": "array", "items": {"type": "array", "minItems": 4, "maxItems": 4}},
                "declared": {"type": "array", "items": {"type": "array", "minItems": 4, "maxItems": 4}}}}},
    },
}


# scalars

def parse_label(x) -> Any:
    if x is None or (isinstance(x, str) and x == "none"):
        return None
    if isinstance(x, bool):
        return x
    if isinstance(x, str):
        s = x.strip()
        if _INT.match(s):
            return int(s)
        if _FLOAT.match(s):
            return float(s)
        return x
    if isinstance(x, (list, tuple)):
        return tuple(parse_label(v) for v in x)
    return x


def parse_number(x, path: str = "") -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        raise SchemaError(f"expected a number, got {x!r}", path) from None


def emit_label(x) -> Any:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return x
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (tuple, list)):
        return [emit_label(v) for v in x]
    return x


def parse_params(x):
    """Recursively turn numeric strings in family parameters into numbers."""
    if isinstance(x, Mapping):
        return {parse_label(k) if k != "kind" else k: (v if k == "kind" else parse_params(v))
                for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [parse_params(v) for v in x]
    return parse_label(x)


def emit_params(x):
    if isinstance(x, Mapping):
        return {(k if isinstance(k, str) else emit_label(k)): emit_params(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [emit_params(v) for v in x]
    return emit_label(x)


# documents

def validate(data: Any) -> None:
    plain = json.loads(json.dumps(data, default=str))
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(plain), key=lambda e: list(map(str, e.path)))
    if errors:
        e = errors[0]
        path = "/" + "/".join(str(p) for p in e.absolute_path)
        raise SchemaError(e.message, path)


def normalize(data: Mapping) -> dict:
    """Canonical in-memory form: labels parsed, agent keys parsed, numbers as floats."""
    validate(data)
    out: dict = {"schema_version": SCHEMA_VERSION}
    if "description" in data:
        out["description"] = data["description"]
    mechs = {}
    for mid, m in (data.get("mechanisms") or {}).items():
        if isinstance(m, str):
            mechs[mid] = {"family": m[len(BUILTIN):], "params": {}}
        elif "family" in m:
            fam = m["family"][len(BUILTIN):] if m["family"].startswith(BUILTIN) else m["family"]
            mechs[mid] = {"family": fam, "params": parse_params(m.get("params") or {})}
        else:
            t = m["table"]
            mechs[mid] = {"table": {
                "agents": [parse_label(a) for a in t["agents"]],
                "types": {parse_label(a): [parse_label(v) for v in g] for a, g in t["types"].items()},
                "outcomes": [parse_label(y) for y in t["outcomes"]],
                "utility": [[parse_label(a), parse_label(ty), parse_label(y), parse_number(v)]
                            for a, ty, y, v in t["utility"]],
                "actions": {parse_label(a): [parse_label(v) for v in g] for a, g in t["actions"].items()},
                "rule": [[parse_label(p), [[parse_label(y), parse_number(q)] for y, q in lot]]
                         for p, lot in t["rule"]]}}
    out["mechanisms"] = mechs
    priors = {}
    for pid, p in (data.get("priors") or {}).items():
        q = {"mechanism": p["mechanism"]}
        if p.get("uniform"):
            q["uniform"] = True
        if "marginals" in p:
            q["marginals"] = {parse_label(a): [[parse_label(t), parse_number(v)] for t, v in m]
                              for a, m in p["marginals"].items()}
        if "pmf" in p:
            q["pmf"] = [[parse_label(t), parse_number(v)] for t, v in p["pmf"]]
        priors[pid] = q
    out["priors"] = priors
    strategies = {}
    for sid, s in (data.get("strategies") or {}).items():
        q = {"mechanism": s["mechanism"]}
        if "pure" in s:
            q["pure"] = {parse_label(a): [[parse_label(t), parse_label(x)] for t, x in m]
                         for a, m in s["pure"].items()}
        if "mixed" in s:
            q["mixed"] = {parse_label(a): [[parse_label(t), [[parse_label(x), parse_number(v)] for x, v in lot]]
                                           for t, lot in m] for a, m in s["mixed"].items()}
        strategies[sid] = q
    out["strategies"] = strategies
    witnesses = {}
    for wid, w in (data.get("witnesses") or {}).items():
        q = {"from": w["from"], "to": w["to"], "kind": w.get("kind", "analogy")}
        if w.get("canonical"):
            q["canonical"] = True
        for key in ("alpha", "tau"):
            if key in w:
                q[key] = {parse_label(a): [[parse_label(x), parse_label(y)] for x, y in m]
                          for a, m in w[key].items()}
        for key in ("kappa", "lambda"):
            if key in w:
                v = w[key]
                q[key] = ({parse_label(a): [[parse_label(t), parse_number(x)] for t, x in m]
                           for a, m in v.items()} if isinstance(v, Mapping) else parse_number(v))
        witnesses[wid] = q
    out["witnesses"] = witnesses
    epi = {}
    for eid, e in (data.get("epistemic") or {}).items():
        q = {k: e[k] for k in ("mechanism", "prior", "strategy")}
        if "deviations" in e:
            q["deviations"] = {parse_label(a): [[[parse_label(x), parse_number(v)] for x, v in lot]
                                                for lot in lots] for a, lots in e["deviations"].items()}
        k = e.get("knowledge", "full")
        q["knowledge"] = k if k == "full" else {
            parse_label(a): [{parse_label(j): sorted(int(parse_label(n)) for n in idx) for j, idx in w.items()}
                             for w in ws] for a, ws in k.items()}
        if "links" in e:
            q["links"] = list(e["links"])
        if "target" in e:
            q["target"] = dict(e["target"])
        epi[eid] = q
    out["epistemic"] = epi
    atlas = {}
    for aid, a in (data.get("atlas") or {}).items():
        atlas[aid] = {
            "links": [[_head(h), _head(h2), parse_number(s), parse_number(c)] for h, h2, s, c in a["links"]],
            "declared": [[_head(h), parse_number(u), _head(h2), parse_number(u2)]
                         for h, u, h2, u2 in a.get("declared", [])]}
    out["atlas"] = atlas
    return out


def _head(h) -> tuple:
    if not isinstance(h, (list, tuple)) or len(h) != 3:
        raise SchemaError(f"a head is [mechanism, agent, type], got {h!r}")
    return (str(h[0]), parse_label(h[1]), parse_label(h[2]))


def emit(doc: Mapping) -> dict:
    """Inverse of :func:`normalize`: plain YAML-ready data with decimal strings."""
    out: dict = {"schema_version": SCHEMA_VERSION}
    if "description" in doc:
        out["description"] = doc["description"]
    mechs = {}
    for mid, m in doc.get("mechanisms", {}).items():
        if "family" in m:
            mechs[mid] = {"family": m["family"], "params": emit_params(m["params"])}
        else:
            t = m["table"]
            mechs[mid] = {"table": {
                "agents": [emit_label(a) for a in t["agents"]],
                "types": {emit_label(a): [emit_label(v) for v in g] for a, g in t["types"].items()},
                "outcomes": [emit_label(y) for y in t["outcomes"]],
                "utility": [[emit_label(a), emit_label(ty), emit_label(y), emit_label(float(v))]
                            for a, ty, y, v in t["utility"]],
                "actions": {emit_label(a): [emit_label(v) for v in g] for a, g in t["actions"].items()},
                "rule": [[emit_label(p), [[emit_label(y), emit_label(float(q))] for y, q in lot]]
                         for p, lot in t["rule"]]}}
    if mechs:
        out["mechanisms"] = mechs
    for section in ("priors", "strategies", "witnesses", "epistemic"):
        if doc.get(section):
            out[section] = emit_params(doc[section])
    if doc.get("atlas"):
        out["atlas"] = {aid: {"links": [[emit_label(list(h)), emit_label(list(h2)), emit_label(s), emit_label(c)]
                                        for h, h2, s, c in a["links"]],
                              "declared": [[emit_label(list(h)), emit_label(u), emit_label(list(h2)), emit_label(u2)]
                                           for h, u, h2, u2 in a["declared"]]}
                        for aid, a in doc["atlas"].items()}
    return out


def _str_keys(x):
    if isinstance(x, Mapping):
        return {(k if isinstance(k, str) else str(emit_label(k))): _str_keys(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_str_keys(v) for v in x]
    return x


def dump_text(doc: Mapping) -> str:
    return yaml.safe_dump(_str_keys(emit(doc)), sort_keys=True, default_flow_style=None, width=100)


def parse_text(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"not valid YAML: {exc}") from None
    if not isinstance(data, Mapping):
        raise SchemaError("document must be a mapping", "/")
    return normalize(data)


class Document:
    """A parsed document with lazily built engine objects."""

    def __init__(self, doc: Mapping, source: str = "<memory>"):
        self.doc = doc
        self.source = source
        self._mechs: dict = {}

    @classmethod
    def load(cls, path) -> "Document":
        p = Path(path)
        if not p.exists():
            raise InvalidInputError(f"no such document: {path}")
        return cls(parse_text(p.read_text()), str(p))

    @classmethod
    def from_text(cls, text: str) -> "Document":
        return cls(parse_text(text))

    def section(self, name: str) -> dict:
        return self.doc.get(name) or {}

    def pick(self, name: str, key: str | None) -> str:
        items = self.section(name)
        if key is None:
            if not items:
                raise InvalidInputError(f"document has no {name}")
            return next(iter(items))
        if key not in items and not (name == "mechanisms" and key.startswith(BUILTIN)):
            raise SchemaError(f"unknown id {key!r}", f"/{name}")
        return key

    def mechanism(self, mid: str) -> Mechanism:
        if mid in self._mechs:
            return self._mechs[mid]
        if mid.startswith(BUILTIN) and mid not in self.section("mechanisms"):
            m = {"family": mid[len(BUILTIN):], "params": {}}
        else:
            if mid not in self.section("mechanisms"):
                raise SchemaError(f"unknown mechanism {mid!r}", "/mechanisms")
            m = self.section("mechanisms")[mid]
        if "family" in m:
            fam = m["family"]
            if fam not in cat.FAMILIES:
                raise SchemaError(f"unknown family {fam!r}", f"/mechanisms/{mid}/family")
            params = {**cat.FAMILY_DEFAULTS[fam], **m["params"]}
            _, mech = cat.build(cat.FamilySpec(fam, params), name=mid)
        else:
            mech = _table_mechanism(m["table"], mid, self._shared_env(m["table"]))
        self._mechs[mid] = mech
        return mech

    def _shared_env(self, table):
        # table mechanisms with the same utility table share one environment object
        for m in self._mechs.values():
            env = m.env
            if getattr(env, "_source_table", None) == _utility_key(table):
                return env
        return None

    def prior(self, pid: str) -> tuple[Prior, Mechanism]:
        p = self.section("priors")[self.pick("priors", pid)]
        mech = self.mechanism(p["mechanism"])
        if "pmf" in p:
            return Prior(mech.agents, {tuple(t): v for t, v in p["pmf"]}), mech
        if "marginals" in p:
            return Prior.product(mech.agents, {a: dict(map(tuple, m)) for a, m in p["marginals"].items()}), mech
        return Prior.uniform(mech.env), mech

    def strategy(self, sid: str) -> tuple[StrategyProfile, Mechanism]:
        s = self.section("strategies")[self.pick("strategies", sid)]
        mech = self.mechanism(s["mechanism"])
        maps = {}
        for a, m in s.get("pure", {}).items():
            maps[a] = {t: {x: 1.0} for t, x in m}
        for a, m in s.get("mixed", {}).items():
            maps[a] = {t: {x: v for x, v in lot} for t, lot in m}
        sigma = StrategyProfile(list(mech.agents), maps)
        sigma.validate(mech)
        return sigma, mech

    def witness(self, wid: str) -> tuple[Any, Mechanism, Mechanism]:
        w = self.section("witnesses")[self.pick("witnesses", wid)]
        X, X2 = self.mechanism(w["from"]), self.mechanism(w["to"])
        if w.get("canonical"):
            witness = cat.canonical_witness(X, X2)
            if w["kind"] == "equivalence":
                witness = EquivalenceWitness(witness.alpha)
            return witness, X, X2
        alpha = {a: dict(map(tuple, m)) for a, m in w.get("alpha", {}).items()}
        if w["kind"] == "equivalence":
            return EquivalenceWitness(alpha), X, X2
        tau = {a: dict(map(tuple, m)) for a, m in w.get("tau", {}).items()}
        if not tau:
            tau = {a: {t: t for t in X2.env.type_grids[a]} for a in X.agents}
        kappa = _coef(w.get("kappa", 1.0), X2)
        lam = _coef(w.get("lambda", 0.0), X2)
        return AnalogyWitness(alpha, tau, kappa, lam), X, X2

    def atlas(self, aid: str) -> tuple[AffineAtlas, list]:
        a = self.section("atlas")[self.pick("atlas", aid)]
        atlas = AffineAtlas()
        for h, h2, s, c in a["links"]:
            atlas.add(h, h2, s, c, reverse=False)
        declared = [DeclaredEquivalence(h, u, h2, u2) for h, u, h2, u2 in a["declared"]]
        return atlas, declared


def _coef(v, X2: Mechanism) -> dict:
    if isinstance(v, Mapping):
        return {a: dict(map(tuple, m)) for a, m in v.items()}
    return {a: {t: float(v) for t in X2.env.type_grids[a]} for a in X2.agents}


def _utility_key(table) -> tuple:
    return tuple(tuple(r) for r in table["utility"])


def _table_mechanism(t: Mapping, mid: str, env: Environment | None) -> Mechanism:
    if env is None:
        util = {(a, ty, y): v for a, ty, y, v in t["utility"]}
        env = Environment.from_table(t["agents"], t["types"], t["outcomes"], util, name=mid)
        env._source_table = _utility_key(t)
    rule = {}
    for prof, lot in t["rule"]:
        lottery: dict = {}
        for y, q in lot:
            lottery[y] = lottery.get(y, 0.0) + q
        rule[tuple(prof)] = lottery
    return Mechanism(env, t["actions"], rule, name=mid)


# writing engine objects into documents

def family_entry(mech: Mechanism) -> dict:
    if mech.spec is None:
        return table_entry(mech)
    return {"family": mech.spec.family, "params": dict(mech.spec.params)}


def table_entry(mech: Mechanism) -> dict:
    env = mech.env
    outcomes: list = []
    rule = []
    for prof in mech.profiles():
        lot = mech.lottery(prof)
        for y in lot:
            if y not in outcomes:
                outcomes.append(y)
        rule.append([tuple(prof), [[y, float(p)] for y, p in lot.items()]])
    if env.outcomes is not None:
        outcomes = list(env.outcomes) + [y for y in outcomes if y not in env.outcomes]
    utility = [[a, t, y, float(env.utility(a, t, y))] for a in env.agents for t in env.type_grids[a]
               for y in outcomes]
    return {"table": {"agents": list(env.agents), "types": {a: list(g) for a, g in env.type_grids.items()},
                      "outcomes": outcomes, "utility": utility,
                      "actions": {a: list(v) for a, v in mech.action_sets.items()}, "rule": rule}}


def witness_entry(w: AnalogyWitness, src: str, dst: str) -> dict:
    return {"from": src, "to": dst, "kind": "analogy",
            "alpha": {a: [[x, y] for x, y in m.items()] for a, m in w.alpha.items()},
            "tau": {a: [[x, y] for x, y in m.items()] for a, m in w.tau.items()},
            "kappa": {a: [[t, float(v)] for t, v in m.items()] for a, m in w.kappa.items()},
            "lambda": {a: [[t, float(v)] for t, v in m.items()] for a, m in w.lam.items()}}
