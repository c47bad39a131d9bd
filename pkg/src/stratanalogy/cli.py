"""Command-line interface.

Exit codes: 0 ok, 1 definite negative (violation found, no witness, demo
failed), 2 input error, 3 search or enumeration budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import catalog as cat
from .analogy import (
    EquivalenceWitness,
    check_atlas_validity,
    pushforward_prior,
    transfer_dominant,
    transfer_equilibrium,
    verify_equivalence,
    verify_witness,
)
from .core import GAP_TOL, check_bne, dominant_strategy, expected_utility, find_pure_bne
from .epistemics import (
    AwarenessProfile,
    KnowledgeStructure,
    Link,
    check_ck_equilibrium,
    equilibrium_comparison_universe,
    transfer_knowledge,
)
from .errors import AnalogyError, BudgetError
from .experiments import DEMOS, run_demo
from .io import Document, dump_text, parse_label, witness_entry
from .reporting import jsonable, label, render_table, render_text
from .search import DEFAULT_BUDGET, search_witness

TOL_ENV = "STRATANALOGY_TOL"

OK, NEGATIVE, INPUT_ERROR, BUDGET = 0, 1, 2, 3


class Outcome:
    """What a command produced: exit code, a title, a flat report and optional table rows."""

    def __init__(self, code: int, title: str, report: dict, rows: list | None = None,
                 columns: list | None = None):
        self.code, self.title, self.report = code, title, report
        self.rows, self.columns = rows, columns


def default_tol() -> tuple[float, str]:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return GAP_TOL, "default"
    try:
        return float(raw), f"env {TOL_ENV}={raw}"
    except ValueError:
        raise AnalogyError(f"{TOL_ENV} must be a number, got {raw!r}") from None


def _mapping_rows(m: dict) -> list:
    return [[label(k), label(v)] for k, v in m.items()]


def cmd_eval(doc: Document, args) -> Outcome:
    mid = doc.pick("mechanisms", args.mechanism)
    mech = doc.mechanism(mid)
    profile = tuple(parse_label(x) for x in json.loads(args.profile))
    agents = [parse_label(args.agent)] if args.agent is not None else mech.agents
    rows = []
    for a in agents:
        types = [parse_label(json.loads(args.type))] if args.type is not None else mech.env.type_grids[a]
        for t in types:
            rows.append({"agent": a, "type": label(t), "utility": expected_utility(mech, a, t, profile)})
    return Outcome(OK, f"eval {mid} at {label(profile)}", {"mechanism": mid, "profile": label(profile),
                                                             "values": rows}, rows, ["agent", "type", "utility"])


def cmd_bne(doc: Document, args) -> Outcome:
    prior, mech = doc.prior(args.prior)
    if args.strategy is None or args.enumerate:
        eqs = find_pure_bne(mech, prior, args.tol)
        found = [{str(a): _mapping_rows(m) for a, m in s.as_pure().items()} for s in eqs]
        return Outcome(OK if eqs else NEGATIVE, f"pure BNE of {mech.name}",
                       {"mechanism": mech.name, "count": len(eqs), "equilibria": found})
    sigma, _ = doc.strategy(args.strategy)
    rep = check_bne(mech, prior, sigma, args.tol)
    rows = [{"agent": a, "type": label(t), "best": label(x)} for a, t, x in rep.violations]
    return Outcome(OK if rep.ok else NEGATIVE, f"check BNE on {mech.name}",
                   {"mechanism": mech.name, **rep.as_dict()}, rows, ["agent", "type", "best"])


def cmd_dominant(doc: Document, args) -> Outcome:
    mid = doc.pick("mechanisms", args.mechanism)
    mech = doc.mechanism(mid)
    out, rows = {}, []
    for a in mech.agents:
        s = dominant_strategy(mech, a, args.tol)
        out[str(a)] = None if s is None else _mapping_rows(s)
        rows.append({"agent": a, "dominant": s is not None,
                     "strategy": "-" if s is None else json.dumps(_mapping_rows(s))})
    all_dom = all(v is not None for v in out.values())
    return Outcome(OK if all_dom else NEGATIVE, f"dominant strategies of {mid}",
                   {"mechanism": mid, "all_agents": all_dom, "strategies": out}, rows,
                   ["agent", "dominant", "strategy"])


def cmd_check_equiv(doc: Document, args) -> Outcome:
    w, X, X2 = doc.witness(args.witness)
    if not isinstance(w, EquivalenceWitness):
        w = EquivalenceWitness(w.alpha)
    rep = verify_equivalence(X, X2, w, args.tol)
    return Outcome(OK if rep.ok else NEGATIVE, f"equivalence {X.name} -> {X2.name}",
                   {"from": X.name, "to": X2.name, **rep.as_dict()})


def cmd_check_analogy(doc: Document, args) -> Outcome:
    w, X, X2 = doc.witness(args.witness)
    if isinstance(w, EquivalenceWitness):
        w = w.as_analogy(X2)
    rep = verify_witness(X, X2, w, args.tol)
    return Outcome(OK if rep.ok else NEGATIVE, f"analogy {X.name} -> {X2.name}",
                   {"from": X.name, "to": X2.name, **rep.as_dict()})


def cmd_find_witness(doc: Document, args) -> Outcome:
    mechs = list(doc.section("mechanisms"))
    src = args.source or (mechs[0] if mechs else None)
    dst = args.target or (mechs[1] if len(mechs) > 1 else None)
    if src is None or dst is None:
        raise AnalogyError("find-witness needs two mechanisms (--from/--to)")
    X, X2 = doc.mechanism(src), doc.mechanism(dst)
    r = search_witness(X, X2, budget=args.budget, tol=args.tol,
                       lambda_zero=args.lambda_zero, kappa_const=args.kappa_const)
    report = {"from": src, "to": dst, **r.as_dict()}
    if r.found:
        report["witness"] = jsonable(witness_entry(r.witness, src, dst))
        if args.output:
            out = {**doc.doc, "witnesses": {**doc.section("witnesses"),
                                            args.witness_id: witness_entry(r.witness, src, dst)}}
            with open(args.output, "w") as fh:
                fh.write(dump_text(out))
    code = {"found": OK, "none": NEGATIVE, "budget_exhausted": BUDGET}[r.status]
    return Outcome(code, f"witness search {src} -> {dst}", report)


def cmd_transfer(doc: Document, args) -> Outcome:
    w, X, X2 = doc.witness(args.witness)
    if isinstance(w, EquivalenceWitness):
        w = w.as_analogy(X2)
    if args.dominant:
        strategies = {}
        for a in X.agents:
            s = dominant_strategy(X, a, args.tol)
            if s is None:
                return Outcome(NEGATIVE, "dominant transfer", {"from": X.name, "agent": a,
                                                               "reason": "no dominant strategy in source"})
            strategies[a] = s
        out = transfer_dominant(w, X, X2, strategies, args.tol)
        return Outcome(OK, f"dominant transfer {X.name} -> {X2.name}",
                       {"from": X.name, "to": X2.name, "strategies": {str(a): _mapping_rows(m) for a, m in out.items()}})
    sigma, _ = doc.strategy(args.strategy)
    sigma2 = transfer_equilibrium(w, sigma)
    report = {"from": X.name, "to": X2.name,
              "strategy": {str(a): [[label(t), {json.dumps(label(x)): p for x, p in lot.items()}]
                                    for t, lot in m.items()] for a, m in sigma2.maps.items()}}
    code = OK
    if args.prior:
        F, _ = doc.prior(args.prior)
        src = check_bne(X, pushforward_prior(w.tau, F), sigma, args.tol)
        dst = check_bne(X2, F, sigma2, args.tol)
        report.update({"source_bne": src.as_dict(), "target_bne": dst.as_dict()})
        code = OK if dst.ok else NEGATIVE
    return Outcome(code, f"equilibrium transfer {X.name} -> {X2.name}", report)


def _knowledge(spec, universe, agents) -> KnowledgeStructure:
    if spec == "full":
        return KnowledgeStructure.full(universe, agents)
    return KnowledgeStructure(universe, {a: [AwarenessProfile.make(w) for w in ws] for a, ws in spec.items()})


def cmd_epistemic(doc: Document, args) -> Outcome:
    eid = doc.pick("epistemic", args.id)
    e = doc.section("epistemic")[eid]
    prior, mech = doc.prior(e["prior"])
    sigma, _ = doc.strategy(e["strategy"])
    devs = {a: [dict((x, p) for x, p in lot) for lot in lots] for a, lots in e.get("deviations", {}).items()}
    U = equilibrium_comparison_universe(mech, prior, sigma, devs, mech_id=e["mechanism"])
    n_source = len(U)
    target = e.get("target")
    if target:
        w, X, X2 = doc.witness(target.get("witness") or (e.get("links") or [None])[0])
        if isinstance(w, EquivalenceWitness):
            w = w.as_analogy(X2)
        F2, mech2 = doc.prior(target["prior"])
        sigma2 = transfer_equilibrium(w, sigma)
        equilibrium_comparison_universe(mech2, F2, sigma2,
                                        {a: [dict(sorted(_push(l, w.alpha[a]).items(), key=repr)) for l in ls]
                                         for a, ls in devs.items()}, universe=U, mech_id=target["mechanism"])
    K = _knowledge(e["knowledge"], U, mech.agents)
    if args.drop:
        agent, k = args.drop.split(":")
        agent, k = parse_label(agent), int(k)
        K = KnowledgeStructure(U, {a: [w.without(agent, k) if a == mech.agents[0] else w for w in ws]
                                   for a, ws in K.sets.items()})
    source = check_ck_equilibrium(mech, prior, sigma, K, devs, args.tol, mech_id=e["mechanism"])
    report = {"id": eid, "universe_size": len(U), "source_comparisons": n_source, "source": source.as_dict()}
    ok = source.ok
    if target:
        links = [Link.from_witness(w, X, X2)]
        K2 = transfer_knowledge(K, links)
        moved = check_ck_equilibrium(mech2, F2, sigma2, K2, None, args.tol, mech_id=target["mechanism"])
        report["target"] = moved.as_dict()
        ok = ok and moved.ok
    return Outcome(OK if ok else NEGATIVE, f"common knowledge of equilibrium ({eid})", report)


def _push(lottery, alpha):
    out: dict = {}
    for x, p in lottery.items():
        out[alpha[x]] = out.get(alpha[x], 0.0) + p
    return out


def cmd_atlas_validate(doc: Document, args) -> Outcome:
    aid = doc.pick("atlas", args.id)
    atlas, declared = doc.atlas(aid)
    rep = check_atlas_validity(atlas, declared, args.tol)
    return Outcome(OK if rep.ok else NEGATIVE, f"atlas {aid}", {"id": aid, **rep.as_dict()})


def cmd_demo(doc, args) -> Outcome:
    names = list(DEMOS) if args.name == "all" else [args.name]
    results = [run_demo(n, args.seed, args.tol) for n in names]
    rows = [{"demo": r.name, "passed": r.passed, "seconds": round(r.runtime, 3)} for r in results]
    ok = all(r.passed for r in results)
    report = {"passed": ok, "demos": [r.as_dict() for r in results]}
    return Outcome(OK if ok else NEGATIVE, f"demo {args.name}", report, rows, ["demo", "passed", "seconds"])


def cmd_catalog(doc, args) -> Outcome:
    fams = [args.family] if args.family else list(cat.FAMILIES)
    rows = []
    for f in fams:
        if f not in cat.FAMILIES:
            raise AnalogyError(f"unknown family {f!r}")
        rows.append({"family": f, "witness": f in cat.WITNESSES or f == "fpa",
                     "description": cat.PROVENANCE[f], "defaults": cat.FAMILY_DEFAULTS[f]})
    return Outcome(OK, "mechanism families", {"families": rows}, rows, ["family", "witness", "description"])


COMMANDS = {
    "eval": cmd_eval, "bne": cmd_bne, "dominant": cmd_dominant, "check-equiv": cmd_check_equiv,
    "check-analogy": cmd_check_analogy, "find-witness": cmd_find_witness, "transfer": cmd_transfer,
    "epistemic": cmd_epistemic, "atlas-validate": cmd_atlas_validate, "demo": cmd_demo, "catalog": cmd_catalog,
}
NEEDS_DOCUMENT = set(COMMANDS) - {"demo", "catalog"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="optimality/residual tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="search node budget")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="parallelism cap (the engine currently runs single-threaded)")
    common.add_argument("--format", choices=["text", "structured", "json", "table"], default="text")

    p = argparse.ArgumentParser(prog="stratanalogy", description="Finite strategic-analogy engine.",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        if name in NEEDS_DOCUMENT:
            sp.add_argument("document", help="YAML document")
        return sp

    sp = add("eval", "expected utility at a profile")
    sp.add_argument("--mechanism")
    sp.add_argument("--agent")
    sp.add_argument("--type", help="type point as JSON (e.g. 5 or [1, 0.5])")
    sp.add_argument("--profile", required=True, help='action profile as JSON, e.g. "[4, 2]"')
    sp = add("bne", "check a strategy profile, or enumerate pure BNE")
    sp.add_argument("--prior")
    sp.add_argument("--strategy")
    sp.add_argument("--enumerate", action="store_true")
    sp = add("dominant", "dominant strategies per agent")
    sp.add_argument("--mechanism")
    for name, h in (("check-equiv", "verify a strategic-equivalence witness"),
                    ("check-analogy", "verify an analogy witness")):
        add(name, h).add_argument("--witness")
    sp = add("find-witness", "exhaustive witness search")
    sp.add_argument("--from", dest="source")
    sp.add_argument("--to", dest="target")
    sp.add_argument("--lambda-zero", action="store_true")
    sp.add_argument("--kappa-const", action="store_true")
    sp.add_argument("--output", help="write the document with the found witness added")
    sp.add_argument("--witness-id", default="found")
    sp = add("transfer", "carry an equilibrium or dominant strategies along a witness")
    sp.add_argument("--witness")
    sp.add_argument("--strategy")
    sp.add_argument("--prior", help="prior on the target's types; enables BNE checks")
    sp.add_argument("--dominant", action="store_true")
    sp = add("epistemic", "common knowledge of equilibrium")
    sp.add_argument("--id")
    sp.add_argument("--drop", help="AGENT:INDEX, remove one comparison from the first agent's view")
    sp = add("atlas-validate", "check an affine atlas")
    sp.add_argument("--id")
    sp = add("demo", "run a registered demo")
    sp.add_argument("--name", default="all", choices=["all"] + list(DEMOS))
    sp = add("catalog", "list mechanism families")
    sp.add_argument("--family")
    return p


def emit(outcome: Outcome, fmt: str, tol_source: str, tol: float) -> str:
    report = {**outcome.report, "tolerance": tol, "tolerance_source": tol_source, "exit_code": outcome.code}
    if fmt in ("structured", "json"):
        return json.dumps(jsonable(report), sort_keys=True, indent=2)
    if fmt == "table" and outcome.rows is not None:
        return render_table(outcome.rows, outcome.columns)
    return render_text(outcome.title, report)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    fmt = args.format
    try:
        tol, source = default_tol()
        if args.tol is not None:
            tol, source = args.tol, "flag --tol"
        args.tol = tol
        doc = Document.load(args.document) if args.command in NEEDS_DOCUMENT else None
        outcome = COMMANDS[args.command](doc, args)
    except BudgetError as exc:
        print(_error(exc, fmt), file=sys.stderr if fmt == "text" else sys.stdout)
        return BUDGET
    except (AnalogyError, KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(_error(exc, fmt), file=sys.stderr if fmt == "text" else sys.stdout)
        return INPUT_ERROR
    print(emit(outcome, fmt, source, tol))
    return outcome.code


def _error(exc, fmt) -> str:
    category = getattr(exc, "category", "invalid-input")
    report = {"error": category, "message": str(exc)}
    if getattr(exc, "path", None):
        report["path"] = exc.path
    if getattr(exc, "count", None) is not None:
        report["count"] = exc.count
    if fmt in ("structured", "json"):
        return json.dumps(report, sort_keys=True)
    return f"error [{category}]: {exc}"


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
