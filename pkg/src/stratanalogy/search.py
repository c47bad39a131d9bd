"""Exhaustive backtracking search for analogy witnesses between finite mechanisms.

Type bijections are chosen first (agents in declared order), then action
bijections, one action at a time, cycling over agents so that action profiles
become fully determined early.  Two pruning rules apply:

* signatures: a payoff vector normalised by (subtract min, divide by range)
  is invariant under positive affine maps, and its sorted values are invariant
  under relabelling profiles; paired types and actions must agree on them;
* incremental fitting: every fully determined profile adds one point per
  (agent, type) to a running positive-affine fit, and a failed fit backtracks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .analogy import AnalogyWitness, fit_affine, verify_witness
from .core import GAP_TOL, Mechanism
from .errors import InvalidInputError

DEFAULT_BUDGET = 10**7
SIGNATURE_TOL = 1e-9


@dataclass
class SearchResult:
    status: str  # "found" | "none" | "budget_exhausted"
    witness: AnalogyWitness | None
    nodes: int

    @property
    def found(self) -> bool:
        return self.status == "found"

    def as_dict(self) -> dict:
        return {"status": self.status, "nodes": self.nodes}


class _Budget(Exception):
    pass


class _AffineTrack:
    """Running positive-affine fit y = slope*x + icpt over pushed points."""

    __slots__ = ("xs", "ys", "lo", "hi", "slope", "icpt", "hist", "tol")

    def __init__(self, tol):
        self.xs, self.ys, self.hist = [], [], []
        self.lo = self.hi = 0
        self.slope = self.icpt = None
        self.tol = tol

    def push(self, x, y) -> bool:
        self.hist.append((self.lo, self.hi, self.slope, self.icpt))
        xs, ys, tol = self.xs, self.ys, self.tol
        xs.append(x)
        ys.append(y)
        n = len(xs) - 1
        if n == 0:
            self.lo = self.hi = 0
            return True
        changed = False
        if x < xs[self.lo]:
            self.lo, changed = n, True
        if x > xs[self.hi]:
            self.hi, changed = n, True
        lo, hi = self.lo, self.hi
        if xs[hi] - xs[lo] <= tol:
            return abs(y - ys[lo]) <= tol and abs(y - ys[hi]) <= tol
        if changed or self.slope is None:
            slope = (ys[hi] - ys[lo]) / (xs[hi] - xs[lo])
            if not slope > 0:
                return False
            self.slope, self.icpt = slope, ys[lo] - slope * xs[lo]
            return all(abs(b - (self.slope * a + self.icpt)) <= tol for a, b in zip(xs, ys))
        return abs(y - (self.slope * x + self.icpt)) <= tol

    def pop(self):
        self.xs.pop()
        self.ys.pop()
        self.lo, self.hi, self.slope, self.icpt = self.hist.pop()


def _normalise(v: np.ndarray) -> np.ndarray:
    lo, span = v.min(), v.max() - v.min()
    if span <= 0:
        return np.zeros_like(v)
    return (v - lo) / span


class _Signatures:
    def __init__(self, mech: Mechanism):
        self.full = {}
        self.slices = {}
        agents = mech.agents
        for j in agents:
            U = mech.payoffs(j)
            for k in range(U.shape[0]):
                n = _normalise(U[k])
                self.full[j, k] = np.sort(n.reshape(-1))
                for p, i in enumerate(agents):
                    moved = np.moveaxis(n, p, 0)
                    for b in range(moved.shape[0]):
                        self.slices[j, k, i, b] = np.sort(moved[b].reshape(-1))


def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= SIGNATURE_TOL))


def search_witness(X: Mechanism, X2: Mechanism, budget: int = DEFAULT_BUDGET, tol: float = GAP_TOL,
                   lambda_zero: bool = False, kappa_const: bool = False) -> SearchResult:
    """Decide, by exhaustive search, whether an analogy witness X -> X2 exists."""
    if not X.env.compatible(X2.env):
        raise InvalidInputError(f"{X.name} and {X2.name} are not built on the same environment")
    agents = X.agents
    for i in agents:
        if len(X.action_sets[i]) != len(X2.action_sets[i]) or \
                len(X.env.type_grids[i]) != len(X2.env.type_grids[i]):
            return SearchResult("none", None, 0)
    return _Search(X, X2, budget, tol, lambda_zero, kappa_const).run()


class _Search:
    def __init__(self, X, X2, budget, tol, lambda_zero, kappa_const):
        self.X, self.X2 = X, X2
        self.agents = X.agents
        self.n = len(self.agents)
        self.budget, self.tol = budget, tol
        self.lambda_zero, self.kappa_const = lambda_zero, kappa_const
        self.nodes = 0
        self.sig, self.sig2 = _Signatures(X), _Signatures(X2)
        self.U = [X.payoffs(i) for i in self.agents]
        self.U2 = [X2.payoffs(i) for i in self.agents]
        self.ntypes = [len(X.env.type_grids[i]) for i in self.agents]
        self.nacts = [len(X.action_sets[i]) for i in self.agents]
        # tau[p][k2] = X type index paired with X2 type index k2
        self.tau = [[None] * m for m in self.ntypes]

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise _Budget

    def run(self) -> SearchResult:
        try:
            w = self._tau_step(0, 0)
        except _Budget:
            return SearchResult("budget_exhausted", None, self.nodes)
        if w is None:
            return SearchResult("none", None, self.nodes)
        return SearchResult("found", w, self.nodes)

    # type bijections

    def _tau_step(self, p, k2):
        if p == self.n:
            return self._alpha_root()
        if k2 == self.ntypes[p]:
            return self._tau_step(p + 1, 0)
        i = self.agents[p]
        used = set(self.tau[p][:k2])
        for k in range(self.ntypes[p]):
            if k in used or not _same(self.sig.full[i, k], self.sig2.full[i, k2]):
                continue
            self.tick()
            self.tau[p][k2] = k
            w = self._tau_step(p, k2 + 1)
            if w is not None:
                return w
        self.tau[p][k2] = None
        return None

    # action bijections

    def _alpha_root(self):
        agents = self.agents
        # compat[p][b][b2]: slice signatures agree for every agent/type pairing
        self.compat = []
        for p, i in enumerate(agents):
            table = np.zeros((self.nacts[p], self.nacts[p]), dtype=bool)
            for b in range(self.nacts[p]):
                for b2 in range(self.nacts[p]):
                    table[b, b2] = all(
                        _same(self.sig.slices[j, self.tau[q][k2], i, b], self.sig2.slices[j, k2, i, b2])
                        for q, j in enumerate(agents) for k2 in range(self.ntypes[q]))
            if not table.any(axis=1).all():
                return None
            self.compat.append(table)
        self.order = [(p, b) for b in range(max(self.nacts)) for p in range(self.n) if b < self.nacts[p]]
        self.amap = [[None] * m for m in self.nacts]
        self.assigned = [[] for _ in agents]
        self.tracks = [[_AffineTrack(self.tol) for _ in range(self.ntypes[q])] for q in range(self.n)]
        if self.lambda_zero:
            for row in self.tracks:
                for tr in row:
                    tr.push(0.0, 0.0)
        return self._alpha_step(0)

    def _alpha_step(self, pos):
        if pos == len(self.order):
            return self._finish()
        p, b = self.order[pos]
        used = set(self.amap[p][x] for x in self.assigned[p])
        for b2 in range(self.nacts[p]):
            if b2 in used or not self.compat[p][b, b2]:
                continue
            self.tick()
            self.amap[p][b] = b2
            pushed = []
            if self._extend(p, b, pushed):
                self.assigned[p].append(b)
                w = self._alpha_step(pos + 1)
                if w is not None:
                    return w
                self.assigned[p].pop()
            for tr in reversed(pushed):
                tr.pop()
        self.amap[p][b] = None
        return None

    def _extend(self, p, b, pushed) -> bool:
        """Feed every newly determined profile to the running fits."""
        ranges = [self.assigned[q] if q != p else [b] for q in range(self.n)]
        for prof in itertools.product(*ranges):
            prof2 = tuple(self.amap[q][x] for q, x in enumerate(prof))
            for q in range(self.n):
                U, U2, tau = self.U[q], self.U2[q], self.tau[q]
                for k2, tr in enumerate(self.tracks[q]):
                    pushed.append(tr)
                    if not tr.push(U[(tau[k2],) + prof], U2[(k2,) + prof2]):
                        return False
        if self.kappa_const:
            for row in self.tracks:
                slopes = [tr.slope for tr in row if tr.slope is not None]
                if slopes and max(slopes) - min(slopes) > self.tol * max(1.0, abs(max(slopes))):
                    return False
        return True

    def _finish(self):
        X, X2, agents = self.X, self.X2, self.agents
        alpha = {i: {X.action_sets[i][b]: X2.action_sets[i][self.amap[p][b]] for b in range(self.nacts[p])}
                 for p, i in enumerate(agents)}
        tau = {i: {X2.env.type_grids[i][k2]: X.env.type_grids[i][self.tau[p][k2]]
                   for k2 in range(self.ntypes[p])} for p, i in enumerate(agents)}
        fit = fit_affine(X, X2, alpha, tau, self.tol)
        if fit is None:
            return None
        kappa, lam = fit
        if self.lambda_zero or self.kappa_const:
            fixed = self._restrict(alpha, tau, kappa, lam)
            if fixed is None:
                return None
            kappa, lam = fixed
        w = AnalogyWitness(alpha, tau, kappa, lam)
        if not verify_witness(X, X2, w, self.tol).ok:
            return None
        return w

    def _restrict(self, alpha, tau, kappa, lam):
        """Re-express degenerate (constant-payoff) fits to honour the search mode."""
        X, X2 = self.X, self.X2
        for p, i in enumerate(self.agents):
            slopes = [kappa[i][t] for t in kappa[i]
                      if np.ptp(X.payoff_vector(i, tau[i][t])) > self.tol]
            common = slopes[0] if slopes else None
            for t in kappa[i]:
                x = X.payoff_vector(i, tau[i][t])
                if np.ptp(x) > self.tol:
                    continue
                y0, x0 = float(X2.payoff_vector(i, t)[0]), float(x[0])
                if self.lambda_zero:
                    if abs(x0) <= self.tol:
                        if abs(y0) > self.tol:
                            return None
                        k = common if common is not None else 1.0
                    else:
                        k = y0 / x0
                        if not k > 0 or (self.kappa_const and common is not None
                                         and abs(k - common) > self.tol * max(1.0, abs(common))):
                            return None
                    kappa[i][t], lam[i][t] = k, 0.0
                elif common is not None:
                    kappa[i][t], lam[i][t] = common, y0 - common * x0
            if self.lambda_zero and any(abs(v) > self.tol for v in lam[i].values()):
                return None
        return kappa, lam
