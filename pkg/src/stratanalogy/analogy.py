"""Witnesses for strategic equivalence and analogy, and transfers along them.

Direction convention: a witness from ``X`` to ``X2`` holds

* ``alpha[i]``: X action -> X2 action,
* ``tau[i]``:   X2 type  -> X type,
* ``kappa[i]``, ``lam[i]``: keyed by X2 type,

and certifies ``U2_i[t, alpha(a)] == kappa_i(t) * U_i[tau_i(t), a] + lam_i(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    GAP_TOL,
    Mechanism,
    Prior,
    StrategyProfile,
    is_dominant,
    pushforward,
    validate_lottery,
)
from .errors import AnalogyError, InvalidInputError


def check_bijection(table: Mapping, domain, codomain, what: str = "map") -> None:
    domain, codomain = list(domain), list(codomain)
    if set(table) != set(domain):
        missing = [d for d in domain if d not in table]
        extra = [d for d in table if d not in set(domain)]
        raise InvalidInputError(f"{what}: domain mismatch (missing {missing!r}, extra {extra!r})")
    images = list(table.values())
    if len(set(images)) != len(images):
        raise InvalidInputError(f"{what}: not injective")
    if set(images) != set(codomain):
        raise InvalidInputError(f"{what}: not onto the declared codomain")


def invert(table: Mapping) -> dict:
    return {v: k for k, v in table.items()}


@dataclass
class EquivalenceWitness:
    """Per-agent action bijections with identical payoffs."""

    alpha: dict

    def as_analogy(self, target: Mechanism) -> "AnalogyWitness":
        grids = target.env.type_grids
        return AnalogyWitness(
            alpha={i: dict(m) for i, m in self.alpha.items()},
            tau={i: {t: t for t in grids[i]} for i in self.alpha},
            kappa={i: {t: 1.0 for t in grids[i]} for i in self.alpha},
            lam={i: {t: 0.0 for t in grids[i]} for i in self.alpha},
        )


@dataclass
class AnalogyWitness:
    alpha: dict
    tau: dict
    kappa: dict
    lam: dict
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for agent, ks in self.kappa.items():
            for t, k in ks.items():
                if not k > 0:
                    raise InvalidInputError(
                        f"kappa must be positive (agent {agent!r}, type {t!r}: {k!r})")

    @classmethod
    def identity(cls, mech: Mechanism) -> "AnalogyWitness":
        return EquivalenceWitness({i: {a: a for a in mech.action_sets[i]}
                                   for i in mech.agents}).as_analogy(mech)

    def inverse(self) -> "AnalogyWitness":
        """Witness from X2 back to X."""
        tau_inv = {i: invert(m) for i, m in self.tau.items()}
        kappa = {i: {s: 1.0 / self.kappa[i][t] for s, t in tau_inv[i].items()} for i in self.tau}
        lam = {i: {s: -self.lam[i][t] / self.kappa[i][t] for s, t in tau_inv[i].items()}
               for i in self.tau}
        return AnalogyWitness({i: invert(m) for i, m in self.alpha.items()}, tau_inv, kappa, lam)

    def compose(self, after: "AnalogyWitness") -> "AnalogyWitness":
        """``self``: X -> X2 and ``after``: X2 -> X3 give X -> X3."""
        alpha = {i: {a: after.alpha[i][b] for a, b in m.items()} for i, m in self.alpha.items()}
        tau = {i: {u: self.tau[i][s] for u, s in m.items()} for i, m in after.tau.items()}
        kappa = {i: {u: after.kappa[i][u] * self.kappa[i][s] for u, s in m.items()}
                 for i, m in after.tau.items()}
        lam = {i: {u: after.kappa[i][u] * self.lam[i][s] + after.lam[i][u] for u, s in m.items()}
               for i, m in after.tau.items()}
        return AnalogyWitness(alpha, tau, kappa, lam)

    def map_profile(self, profile, agents) -> tuple:
        return tuple(self.alpha[i][a] for i, a in zip(agents, profile))


@dataclass
class WitnessReport:
    ok: bool
    worst_gap: float
    first_violation: dict | None

    def as_dict(self) -> dict:
        return {"ok": self.ok, "worst_gap": self.worst_gap, "first_violation": self.first_violation}


def _check_shapes(X: Mechanism, X2: Mechanism, w: AnalogyWitness) -> None:
    if not X.env.compatible(X2.env):
        raise InvalidInputError(f"{X.name} and {X2.name} are not built on the same environment")
    for i in X.agents:
        check_bijection(w.alpha[i], X.action_sets[i], X2.action_sets[i], f"alpha[{i!r}]")
        check_bijection(w.tau[i], X2.env.type_grids[i], X.env.type_grids[i], f"tau[{i!r}]")
        for t in X2.env.type_grids[i]:
            if t not in w.kappa[i] or t not in w.lam[i]:
                raise InvalidInputError(f"kappa/lambda undefined for agent {i!r}, type {t!r}")


def aligned_payoffs(X: Mechanism, X2: Mechanism, alpha: Mapping, agent) -> np.ndarray:
    """X2's payoff tensor for ``agent`` re-indexed by X's action profiles via ``alpha``."""
    perms = [np.array([X2.action_index(j, alpha[j][a]) for a in X.action_sets[j]])
             for j in X.agents]
    U2 = X2.payoffs(agent)
    return U2[(slice(None),) + np.ix_(*perms)]


def verify_witness(X: Mechanism, X2: Mechanism, w: AnalogyWitness, tol: float = GAP_TOL) -> WitnessReport:
    _check_shapes(X, X2, w)
    worst, first = 0.0, None
    for i in X.agents:
        U = X.payoffs(i)
        U2 = aligned_payoffs(X, X2, w.alpha, i)
        for k, t in enumerate(X2.env.type_grids[i]):
            s = X.env.type_index(i, w.tau[i][t])
            lhs = U2[k]
            rhs = w.kappa[i][t] * U[s] + w.lam[i][t]
            gap = np.abs(lhs - rhs)
            g = float(gap.max())
            worst = max(worst, g)
            if first is None and g > tol:
                idx = np.unravel_index(int(np.argmax(gap > tol)), gap.shape)
                prof = tuple(X.action_sets[j][n] for j, n in zip(X.agents, idx))
                first = {"agent": i, "type": t, "profile": prof,
                         "image_profile": w.map_profile(prof, X.agents),
                         "lhs": float(lhs[idx]), "rhs": float(rhs[idx])}
    return WitnessReport(first is None, worst, first)


def verify_equivalence(X: Mechanism, X2: Mechanism, w: EquivalenceWitness,
                       tol: float = GAP_TOL) -> WitnessReport:
    if X.env.type_grids != X2.env.type_grids:
        raise InvalidInputError("strategic equivalence needs identical type grids")
    return verify_witness(X, X2, w.as_analogy(X2), tol)


def fit_affine(X: Mechanism, X2: Mechanism, alpha: Mapping, tau: Mapping,
               tol: float = GAP_TOL) -> tuple[dict, dict] | None:
    """Recover (kappa, lambda) for given bijections, or None if no positive fit."""
    kappa, lam = {}, {}
    for i in X.agents:
        U = X.payoffs(i)
        U2 = aligned_payoffs(X, X2, alpha, i)
        kappa[i], lam[i] = {}, {}
        for k, t in enumerate(X2.env.type_grids[i]):
            x = U[X.env.type_index(i, tau[i][t])].reshape(-1)
            y = U2[k].reshape(-1)
            fit = affine_fit_1d(x, y, tol)
            if fit is None:
                return None
            kappa[i][t], lam[i][t] = fit
    return kappa, lam


def affine_fit_1d(x: np.ndarray, y: np.ndarray, tol: float = GAP_TOL) -> tuple[float, float] | None:
    """Two-point slope through the extreme source payoffs, then validate every point."""
    lo, hi = int(np.argmin(x)), int(np.argmax(x))
    if x[hi] - x[lo] <= tol:
        if y.max() - y.min() > tol:
            return None
        return 1.0, float(y[0] - x[0])
    slope = (y[hi] - y[lo]) / (x[hi] - x[lo])
    if not slope > 0:
        return None
    intercept = y[lo] - slope * x[lo]
    if np.abs(y - (slope * x + intercept)).max() > tol:
        return None
    return float(slope), float(intercept)


def transfer_equilibrium(w: AnalogyWitness, sigma: StrategyProfile) -> StrategyProfile:
    """sigma2_i(t) = alpha_i pushforward of sigma_i(tau_i(t))."""
    maps = {i: {t: pushforward(sigma.lottery(i, s), w.alpha[i]) for t, s in w.tau[i].items()}
            for i in sigma.agents}
    return StrategyProfile(list(sigma.agents), maps)


def pushforward_prior(tau: Mapping, prior: Prior) -> Prior:
    """Relabel a prior on X2 types into X types through ``tau``."""
    k = {a: n for n, a in enumerate(prior.agents)}
    if prior.ipv:
        margs = {a: pushforward(prior.marginals[a], tau[a]) for a in prior.agents}
        return Prior.product(prior.agents, margs)
    pmf: dict = {}
    for prof, p in prior.pmf.items():
        image = tuple(tau[a][prof[k[a]]] for a in prior.agents)
        pmf[image] = pmf.get(image, 0.0) + p
    return Prior(prior.agents, pmf)


def transfer_dominant(w: AnalogyWitness, X: Mechanism, X2: Mechanism, strategies: Mapping,
                      tol: float = GAP_TOL) -> dict:
    """Carry dominant strategies of X to X2; the result is re-checked in X2."""
    out = {}
    for i, s in strategies.items():
        if not is_dominant(X, i, s, tol):
            raise InvalidInputError(f"strategy for agent {i!r} is not dominant in {X.name}")
        pure = not any(isinstance(v, Mapping) for v in s.values())
        lots = {t: (v if isinstance(v, Mapping) else {v: 1.0}) for t, v in s.items()}
        image = {t: pushforward(validate_lottery(lots[src]), w.alpha[i]) for t, src in w.tau[i].items()}
        if pure:
            image = {t: next(iter(lot)) for t, lot in image.items()}
        if not is_dominant(X2, i, image, tol):
            raise AnalogyError(f"transferred strategy of agent {i!r} is not dominant in {X2.name}")
        out[i] = image
    return out


# Affine atlases: the canonical form of a valid equivalence set.

@dataclass
class AffineAtlas:
    """Positive affine maps between payoff-situation heads.

    A head is ``(mechanism id, agent, type)``; ``links[(h, h2)] = (slope, intercept)``.
    ``correspondences`` optionally stores the per-agent action map of a link.
    """

    links: dict = field(default_factory=dict)
    correspondences: dict = field(default_factory=dict)

    def add(self, head, head2, slope: float, intercept: float, alpha=None, reverse: bool = True):
        self.links[(head, head2)] = (float(slope), float(intercept))
        if alpha is not None:
            self.correspondences[(head, head2)] = alpha
        if reverse:
            self.links[(head2, head)] = (1.0 / slope, -intercept / slope)
            if alpha is not None:
                self.correspondences[(head2, head)] = {i: invert(m) for i, m in alpha.items()}

    def apply(self, head, head2, u: float) -> float:
        try:
            slope, intercept = self.links[(head, head2)]
        except KeyError:
            raise InvalidInputError(f"no atlas link {head!r} -> {head2!r}") from None
        return slope * u + intercept


def atlas_from_witness(w: AnalogyWitness, X: Mechanism, X2: Mechanism) -> AffineAtlas:
    atlas = AffineAtlas()
    for i in X.agents:
        for t, s in w.tau[i].items():
            atlas.add((X.name, i, s), (X2.name, i, t), w.kappa[i][t], w.lam[i][t], w.alpha)
    return atlas


@dataclass
class DeclaredEquivalence:
    """A payoff equivalence between two heads with the payoffs already evaluated."""

    head: tuple
    payoff: float
    head2: tuple
    payoff2: float


@dataclass
class AtlasReport:
    ok: bool
    nonpositive_slopes: list
    inverse_failures: list
    equivalence_failures: list

    def as_dict(self) -> dict:
        return {"ok": self.ok, "nonpositive_slopes": [list(map(list, k)) for k in self.nonpositive_slopes],
                "inverse_failures": [list(map(list, k)) for k in self.inverse_failures],
                "equivalence_failures": self.equivalence_failures}


def check_atlas_validity(atlas: AffineAtlas, declared: list, tol: float = GAP_TOL) -> AtlasReport:
    """Positive slopes, inverse pairing, and every declared equivalence on its line."""
    bad_slope, bad_inverse, bad_decl = [], [], []
    for (h, h2), (slope, intercept) in atlas.links.items():
        if not slope > 0:
            bad_slope.append((h, h2))
        if (h2, h) not in atlas.links:
            raise InvalidInputError(f"atlas link {h!r} -> {h2!r} has no reverse link")
        rs, ri = atlas.links[(h2, h)]
        # composition must be the identity: rs*(slope*u + intercept) + ri == u
        if abs(rs * slope - 1.0) > tol or abs(rs * intercept + ri) > tol:
            bad_inverse.append((h, h2))
    for n, d in enumerate(declared):
        if (d.head, d.head2) not in atlas.links:
            raise InvalidInputError(f"declared equivalence {n} has no atlas link {d.head!r} -> {d.head2!r}")
        image = atlas.apply(d.head, d.head2, d.payoff)
        if abs(image - d.payoff2) > tol:
            bad_decl.append({"index": n, "expected": image, "declared": d.payoff2})
    return AtlasReport(not (bad_slope or bad_inverse or bad_decl), bad_slope, bad_inverse, bad_decl)
