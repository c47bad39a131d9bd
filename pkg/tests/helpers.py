"""Small builders shared by the tests."""

import itertools

import numpy as np

from stratanalogy.analogy import AnalogyWitness
from stratanalogy.core import Environment, Mechanism


def payoff_env(agents, types, table):
    """Environment whose outcomes are (tag, agent-payoff tuple) and utility reads them off."""
    def utility(agent, t, y):
        return table[(y, agent, t)]
    return Environment(agents, {a: list(types[a]) for a in agents}, utility, name="payoff-table")


def game_pair(payoffs, actions, types, alpha, tau, kappa, lam, actions2=None):
    """X from payoff arrays ``payoffs[agent][t_index][profile index]``; X2 built through the witness.

    Returns ``(X, X2, witness)`` with both mechanisms on one environment.
    """
    agents = list(actions)
    actions2 = actions2 or {a: [alpha[a][x] for x in actions[a]] for a in agents}
    table = {}
    for p, prof in enumerate(itertools.product(*(actions[a] for a in agents))):
        img = tuple(alpha[a][x] for a, x in zip(agents, prof))
        for a in agents:
            for k, t in enumerate(types[a]):
                table[(("X", prof), a, t)] = float(payoffs[a][k][p])
        for a in agents:
            for t in types[a]:
                s = tau[a][t]
                table[(("X2", img), a, t)] = kappa[a][t] * table[(("X", prof), a, s)] + lam[a][t]
    env = payoff_env(agents, types, table)
    X = Mechanism(env, actions, lambda prof: {("X", tuple(prof)): 1.0}, name="X")
    X2 = Mechanism(env, actions2, lambda prof: {("X2", tuple(prof)): 1.0}, name="X2")
    return X, X2, AnalogyWitness(alpha, tau, kappa, lam)


def random_pair(rng, n_agents=2, n_actions=3, n_types=2, integer=True, lam_zero=False):
    agents = list(range(1, n_agents + 1))
    actions = {a: [f"a{k}" for k in range(n_actions)] for a in agents}
    types = {a: [f"t{k}" for k in range(n_types)] for a in agents}
    size = n_actions ** n_agents
    draw = (lambda: rng.integers(-5, 6, size=size).astype(float)) if integer else (lambda: rng.normal(size=size))
    payoffs = {a: [draw() for _ in range(n_types)] for a in agents}
    alpha = {a: dict(zip(actions[a], [f"b{k}" for k in rng.permutation(n_actions)])) for a in agents}
    tau = {a: dict(zip(types[a], [types[a][k] for k in rng.permutation(n_types)])) for a in agents}
    kappa = {a: {t: float(rng.choice([0.5, 1.0, 2.0, 3.0])) for t in types[a]} for a in agents}
    lam = {a: {t: 0.0 if lam_zero else float(rng.integers(-3, 4)) for t in types[a]} for a in agents}
    actions2 = {a: [f"b{k}" for k in range(n_actions)] for a in agents}
    return game_pair(payoffs, actions, types, alpha, tau, kappa, lam, actions2)


def image_mechanism(X, w, name="X3"):
    """Mechanism whose payoffs are the affine image of ``X`` under ``w``.

    The new outcomes are routed through ``X``'s environment so that the two
    mechanisms stay on one environment.
    """
    agents = X.agents
    table = {}
    for prof in X.profiles():
        y = ("img", w.map_profile(prof, agents))
        idx = X.profile_index(prof)
        for i in agents:
            for t in X.env.type_grids[i]:
                s = X.env.type_index(i, w.tau[i][t])
                table[(i, t, y)] = w.kappa[i][t] * float(X.payoffs(i)[(s,) + idx]) + w.lam[i][t]
    base = X.env.utility

    def utility(i, t, y):
        if isinstance(y, tuple) and y and y[0] == "img":
            return table[(i, t, y)]
        return base(i, t, y)

    X.env.utility = utility
    actions = {i: [w.alpha[i][a] for a in X.action_sets[i]] for i in agents}
    return Mechanism(X.env, actions, lambda p: {("img", tuple(p)): 1.0}, name=name)


def independent_pair(rng, n_agents=2, n_actions=2, n_types=2, values=(-2, 3)):
    """Two unrelated random games on one environment (small integer payoffs, so ties are common)."""
    agents = list(range(1, n_agents + 1))
    types = {a: [f"t{k}" for k in range(n_types)] for a in agents}
    actions = {a: [f"a{k}" for k in range(n_actions)] for a in agents}
    actions2 = {a: [f"b{k}" for k in range(n_actions)] for a in agents}
    table = {}
    for tag, acts in (("X", actions), ("X2", actions2)):
        for prof in itertools.product(*(acts[a] for a in agents)):
            for a in agents:
                for t in types[a]:
                    table[((tag, prof), a, t)] = float(rng.integers(*values))
    env = payoff_env(agents, types, table)
    X = Mechanism(env, actions, lambda prof: {("X", tuple(prof)): 1.0}, name="X")
    X2 = Mechanism(env, actions2, lambda prof: {("X2", tuple(prof)): 1.0}, name="X2")
    return X, X2
