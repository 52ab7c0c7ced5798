"""Brute-force verification backend on tiny tabular games.

Everything here is exhaustive: typed Q tables by backward induction, exact
Bayesian posteriors over joint capability assignments, and replay harnesses
that check the consistency/correctness properties of the belief updates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from capteam.capability import BeliefBank, CapabilitySet, Mode, is_type_structure
from capteam.exact import Q_TOL, conditional_likelihood, exact_update
from capteam.tempered import Regime, loss, stochastic_d, temperature, tempered_update


@dataclass
class TabularGame:
    """Deterministic turn-based game on an explicit state list.

    States are ``(s, t)`` pairs; player ``t % n_players`` acts at time t.  With
    a finite ``horizon`` the game ends at t == horizon, otherwise it recurs
    forever over the same transition graph.
    """

    next_state: np.ndarray  # (S, A) ints
    reward: np.ndarray  # (S, A) in [0, 1]
    caps: CapabilitySet
    n_players: int = 2
    horizon: Optional[int] = None
    gamma: float = 0.9
    start: int = 0

    def __post_init__(self):
        self.next_state = np.asarray(self.next_state, dtype=int)
        self.reward = np.asarray(self.reward, dtype=float)
        if self.next_state.shape != self.reward.shape:
            raise ValueError("transition and reward tables must match")
        if self.n_states > 200:
            raise ValueError("tabular games are limited to 200 states")
        if self.horizon is not None and not 0 < self.horizon <= 10:
            raise ValueError("finite horizons must lie in 1..10")
        if len(self.caps) > 4:
            raise ValueError("tabular games use at most 4 capability types")

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_actions(self) -> int:
        return self.next_state.shape[1]

    def initial_state(self):
        return (self.start, 0)

    def actor(self, state) -> int:
        return state[1] % self.n_players

    def actions(self, state):
        return range(self.n_actions)

    def is_terminal(self, state) -> bool:
        return self.horizon is not None and state[1] >= self.horizon

    def step(self, state, action):
        s, t = state
        return (int(self.next_state[s, action]), t + 1), float(self.reward[s, action])


def random_tabular_game(rng: np.random.Generator, caps: CapabilitySet, n_states: int = 6,
                        n_actions: int = 3, n_players: int = 2, horizon: Optional[int] = 4,
                        gamma: float = 0.9, reward_levels: int = 4) -> TabularGame:
    """Random game with quantized rewards so that exact ties occur."""
    nxt = rng.integers(0, n_states, size=(n_states, n_actions))
    rew = rng.integers(0, reward_levels + 1, size=(n_states, n_actions)) / reward_levels
    return TabularGame(nxt, rew, caps, n_players, horizon, gamma)


def _lookahead_tables(game: TabularGame, depth: int) -> list[np.ndarray]:
    """Q_k for k = 0..depth where Q_k optimizes the next k steps."""
    S, A = game.next_state.shape
    qs = [np.zeros((S, A))]
    v = np.zeros(S)
    for _ in range(depth):
        q = game.reward + game.gamma * v[game.next_state]
        qs.append(q)
        v = q.max(axis=1)
    return qs


def value_iteration_typed(game: TabularGame, c: int) -> np.ndarray:
    """Depth-c lookahead Q tables.

    Finite horizon: shape (H, S, A), row t optimizes min(c, H - t) steps.
    Recurrent games: shape (S, A).
    """
    if game.horizon is None:
        return _lookahead_tables(game, c)[c]
    qs = _lookahead_tables(game, min(c, game.horizon))
    return np.stack([qs[min(c, game.horizon - t)] for t in range(game.horizon)])


def recursive_q(game: TabularGame, c: int, state, action) -> float:
    """Plain recursive enumeration of the depth-c lookahead Q value."""
    s, t = state
    steps = c if game.horizon is None else min(c, game.horizon - t)
    if steps <= 0:
        return 0.0

    def best(s2, k):
        if k == 0:
            return 0.0
        return max(game.reward[s2, a] + game.gamma * best(game.next_state[s2, a], k - 1)
                   for a in range(game.n_actions))

    return float(game.reward[s, action] + game.gamma * best(game.next_state[s, action], steps - 1))


class TabularTypedQ:
    """Belief-dependent typed Q provider for exact-mode checks.

    Q^c(s, B, a) = lookahead table + weight * sum_m w[s, a, m] * E_m, where E_m
    is the mean normalized capability rank under player m's conditional
    likelihood P^c (0 when undefined).  Beliefs thus move the argmax, which
    is what makes the consistency property non-trivial.
    """

    def __init__(self, game: TabularGame, rng: np.random.Generator, weight: float = 0.5):
        self.game = game
        self.tables = {c: value_iteration_typed(game, c) for c in game.caps}
        self.w = rng.integers(0, 2, size=(game.n_states, game.n_actions, game.n_players))
        self.weight = weight
        self.ranks = (np.arange(len(game.caps)) + 1.0) / len(game.caps)

    def actions(self, state):
        return range(self.game.n_actions)

    def q_from_conditionals(self, c, state, action, conds: Sequence[Optional[np.ndarray]]) -> float:
        s, t = state
        base = self.tables[c][t, s, action] if self.game.horizon is not None else self.tables[c][s, action]
        feat = 0.0
        for m, p in enumerate(conds):
            if p is not None and self.w[s, action, m]:
                feat += float(p @ self.ranks)
        return float(base + self.weight * feat)

    def q(self, c, state, bank: BeliefBank, action) -> float:
        conds = [conditional_likelihood(b, c) for b in bank.beliefs]
        return self.q_from_conditionals(c, state, action, conds)


class JointPosterior:
    """Exact Bayes over joint assignments C in caps^N with a uniform prior."""

    def __init__(self, caps: CapabilitySet, n_players: int):
        self.caps = caps
        self.n = n_players
        self.assignments = list(itertools.product(range(len(caps)), repeat=n_players))
        self.weights = np.full(len(self.assignments), 1.0 / len(self.assignments))

    def copy(self) -> "JointPosterior":
        other = JointPosterior.__new__(JointPosterior)
        other.caps, other.n, other.assignments = self.caps, self.n, self.assignments
        other.weights = self.weights.copy()
        return other

    def marginal(self, m: int) -> np.ndarray:
        out = np.zeros(len(self.caps))
        for C, w in zip(self.assignments, self.weights):
            out[C[m]] += w
        return out

    def conditional(self, m: int, c: int) -> Optional[np.ndarray]:
        """P(c_m = . | c_m <= c, history); None if that event has zero mass."""
        marg = self.marginal(m)
        mask = np.array([x <= c for x in self.caps.labels])
        restricted = np.where(mask, marg, 0.0)
        total = restricted.sum()
        return None if total <= 0 else restricted / total

    def observe(self, provider: TabularTypedQ, state, actor: int, action, tol: float = Q_TOL):
        likelihood = {}
        for k, c in enumerate(self.caps.labels):
            conds = []
            for m in range(self.n):
                if m == actor:
                    delta = np.zeros(len(self.caps))
                    delta[k] = 1.0
                    conds.append(delta)
                else:
                    conds.append(self.conditional(m, c))
            vals = [provider.q_from_conditionals(c, state, a, conds) for a in provider.actions(state)]
            best = max(vals)
            opt = [a for a, v in zip(provider.actions(state), vals) if v >= best - tol]
            likelihood[k] = (1.0 / len(opt)) if action in opt else 0.0
        lik = np.array([likelihood[C[actor]] for C in self.assignments])
        w = self.weights * lik
        total = w.sum()
        self.weights = w / total if total > 0 else w


def brute_force_posterior(game: TabularGame, provider: TabularTypedQ,
                          history: Sequence[tuple]) -> list[np.ndarray]:
    """Per-player posterior marginals after ``history`` of (state, actor, action).

    An impossible history yields all-zero vectors.
    """
    post = JointPosterior(game.caps, game.n_players)
    for state, actor, action in history:
        post.observe(provider, state, actor, action)
    return [post.marginal(m) for m in range(game.n_players)]


@dataclass
class VerificationReport:
    theorem: str
    trials: int
    seed: int
    passed: bool
    checks: int = 0
    violations: list = field(default_factory=list)
    max_deviation: float = 0.0
    bound: Optional[float] = None
    pass_fraction: Optional[float] = None
    required_fraction: Optional[float] = None
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "checks": self.checks,
            "violations": self.violations[:50],
            "n_violations": len(self.violations),
            "max_deviation": self.max_deviation,
            "bound": self.bound,
            "pass_fraction": self.pass_fraction,
            "required_fraction": self.required_fraction,
            "skipped": self.skipped,
        }


# -- exact-mode theorems -------------------------------------------------------

def _exact_suite_game(rng):
    caps = CapabilitySet(tuple(sorted(rng.choice(np.arange(1, 7), size=int(rng.integers(2, 5)),
                                                 replace=False).tolist())))
    n_players = int(rng.integers(2, 4))
    game = random_tabular_game(rng, caps, n_states=int(rng.integers(3, 8)), n_actions=3,
                               n_players=n_players, horizon=4, reward_levels=1)
    types = tuple(int(x) for x in rng.choice(caps.labels, size=n_players))
    return game, TabularTypedQ(game, rng), types


def _replay_exact(game, provider, types, max_len, visit):
    """Depth-first replay of every action sequence up to ``max_len``."""
    caps, n = game.caps, game.n_players
    banks = [BeliefBank.initial(caps, types[j], n, Mode.EXACT) for j in range(n)]

    def rec(state, banks, post, depth):
        visit(banks, post)
        if depth == max_len or game.is_terminal(state):
            return
        i = game.actor(state)
        for a in game.actions(state):
            new_banks = [exact_update(banks[j], i, a, state, provider, types[j]) for j in range(n)]
            new_post = post.copy()
            new_post.observe(provider, state, i, a)
            rec(game.step(state, a)[0], new_banks, new_post, depth + 1)

    rec(game.initial_state(), banks, JointPosterior(caps, n), 0)


def _verify_exact(which: str, trials: int, seed: int, max_len: int = 4) -> VerificationReport:
    rng = np.random.default_rng(seed)
    report = VerificationReport(which, trials, seed, passed=True, bound=1e-9)
    for trial in range(trials):
        game, provider, types = _exact_suite_game(rng)
        caps = game.caps

        def visit(banks, post):
            n = game.n_players
            for m in range(n):
                report.checks += 1
                if which == "T1":
                    members = [(types[j], banks[j].about(m)) for j in range(n)]
                    if not is_type_structure(members):
                        report.violations.append({"trial": trial, "player": m})
                    continue
                if post.weights.sum() <= 0:
                    # zero-probability history: the Bayes posterior is undefined
                    report.skipped += 1
                    continue
                for j in range(n):
                    for c in caps.predecessors(types[j]):
                        mine = conditional_likelihood(banks[j].about(m), c)
                        truth = post.conditional(m, c)
                        if (mine is None) != (truth is None):
                            report.violations.append({"trial": trial, "player": m, "observer": j,
                                                      "c": c, "reason": "undefined mismatch"})
                        elif mine is not None:
                            gap = float(np.abs(mine - truth).max())
                            report.max_deviation = max(report.max_deviation, gap)
                            if gap > 1e-9:
                                report.violations.append({"trial": trial, "player": m,
                                                          "observer": j, "c": c, "gap": gap})

        _replay_exact(game, provider, types, max_len, visit)
    report.passed = not report.violations
    return report


# -- noisy (tempered) theorems -------------------------------------------------

class TabularValueProvider:
    """Typed joint-policy values V^C(s), normalized to [0, 1], with optional noise.

    V^C is the discounted value over ``eval_horizon`` steps when player p acts
    greedily on its depth-C[p] lookahead table.  ``noise`` perturbs every
    queried value: ``("adversarial", sign_table, scale)`` adds
    ``scale * sign_table[C, s, parity]``; ``("stochastic", rng, half_width)``
    adds fresh uniform noise on every query.
    """

    def __init__(self, game: TabularGame, eval_horizon: int = 8, noise=None, base=None):
        self.game = game
        self.gamma = game.gamma
        self.noise = noise
        if base is not None:
            self.assignments, self.index, self.table = base.assignments, base.index, base.table
            return
        caps, n = game.caps, game.n_players
        self.assignments = list(itertools.product(caps.labels, repeat=n))
        self.index = {C: k for k, C in enumerate(self.assignments)}
        greedy = {c: value_iteration_typed(game, c).argmax(axis=1) for c in caps}
        S = game.n_states
        table = np.zeros((len(self.assignments), S, n))
        for k, C in enumerate(self.assignments):
            v = np.zeros((S, n))
            for _ in range(eval_horizon):
                nv = np.zeros_like(v)
                for p in range(n):
                    a = greedy[C[p]]
                    nxt = game.next_state[np.arange(S), a]
                    nv[:, p] = game.reward[np.arange(S), a] + game.gamma * v[nxt, (p + 1) % n]
                v = nv
            table[k] = v
        lo, hi = table.min(), table.max()
        self.table = (table - lo) / (hi - lo) if hi > lo else np.zeros_like(table)

    def with_noise(self, noise) -> "TabularValueProvider":
        return TabularValueProvider(self.game, noise=noise, base=self)

    def actions(self, state):
        return range(self.game.n_actions)

    def transitions(self, state, action):
        s2, r = self.game.step(state, action)
        return [(1.0, r, s2)]

    def value(self, assignment, state) -> float:
        return float(self.values([tuple(assignment)], state)[0])

    def values(self, support, state) -> np.ndarray:
        s, t = state
        p = t % self.game.n_players
        idx = np.fromiter((self.index[C] for C in support), dtype=int, count=len(support))
        out = self.table[idx, s, p]
        if self.noise is None:
            return out
        kind, src, scale = self.noise
        if kind == "adversarial":
            return out + scale * src[idx, s, p]
        return out + src.uniform(-scale, scale, size=len(idx))


def _noisy_trial(regime: Regime, eps: float, delta: float, steps: int, rng: np.random.Generator,
                 caps: CapabilitySet, n_players: int = 2):
    game = random_tabular_game(rng, caps, n_states=8, n_actions=3, n_players=n_players,
                               horizon=None, reward_levels=4)
    base = TabularValueProvider(game)
    if regime is Regime.ADVERSARIAL:
        signs = rng.choice([-1.0, 1.0], size=base.table.shape)
        providers = [base.with_noise(("adversarial", signs, eps / 2)),
                     base.with_noise(("adversarial", signs, -eps / 2))]
    else:
        providers = [base.with_noise(("stochastic", np.random.default_rng(rng.integers(2**63)), eps / 2))
                     for _ in range(2)]
    own = caps.max
    banks = [BeliefBank.initial(caps, own, n_players, Mode.TEMPERED) for _ in range(2)]
    c_max = len(caps.predecessors(own))
    state = game.initial_state()
    worst = 0.0
    for t in range(1, steps + 1):
        i = game.actor(state)
        a = int(rng.integers(game.n_actions))
        T = temperature(regime, t, n_players, c_max, delta)
        for o in range(2):
            ls = {c: loss(c, state, banks[o], i, a, providers[o], T) for c in caps.predecessors(own)}
            banks[o] = tempered_update(banks[o], i, ls)
        gap = max(float(np.abs(banks[0].about(m).values - banks[1].about(m).values).max())
                  for m in range(n_players))
        scale = t if regime is Regime.ADVERSARIAL else t ** (2.0 / 3.0)
        worst = max(worst, gap / scale)
        state = game.step(state, a)[0]
    return worst


def _verify_noisy(which: str, trials: int, seed: int, eps: float, delta: float,
                  steps: int, slack: float) -> VerificationReport:
    caps = CapabilitySet((1, 2, 3, 4))
    n = 2
    regime = Regime.ADVERSARIAL if which == "T3" else Regime.STOCHASTIC
    if regime is Regime.ADVERSARIAL:
        bound = 3 * eps * slack
    else:
        bound = math.sqrt(stochastic_d(n, len(caps), delta)) * eps / (2 * n)
    report = VerificationReport(which, trials, seed, passed=True, bound=bound)
    ok = 0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        worst = _noisy_trial(regime, eps, delta, steps, rng, caps, n)
        report.checks += steps
        report.max_deviation = max(report.max_deviation, worst)
        if worst <= bound:
            ok += 1
        else:
            report.violations.append({"trial": trial, "seed": [seed, trial], "deviation": worst})
    report.pass_fraction = ok / trials
    if regime is Regime.ADVERSARIAL:
        report.required_fraction = 1.0
        report.passed = not report.violations
    else:
        report.required_fraction = 1.0 - delta
        report.passed = report.pass_fraction >= 1.0 - delta
    return report


def _verify_lemma(trials: int, seed: int, eps: float, slack: float) -> VerificationReport:
    caps = CapabilitySet((1, 2, 3, 4))
    n = 2
    report = VerificationReport("Lemma", trials, seed, passed=True, bound=3 * eps * slack)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        game = random_tabular_game(rng, caps, n_states=8, n_players=n, horizon=None)
        base = TabularValueProvider(game)
        signs = rng.choice([-1.0, 1.0], size=base.table.shape)
        pj = base.with_noise(("adversarial", signs, eps / 2))
        pk = base.with_noise(("adversarial", signs, -eps / 2))
        T = float(rng.uniform(0.05, 5.0))
        c = int(rng.choice(caps.labels))
        vals_j, vals_k = [], []
        for m in range(n):
            bj = rng.uniform(0, 3, size=len(caps))
            # premise: |B^j - B^k| / T <= eps / 2N on every entry
            bk = bj + rng.uniform(-1, 1, size=len(caps)) * T * eps / (2 * n)
            vals_j.append(np.maximum(bj, 0))
            vals_k.append(np.maximum(bk, 0))
        # clamping at zero can only shrink gaps, so the premise still holds
        init = BeliefBank.initial(caps, caps.max, n, Mode.TEMPERED)
        bank_j = BeliefBank(caps.max, tuple(init.about(m).with_values(vals_j[m]) for m in range(n)))
        bank_k = BeliefBank(caps.max, tuple(init.about(m).with_values(vals_k[m]) for m in range(n)))
        state = (int(rng.integers(game.n_states)), int(rng.integers(0, 10)))
        actor = game.actor(state)
        for a in range(game.n_actions):
            lj = loss(c, state, bank_j, actor, a, pj, T)
            lk = loss(c, state, bank_k, actor, a, pk, T)
            gap = abs(lj - lk)
            report.checks += 1
            report.max_deviation = max(report.max_deviation, gap)
            if gap > report.bound:
                report.violations.append({"trial": trial, "action": a, "gap": gap})
    report.passed = not report.violations
    return report


def verify_theorem(which: str, trials: Optional[int] = None, seed: int = 0, *, eps: float = 0.05,
                   delta: float = 0.1, steps: int = 200, slack: float = 1.05,
                   max_len: int = 4) -> VerificationReport:
    """Run one property check.  ``which`` is T1, T2, T3, T4 or Lemma."""
    which = which.upper() if which.lower() != "lemma" else "Lemma"
    if which in ("T1", "T2"):
        return _verify_exact(which, trials or 50, seed, max_len)
    if which == "T3":
        return _verify_noisy(which, trials or 100, seed, eps, delta, steps, slack)
    if which == "T4":
        return _verify_noisy(which, trials or 500, seed, eps, delta, steps, slack)
    if which == "Lemma":
        return _verify_lemma(trials or 200, seed, eps, slack)
    raise ValueError(f"unknown theorem {which!r}")
