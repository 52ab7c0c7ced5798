"""UCT search family with per-level statistics.

One tree type serves every variant.  Each node keeps statistics keyed by
search level; a level that has not touched a node yet reads the deepest
lower level (copy-on-first-touch), so finishing level i never changes the
numbers stored for earlier levels.

Values are discounted returns of the owner's team scalar (own team reward
minus the other teams' rewards).  Opponent nodes minimize it.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Iterator, Optional

import numpy as np

from capteam.capability import BeliefBank, Mode
from capteam.envs.base import TurnGame
from capteam.tempered import per_player_likelihood

SELF, TEAMMATE, OPPONENT = "self", "teammate", "opponent"


@dataclass(frozen=True)
class SearchParams:
    n: int = 200
    d: int = 4
    m: int = 5
    gamma: float = 0.9
    uct_c: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.d < 1:
            raise ValueError("n, m and d must be at least 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.uct_c < 0:
            raise ValueError("uct_c must be nonnegative")

    def with_depth(self, d: int) -> "SearchParams":
        return replace(self, d=d)


class Node:
    __slots__ = ("state", "depth", "actor", "kind", "parent", "action", "reward",
                 "terminal", "children", "untried", "stats", "tstats")

    def __init__(self, state, depth, actor, kind, parent, action, reward, terminal, actions):
        self.state = state
        self.depth = depth
        self.actor = actor
        self.kind = kind
        self.parent = parent
        self.action = action
        self.reward = reward  # owner-team scalar on the edge into this node
        # stats hold returns that include ``reward``: Q(parent, action) for children
        self.terminal = terminal
        self.children: dict[Hashable, Node] = {}
        self.untried = list(actions)
        # level -> [visits, value_sum, simulations]
        self.stats: dict[Any, list] = {}
        self.tstats: dict[Any, list] = {}

    def level_stats(self, level) -> Optional[list]:
        """Stats visible at ``level``: own entry or the deepest lower one."""
        s = self.stats.get(level)
        if s is not None:
            return s
        best_k = None
        for k in self.stats:
            if k <= level and (best_k is None or k > best_k):
                best_k = k
        return None if best_k is None else self.stats[best_k]

    def touch(self, level) -> list:
        s = self.stats.get(level)
        if s is None:
            prev = self.level_stats(level)
            s = list(prev) if prev is not None else [0, 0.0, 0]
            self.stats[level] = s
        return s

    def visits(self, level) -> int:
        s = self.level_stats(level)
        return 0 if s is None else s[0]

    def mean(self, level) -> float:
        s = self.level_stats(level)
        return 0.0 if s is None or s[0] == 0 else s[1] / s[0]


@dataclass
class SearchTree:
    game: TurnGame
    root: Node
    owner: int
    params: SearchParams
    levels_done: set = field(default_factory=set)
    counters: Counter = field(default_factory=Counter)
    # range of backed-up returns, used to rescale UCT means to [0, 1]
    vmin: float = math.inf
    vmax: float = -math.inf

    def observe_value(self, g: float) -> None:
        if g < self.vmin:
            self.vmin = g
        if g > self.vmax:
            self.vmax = g

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())

    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes())

    def dump(self) -> list[str]:
        """Line-oriented debug view: key, depth, then level:visits:mean per level."""
        lines = []
        for node in self.nodes():
            cells = " ".join(f"{k}:{s[0]}:{(s[1] / s[0] if s[0] else 0.0):.4f}"
                             for k, s in sorted(node.stats.items(), key=lambda kv: str(kv[0])))
            lines.append(f"{self.game.state_key(node.state)!r}\t{node.depth}\t{node.kind}\t{cells}")
        return lines


def _kind(game: TurnGame, owner: int, actor: Optional[int]) -> str:
    if actor is None or actor == owner:
        return SELF
    return TEAMMATE if game.team_of(actor) == game.team_of(owner) else OPPONENT


def _scalar(game: TurnGame, owner: int, rewards) -> float:
    own = game.team_of(owner)
    return sum(r if k == own else -r for k, r in enumerate(rewards))


def new_tree(game: TurnGame, state, owner: int, params: SearchParams) -> SearchTree:
    if game.is_terminal(state):
        raise ValueError("cannot search from a terminal state")
    actor = game.actor(state)
    root = Node(state, 0, actor, _kind(game, owner, actor), None, None, 0.0, False,
                game.legal_actions(state))
    return SearchTree(game, root, owner, params)


def _expand(tree: SearchTree, node: Node) -> Node:
    game = tree.game
    action = node.untried.pop(0)
    res = game.step(node.state, action)
    terminal = game.is_terminal(res.state)
    actor = None if terminal else game.actor(res.state)
    child = Node(res.state, node.depth + 1, actor, _kind(game, tree.owner, actor), node, action,
                 _scalar(game, tree.owner, res.rewards), terminal,
                 () if terminal else game.legal_actions(res.state))
    node.children[action] = child
    return child


def _rollout(tree: SearchTree, state, length: int, rng: np.random.Generator) -> float:
    """Mean discounted return of m uniformly random playouts of ``length`` steps."""
    if length <= 0:
        return 0.0
    game, p = tree.game, tree.params
    # one draw from the search stream per simulate; step-major fill keeps the
    # first k steps of every playout identical whatever the requested length
    sub = np.random.Generator(np.random.PCG64(int(rng.integers(2**63))))
    uniforms = sub.random((length, p.m)).T
    fast = getattr(game, "rollout_returns", None)
    if fast is not None:
        return sum(fast(state, length, tree.owner, p.gamma, uniforms)) / p.m
    total = 0.0
    for row in uniforms:
        s, g, disc = state, 0.0, 1.0
        for u in row:
            if game.is_terminal(s):
                break
            acts = game.legal_actions(s)
            res = game.step(s, acts[int(u * len(acts))])
            g += disc * _scalar(game, tree.owner, res.rewards)
            disc *= p.gamma
            s = res.state
        total += g
    return total / p.m


def _uct_pick(tree: SearchTree, node: Node, key, minimize: bool, stats_of) -> Node:
    c = tree.params.uct_c
    parent_n = max(stats_of(node, key)[0], 1)
    log_n = math.log(parent_n)
    lo, span = tree.vmin, tree.vmax - tree.vmin
    if not span > 0:
        lo, span = 0.0, 1.0
    best, best_score = None, -math.inf
    for child in node.children.values():
        n, v = stats_of(child, key)[:2]
        if n == 0:
            return child
        mean = (v / n - lo) / span
        score = (-mean if minimize else mean) + c * math.sqrt(log_n / n)
        if score > best_score:
            best, best_score = child, score
    return best


def _level_view(node: Node, level):
    s = node.level_stats(level)
    return s if s is not None else (0, 0.0, 0)


def _tview(node: Node, key):
    return node.tstats.get(key, (0, 0.0, 0))


def _iterate(tree: SearchTree, root: Node, level, bound: float, rollout_to: float,
             rng: np.random.Generator, teammate_mode: str = "own", depths=None,
             stats_key=None, rollout_len: Optional[int] = None) -> None:
    """One select/expand/simulate/backpropagate pass.

    ``teammate_mode``: ``own`` treats teammates like the owner, ``min`` like
    opponents, ``typed`` consults ``depths`` (sampled teammate depths) and
    spawns recursive oblivious iterations for shallower teammates.
    ``stats_key`` set means this is a recursive pass writing into ``tstats``.
    Rollouts run to absolute depth ``rollout_to`` unless ``rollout_len`` fixes
    their length relative to the leaf.
    """
    p = tree.params
    if stats_key is None:
        view = lambda n, k: _level_view(n, k)  # noqa: E731
        touch = lambda n: n.touch(level)  # noqa: E731
        key = level
    else:
        view = _tview
        key = stats_key

        def touch(n):
            s = n.tstats.get(stats_key)
            if s is None:
                s = n.tstats[stats_key] = [0, 0.0, 0]
            return s

    node, path = root, [root]
    while True:
        if node.terminal or node.depth >= bound:
            break
        if node.untried:
            node = _expand(tree, node)
            path.append(node)
            break
        kind = node.kind
        if kind == TEAMMATE and teammate_mode == "min":
            kind = OPPONENT
        elif kind == TEAMMATE and teammate_mode == "typed":
            d_tm = depths.get(node.actor, level)
            if d_tm < level:
                sub_bound = min(node.depth + d_tm, p.d)
                tkey = (node.depth, d_tm)
                _iterate(tree, node, level, sub_bound, sub_bound, rng, "own", None, tkey)
                tree.counters["recursive_iterations"] += 1
                node = _most_visited_t(node, tkey)
                path.append(node)
                continue
        node = _uct_pick(tree, node, key, kind == OPPONENT, view)
        path.append(node)
    leaf = path[-1]
    length = rollout_len if rollout_len is not None else int(rollout_to - leaf.depth)
    g = 0.0 if leaf.terminal else _rollout(tree, leaf.state, length, rng)
    tree.counters["simulate_recursive" if stats_key is not None else "simulate_base"] += 1
    touch(leaf)[2] += 1
    # non-root nodes accumulate the Q value of the edge into them
    for k in range(len(path) - 1, -1, -1):
        if k > 0:
            g = path[k].reward + p.gamma * g
        s = touch(path[k])
        s[0] += 1
        s[1] += g
        tree.observe_value(g)


def _most_visited_t(node: Node, tkey) -> Node:
    best, best_n, best_mean = None, -1, -math.inf
    for child in node.children.values():
        n, v = _tview(child, tkey)[:2]
        mean = v / n if n else -math.inf
        if n > best_n or (n == best_n and mean > best_mean):
            best, best_n, best_mean = child, n, mean
    return best


def _run_level(tree: SearchTree, iterations: int, level: int, bound: float, rollout_to,
               rng, teammate_mode="own", sampler=None) -> None:
    for _ in range(iterations):
        depths = sampler(level) if sampler is not None else None
        _iterate(tree, tree.root, level, bound, rollout_to, rng, teammate_mode, depths)
    tree.counters[f"iterations_level_{level}"] += iterations
    tree.counters["iterations"] += iterations
    tree.levels_done.add(level)


def mcts(tree: SearchTree, params: Optional[SearchParams], rng: np.random.Generator) -> SearchTree:
    """Plain UCT: n iterations, rollouts of d steps from each new leaf, no depth bound."""
    params = params or tree.params
    tree.params = params
    level = params.d
    for _ in range(params.n):
        _iterate(tree, tree.root, level, math.inf, math.inf, rng, rollout_len=params.d)
    tree.counters["iterations"] += params.n
    tree.levels_done.add(level)
    return tree


def bounded_mcts(tree: SearchTree, params: Optional[SearchParams], rng: np.random.Generator,
                 teammate_mode: str = "own") -> SearchTree:
    """n iterations that never create a node deeper than d; lookahead is d plies."""
    params = params or tree.params
    tree.params = params
    _run_level(tree, params.n, params.d, params.d, params.d, rng, teammate_mode)
    return tree


def oblivious_search(game: TurnGame, state, owner: int, params: SearchParams,
                     rng: np.random.Generator, teammate_mode: str = "own") -> SearchTree:
    """Progressive deepening: level i runs n*i bounded iterations at depth i."""
    tree = new_tree(game, state, owner, params)
    for i in range(1, params.d + 1):
        _run_level(tree, params.n * i, i, i, i, rng, teammate_mode)
    return tree


def depth_sampler(game: TurnGame, owner: int, bank: BeliefBank, T: float,
                  rng: np.random.Generator):
    """Per-iteration teammate depths drawn from the beliefs visible at a level.

    A level below every capability label falls back to the level itself
    (best effort), as does a belief with no feasible mass.
    """
    if bank.mode is not Mode.TEMPERED:
        raise ValueError("capability-aware search expects a tempered bank")
    mates = game.teammates(owner)
    labels = np.array(bank.caps.labels)
    cache: dict[int, list] = {}

    def sample(level: int) -> dict[int, int]:
        probs = cache.get(level)
        if probs is None:
            probs = cache[level] = [per_player_likelihood(bank.about(j), level, T) for j in mates]
        out = {}
        for j, p in zip(mates, probs):
            if p.sum() <= 0:
                out[j] = level
            else:
                nz = np.flatnonzero(p)
                out[j] = int(labels[nz[0]]) if len(nz) == 1 else int(rng.choice(labels, p=p))
        return out

    return sample


def ca_mcts(game: TurnGame, state, owner: int, params: SearchParams, bank: BeliefBank,
            rng: np.random.Generator, T: float = 0.1) -> SearchTree:
    """Capability-aware progressive search.

    Every iteration at level i samples teammate depths from the beliefs
    restricted to p(i).  A teammate sampled at depth >= i is searched like the
    owner; a shallower one is simulated by a recursive oblivious iteration
    rooted at its node, and its most visited reply is followed.  Only the
    top-level pass spawns recursive iterations.
    """
    if len(game.teams[game.team_of(owner)]) > 2:
        raise ValueError("capability-aware search supports teams of at most two players")
    tree = new_tree(game, state, owner, params)
    sampler = depth_sampler(game, owner, bank, T, rng)
    for i in range(1, params.d + 1):
        _run_level(tree, params.n * i, i, i, i, rng, "typed", sampler)
    return tree


def _root_visits(tree: SearchTree, depth) -> tuple[list, np.ndarray]:
    if depth not in tree.levels_done:
        raise ValueError(f"level {depth} has not been searched")
    actions = list(tree.root.children)
    visits = np.array([tree.root.children[a].visits(depth) for a in actions], dtype=float)
    if not actions or visits.sum() == 0:
        raise ValueError("root has no visited children")
    return actions, visits


def typed_action_values(tree: SearchTree, depth) -> dict[Hashable, float]:
    """Normalized root visit counts at a level; a surrogate for typed Q values."""
    actions, visits = _root_visits(tree, depth)
    all_actions = list(tree.game.legal_actions(tree.root.state))
    share = dict(zip(actions, visits / visits.sum()))
    return {a: float(share.get(a, 0.0)) for a in all_actions}


def pick_action(tree: SearchTree, depth, rng: np.random.Generator) -> Hashable:
    """Most visited root action at ``depth``; ties drawn uniformly with ``rng``."""
    actions, visits = _root_visits(tree, depth)
    top = np.flatnonzero(visits == visits.max())
    k = top[0] if len(top) == 1 else top[int(rng.integers(len(top)))]
    return actions[int(k)]
