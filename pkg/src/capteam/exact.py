"""Noise-free belief updates over capability type structures.

A ``TypedQProvider`` supplies Q^c(state, bank, action) for every capability c.
Observers update their belief about the acting player by multiplying each
entry c by the likelihood of the observed action under the greedy type-c
policy, ``1{a in A*(c)} / |A*(c)|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Optional, Protocol, Sequence

import numpy as np

from capteam.capability import Belief, BeliefBank, Mode, intervene

Q_TOL = 1e-9
UNDERFLOW = 1e-300


class TypedQProvider(Protocol):
    def q(self, c: int, state: Any, bank: BeliefBank, action: Hashable) -> float: ...

    def actions(self, state: Any) -> Sequence[Hashable]: ...


@dataclass(frozen=True)
class PolicyDraw:
    chosen_action: Hashable
    tie_set: tuple
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if self.chosen_action not in self.tie_set:
            raise ValueError("chosen action must belong to the tie set")


def _q_values(c, state, bank, q, actor) -> tuple[list, np.ndarray]:
    actions = list(q.actions(state))
    if not actions:
        raise ValueError("empty action set")
    view = intervene(bank, actor, c).reduced(c)
    vals = np.array([q.q(c, state, view, a) for a in actions], dtype=float)
    return actions, vals


def optimal_value(c: int, state, bank: BeliefBank, q: TypedQProvider, actor: int) -> float:
    """v*(c): best type-c Q value for ``actor`` on the intervened, reduced bank."""
    _, vals = _q_values(c, state, bank, q, actor)
    return float(vals.max())


def optimal_action_set(c: int, state, bank: BeliefBank, q: TypedQProvider, actor: int,
                       tol: float = Q_TOL) -> tuple:
    """A*(c) in action order; never empty."""
    actions, vals = _q_values(c, state, bank, q, actor)
    best = vals.max()
    return tuple(a for a, v in zip(actions, vals) if v >= best - tol)


def exact_update(bank: BeliefBank, actor: int, action, state, q: TypedQProvider,
                 observer_type: Optional[int] = None, tol: float = Q_TOL) -> BeliefBank:
    """Multiply the belief about ``actor`` by P(action | c) for every c <= observer type."""
    if bank.mode is not Mode.EXACT:
        raise ValueError("exact_update requires an exact-mode bank")
    c_obs = bank.owner_type if observer_type is None else observer_type
    b = bank.about(actor)
    vals = b.values.copy()
    for k, c in enumerate(b.caps.labels):
        if c > c_obs or vals[k] == 0.0:
            continue
        opt = optimal_action_set(c, state, bank, q, actor, tol)
        vals[k] = vals[k] / len(opt) if action in opt else 0.0
    vals[vals < UNDERFLOW] = 0.0
    return bank.replace(actor, b.with_values(vals))


def conditional_likelihood(b: Belief, c: int) -> Optional[np.ndarray]:
    """P^c over the full capability index (zero above c), or None when undefined.

    ``None`` means the belief has no mass on p(c), i.e. the player is
    certainly of a type above c.
    """
    if b.mode is not Mode.EXACT:
        raise ValueError("conditional_likelihood is defined for exact beliefs")
    b.caps.index(c)
    mask = np.array([x <= c for x in b.caps.labels])
    restricted = np.where(mask, b.values, 0.0)
    total = restricted.sum()
    if total <= 0.0:
        return None
    return restricted / total


def greedy_policy(c: int, state, bank: BeliefBank, q: TypedQProvider, rng: np.random.Generator,
                  actor: int, tol: float = Q_TOL, seed: Optional[int] = None) -> PolicyDraw:
    """Uniform draw from argmax_a Q^c(s, B_[actor=c], a)."""
    actions = list(q.actions(state))
    if not actions:
        raise ValueError("empty action set")
    view = intervene(bank, actor, c)
    vals = np.array([q.q(c, state, view, a) for a in actions], dtype=float)
    best = vals.max()
    ties = tuple(a for a, v in zip(actions, vals) if v >= best - tol)
    chosen = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
    return PolicyDraw(chosen, ties, seed)
