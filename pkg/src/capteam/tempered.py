"""Tempered beliefs: accumulated regret turned into likelihoods by a softmax.

Beliefs about each player hold the sum of observed losses per capability.
A temperature converts them into per-player likelihoods, whose product over
feasible assignments is the generalized likelihood phi.  The phi-value of a
state is the phi-expectation of the public typed values V^C.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Hashable, Mapping, Optional, Protocol, Sequence

import numpy as np

from capteam.capability import Belief, BeliefBank, Mode, feasible_assignments, intervene
from capteam.exact import Q_TOL, PolicyDraw


class Regime(str, enum.Enum):
    ADVERSARIAL = "adversarial"
    STOCHASTIC = "stochastic"
    FIXED = "fixed"


@dataclass(frozen=True)
class NoiseConfig:
    epsilon: float = 0.0
    delta: float = 0.1
    regime: Regime = Regime.FIXED

    def __post_init__(self):
        if not math.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("epsilon must be finite and nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        object.__setattr__(self, "regime", Regime(self.regime))


@dataclass(frozen=True)
class TemperConfig:
    fixed_T: float = 0.1
    loss_clip: Optional[float] = 0.5
    regime: Regime = Regime.FIXED

    def __post_init__(self):
        if self.fixed_T <= 0:
            raise ValueError("fixed_T must be positive")
        if self.loss_clip is not None and self.loss_clip <= 0:
            raise ValueError("loss_clip must be positive when set")
        object.__setattr__(self, "regime", Regime(self.regime))

    @classmethod
    def from_dict(cls, d: Mapping) -> "TemperConfig":
        return cls(fixed_T=float(d.get("fixed_T", 0.1)),
                   loss_clip=d.get("loss_clip", 0.5),
                   regime=d.get("regime", "fixed"))


@dataclass(frozen=True)
class AssignmentDistribution:
    support: tuple[tuple[int, ...], ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (len(self.support),):
            raise ValueError("one probability per assignment")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("assignment probabilities must be a distribution")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def prob(self, assignment) -> float:
        return float(self.probs[self.support.index(tuple(assignment))])

    def marginal(self, player: int, labels: Sequence[int]) -> np.ndarray:
        out = np.zeros(len(labels))
        pos = {c: k for k, c in enumerate(labels)}
        for C, p in zip(self.support, self.probs):
            out[pos[C[player]]] += p
        return out


class TypedValueProvider(Protocol):
    """Public typed values V^C plus the dynamics needed for one-step backups."""

    gamma: float

    def value(self, assignment: tuple[int, ...], state: Any) -> float: ...

    def actions(self, state: Any) -> Sequence[Hashable]: ...

    def transitions(self, state: Any, action: Hashable) -> Sequence[tuple[float, float, Any]]:
        """(probability, reward, next_state) triples."""
        ...


def temperature(regime: Regime | str, t: int = 1, n_players: int = 2, c_max: int = 1,
                delta: float = 0.1, fixed_T: float = 0.1) -> float:
    """Temperature schedule.

    adversarial: 6 t N;  stochastic: sqrt(d) t^(2/3) with
    d = 72 N^2 ln(20 N^2 c_max / (9 delta));  fixed: ``fixed_T``.
    ``c_max`` is the largest predecessor-set size among the players.
    """
    regime = Regime(regime)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if regime is Regime.FIXED:
        return float(fixed_T)
    if t < 1:
        raise ValueError("temperature schedules start at t = 1")
    if regime is Regime.ADVERSARIAL:
        return 6.0 * t * n_players
    return math.sqrt(stochastic_d(n_players, c_max, delta)) * t ** (2.0 / 3.0)


def stochastic_d(n_players: int, c_max: int, delta: float) -> float:
    return 72.0 * n_players ** 2 * math.log(20.0 * n_players ** 2 * c_max / (9.0 * delta))


def per_player_likelihood(b: Belief, observer_type: int, T: float) -> np.ndarray:
    """Softmax of negated losses over p(observer_type); zero elsewhere.

    Returns the all-zero vector when every feasible entry is infinite.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    if b.mode is not Mode.TEMPERED:
        raise ValueError("per_player_likelihood needs a tempered belief")
    mask = np.array([c <= observer_type for c in b.caps.labels])
    out = np.zeros(len(b.caps))
    scores = b.values[mask]
    finite = np.isfinite(scores)
    if not finite.any():
        return out
    lo = scores[finite].min()
    w = np.where(finite, np.exp(-(np.where(finite, scores, lo) - lo) / T), 0.0)
    out[mask] = w / w.sum()
    return out


def generalized_likelihood(bank: BeliefBank, c: int, T: float) -> AssignmentDistribution:
    """phi^c over p(c)^N as the product of per-player likelihoods."""
    labels = bank.caps.predecessors(c)
    if not labels:
        raise ValueError(f"no capability at or below {c}")
    idx = [bank.caps.index(x) for x in labels]
    marg = []
    for b in bank.beliefs:
        p = per_player_likelihood(b, c, T)[idx]
        if p.sum() <= 0:
            raise ValueError("belief has no feasible mass at this capability")
        marg.append(p)
    support = tuple(feasible_assignments(bank.caps, c, bank.n_players))
    probs = np.ones(1)
    for p in marg:
        probs = np.outer(probs, p).ravel()
    probs = probs / probs.sum()
    return AssignmentDistribution(support, probs)


def phi_value(c: int, state, bank: BeliefBank, provider: TypedValueProvider, T: float,
              phi: Optional[AssignmentDistribution] = None) -> float:
    phi = generalized_likelihood(bank, c, T) if phi is None else phi
    batch = getattr(provider, "values", None)
    if batch is not None:
        return float(phi.probs @ np.asarray(batch(phi.support, state), dtype=float))
    total = 0.0
    for C, p in zip(phi.support, phi.probs):
        if p == 0.0:
            continue
        v = provider.value(C, state)
        if v is None:
            raise KeyError(f"no typed value for assignment {C}")
        total += p * v
    return total


def phi_q(c: int, state, bank: BeliefBank, action, provider: TypedValueProvider, T: float,
          phi: Optional[AssignmentDistribution] = None) -> float:
    """One-step backup r + gamma * V_phi(s') in expectation over transitions."""
    phi = generalized_likelihood(bank, c, T) if phi is None else phi
    return sum(p * (r + provider.gamma * phi_value(c, s2, bank, provider, T, phi))
               for p, r, s2 in provider.transitions(state, action))


def _phi_q_vector(c, state, bank, provider, T):
    actions = list(provider.actions(state))
    if not actions:
        raise ValueError("empty action set")
    phi = generalized_likelihood(bank, c, T)
    vals = np.array([phi_q(c, state, bank, a, provider, T, phi) for a in actions])
    return actions, vals


def loss(c: int, state, bank: BeliefBank, actor: int, action, provider: TypedValueProvider,
         T: float, clip: Optional[float] = None) -> float:
    """Regret of ``action`` under the type-c phi-Q with the actor intervened at c."""
    view = intervene(bank, actor, c)
    actions, vals = _phi_q_vector(c, state, view, provider, T)
    regret = float(vals.max() - vals[actions.index(action)])
    regret = max(regret, 0.0)
    return min(regret, clip) if clip is not None else regret


def tempered_update(bank: BeliefBank, actor: int, losses: Mapping[int, float] | Sequence[float],
                    observer_type: Optional[int] = None) -> BeliefBank:
    """Add ``losses[c]`` to the belief about ``actor`` for every c <= observer type.

    ``losses`` maps capability labels to losses, or is a full-length vector.
    """
    if bank.mode is not Mode.TEMPERED:
        raise ValueError("tempered_update requires a tempered bank")
    c_obs = bank.owner_type if observer_type is None else observer_type
    caps = bank.caps
    if isinstance(losses, Mapping):
        vec = np.zeros(len(caps))
        for c, v in losses.items():
            vec[caps.index(c)] = v
    else:
        vec = np.asarray(losses, dtype=float)
        if vec.shape != (len(caps),):
            raise ValueError("loss vector length must match the capability set")
    if (vec < 0).any():
        raise ValueError("losses must be nonnegative")
    mask = np.array([c <= c_obs for c in caps.labels])
    b = bank.about(actor)
    new = b.values + np.where(mask, vec, 0.0)
    return bank.replace(actor, b.with_values(new))


def phi_greedy_policy(c: int, state, bank: BeliefBank, provider: TypedValueProvider, T: float,
                      rng: np.random.Generator, actor: int, tol: float = Q_TOL,
                      seed: Optional[int] = None) -> PolicyDraw:
    view = intervene(bank, actor, c)
    actions, vals = _phi_q_vector(c, state, view, provider, T)
    best = vals.max()
    ties = tuple(a for a, v in zip(actions, vals) if v >= best - tol)
    chosen = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
    return PolicyDraw(chosen, ties, seed)
