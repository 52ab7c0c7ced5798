"""Agent strategies built from the search family and tempered inference.

OBL   oblivious progressive search, teammates assumed equally capable
MIN   oblivious search that treats teammates as value minimizers
CA_MA capability-aware search; infers teammates by modeling them as
      capability-aware agents over the reduced type structure
SA    capability-aware search; infers teammates by modeling them as oblivious
NU    capability-aware search with beliefs frozen at the prior
ORA   capability-aware search with beliefs fixed at the true types
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from capteam.capability import Belief, BeliefBank, CapabilitySet, Mode, intervene
from capteam.envs.base import TurnGame
from capteam.search import SearchParams, ca_mcts, oblivious_search, pick_action, typed_action_values
from capteam.tempered import TemperConfig, per_player_likelihood, tempered_update


class Strategy(str, enum.Enum):
    OBL = "OBL"
    CA_MA = "CA_MA"
    SA = "SA"
    ORA = "ORA"
    NU = "NU"
    MIN = "MIN"


AWARE = {Strategy.CA_MA, Strategy.SA, Strategy.NU, Strategy.ORA}
INFERRING = {Strategy.CA_MA, Strategy.SA}


@dataclass(frozen=True)
class AgentSpec:
    strategy: Strategy
    depth: int
    search: SearchParams = field(default_factory=SearchParams)
    temper: TemperConfig = field(default_factory=TemperConfig)
    inference_budget: float = 1.0
    prior: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.inference_budget <= 0:
            raise ValueError("inference_budget must be positive")
        if self.prior not in ("uniform", "truth"):
            raise ValueError("prior is 'uniform' or 'truth'")
        if self.strategy is Strategy.ORA and self.prior != "truth":
            object.__setattr__(self, "prior", "truth")
        object.__setattr__(self, "search", self.search.with_depth(self.depth))

    @classmethod
    def from_dict(cls, d: Mapping, search: Optional[SearchParams] = None,
                  temper: Optional[TemperConfig] = None) -> "AgentSpec":
        unknown = set(d) - {"strategy", "depth", "inference_budget", "prior", "search"}
        if unknown:
            raise ValueError(f"unknown agent keys: {sorted(unknown)}")
        base = search or SearchParams()
        if "search" in d:
            base = replace(base, **d["search"])
        return cls(Strategy(d["strategy"]), int(d["depth"]), base, temper or TemperConfig(),
                   float(d.get("inference_budget", 1.0)), d.get("prior", "uniform"))

    @property
    def label(self) -> str:
        return f"{self.strategy.value}{self.depth}"


class Agent:
    """One player.  Beliefs are tempered losses about every player.

    The agent's belief about itself is a delta at its own capability.  The
    acting and inference searches draw from separate generators, so belief
    updates never perturb the acting randomness.
    """

    def __init__(self, spec: AgentSpec, player: int, game: TurnGame, caps: CapabilitySet,
                 seed, truth: Optional[Mapping[int, int]] = None):
        if spec.depth not in caps:
            raise ValueError(f"depth {spec.depth} is not in the capability set {caps.labels}")
        if spec.strategy in AWARE and len(game.teams[game.team_of(player)]) > 2:
            raise ValueError("capability-aware strategies support teams of at most two players")
        self.spec = spec
        self.player = player
        self.game = game
        self.caps = caps
        self.act_rng = np.random.default_rng([*_seed_words(seed), player, 0])
        self.inf_rng = np.random.default_rng([*_seed_words(seed), player, 1])
        n = game.n_players
        beliefs = [Belief.initial(caps, spec.depth, Mode.TEMPERED) for _ in range(n)]
        beliefs[player] = Belief.delta(caps, spec.depth, Mode.TEMPERED)
        if spec.prior == "truth":
            if truth is None:
                raise ValueError("a truth prior needs the true capability of every teammate")
            for j in game.teammates(player):
                beliefs[j] = Belief.delta(caps, truth[j], Mode.TEMPERED)
        self.bank = BeliefBank(spec.depth, tuple(beliefs))
        self.updates = 0

    def clone(self) -> "Agent":
        return copy.deepcopy(self)

    @property
    def T(self) -> float:
        return self.spec.temper.fixed_T

    def act(self, state):
        if self.game.actor(state) != self.player:
            raise ValueError(f"player {self.player} is not the actor")
        view = self.game.planning_view(state)
        params = self.spec.search
        strat = self.spec.strategy
        if strat in (Strategy.OBL, Strategy.MIN):
            mode = "min" if strat is Strategy.MIN else "own"
            tree = oblivious_search(self.game, view, self.player, params, self.act_rng, mode)
        else:
            bank = intervene(self.bank, self.player, self.spec.depth)
            tree = ca_mcts(self.game, view, self.player, params, bank, self.act_rng, self.T)
        self.last_tree = tree
        return pick_action(tree, self.spec.depth, self.act_rng)

    def observe(self, state, actor: int, action) -> None:
        """Update beliefs about ``actor`` after it played ``action`` at ``state``."""
        if self.spec.strategy not in INFERRING or actor == self.player:
            return
        if actor not in self.game.teammates(self.player):
            return
        view = self.game.planning_view(state)
        n = max(1, int(round(self.spec.search.n * self.spec.inference_budget)))
        params = replace(self.spec.search, n=n)
        if self.spec.strategy is Strategy.CA_MA:
            tree = ca_mcts(self.game, view, actor, params, self.bank, self.inf_rng, self.T)
        else:
            tree = oblivious_search(self.game, view, actor, params, self.inf_rng)
        clip = self.spec.temper.loss_clip
        losses = {}
        for c in self.caps.predecessors(self.spec.depth):
            q = typed_action_values(tree, c)
            gap = max(q.values()) - q[action]
            losses[c] = min(gap, clip) if clip is not None else gap
        self.bank = tempered_update(self.bank, actor, losses)
        self.updates += 1

    def posterior(self, j: int) -> np.ndarray:
        """Likelihood over capability labels for player j, within own capability."""
        return per_player_likelihood(self.bank.about(j), self.spec.depth, self.T)


def _seed_words(seed) -> list[int]:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]


def deviation(p, labels, d_star: float) -> float:
    """sqrt(sum_d p(d) (d - d*)^2) for a normalized posterior p."""
    p = np.asarray(p, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9 or (p < 0).any():
        raise ValueError("deviation needs a normalized distribution")
    return math.sqrt(float(p @ (np.asarray(labels, dtype=float) - d_star) ** 2))
