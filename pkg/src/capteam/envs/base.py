"""Turn-based, fully observable games with one actor per timestep."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Hashable, NamedTuple, Optional, Sequence


class StepResult(NamedTuple):
    state: Any
    rewards: tuple[float, ...]  # one entry per team
    next_actor: Optional[int]


class TurnGame(ABC):
    """Deterministic game interface shared by the search and the harness.

    ``teams`` lists player indices per team.  States are immutable; ``step``
    never mutates its input.
    """

    teams: tuple[tuple[int, ...], ...]

    @property
    def n_players(self) -> int:
        return sum(len(t) for t in self.teams)

    @property
    def n_teams(self) -> int:
        return len(self.teams)

    def team_of(self, player: int) -> int:
        for k, team in enumerate(self.teams):
            if player in team:
                return k
        raise IndexError(f"player {player} is on no team")

    def teammates(self, player: int) -> tuple[int, ...]:
        return tuple(p for p in self.teams[self.team_of(player)] if p != player)

    @abstractmethod
    def initial_state(self) -> Any: ...

    @abstractmethod
    def actor(self, state) -> int: ...

    @abstractmethod
    def legal_actions(self, state) -> Sequence[Hashable]: ...

    @abstractmethod
    def step(self, state, action) -> StepResult: ...

    @abstractmethod
    def is_terminal(self, state) -> bool: ...

    def state_key(self, state) -> Hashable:
        return state

    def planning_view(self, state):
        """The state as planners see it; environments may hide bookkeeping."""
        return state

    def winner(self, state, totals: Sequence[float]) -> Optional[int]:
        """Winning team index for a finished game, None for a draw."""
        if len(totals) < 2:
            return None
        best = max(totals)
        leaders = [k for k, v in enumerate(totals) if v == best]
        return leaders[0] if len(leaders) == 1 else None
