"""Configurable cooperative gridworld: shared or separate avatars, fire and coins.

Layouts are plain text.  A header of ``key = value`` lines ends at ``---``;
the map follows with one character per tile:

    .  neutral          F  fire
    c  blue coin        C  red coin
    b  blue avatar      r  red avatar   (both start on neutral tiles)
    #  wall (not enterable)

Header keys: ``horizon`` (total turns), ``moves`` (``cardinal`` or
``stay+cardinal``), ``shared_avatar``, ``fire`` (penalty per step on fire) and
``coin.<char> = <value> <owner>`` where owner is ``any`` or an avatar char.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import dataclass, replace
from importlib import resources
from typing import NamedTuple, Optional

from capteam.envs.base import StepResult, TurnGame

MOVES = {"S": (0, 0), "U": (0, -1), "D": (0, 1), "L": (-1, 0), "R": (1, 0)}
AVATAR_CHARS = ("b", "r")


class GridState(NamedTuple):
    t: int
    pos: tuple[tuple[int, int], ...]
    coins: int  # bitmask of uncollected coins


@dataclass(frozen=True)
class Coin:
    x: int
    y: int
    kind: str
    value: float
    owner: Optional[int]  # avatar index, None for anyone


@dataclass(frozen=True)
class GridConfig:
    width: int
    height: int
    tiles: tuple[str, ...]
    starts: tuple[tuple[int, int], ...]
    coins: tuple[Coin, ...]
    shared_avatar: bool
    horizon: int
    fire: float = -2.0
    actions: tuple[str, ...] = ("U", "D", "L", "R")
    name: str = "grid"
    # drop moves into walls or the border from the legal set instead of
    # treating them as a stay
    prune_blocked: bool = False
    first: int = 0  # player (and avatar) that moves at turn 0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if len(self.tiles) != self.height or any(len(r) != self.width for r in self.tiles):
            raise ValueError("tile map does not match width/height")
        for x, y in self.starts:
            if not (0 <= x < self.width and 0 <= y < self.height) or self.tiles[y][x] == "#":
                raise ValueError(f"avatar start {(x, y)} is not an open cell")
        if len(set(self.starts)) != len(self.starts):
            raise ValueError("avatars may not share a start cell")
        if self.shared_avatar and len(self.starts) != 1:
            raise ValueError("a shared-avatar grid has exactly one avatar")

    @classmethod
    def parse(cls, text: str, name: str = "grid") -> "GridConfig":
        head, sep, body = text.partition("\n---\n")
        if not sep:
            raise ValueError("layout needs a '---' line between header and map")
        opts: dict[str, str] = {}
        for line in head.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"bad header line: {line!r}")
            opts[key.strip()] = value.strip()
        rows = [r for r in body.splitlines() if r.strip()]
        height, width = len(rows), max(len(r) for r in rows)
        starts: dict[str, tuple[int, int]] = {}
        tiles, coins = [], []
        coin_specs = {}
        for key, value in opts.items():
            if key.startswith("coin."):
                parts = value.split()
                owner = None if parts[1] == "any" else AVATAR_CHARS.index(parts[1])
                coin_specs[key[5:]] = (float(parts[0]), owner)
        for y, row in enumerate(rows):
            if len(row) != width:
                raise ValueError("all map rows must have the same width")
            out = []
            for x, ch in enumerate(row):
                if ch in AVATAR_CHARS:
                    starts[ch] = (x, y)
                    ch = "."
                elif ch in coin_specs:
                    value, owner = coin_specs[ch]
                    coins.append(Coin(x, y, ch, value, owner))
                    ch = "."
                elif ch not in ".F#":
                    raise ValueError(f"unknown tile {ch!r} at {(x, y)}")
                out.append(ch)
            tiles.append("".join(out))
        order = tuple(starts[c] for c in AVATAR_CHARS if c in starts)
        moves = opts.get("moves", "cardinal")
        actions = ("U", "D", "L", "R") if moves == "cardinal" else ("S", "U", "D", "L", "R")
        blocked = opts.get("blocked", "stay")
        if blocked not in ("stay", "illegal"):
            raise ValueError(f"blocked must be 'stay' or 'illegal', not {blocked!r}")
        first = opts.get("first", AVATAR_CHARS[0])
        if first not in AVATAR_CHARS:
            raise ValueError(f"first must be one of {AVATAR_CHARS}, not {first!r}")
        return cls(width, height, tuple(tiles), order, tuple(coins),
                   opts.get("shared_avatar", "false").lower() == "true",
                   int(opts["horizon"]), float(opts.get("fire", -2)), actions, name,
                   blocked == "illegal", AVATAR_CHARS.index(first))

    def to_text(self) -> str:
        lines = [f"horizon = {self.horizon}",
                 f"moves = {'cardinal' if 'S' not in self.actions else 'stay+cardinal'}",
                 f"shared_avatar = {'true' if self.shared_avatar else 'false'}",
                 f"fire = {self.fire:g}"]
        if self.prune_blocked:
            lines.append("blocked = illegal")
        if self.first:
            lines.append(f"first = {AVATAR_CHARS[self.first]}")
        kinds = {}
        for c in self.coins:
            kinds[c.kind] = (c.value, "any" if c.owner is None else AVATAR_CHARS[c.owner])
        lines += [f"coin.{k} = {v:g} {o}" for k, (v, o) in sorted(kinds.items())]
        grid = [list(r) for r in self.tiles]
        for c in self.coins:
            grid[c.y][c.x] = c.kind
        for k, (x, y) in enumerate(self.starts):
            grid[y][x] = AVATAR_CHARS[k]
        return "\n".join(lines) + "\n---\n" + "\n".join("".join(r) for r in grid) + "\n"

    def with_coin_values(self, values: dict[str, float]) -> "GridConfig":
        coins = tuple(replace(c, value=values.get(c.kind, c.value)) for c in self.coins)
        return replace(self, coins=coins)


class GridGame(TurnGame):
    """Two players alternate turns; player ``(t + first) % 2`` acts at turn t."""

    def __init__(self, config: GridConfig):
        self.config = config
        self.teams = ((0, 1),)
        self._coin_at = {(c.x, c.y): k for k, c in enumerate(config.coins)}
        # flat tables for fast rollouts: cell id = y * width + x
        w, h = config.width, config.height
        self._cells = [(x, y) for y in range(h) for x in range(w)]
        self._nbr, self._legal = [], []
        for x, y in self._cells:
            row, legal = [], []
            for a in config.actions:
                dx, dy = MOVES[a]
                if self._open(x + dx, y + dy):
                    row.append((y + dy) * w + x + dx)
                    legal.append(a)
                elif not config.prune_blocked:
                    row.append(y * w + x)
                    legal.append(a)
            self._nbr.append(row)
            self._legal.append(tuple(legal))
        self._fire = [config.fire if config.tiles[y][x] == "F" else 0.0 for x, y in self._cells]
        self._coin_cell = [self._coin_at.get(c, -1) for c in self._cells]

    def initial_state(self) -> GridState:
        return GridState(0, self.config.starts, (1 << len(self.config.coins)) - 1)

    def actor(self, state: GridState) -> int:
        return (state.t + self.config.first) % 2

    def avatar_of(self, player: int) -> int:
        return 0 if self.config.shared_avatar else player

    def legal_actions(self, state: GridState):
        if self.is_terminal(state):
            return ()
        if not self.config.prune_blocked:
            return self.config.actions
        x, y = state.pos[self.avatar_of(self.actor(state))]
        return self._legal[y * self.config.width + x]

    def is_terminal(self, state: GridState) -> bool:
        return state.t >= self.config.horizon

    def _open(self, x, y) -> bool:
        cfg = self.config
        return 0 <= x < cfg.width and 0 <= y < cfg.height and cfg.tiles[y][x] != "#"

    def step(self, state: GridState, action) -> StepResult:
        if self.is_terminal(state):
            raise ValueError("step on a terminal state")
        if self.config.prune_blocked and action not in self.legal_actions(state):
            raise ValueError(f"illegal move {action!r}")
        player = self.actor(state)
        av = self.avatar_of(player)
        dx, dy = MOVES[action]
        x, y = state.pos[av]
        nx, ny = x + dx, y + dy
        if not self._open(nx, ny) or any(p == (nx, ny) for k, p in enumerate(state.pos) if k != av):
            nx, ny = x, y
        pos = state.pos[:av] + ((nx, ny),) + state.pos[av + 1:]
        reward, coins = 0.0, state.coins
        if self.config.tiles[ny][nx] == "F":
            reward = self.config.fire
        k = self._coin_at.get((nx, ny))
        if k is not None and coins >> k & 1:
            coin = self.config.coins[k]
            coins &= ~(1 << k)
            if coin.owner is None or coin.owner == av:
                reward += coin.value
        nxt = GridState(state.t + 1, pos, coins)
        return StepResult(nxt, (reward,), None if self.is_terminal(nxt) else self.actor(nxt))


    def rollout_returns(self, state: GridState, length: int, owner: int, gamma: float,
                        uniforms) -> list[float]:
        """Discounted returns of uniformly random playouts, one per row of ``uniforms``.

        Same dynamics as ``step``, on flat tables.
        """
        cfg = self.config
        w = cfg.width
        nbr, fire, coin_cell, coins_def = self._nbr, self._fire, self._coin_cell, cfg.coins
        shared = cfg.shared_avatar
        out = []
        for row in uniforms:
            pos = [y * w + x for x, y in state.pos]
            coins, t, g, disc = state.coins, state.t, 0.0, 1.0
            for k in range(min(length, cfg.horizon - t)):
                av = 0 if shared else (t + k + cfg.first) % 2
                cur = pos[av]
                moves = nbr[cur]
                nxt = moves[int(row[k] * len(moves))]
                if nxt in pos and nxt != cur:
                    nxt = cur
                pos[av] = nxt
                r = fire[nxt]
                ci = coin_cell[nxt]
                if ci >= 0 and coins >> ci & 1:
                    coins &= ~(1 << ci)
                    coin = coins_def[ci]
                    if coin.owner is None or coin.owner == av:
                        r += coin.value
                g += disc * r
                disc *= gamma
            out.append(g)
        return out


def optimal_value(game: GridGame, state: Optional[GridState] = None) -> float:
    """Exhaustive best undiscounted team total from ``state`` (memoized DFS)."""
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * game.config.horizon + 100))

    @functools.lru_cache(maxsize=None)
    def best(s: GridState) -> float:
        if game.is_terminal(s):
            return 0.0
        return max(r[0] + best(s2) for s2, r, _ in (game.step(s, a) for a in game.legal_actions(s)))

    try:
        return best(state or game.initial_state())
    finally:
        sys.setrecursionlimit(limit)


def load_layout(name: str) -> GridConfig:
    text = resources.files("capteam.envs.layouts").joinpath(f"{name}.txt").read_text()
    return GridConfig.parse(text, name)


def wall_of_fire() -> GridGame:
    return GridGame(load_layout("wall_of_fire"))


def narrow_tunnel() -> GridGame:
    return GridGame(load_layout("narrow_tunnel"))
