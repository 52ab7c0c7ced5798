"""Cooperative English draughts.

Squares use the standard 1..32 numbering (internally 0..31): square 1 is the
second cell of the top row, numbering runs left to right, top to bottom.
Black starts on 1-12, moves first and advances towards 32.  Captures are
forced and a multi-jump is one action; an action is the tuple of squares the
piece visits.  A man reaching the far row is crowned and its move ends.

Team members alternate as their team's mover.  Rewards go to the moving
team: +1 per captured man, +2 per captured king, +1 for a promotion.  The
game ends when the side to move has no legal move (it loses), after 120 total
moves or after 40 consecutive moves without reward (higher cumulative reward
wins, equal is a draw).

Serialized form (FEN-like, squares 1-based)::

    B:W21,22,K30:B1,2,K5:m0,1:n12:q3:r1,2

side to move, white pieces, black pieces (``K`` marks kings), per-team mover
index, total moves, moves since last reward, cumulative reward per team.
"""

from __future__ import annotations

import functools
from typing import NamedTuple, Optional

from capteam.envs.base import StepResult, TurnGame

BLACK, WHITE = 0, 1
MAX_MOVES = 120
MAX_QUIET = 40
MAN_REWARD, KING_REWARD, PROMOTION_REWARD = 1.0, 2.0, 1.0


def _rc(sq: int) -> tuple[int, int]:
    r = sq // 4
    return r, 2 * (sq % 4) + (1 if r % 2 == 0 else 0)


def _sq(r: int, c: int) -> Optional[int]:
    if not (0 <= r < 8 and 0 <= c < 8) or (r + c) % 2 == 0:
        return None
    return r * 4 + c // 2


# direction order: up-left, up-right, down-left, down-right
DIRS = ((-1, -1), (-1, 1), (1, -1), (1, 1))
STEP = [[_sq(_rc(s)[0] + dr, _rc(s)[1] + dc) for dr, dc in DIRS] for s in range(32)]
JUMP = [[(_sq(_rc(s)[0] + dr, _rc(s)[1] + dc), _sq(_rc(s)[0] + 2 * dr, _rc(s)[1] + 2 * dc))
         for dr, dc in DIRS] for s in range(32)]
MAN_DIRS = {BLACK: (2, 3), WHITE: (0, 1)}
KING_DIRS = (0, 1, 2, 3)
CROWN_ROW = {BLACK: 7, WHITE: 0}
FULL = (1 << 32) - 1


class CheckersState(NamedTuple):
    black: int
    white: int
    kings: int
    side: int
    mover: tuple[int, int]
    total: int
    quiet: int
    cum: tuple[float, float]

    def pieces(self, side: int) -> int:
        return self.black if side == BLACK else self.white


def initial_board() -> CheckersState:
    black = (1 << 12) - 1
    white = ((1 << 12) - 1) << 20
    return CheckersState(black, white, 0, BLACK, (0, 0), 0, 0, (0.0, 0.0))


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def _jumps_from(sq: int, king: bool, side: int, own: int, opp: int, empty: int, path, out):
    dirs = KING_DIRS if king else MAN_DIRS[side]
    found = False
    for d in dirs:
        over, land = JUMP[sq][d]
        if land is None or not (opp >> over & 1) or not (empty >> land & 1):
            continue
        found = True
        new_path = path + (land,)
        crowned = not king and _rc(land)[0] == CROWN_ROW[side]
        if crowned:
            out.append(new_path)
            continue
        # captured piece leaves at once; landing squares never coincide with captured ones
        _jumps_from(land, king, side, own, opp & ~(1 << over),
                    (empty | (1 << sq) | (1 << over)) & ~(1 << land), new_path, out)
    if not found and len(path) > 1:
        out.append(path)


@functools.lru_cache(maxsize=1 << 16)
def legal_moves(state: CheckersState) -> tuple[tuple[int, ...], ...]:
    """Fast generator: captures if any exist, else simple moves (0-based squares)."""
    side = state.side
    own = state.pieces(side)
    opp = state.pieces(1 - side)
    empty = FULL & ~(own | opp)
    jumps: list[tuple[int, ...]] = []
    for sq in _bits(own):
        _jumps_from(sq, bool(state.kings >> sq & 1), side, own, opp, empty, (sq,), jumps)
    if jumps:
        return tuple(jumps)
    moves = []
    for sq in _bits(own):
        dirs = KING_DIRS if state.kings >> sq & 1 else MAN_DIRS[side]
        for d in dirs:
            to = STEP[sq][d]
            if to is not None and empty >> to & 1:
                moves.append((sq, to))
    return tuple(moves)


def apply_move(state: CheckersState, move: tuple[int, ...], team_sizes=(1, 1)) -> tuple[CheckersState, float]:
    """Play ``move``; returns the new state and the mover team's reward."""
    side = state.side
    own, opp, kings = state.pieces(side), state.pieces(1 - side), state.kings
    src, dst = move[0], move[-1]
    is_king = bool(kings >> src & 1)
    reward = 0.0
    own &= ~(1 << src)
    kings &= ~(1 << src)
    if abs(_rc(move[1])[0] - _rc(src)[0]) == 2:
        for a, b in zip(move, move[1:]):
            (ra, ca), (rb, cb) = _rc(a), _rc(b)
            over = _sq((ra + rb) // 2, (ca + cb) // 2)
            reward += KING_REWARD if kings >> over & 1 else MAN_REWARD
            opp &= ~(1 << over)
            kings &= ~(1 << over)
    own |= 1 << dst
    if is_king:
        kings |= 1 << dst
    elif _rc(dst)[0] == CROWN_ROW[side]:
        kings |= 1 << dst
        reward += PROMOTION_REWARD
    black, white = (own, opp) if side == BLACK else (opp, own)
    mover = list(state.mover)
    mover[side] = (mover[side] + 1) % team_sizes[side]
    cum = list(state.cum)
    cum[side] += reward
    nxt = CheckersState(black, white, kings, 1 - side, tuple(mover), state.total + 1,
                        0 if reward > 0 else state.quiet + 1, tuple(cum))
    return nxt, reward


def perft(state: CheckersState, depth: int, generator=legal_moves) -> int:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        return 1
    moves = generator(state)
    if depth == 1:
        return len(moves)
    return sum(perft(apply_move(state, m)[0], depth - 1, generator) for m in moves)


def naive_moves(state: CheckersState) -> list[tuple[int, ...]]:
    """Independent slow generator on an explicit 8x8 array, for cross-checking."""
    board = [[None] * 8 for _ in range(8)]
    for sq in range(32):
        r, c = _rc(sq)
        if state.black >> sq & 1:
            board[r][c] = ("b", bool(state.kings >> sq & 1))
        elif state.white >> sq & 1:
            board[r][c] = ("w", bool(state.kings >> sq & 1))
    me = "b" if state.side == BLACK else "w"
    forward = 1 if me == "b" else -1
    last_row = 7 if me == "b" else 0

    def dirs_for(king):
        return [(-1, -1), (-1, 1), (1, -1), (1, 1)] if king else [(forward, -1), (forward, 1)]

    def chains(r, c, king, grid, path):
        results = []
        for dr, dc in dirs_for(king):
            mr, mc, lr, lc = r + dr, c + dc, r + 2 * dr, c + 2 * dc
            if not (0 <= lr < 8 and 0 <= lc < 8):
                continue
            mid = grid[mr][mc]
            if mid is None or mid[0] == me or grid[lr][lc] is not None:
                continue
            g2 = [row[:] for row in grid]
            g2[r][c] = None
            g2[mr][mc] = None
            g2[lr][lc] = (me, king)
            p2 = path + [(lr, lc)]
            if not king and lr == last_row:
                results.append(p2)
            else:
                more = chains(lr, lc, king, g2, p2)
                results.extend(more if more else [p2])
        return results

    caps, simple = [], []
    for r in range(8):
        for c in range(8):
            piece = board[r][c]
            if piece is None or piece[0] != me:
                continue
            caps.extend(chains(r, c, piece[1], board, [(r, c)]))
            for dr, dc in dirs_for(piece[1]):
                nr, nc = r + dr, c + dc
                if 0 <= nr < 8 and 0 <= nc < 8 and board[nr][nc] is None:
                    simple.append([(r, c), (nr, nc)])
    chosen = caps if caps else simple
    return [tuple(_sq(r, c) for r, c in path) for path in chosen]


class CheckersGame(TurnGame):
    """Black is team 0, white team 1; players are numbered black first."""

    def __init__(self, black_players: int = 2, white_players: int = 2):
        if not (1 <= black_players <= 2 and 1 <= white_players <= 2):
            raise ValueError("teams have one or two players")
        self.teams = (tuple(range(black_players)),
                      tuple(range(black_players, black_players + white_players)))
        self.sizes = (black_players, white_players)

    @classmethod
    def for_teams(cls, black_players: int, white_players: int) -> "CheckersGame":
        return cls(black_players, white_players)

    def initial_state(self) -> CheckersState:
        return initial_board()

    def actor(self, state: CheckersState) -> int:
        return self.teams[state.side][state.mover[state.side]]

    def legal_actions(self, state: CheckersState):
        if self._limit_reached(state):
            return ()
        return legal_moves(state)

    def _limit_reached(self, state: CheckersState) -> bool:
        return state.total >= MAX_MOVES or state.quiet >= MAX_QUIET

    def is_terminal(self, state: CheckersState) -> bool:
        return self._limit_reached(state) or not legal_moves(state)

    def step(self, state: CheckersState, action) -> StepResult:
        nxt, reward = apply_move(state, tuple(action), self.sizes)
        rewards = (reward, 0.0) if state.side == BLACK else (0.0, reward)
        return StepResult(nxt, rewards, None if self.is_terminal(nxt) else self.actor(nxt))

    def planning_view(self, state: CheckersState) -> CheckersState:
        """Planners do not know the move limits: counters are zeroed."""
        return state._replace(total=0, quiet=0)

    def winner(self, state: CheckersState, totals=None) -> Optional[int]:
        if not self._limit_reached(state):
            return 1 - state.side  # side to move is stuck
        b, w = state.cum
        if b == w:
            return None
        return BLACK if b > w else WHITE


def check_invariants(state: CheckersState) -> None:
    """Raise AssertionError when a board invariant fails."""
    assert state.black & state.white == 0, "squares occupied twice"
    assert state.kings & ~(state.black | state.white) == 0, "king flag on an empty square"
    assert bin(state.black).count("1") <= 12 and bin(state.white).count("1") <= 12
    assert state.black >> 32 == 0 and state.white >> 32 == 0
    men_b = state.black & ~state.kings
    men_w = state.white & ~state.kings
    assert men_b & (0xF << 28) == 0, "black man on its crowning row"
    assert men_w & 0xF == 0, "white man on its crowning row"
    assert state.total >= 0 and state.quiet >= 0


def to_fen(state: CheckersState) -> str:
    def side_str(mask):
        return ",".join(("K" if state.kings >> s & 1 else "") + str(s + 1) for s in _bits(mask))

    return (f"{'B' if state.side == BLACK else 'W'}:W{side_str(state.white)}:B{side_str(state.black)}"
            f":m{state.mover[0]},{state.mover[1]}:n{state.total}:q{state.quiet}"
            f":r{state.cum[0]!r},{state.cum[1]!r}")


def from_fen(text: str) -> CheckersState:
    parts = text.strip().split(":")
    if len(parts) < 3 or parts[0] not in ("B", "W"):
        raise ValueError(f"bad checkers FEN: {text!r}")
    masks = {"W": 0, "B": 0}
    kings = 0
    fields = {}
    for part in parts[1:]:
        tag, body = part[0], part[1:]
        if tag in masks:
            for tok in filter(None, body.split(",")):
                king = tok.startswith("K")
                sq = int(tok[1:] if king else tok) - 1
                if not 0 <= sq < 32:
                    raise ValueError(f"square out of range in {text!r}")
                masks[tag] |= 1 << sq
                if king:
                    kings |= 1 << sq
        else:
            fields[tag] = body
    mover = tuple(int(x) for x in fields.get("m", "0,0").split(","))
    cum = tuple(float(x) for x in fields.get("r", "0.0,0.0").split(","))
    return CheckersState(masks["B"], masks["W"], kings, BLACK if parts[0] == "B" else WHITE,
                         mover, int(fields.get("n", 0)), int(fields.get("q", 0)), cum)
