"""Seeded tournaments: match runner, metrics, presets and result tables."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from capteam.agents import INFERRING, Agent, AgentSpec, Strategy, deviation
from capteam.capability import CapabilitySet
from capteam.envs.checkers import CheckersGame
from capteam.envs.grid import narrow_tunnel, wall_of_fire
from capteam.search import SearchParams
from capteam.tempered import TemperConfig

CSV_COLUMNS = ("env", "teamA", "teamB", "seed", "rewardA", "rewardB", "winner", "moves",
               "dev_expert", "dev_novice")
TOY_ENVS = {"wall-of-fire": wall_of_fire, "narrow-tunnel": narrow_tunnel}
ENVS = tuple(TOY_ENVS) + ("checkers",)


class ConfigError(ValueError):
    pass


def score(wins: int, losses: int, games: int) -> float:
    """(wins - losses) / games."""
    if games <= 0:
        raise ValueError("score needs at least one game")
    if wins < 0 or losses < 0 or wins + losses > games:
        raise ValueError("inconsistent tallies")
    return (wins - losses) / games


def lower_median(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("median of an empty list")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class Cell:
    name: str
    team_a: tuple[AgentSpec, ...]
    team_b: tuple[AgentSpec, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    caps: CapabilitySet
    cells: tuple[Cell, ...]
    games_per_cell: int = 1
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        try:
            env = d["env"]
            if env not in ENVS:
                raise ConfigError(f"unknown env {env!r}; choose from {ENVS}")
            caps = CapabilitySet(tuple(d["caps"]))
            search = SearchParams(**d.get("search", {}))
            temper = TemperConfig.from_dict(d.get("temper", {}))
            cells = []
            for c in d["cells"]:
                team_a = tuple(AgentSpec.from_dict(a, search, temper) for a in c["teamA"])
                team_b = tuple(AgentSpec.from_dict(a, search, temper) for a in c.get("teamB", []))
                cells.append(Cell(c.get("name", "+".join(s.label for s in team_a)), team_a, team_b))
            cfg = cls(env, caps, tuple(cells), int(d.get("games_per_cell", 1)),
                      int(d.get("seed", 0)), int(d.get("workers", 1)))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.games_per_cell < 1:
            raise ConfigError("games_per_cell must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.cells:
            raise ConfigError("no cells configured")
        for cell in self.cells:
            for spec in cell.team_a + cell.team_b:
                if spec.depth not in self.caps:
                    raise ConfigError(f"{cell.name}: depth {spec.depth} not in {self.caps.labels}")
            if self.env in TOY_ENVS:
                if len(cell.team_a) != 2 or cell.team_b:
                    raise ConfigError(f"{cell.name}: toy games take one team of two players")
            else:
                if not 1 <= len(cell.team_a) <= 2 or not 1 <= len(cell.team_b) <= 2:
                    raise ConfigError(f"{cell.name}: checkers teams have one or two players")


@dataclass
class MatchRecord:
    env: str
    cell: str
    team_a: str
    team_b: str
    seed: int
    reward_a: float
    reward_b: Optional[float]
    winner: str
    moves: int
    dev_expert: Optional[float] = None
    dev_novice: Optional[float] = None
    posteriors: dict = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        return [self.env, self.team_a, self.team_b, str(self.seed), _fmt(self.reward_a),
                _fmt(self.reward_b), self.winner, str(self.moves), _fmt(self.dev_expert),
                _fmt(self.dev_novice)]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


@dataclass(frozen=True)
class MatchTask:
    env: str
    caps: CapabilitySet
    cell: str
    team_a: tuple[AgentSpec, ...]
    team_b: tuple[AgentSpec, ...]
    a_black: bool
    seed: int


def _team_label(specs: Sequence[AgentSpec]) -> str:
    return ">".join(s.label for s in specs)


def canonical_team(label: str) -> str:
    """Team label with order and colour dropped, for aggregation."""
    members = label.split("@")[0].split(">")
    return "+".join(sorted(members)) if label else ""


def enumerate_tasks(cfg: ExperimentConfig) -> list[MatchTask]:
    """Every colour/order assignment times ``games_per_cell`` seeds; seeds are base + k."""
    tasks = []
    for cell in cfg.cells:
        if cfg.env in TOY_ENVS:
            layouts = [(cell.team_a, (), True)]
        else:
            layouts = [(a, b, black)
                       for black in (True, False)
                       for a in _orders(cell.team_a)
                       for b in _orders(cell.team_b)]
        for team_a, team_b, black in layouts:
            for _ in range(cfg.games_per_cell):
                tasks.append(MatchTask(cfg.env, cfg.caps, cell.name, team_a, team_b, black,
                                       cfg.seed + len(tasks)))
    return tasks


def _orders(team: tuple[AgentSpec, ...]) -> list[tuple[AgentSpec, ...]]:
    seen, out = set(), []
    for perm in itertools.permutations(team):
        key = tuple(s.label for s in perm)
        if key not in seen:
            seen.add(key)
            out.append(perm)
    return out


def play_match(task: MatchTask) -> MatchRecord:
    """Run one game to termination."""
    if task.env in TOY_ENVS:
        game = TOY_ENVS[task.env]()
        specs = list(task.team_a)
        team_players = [(0, 1)]
    else:
        black, white = (task.team_a, task.team_b) if task.a_black else (task.team_b, task.team_a)
        game = CheckersGame.for_teams(len(black), len(white))
        specs = list(black) + list(white)
        team_players = [game.teams[0], game.teams[1]] if task.a_black else [game.teams[1], game.teams[0]]
    truth = {p: s.depth for p, s in enumerate(specs)}
    agents = [Agent(s, p, game, task.caps, task.seed, truth) for p, s in enumerate(specs)]
    state = game.initial_state()
    totals = [0.0] * game.n_teams
    moves = 0
    while not game.is_terminal(state):
        actor = game.actor(state)
        action = agents[actor].act(state)
        for j, ag in enumerate(agents):
            if j != actor:
                ag.observe(state, actor, action)
        res = game.step(state, action)
        for k, r in enumerate(res.rewards):
            totals[k] += r
        state = res.state
        moves += 1

    a_players = team_players[0]
    dev_e, dev_n, posts = _deviations(agents, a_players, task.caps)
    if task.env in TOY_ENVS:
        return MatchRecord(task.env, task.cell, _team_label(task.team_a), "", task.seed,
                           totals[0], None, "Draw", moves, dev_e, dev_n, posts)
    win = game.winner(state, totals)
    a_team = 0 if task.a_black else 1
    winner = "Draw" if win is None else ("A" if win == a_team else "B")
    colour = "B" if task.a_black else "W"
    other = "W" if task.a_black else "B"
    return MatchRecord(task.env, task.cell, f"{_team_label(task.team_a)}@{colour}",
                       f"{_team_label(task.team_b)}@{other}", task.seed, totals[a_team],
                       totals[1 - a_team], winner, moves, dev_e, dev_n, posts)


def _deviations(agents, players, caps: CapabilitySet):
    """Deviation of the final posterior each inferring team-A member holds about its teammate.

    The target is the teammate's depth, or the holder's own depth when the
    teammate is deeper (best effort).
    """
    dev_e = dev_n = None
    posts = {}
    if len(players) != 2:
        return dev_e, dev_n, posts
    p, q = players
    expert, novice = (p, q) if agents[p].spec.depth >= agents[q].spec.depth else (q, p)
    for holder, mate in ((expert, novice), (novice, expert)):
        ag = agents[holder]
        if ag.spec.strategy not in INFERRING:
            continue
        post = ag.posterior(mate)
        posts[holder] = [float(x) for x in post]
        d_star = min(agents[mate].spec.depth, ag.spec.depth)
        dev = deviation(post, caps.labels, d_star)
        if holder == expert:
            dev_e = dev
        else:
            dev_n = dev
    return dev_e, dev_n, posts


def run_tasks(tasks: Sequence[MatchTask], workers: int = 1) -> list[MatchRecord]:
    """Results come back in task order whatever the completion order."""
    if workers <= 1:
        return [play_match(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(play_match, tasks))


def records_to_csv(records: Sequence[MatchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ConfigError("unexpected CSV header")
    return rows


def _num(x: str) -> Optional[float]:
    return None if x == "" else float(x)


def summarize(rows: Sequence[Mapping[str, str]]) -> dict:
    """Aggregate per-match CSV rows into the result tables.

    Toy environments: lower median of rewardA per ordered team.  Checkers:
    tallies and score per unordered pairing, per capability gap of team A,
    and overall; mean deviations where recorded.
    """
    if not rows:
        return {"cells": []}
    env = rows[0]["env"]
    if env in TOY_ENVS:
        groups: dict[str, list[float]] = {}
        for r in rows:
            groups.setdefault(r["teamA"], []).append(float(r["rewardA"]))
        return {"env": env, "cells": [
            {"team": k, "runs": len(v), "median_reward": lower_median(v)} for k, v in groups.items()]}

    def tally(rs):
        w = sum(r["winner"] == "A" for r in rs)
        l_ = sum(r["winner"] == "B" for r in rs)
        out = {"runs": len(rs), "wins": w, "losses": l_, "draws": len(rs) - w - l_,
               "score": score(w, l_, len(rs))}
        for col in ("dev_expert", "dev_novice"):
            vals = [_num(r[col]) for r in rs if r[col] != ""]
            out[col] = sum(vals) / len(vals) if vals else None
        return out

    cells: dict[tuple, list] = {}
    gaps: dict[int, list] = {}
    for r in rows:
        key = (canonical_team(r["teamA"]), canonical_team(r["teamB"]))
        cells.setdefault(key, []).append(r)
        depths = [int("".join(ch for ch in m if ch.isdigit())) for m in key[0].split("+")]
        gaps.setdefault(max(depths) - min(depths), []).append(r)
    return {
        "env": env,
        "cells": [{"teamA": a, "teamB": b, **tally(rs)} for (a, b), rs in cells.items()],
        "by_gap": [{"gap": g, **tally(rs)} for g, rs in sorted(gaps.items())],
        "total": tally(list(rows)),
    }


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None,
                   workers: Optional[int] = None) -> tuple[list[MatchRecord], dict]:
    tasks = enumerate_tasks(cfg)
    records = run_tasks(tasks, workers or cfg.workers)
    text = records_to_csv(records)
    summary = summarize(read_csv(text))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "matches.csv").write_text(text)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        posts = [{"seed": r.seed, "cell": r.cell, "posteriors": r.posteriors} for r in records]
        (out_dir / "posteriors.json").write_text(json.dumps(posts, indent=1, sort_keys=True) + "\n")
    return records, summary


# -- presets ---------------------------------------------------------------------

def _agent(strategy: str, depth: int) -> dict:
    return {"strategy": strategy, "depth": depth}


PRESETS: dict[str, dict] = {
    "wall-of-fire": {
        "env": "wall-of-fire",
        "caps": [2, 20],
        "search": {"n": 100, "m": 5},
        "games_per_cell": 5,
        "cells": [
            {"name": "Novice+Novice", "teamA": [_agent("OBL", 2), _agent("OBL", 2)]},
            {"name": "Expert+Expert", "teamA": [_agent("OBL", 20), _agent("OBL", 20)]},
            {"name": "Expert+Novice", "teamA": [_agent("OBL", 20), _agent("OBL", 2)]},
            {"name": "CA-Expert+Novice", "teamA": [_agent("CA_MA", 20), _agent("OBL", 2)]},
        ],
    },
    "narrow-tunnel": {
        "env": "narrow-tunnel",
        "caps": [10, 30],
        "search": {"n": 100, "m": 5},
        "games_per_cell": 5,
        "cells": [
            {"name": "Novice+Novice", "teamA": [_agent("OBL", 10), _agent("OBL", 10)]},
            {"name": "Expert+Expert", "teamA": [_agent("OBL", 30), _agent("OBL", 30)]},
            {"name": "Novice+Expert", "teamA": [_agent("OBL", 10), _agent("OBL", 30)]},
            {"name": "Novice+CA-Expert", "teamA": [_agent("OBL", 10), _agent("CA_MA", 30)]},
        ],
    },
    # full tournaments; long-running, not part of the test suite
    "checkers-ca-vs-obl": {
        "env": "checkers",
        "caps": [2, 4, 6, 8],
        "games_per_cell": 20,
        "cells": [
            {"name": f"{n}-{e}", "teamA": [_agent("CA_MA", e), _agent("OBL", n)],
             "teamB": [_agent("OBL", e), _agent("OBL", n)]}
            for n, e in itertools.combinations((2, 4, 6, 8), 2)
        ],
    },
    "checkers-ma-vs-sa": {
        "env": "checkers",
        "caps": [2, 4, 6, 8],
        "games_per_cell": 50,
        "cells": [
            {"name": f"{strat}-{n}-{e}-vs-{o}", "teamA": [_agent(strat, e), _agent(strat, n)],
             "teamB": [_agent("OBL", o)]}
            for n, e in itertools.combinations((2, 4, 6, 8), 2)
            for o in (n, e)
            for strat in ("CA_MA", "SA")
        ],
    },
    "checkers-smoke": {
        "env": "checkers",
        "caps": [2, 4],
        "search": {"n": 10, "m": 2},
        "games_per_cell": 2,
        "cells": [
            {"name": "CA-vs-OBL", "teamA": [_agent("CA_MA", 4), _agent("OBL", 2)],
             "teamB": [_agent("OBL", 4), _agent("OBL", 2)]},
        ],
    },
}
