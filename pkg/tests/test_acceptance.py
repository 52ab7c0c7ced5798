"""Acceptance checks, one test per criterion.

Each test prints a single ``CRITERION k: PASS|FAIL ...`` line (visible even
under output capture) and then asserts.  The grid-world tables and the
checkers smoke run take tens of minutes on one CPU.
"""

import json
import time

import numpy as np
import pytest

from capteam.capability import Belief, BeliefBank, CapabilitySet, Mode
from capteam.cli import main
from capteam.envs.checkers import CheckersGame, check_invariants, initial_board, naive_moves, perft
from capteam.envs.grid import GridGame, narrow_tunnel, optimal_value, wall_of_fire
from capteam.experiment import PRESETS, ExperimentConfig, run_experiment
from capteam.oracle import verify_theorem
from capteam.search import SearchParams, ca_mcts, oblivious_search


@pytest.fixture
def report(capsys):
    def emit(k: int, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_1_exact_consistency(report):
    rep, secs = _timed(lambda: verify_theorem("T1", trials=50, seed=0))
    ok = rep.passed and secs <= 120
    assert report(1, ok, f"type structure kept: checks={rep.checks} violations={len(rep.violations)} "
                         f"time={secs:.1f}s (limit 120s)"), rep.violations[:5]


def test_criterion_2_exact_correctness(report):
    rep, secs = _timed(lambda: verify_theorem("T2", trials=50, seed=0))
    ok = rep.passed and secs <= 120 and rep.checks > 0
    assert report(2, ok, f"conditional vs brute force within 1e-9: checks={rep.checks} "
                         f"skipped_zero_mass={rep.skipped} violations={len(rep.violations)} "
                         f"time={secs:.1f}s (limit 120s)"), rep.violations[:5]


def test_criterion_3_adversarial_noise(report):
    rep, _ = _timed(lambda: verify_theorem("T3", trials=100, seed=0, eps=0.05, steps=200, slack=1.05))
    bound = 3 * 0.05 * 1.05
    ok = rep.passed and rep.max_deviation <= bound
    assert report(3, ok, f"max |dB|/t={rep.max_deviation:.4f} bound={bound:.4f} over 100 seeds, "
                         f"violations={len(rep.violations)}"), rep.violations[:5]


def test_criterion_4_stochastic_noise(report):
    rep, secs = _timed(lambda: verify_theorem("T4", trials=500, seed=0, eps=0.05, delta=0.1, steps=200))
    ok = rep.passed and rep.pass_fraction >= 0.9 and secs <= 600
    assert report(4, ok, f"bound held in {rep.pass_fraction:.3f} of 500 trials (need 0.90), "
                         f"bound={rep.bound:.4f} time={secs:.1f}s (limit 600s)")


def _medians(summary):
    return {c["team"]: c["median_reward"] for c in summary["cells"]}


def test_criterion_5_wall_of_fire(report):
    optimum = optimal_value(wall_of_fire())
    cfg = ExperimentConfig.from_dict(PRESETS["wall-of-fire"])
    assert cfg.games_per_cell == 5
    _, summary = run_experiment(cfg)
    med = _medians(summary)
    ee, nn = med["OBL20>OBL20"], med["OBL2>OBL2"]
    en, can = med["OBL20>OBL2"], med["CA_MA20>OBL2"]
    ok = optimum == 1490 and ee >= 1400 and nn == 0 and can >= -6 and can > en and en <= -10
    assert report(5, ok, f"optimum={optimum:g} (need 1490) E+E={ee:g} (>=1400) N+N={nn:g} (=0) "
                         f"CA-E+N={can:g} (>=-6, >E+N) E+N={en:g} (<=-10)")


def test_criterion_6_narrow_tunnel(report):
    game = narrow_tunnel()
    red = optimal_value(game)
    blue = optimal_value(GridGame(game.config.with_coin_values({"C": 0.0})))
    cfg = ExperimentConfig.from_dict(PRESETS["narrow-tunnel"])
    assert cfg.games_per_cell == 5
    _, summary = run_experiment(cfg)
    med = _medians(summary)
    ee, nn = med["OBL30>OBL30"], med["OBL10>OBL10"]
    ne, nca = med["OBL10>OBL30"], med["OBL10>CA_MA30"]
    ok = red == 90 and blue == 4 and ee > nca >= nn > ne and ne <= 1
    assert report(6, ok, f"optima={red:g}/{blue:g} (need 90/4) E+E={ee:g} N+CA-E={nca:g} N+N={nn:g} "
                         f"N+E={ne:g} (need E+E > N+CA-E >= N+N > N+E, N+E <= 1)")


def test_criterion_7_checkers_engine(report):
    t0 = time.perf_counter()
    counts = [perft(initial_board(), d) for d in range(1, 7)]
    naive = [perft(initial_board(), d, naive_moves) for d in range(1, 7)]
    game = CheckersGame(2, 2)
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(10_000):
        s = game.initial_state()
        try:
            while not game.is_terminal(s):
                check_invariants(s)
                moves = game.legal_actions(s)
                s = game.step(s, moves[int(rng.integers(len(moves)))]).state
            check_invariants(s)
        except AssertionError:
            bad += 1
    secs = time.perf_counter() - t0
    ok = counts == naive and counts[0] == 7 and bad == 0 and secs <= 180
    assert report(7, ok, f"perft 1-6={counts} naive match={counts == naive} "
                         f"invariant failures={bad}/10000 time={secs:.1f}s (limit 180s)")


def test_criterion_8_search_accounting(report):
    g = wall_of_fire()
    totals, ratios = {}, {}
    for d in (2, 4, 6, 8):
        tree = oblivious_search(g, g.initial_state(), 0, SearchParams(n=200, d=d), np.random.default_rng(d))
        totals[d] = tree.counters["iterations"]
        caps = CapabilitySet((1, d))
        bank = BeliefBank(d, (Belief.delta(caps, d, Mode.TEMPERED), Belief.delta(caps, 1, Mode.TEMPERED)))
        ca = ca_mcts(g, g.initial_state(), 0, SearchParams(n=20, d=d), bank, np.random.default_rng(d))
        ratios[d] = ca.counters["simulate_recursive"] / (d * ca.counters["simulate_base"])
    c = 1.0
    ok = all(totals[d] == 100 * d * (d + 1) for d in totals) and all(r <= c for r in ratios.values())
    assert report(8, ok, f"iterations={totals} (want 100*d*(d+1)) "
                         f"recursive/(d*base)={ {d: round(r, 3) for d, r in ratios.items()} } (c={c})")


def test_criterion_9_checkers_smoke_and_oracle_equivalence(report, tmp_path):
    cfg = ExperimentConfig.from_dict(PRESETS["checkers-smoke"])
    (_, summary), secs = _timed(lambda: run_experiment(cfg, tmp_path))
    tot = summary["total"]
    legal = tot["wins"] + tot["losses"] + tot["draws"] == tot["runs"] > 0 and -1 <= tot["score"] <= 1

    from capteam.agents import Agent, AgentSpec, Strategy

    caps = CapabilitySet((2, 4))
    params = SearchParams(n=10, m=2)
    game = wall_of_fire()
    same = True
    for seed in range(3):
        seqs = []
        for first in (AgentSpec(Strategy.ORA, 4, params), AgentSpec(Strategy.CA_MA, 4, params, prior="truth")):
            agents = [Agent(first, 0, game, caps, seed, {0: 4, 1: 2}),
                      Agent(AgentSpec(Strategy.OBL, 2, params), 1, game, caps, seed)]
            s, seq = game.initial_state(), []
            while not game.is_terminal(s):
                actor = game.actor(s)
                a = agents[actor].act(s)
                for j, ag in enumerate(agents):
                    if j != actor:
                        ag.observe(s, actor, a)
                seq.append(a)
                s = game.step(s, a).state
            seqs.append(seq)
        same &= seqs[0] == seqs[1]
    ok = legal and secs < 900 and same
    assert report(9, ok, f"smoke runs={tot['runs']} W/L/D={tot['wins']}/{tot['losses']}/{tot['draws']} "
                         f"score={tot['score']:.3f} time={secs:.0f}s (limit 900s); "
                         f"ORA == CA with delta beliefs over 3 seeds: {same}")


def test_criterion_10_determinism(report, tmp_path, capsys):
    raw = json.loads(json.dumps(PRESETS["wall-of-fire"]))
    raw.update(games_per_cell=2, search={"n": 5, "m": 2})
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(raw))
    outs = []
    for k in range(2):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / f"r{k}"), "--seed", "7"]) == 0
        outs.append((tmp_path / f"r{k}" / "matches.csv").read_bytes())
    capsys.readouterr()
    ok = outs[0] == outs[1] and outs[0].count(b"\n") == 9
    assert report(10, ok, f"two runs, same config and seed: byte-identical CSV={outs[0] == outs[1]} "
                          f"({len(outs[0])} bytes)")
