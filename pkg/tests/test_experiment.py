import json

import pytest

from capteam.cli import main
from capteam.experiment import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    canonical_team,
    enumerate_tasks,
    lower_median,
    read_csv,
    records_to_csv,
    run_experiment,
    score,
    summarize,
)

TINY_TOY = {
    "env": "wall-of-fire",
    "caps": [2, 4],
    "search": {"n": 3, "m": 1},
    "games_per_cell": 2,
    "seed": 10,
    "cells": [
        {"name": "N+N", "teamA": [{"strategy": "OBL", "depth": 2}, {"strategy": "OBL", "depth": 2}]},
        {"name": "CA+N", "teamA": [{"strategy": "CA_MA", "depth": 4}, {"strategy": "OBL", "depth": 2}]},
    ],
}

TINY_CHECKERS = {
    "env": "checkers",
    "caps": [2, 4],
    "search": {"n": 2, "m": 1},
    "games_per_cell": 1,
    "cells": [{"name": "x", "teamA": [{"strategy": "SA", "depth": 4}, {"strategy": "OBL", "depth": 2}],
               "teamB": [{"strategy": "OBL", "depth": 2}]}],
}


def test_score_examples():
    assert score(10, 5, 20) == 0.25
    assert score(0, 0, 7) == 0.0
    with pytest.raises(ValueError):
        score(0, 0, 0)
    with pytest.raises(ValueError):
        score(5, 6, 10)


def test_checkers_table_tallies_are_consistent():
    # net wins per capability gap: 5 of 480, 20 of 320, 7 of 160
    assert round(100 * score(5, 0, 480), 1) == 1.0
    assert round(100 * score(7, 0, 160), 1) == 4.4
    assert round(100 * score(32, 0, 960), 1) == 3.3
    # no integer tally over 320 games rounds to the printed 6.4
    assert all(round(100 * k / 320, 1) != 6.4 for k in range(-320, 321))
    assert 100 * score(20, 0, 320) == pytest.approx(6.25)


def test_lower_median():
    assert lower_median([3, 1, 2]) == 2
    assert lower_median([4, 1, 3, 2]) == 2
    with pytest.raises(ValueError):
        lower_median([])


@pytest.mark.parametrize("patch,msg", [
    ({"games_per_cell": 0}, "games_per_cell"),
    ({"env": "chess"}, "unknown env"),
    ({"cells": [{"teamA": [{"strategy": "OBL", "depth": 3}, {"strategy": "OBL", "depth": 2}]}]}, "depth 3"),
    ({"cells": [{"teamA": [{"strategy": "XYZ", "depth": 2}, {"strategy": "OBL", "depth": 2}]}]}, "invalid"),
    ({"cells": [{"teamA": [{"strategy": "OBL", "depth": 2}]}]}, "two players"),
])
def test_config_errors(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict({**TINY_TOY, **patch})


def test_checkers_enumeration_covers_colours_and_orders():
    cfg = ExperimentConfig.from_dict(TINY_CHECKERS)
    tasks = enumerate_tasks(cfg)
    assert len(tasks) == 2 * 2  # colours x orders of team A
    assert [t.seed for t in tasks] == [0, 1, 2, 3]
    assert {(t.a_black, t.team_a[0].label) for t in tasks} == {
        (True, "SA4"), (True, "OBL2"), (False, "SA4"), (False, "OBL2")}


def test_canonical_team():
    assert canonical_team("OBL2>CA_MA4@B") == canonical_team("CA_MA4>OBL2@W") == "CA_MA4+OBL2"


def test_toy_run_is_deterministic_and_summary_recomputes(tmp_path):
    cfg = ExperimentConfig.from_dict(TINY_TOY)
    recs, summary = run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    first = (tmp_path / "a" / "matches.csv").read_bytes()
    assert first == (tmp_path / "b" / "matches.csv").read_bytes()
    rows = read_csv(first.decode())
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 4
    assert [int(r["seed"]) for r in rows] == [10, 11, 12, 13]
    assert summarize(rows) == summary == json.loads((tmp_path / "a" / "summary.json").read_text())
    nn = next(c for c in summary["cells"] if c["team"] == "OBL2>OBL2")
    assert nn["median_reward"] <= 0
    assert recs[2].dev_expert is not None and recs[2].dev_expert >= 0


def test_parallel_matches_serial(tmp_path):
    cfg = ExperimentConfig.from_dict({**TINY_TOY, "games_per_cell": 1})
    serial, _ = run_experiment(cfg, None, workers=1)
    parallel, _ = run_experiment(cfg, None, workers=2)
    assert records_to_csv(serial) == records_to_csv(parallel)


def test_checkers_tallies_are_legal(tmp_path):
    _, summary = run_experiment(ExperimentConfig.from_dict(TINY_CHECKERS), tmp_path)
    tot = summary["total"]
    assert tot["wins"] + tot["losses"] + tot["draws"] == tot["runs"] == 4
    assert -1 <= tot["score"] <= 1


def test_cli_run_report_and_errors(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**TINY_TOY, "cells": TINY_TOY["cells"][:1]}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    capsys.readouterr()
    assert main(["report", str(tmp_path / "out" / "matches.csv")]) == 0
    assert json.loads(capsys.readouterr().out) == json.loads((tmp_path / "out" / "summary.json").read_text())
    cfg.write_text(json.dumps({**TINY_TOY, "games_per_cell": 0}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "bad")]) == 2
    assert main(["run", "--out", str(tmp_path / "bad")]) == 2


def test_cli_verify_exit_codes(capsys):
    assert main(["verify", "--theorem", "T1", "--trials", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["reports"][0]["theorem"] == "T1"


def test_cli_tree_dump(tmp_path):
    out = tmp_path / "tree.tsv"
    assert main(["search", "--depth", "2", "--n", "3", "--dump-tree", str(out)]) == 0
    assert out.read_text().count("\n") >= 2
