import csv
import json
import math

import numpy as np
import pytest

from idsbonus import cli
from idsbonus.harness import (
    CSV_HEADER,
    RunConfig,
    format_table,
    rank_conditions,
    run,
    summarize,
    summarize_mode_dir,
)
from idsbonus.plots import line_chart

SMALL = {"hidden": [8], "batches_per_episode": 2, "batch_size": 8}


def small_config(tmp_path, name="run", **kw):
    base = dict(env="chain", modes=["scheduled"], seeds=[0], episodes=1, eval_episodes=2, out=str(tmp_path / name), agent=SMALL)
    base.update(kw)
    return RunConfig(**base)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_smoke_single_episode(tmp_path):
    cfg = small_config(tmp_path)
    summaries = run(cfg)
    rows = read_rows(tmp_path / "run/scheduled/0.csv")
    assert len(rows) == 1 and tuple(rows[0]) == CSV_HEADER
    summary = json.loads((tmp_path / "run/scheduled/summary.json").read_text())
    assert summary["n_eval"] == 2 and summary["n_failed"] == 0
    assert summaries["scheduled"]["eval_mean"] == summary["eval_mean"]
    assert (tmp_path / "run/plots/returns.svg").read_text().startswith("<svg")


def test_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        run(small_config(tmp_path, name, episodes=3, seeds=[0, 1], noise=1e-3))
    for seed in (0, 1):
        for suffix in (".csv", ".eval.csv"):
            a = (tmp_path / f"a/scheduled/{seed}{suffix}").read_bytes()
            b = (tmp_path / f"b/scheduled/{seed}{suffix}").read_bytes()
            assert a == b


def test_different_seeds_differ(tmp_path):
    run(small_config(tmp_path, episodes=2, seeds=[0, 1]))
    a = read_rows(tmp_path / "run/scheduled/0.csv")
    b = read_rows(tmp_path / "run/scheduled/1.csv")
    assert [r["actor_loss"] for r in a] != [r["actor_loss"] for r in b]


def test_zero_gain_matches_fixed_mix(tmp_path):
    agent = {**SMALL, "lam": 0.0}
    run(small_config(tmp_path, modes=["scheduled", "mean"], episodes=3, agent=agent))
    a = read_rows(tmp_path / "run/scheduled/0.csv")
    b = read_rows(tmp_path / "run/mean/0.csv")
    assert [r["return"] for r in a] == [r["return"] for r in b]
    assert [r["critic_loss"] for r in a] == [r["critic_loss"] for r in b]


def test_summary_recomputed_from_csv(tmp_path):
    cfg = small_config(tmp_path, seeds=[0, 1], episodes=2, eval_episodes=3)
    summary = run(cfg)["scheduled"]
    pooled = []
    for seed in (0, 1):
        pooled += [float(r["return"]) for r in read_rows(tmp_path / f"run/scheduled/{seed}.eval.csv")]
    assert summary["eval_mean"] == pytest.approx(np.mean(pooled))
    assert summary["eval_sd"] == pytest.approx(np.std(pooled, ddof=1))
    statuses = {s: {"seed": s, "status": "ok", "message": ""} for s in (0, 1)}
    again = summarize_mode_dir(tmp_path / "run/scheduled", {}, statuses)
    assert again["eval_mean"] == summary["eval_mean"] and again["seeds"] == summary["seeds"]


def test_rank_conditions():
    ranked = rank_conditions(
        [
            {"condition": "a", "eval_mean": 3.0, "eval_sd": 0.1},
            {"condition": "b", "eval_mean": 5.0, "eval_sd": 1.0},
            {"condition": "c", "eval_mean": 3.0, "eval_sd": 0.05},
            {"condition": "d", "eval_mean": None, "eval_sd": None},
        ]
    )
    assert [(r["condition"], r["rank"]) for r in ranked] == [("b", 1), ("c", 2), ("a", 3), ("d", None)]


def test_summarize_marks_absent(tmp_path):
    run(small_config(tmp_path, modes=["vanilla", "bfs"]))
    table = summarize([tmp_path / "run"], expected=["vanilla", "bfs", "dfs"])
    rows = {r["condition"]: r for r in table["chain"]}
    assert rows["dfs"]["rank"] is None and rows["dfs"].get("absent")
    assert {rows["vanilla"]["rank"], rows["bfs"]["rank"]} == {1, 2}
    assert "absent" in format_table(table)


def test_labels_stay_distinct(tmp_path):
    run(small_config(tmp_path, modes=["vanilla", "bfs"], label="x"))
    table = summarize([tmp_path / "run"])
    assert sorted(r["condition"] for r in table["chain"]) == ["x-bfs", "x-vanilla"]


def test_invalid_configs():
    with pytest.raises(ValueError):
        RunConfig(env="atari")
    with pytest.raises(ValueError):
        RunConfig(modes=["greedy"])
    with pytest.raises(ValueError):
        RunConfig(agent={"lr": 1.0})
    with pytest.raises(ValueError):
        RunConfig(episodes=0)


def test_cli_rejects_bad_config(tmp_path, capsys):
    assert cli.main(["run", "--env", "atari", "--out", str(tmp_path)]) != 0
    assert "error" in capsys.readouterr().err
    assert cli.main(["run", "--mode", "greedy", "--out", str(tmp_path)]) != 0


def test_cli_json_config_with_override(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"env": "chain", "modes": ["vanilla"], "episodes": 5, "eval_episodes": 1, "agent": SMALL}))
    out = tmp_path / "cli"
    code = cli.main(["run", "--config", str(conf), "--episodes", "2", "--seeds", "3", "--lam", "0.2", "--out", str(out)])
    assert code == 0
    assert len(read_rows(out / "vanilla/3.csv")) == 2
    summary = json.loads((out / "vanilla/summary.json").read_text())
    assert summary["agent"]["lam"] == 0.2 and summary["agent"]["hidden"] == [8]
    assert "vanilla" in capsys.readouterr().out
    assert cli.main(["summarize", str(out), "--json"]) == 0


def test_parse_seeds():
    assert cli.parse_seeds("0-3") == [0, 1, 2, 3]
    assert cli.parse_seeds("1,4, 9") == [1, 4, 9]
    assert cli.parse_seeds("0-1,5") == [0, 1, 5]


def test_line_chart_handles_gaps():
    svg = line_chart({"a": [0.0, 1.0, math.nan, 2.0, 3.0], "b": []}, "t")
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 2
