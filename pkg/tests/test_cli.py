from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from arcmem.cli import main as cli_main

REPO = Path(__file__).resolve().parents[1]
CORPUS = REPO / "fixtures" / "mini-season"
FIXTURES = REPO / "fixtures" / "llm"
MINI_CONFIG = REPO / "fixtures" / "mini-season" / "config.json"


def base_args(workspace: Path) -> list[str]:
    return [
        "--config", str(MINI_CONFIG),
        "--workspace", str(workspace),
        "--fixtures-dir", str(FIXTURES),
        "--mode", "replay",
    ]


def run_cli(args, expect_exit=0):
    result = CliRunner().invoke(cli_main, args, catch_exceptions=False)
    assert result.exit_code == expect_exit, result.output
    return result


def stderr_of(result) -> str:
    try:
        return result.stderr
    except ValueError:  # click < 8.2 mixes streams unless asked not to
        return result.output


def replay_all(workspace: Path) -> None:
    run_cli(base_args(workspace) + ["ingest", "--series", "saltmarsh", "--plots-dir", str(CORPUS)])
    run_cli(base_args(workspace) + ["preprocess", "--series", "saltmarsh", "--season", "1"])
    run_cli(base_args(workspace) + ["extract", "--series", "saltmarsh", "--season", "1"])


def test_export_twice_on_unchanged_store_is_identical(tmp_path):
    replay_all(tmp_path)
    first = run_cli(["--workspace", str(tmp_path), "export"]).output
    second = run_cli(["--workspace", str(tmp_path), "export"]).output
    assert first == second
    assert json.loads(first)["arcs"]


def test_extract_emits_agent_events_as_json_lines(tmp_path):
    run_cli(base_args(tmp_path) + ["ingest", "--series", "saltmarsh", "--plots-dir", str(CORPUS)])
    run_cli(base_args(tmp_path) + ["preprocess", "--series", "saltmarsh", "--season", "1", "--episode", "1"])
    result = run_cli(base_args(tmp_path) + ["extract", "--series", "saltmarsh", "--season", "1", "--episode", "1"])
    events = [json.loads(line) for line in result.output.splitlines() if line.strip()]
    agent_events = [e for e in events if e["event"] == "agent_completed"]
    assert [e["agent"] for e in agent_events] == [f"agent{i}" for i in range(1, 10)]
    assert events[-1]["event"] == "episode_completed"


def test_extract_out_of_order_fails_with_machine_readable_error(tmp_path):
    run_cli(base_args(tmp_path) + ["ingest", "--series", "saltmarsh", "--plots-dir", str(CORPUS)])
    run_cli(base_args(tmp_path) + ["preprocess", "--series", "saltmarsh", "--season", "1"])
    result = run_cli(
        base_args(tmp_path) + ["extract", "--series", "saltmarsh", "--season", "1", "--episode", "2"],
        expect_exit=1,
    )
    error = json.loads(stderr_of(result).splitlines()[-1])
    assert error["error"] == "ORDERING"


def test_ingest_rejects_directory_without_plots(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    result = run_cli(
        base_args(tmp_path / "ws") + ["ingest", "--series", "saltmarsh", "--plots-dir", str(empty)],
        expect_exit=1,
    )
    assert json.loads(stderr_of(result).splitlines()[-1])["error"] == "NO_PLOTS"


def test_evaluate_cli_reports_mini_season(tmp_path):
    replay_all(tmp_path)
    result = run_cli(
        ["--workspace", str(tmp_path), "evaluate", "--series", "saltmarsh",
         "--gold", str(REPO / "fixtures" / "gold" / "mini_gold.json")],
    )
    report = json.loads(result.stdout)
    assert report["per_type"]["anthology"]["extracted"] == 3
    assert report["per_type"]["anthology"]["precision"] == 1.0
    assert report["characters"] == {"extracted": 9, "correct": 8}
    assert report["missed_gold"], "the deliberately-unextracted gold arc should be reported"
