import json
from pathlib import Path

import pytest

from app.cli.commands import EXIT_INVALID, EXIT_OK, build_parser, load_config, run

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def test_flags_override_config_file(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"command": "converge", "replicas": 500, "seed": 3, "epsilons": [0.1]}))

    args = build_parser().parse_args(["converge", "--config", str(path), "--replicas", "50", "--tags=-1,-2"])
    config = load_config(args)

    assert config.replicas == 50
    assert config.seed == 3
    assert config.epsilons == [0.1]
    assert config.tags == [-1, -2]


def test_list_and_interval_flags() -> None:
    args = build_parser().parse_args(["converge", "--epsilons", "0.05,0.2", "--set=-3,4", "--times", "2,1"])
    config = load_config(args)

    assert config.epsilons == [0.2, 0.05]
    assert config.times == [1.0, 2.0]
    assert config.set == (-3, 4)


def test_invalid_delta_exits_with_diagnostic(capsys: pytest.CaptureFixture) -> None:
    code = run(["sample-ensemble", "--delta1", "1.2", "--delta2", "0.5"])

    assert code == EXIT_INVALID
    assert "delta1" in capsys.readouterr().err


def test_rates_must_satisfy_r_above_l(capsys: pytest.CaptureFixture) -> None:
    assert run(["converge", "--L", "1.0", "--R", "0.5"]) == EXIT_INVALID
    assert "R > L" in capsys.readouterr().err


def test_epsilon_too_large_for_rates(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = run(["converge", "--epsilons", "1.5", "--replicas", "10", "--out", str(tmp_path)])

    assert code == EXIT_INVALID
    assert "δ2 must lie in [0,1)" in capsys.readouterr().err


def test_sim_offset_writes_artifacts(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = run([
        "sim-offset", "--config", str(CONFIG_DIR / "offset_equivalence.json"), "--replicas", "200",
        "--n", "12", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out

    assert code in (0, 1)
    assert "PASS exact_direct_vs_graph" in out
    for name in ("sim-offset.csv", "offset_trajectories.csv", "offset_graph.csv"):
        assert (tmp_path / name).exists()


def test_sim_asep_json_report(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = run([
        "sim-asep", "--config", str(CONFIG_DIR / "asep_oracle.json"), "--replicas", "200",
        "--identity-replicas", "20", "--out", str(tmp_path), "--format", "json",
    ])

    payload = json.loads((tmp_path / "sim-asep.json").read_text())
    assert code == (EXIT_OK if payload["passed"] else 1)
    assert {criterion["name"] for criterion in payload["criteria"]} >= {"graphical_vs_naive", "partition_property"}
    assert "PASS partition_property" in capsys.readouterr().out
    assert (tmp_path / "asep_trajectories.csv").exists()


def test_command_flag_matches_positional() -> None:
    flagged = load_config(build_parser().parse_args(["--command", "bound-check", "--replicas", "7"]))
    positional = load_config(build_parser().parse_args(["bound-check", "--replicas", "7"]))

    assert flagged == positional
    assert flagged.command.value == "bound-check"


def test_command_comes_from_config_file_when_not_given() -> None:
    config = load_config(build_parser().parse_args(["--config", str(CONFIG_DIR / "bad_events.json")]))

    assert config.command.value == "bad-events"


def test_conflicting_or_missing_command_is_invalid(capsys: pytest.CaptureFixture) -> None:
    assert run(["converge", "--command", "sim-asep"]) == EXIT_INVALID
    assert "conflicting commands" in capsys.readouterr().err
    assert run(["--replicas", "5"]) == EXIT_INVALID
    assert "a command is required" in capsys.readouterr().err


def test_command_flag_runs_experiment(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = run([
        "--command", "sim-offset", "--config", str(CONFIG_DIR / "offset_equivalence.json"), "--replicas", "100",
        "--n", "12", "--out", str(tmp_path),
    ])

    assert code in (EXIT_OK, 1)
    assert "PASS exact_direct_vs_graph" in capsys.readouterr().out
    assert (tmp_path / "sim-offset.csv").exists()
