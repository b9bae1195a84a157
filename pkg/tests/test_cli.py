"""Tests for the greenlb command line, run in-process through CliRunner."""

import json
import os

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from cli import cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(tmp_path):
    data = {
        "schema_version": 1,
        "scenario": {"stop": {"max_requests": 150}, "warmup": 20, "batches": 5},
        "policy": {"text": '-queueSize - dspace("q") * (1 - stateOn)', "params": {"q": 5}},
        "study": {"q": [1, 20], "timeout": [2, 10], "nd": ["random"], "replications": 2},
    }
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.fixture
def sweep_csv(runner, small_config, tmp_path):
    out = tmp_path / "results.csv"
    result = runner.invoke(cli, ["sweep", "-c", str(small_config), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def _error_line(result):
    lines = [line for line in result.stderr.splitlines() if line.startswith("greenlb: error")]
    assert len(lines) == 1
    return lines[0]


# ====================================================================== #
# region           PARSE & EVAL                                           #
# ====================================================================== #

def test_parse_prints_canonical_policy(runner):
    result = runner.invoke(cli, ["parse", "-e", '-queueSize - dspace("q")*(1-stateOn)'])
    assert result.exit_code == 0
    assert result.stdout.splitlines() == [
        '-queueSize - dspace("q") * (1 - stateOn)', "# design parameters: q"]


def test_parse_reads_policy_files(runner, configs_dir):
    path = os.path.join(configs_dir, "policies", "shortest_queue.policy")
    result = runner.invoke(cli, ["parse", path])
    assert result.exit_code == 0
    assert result.stdout.strip() == "-queueSize"


def test_parse_error_is_one_line_with_its_code(runner):
    result = runner.invoke(cli, ["parse", "-e", "queueSize +"])
    assert result.exit_code == 10
    assert _error_line(result).startswith("greenlb: error 10 POLICY_SYNTAX: line 1, column 12")


def test_unknown_identifier_exit_code(runner):
    result = runner.invoke(cli, ["parse", "-e", "queueLength"])
    assert result.exit_code == 11


def test_eval_selects_a_server(runner, configs_dir):
    snapshot = os.path.join(configs_dir, "snapshot_example.yaml")
    policy = os.path.join(configs_dir, "policies", "queue_threshold.policy")
    result = runner.invoke(cli, ["eval", "--policy", policy, "--state", snapshot, "--json"])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert [s["base"] for s in report["servers"]] == [-5.0, -2.0, -6.0, -5.0]
    assert report["selected"] == 1


def test_eval_accepts_positional_files(runner, configs_dir):
    snapshot = os.path.join(configs_dir, "snapshot_example.yaml")
    policy = os.path.join(configs_dir, "policies", "queue_threshold.policy")
    by_option = runner.invoke(cli, ["eval", "-s", snapshot, "-p", policy]).stdout
    by_position = runner.invoke(cli, ["eval", snapshot, policy]).stdout
    assert by_option == by_position
    assert by_option.splitlines()[-1] == "selected: 1"


def test_eval_table_output(runner, configs_dir):
    snapshot = os.path.join(configs_dir, "snapshot_example.yaml")
    result = runner.invoke(cli, ["eval", "--state", snapshot, "-e", "-queueSize"])
    assert result.exit_code == 0
    assert result.stdout.splitlines()[-1] == "selected: 3"


@pytest.mark.parametrize("args", [
    ["-e", "-queueSize"],
    ["SNAPSHOT", "--state", "SNAPSHOT", "-e", "-queueSize"],
    ["--state", "SNAPSHOT"],
])
def test_eval_needs_one_state_and_one_policy(runner, configs_dir, args):
    snapshot = os.path.join(configs_dir, "snapshot_example.yaml")
    result = runner.invoke(cli, ["eval"] + [snapshot if a == "SNAPSHOT" else a for a in args])
    assert result.exit_code == 20
    assert _error_line(result).startswith("greenlb: error 20 CONFIG:")


def test_unexpected_failure_is_one_line_unknown_error(runner, monkeypatch):
    def crash(text):
        raise RuntimeError("parser exploded\nsecond line")

    monkeypatch.setattr("commands.policy.parse_policy", crash)
    result = runner.invoke(cli, ["parse", "-e", "0"])
    assert result.exit_code == 99
    assert _error_line(result) == "greenlb: error 99 UNKNOWN_ERROR: RuntimeError: parser exploded second line"
    assert "Traceback" not in result.stderr


def test_non_ascii_digit_is_a_syntax_error(runner):
    result = runner.invoke(cli, ["parse", "-e", "1 + ²"])
    assert result.exit_code == 10
    assert _error_line(result).startswith("greenlb: error 10 POLICY_SYNTAX: line 1, column 5")


# endregion


# ====================================================================== #
# region           RUN & SWEEP                                            #
# ====================================================================== #

def test_run_prints_json(runner, small_config):
    result = runner.invoke(cli, ["run", "-c", str(small_config)])
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert data["requests_completed"] == 150
    assert data["q"] == 5
    assert len(data["state_fractions"]) == 4


def test_run_is_reproducible_and_seed_overrides(runner, small_config):
    first = runner.invoke(cli, ["run", "-c", str(small_config), "--csv"]).stdout
    second = runner.invoke(cli, ["run", "-c", str(small_config), "--csv"]).stdout
    other = runner.invoke(cli, ["run", "-c", str(small_config), "--csv", "--seed", "9"]).stdout
    assert first == second
    assert first != other
    assert first.splitlines()[0].startswith("q,timeout,nd,replication,seed,avg_latency_s")


def test_run_writes_trace(runner, small_config, tmp_path):
    trace = tmp_path / "trace.csv"
    result = runner.invoke(cli, ["run", "-c", str(small_config), "--trace", str(trace)])
    assert result.exit_code == 0
    frame = pd.read_csv(trace)
    assert list(frame.columns) == ["time", "server", "event", "power_state", "queue_size"]
    assert (frame["event"] == "ARRIVAL").sum() == 150


def test_missing_config_key_names_it(runner, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"schema_version": 1, "policy": {"text": "0"}}), encoding="utf-8")
    result = runner.invoke(cli, ["run", "-c", str(path)])
    assert result.exit_code == 20
    assert _error_line(result) == "greenlb: error 20 CONFIG: missing required key scenario"


def test_sweep_writes_every_run(sweep_csv):
    frame = pd.read_csv(sweep_csv)
    assert len(frame) == 8
    assert (frame["status"] == "ok").all()
    assert sorted(set(frame["q"])) == [1, 20]


def test_sweep_jobs_do_not_change_output(runner, small_config, sweep_csv, tmp_path):
    parallel = tmp_path / "parallel.csv"
    result = runner.invoke(cli, ["sweep", "-c", str(small_config), "-o", str(parallel), "-j", "2"])
    assert result.exit_code == 0
    assert parallel.read_bytes() == sweep_csv.read_bytes()


def test_unwritable_outputs_are_config_errors(runner, small_config, tmp_path):
    missing = tmp_path / "no_such_dir"
    result = runner.invoke(cli, ["sweep", "-c", str(small_config), "-o", str(missing / "r.csv")])
    assert result.exit_code == 20
    assert _error_line(result).startswith("greenlb: error 20 CONFIG: cannot write")

    result = runner.invoke(cli, ["run", "-c", str(small_config), "--trace", str(missing / "t.csv")])
    assert result.exit_code == 20
    assert _error_line(result).startswith("greenlb: error 20 CONFIG: cannot write trace")


# endregion


# ====================================================================== #
# region           TABLE COMMANDS                                         #
# ====================================================================== #

def test_compare_a_sweep_with_itself(runner, sweep_csv):
    result = runner.invoke(cli, ["compare", str(sweep_csv), str(sweep_csv), "--json"])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["num_designs"] == 4
    assert report["latency_within"]["0.06"] == 1.0
    assert report["power_delta"]["median"] == 0.0


def test_compare_rejects_tables_without_metrics(runner, sweep_csv, tmp_path):
    bare = tmp_path / "bare.csv"
    pd.read_csv(sweep_csv)[["q", "timeout", "nd"]].to_csv(bare, index=False)
    result = runner.invoke(cli, ["compare", str(sweep_csv), str(bare)])
    assert result.exit_code == 60
    assert "RESULTS_FORMAT" in _error_line(result)


@pytest.mark.parametrize("group_by, labels", [("q", {"q=1", "q=20"}), ("TO", {"TO=2", "TO=10"})])
def test_plot_data_groups(runner, sweep_csv, group_by, labels):
    result = runner.invoke(cli, ["plot-data", str(sweep_csv), "--group-by", group_by])
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "total_power_w,avg_latency_s,group,q,timeout,nd"
    assert len(lines) == 5
    assert {line.split(",")[2] for line in lines[1:]} == labels


def test_plot_data_of_empty_results_is_header_only(runner, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("q,timeout,nd,avg_latency_s,total_power_w\n", encoding="utf-8")
    result = runner.invoke(cli, ["plot-data", str(empty)])
    assert result.exit_code == 0
    assert result.stdout.splitlines() == ["total_power_w,avg_latency_s,group,q,timeout,nd"]


def test_frontier_lists_non_dominated_designs(runner, sweep_csv):
    result = runner.invoke(cli, ["frontier", str(sweep_csv)])
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "q,timeout,nd,total_power_w,avg_latency_s"
    assert 2 <= len(lines) <= 5
    powers = [float(line.split(",")[3]) for line in lines[1:]]
    assert powers == sorted(powers)


def test_frontier_per_timeout(runner, sweep_csv):
    result = runner.invoke(cli, ["frontier", str(sweep_csv), "--by", "TO"])
    assert result.exit_code == 0
    timeouts = {line.split(",")[1] for line in result.stdout.splitlines()[1:]}
    assert timeouts == {"2.0", "10.0"}

# endregion
