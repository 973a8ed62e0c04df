"""CLI contracts: subcommands, exit codes, file outputs."""

import json

import pytest
from click.testing import CliRunner

from safetybn.catalog import bundled_dir
from safetybn.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


FIG4B = bundled_dir() / "fig4b_hammer_pfd.json"


def test_examples_list(runner):
    result = runner.invoke(main, ["examples", "list"])
    assert result.exit_code == 0
    assert "fig4b_hammer_pfd" in result.output
    assert len(result.output.strip().splitlines()) == 21


def test_examples_run_fig4b(runner):
    result = runner.invoke(main, ["examples", "run", "fig4b"])
    assert result.exit_code == 0
    assert "0.0109" in result.output  # conjugate mean ~ 0.011
    assert "FAIL" not in result.output


def test_examples_run_unknown_is_usage_error(runner):
    result = runner.invoke(main, ["examples", "run", "fig99"])
    assert result.exit_code == 2


def test_infer_missing_file_exit_2(runner):
    result = runner.invoke(main, ["infer", "missing.json"])
    assert result.exit_code == 2
    assert "missing.json" in result.output


def test_validate_bundled_model(runner):
    result = runner.invoke(main, ["validate", str(FIG4B)])
    assert result.exit_code == 0
    assert "no errors" in result.output


def test_validate_bad_table_exit_1(runner, tmp_path):
    doc = {
        "version": "1",
        "title": "bad",
        "nodes": [
            {"id": "s", "kind": "labelled", "states": ["a", "b"], "cpd": {"table": [[0.4, 0.5]]}}
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    result = runner.invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert "NormalizationError" in result.output


def test_infer_with_evidence_and_output(runner, tmp_path):
    evidence = tmp_path / "e.json"
    evidence.write_text(json.dumps({"pfd_observed": 10, "pfd_demands": 1000}))
    out = tmp_path / "r.json"
    result = runner.invoke(
        main,
        ["infer", str(FIG4B), "--evidence", str(evidence), "--out", str(out)],
    )
    assert result.exit_code == 0
    doc = json.loads(out.read_text())
    assert 0.0105 <= doc["nodes"]["pfd_p"]["mean"] <= 0.0115
    assert doc["evidence_echo"] == evidence.read_text()


def test_infer_csv_output(runner, tmp_path):
    out = tmp_path / "r.csv"
    result = runner.invoke(main, ["infer", str(FIG4B), "--out", str(out), "--format", "csv"])
    assert result.exit_code == 0
    assert out.read_text().splitlines()[0] == "node,mean,variance,p05,p25,p50,p75,p95"


def test_compare_subcommand(runner, tmp_path):
    evidence = tmp_path / "e.json"
    evidence.write_text(json.dumps({"pfd_observed": 10, "pfd_demands": 1000}))
    result = runner.invoke(
        main,
        ["compare", str(FIG4B), "--evidence", str(evidence), "--samples", "200000", "--seed", "5"],
    )
    assert result.exit_code == 0
    assert "all nodes within tolerance" in result.output


def test_compare_failure_path_exit_1(runner, tmp_path):
    # impossible evidence: the oracle degenerates, compare reports and exits 1
    evidence = tmp_path / "e.json"
    evidence.write_text(json.dumps({"pfd_observed": 2000, "pfd_demands": 1000}))
    result = runner.invoke(
        main, ["compare", str(FIG4B), "--evidence", str(evidence), "--samples", "10000"]
    )
    assert result.exit_code == 1
    assert "error" in result.output


def test_oracle_subcommand(runner, tmp_path):
    evidence = tmp_path / "e.json"
    evidence.write_text(json.dumps({"pfd_observed": 10, "pfd_demands": 1000}))
    result = runner.invoke(
        main,
        ["oracle", str(FIG4B), "--evidence", str(evidence), "--samples", "100000", "--seed", "3"],
    )
    assert result.exit_code == 0
    assert "effective sample size" in result.output


def test_sweep_tabulates_values(runner):
    result = runner.invoke(
        main,
        ["sweep", str(FIG4B), "--node", "pfd_observed", "--values", "0,10,50",
         "--target", "pfd_p"],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0] == "value,pfd_p mean"
    means = [float(line.split(",")[1]) for line in lines[1:]]
    assert means == sorted(means)  # more failures, higher posterior


def test_sweep_needs_known_node(runner):
    result = runner.invoke(main, ["sweep", str(FIG4B), "--node", "ghost", "--values", "1"])
    assert result.exit_code == 2


def test_psi_config_env(runner, tmp_path, monkeypatch):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"initial_intervals": 16, "max_iterations": 5}))
    monkeypatch.setenv("PSI_CONFIG", str(config))
    result = runner.invoke(main, ["infer", str(FIG4B)])
    assert result.exit_code == 0
    monkeypatch.setenv("PSI_CONFIG", str(tmp_path / "missing.json"))
    result = runner.invoke(main, ["infer", str(FIG4B)])
    assert result.exit_code == 2
