"""
Tests for the command-line interface
"""
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from cli.output import emit
from core.errors import EXIT_COMPUTATION, EXIT_INPUT, EXIT_USAGE
from main import cli
from schemas.result import ResultDocument


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def _run(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def test_summarize_d1(runner, d1_file):
    result = _run(runner, "summarize", d1_file)
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    assert doc["command"] == "summarize"
    assert doc["outputs"]["summary"]["nu_a"] == 2.0
    assert doc["outputs"]["grand_mean"] == 2.5
    assert doc["outputs"]["plugin"]["pigeonhole_plugin_variance"] == pytest.approx(0.625)
    assert doc["outputs"]["plugin"]["combined"]["boundary"] is True


def test_summarize_with_components(runner, d1_file, tmp_path):
    comp = tmp_path / "unit.env"
    comp.write_text("sigma2_a=1\nsigma2_b=1\nsigma2_e=1\n")
    result = _run(runner, "summarize", d1_file, "--variance-components", comp)
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    variance = doc["outputs"]["variance"]
    assert variance["v_re"] == pytest.approx(1.25)
    assert variance["e_re_pigeonhole_exact"] == pytest.approx(0.8125)
    assert any("epsilon_N" in w for w in doc["warnings"])


def test_summarize_missing_file_exits_with_input_code(runner, tmp_path):
    result = _run(runner, "summarize", tmp_path / "absent.csv")
    assert result.exit_code == EXIT_INPUT
    assert "error" in result.stderr
    assert result.stdout == ""


def test_duplicate_cells_exit_with_input_code(runner, tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("row,col,value\na,x,1\na,x,2\n")
    assert _run(runner, "summarize", path).exit_code == EXIT_INPUT
    assert _run(runner, "summarize", path, "--duplicate-policy", "mean").exit_code == 0


def test_bootstrap_zero_replicates_is_a_usage_error(runner, d1_file):
    assert _run(runner, "bootstrap", d1_file, "-B", 0).exit_code == EXIT_USAGE


def test_bootstrap_is_byte_identical_across_runs(runner, d1_file, tmp_path):
    first = _run(runner, "bootstrap", d1_file, "-B", 50, "--seed", 3, "--plot-data", tmp_path / "a")
    second = _run(runner, "bootstrap", d1_file, "-B", 50, "--seed", 3, "--workers", 4,
                  "--plot-data", tmp_path / "a")
    assert first.exit_code == 0, first.stderr
    assert first.stdout == second.stdout
    frame = pd.read_csv(tmp_path / "a" / "bootstrap_pigeonhole.csv", dtype={"replicate": str})
    assert list(frame.columns) == ["replicate", "value"]
    assert frame["replicate"].iloc[0] == "original"
    assert len(frame) == 51


def test_bootstrap_group_statistic(runner, d1_labeled_file):
    result = _run(runner, "bootstrap", d1_labeled_file, "--stat", "group", "--labels", "Sun,Tue", "-B", 20)
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    assert doc["outputs"]["original"] == {"Sun": 2.0, "Tue": 3.0}
    assert _run(runner, "bootstrap", d1_labeled_file, "--stat", "group").exit_code == EXIT_USAGE


def test_contrast_self_is_null(runner, d1_labeled_file, tmp_path):
    result = _run(runner, "contrast", d1_labeled_file, "--a", "Sun", "--b", "Sun", "-B", 20,
                  "--plot-data", tmp_path)
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    assert doc["outputs"]["contrast"]["p_value"] == 1.0
    frame = pd.read_csv(tmp_path / "contrast.csv")
    assert list(frame.columns) == ["replicate", "mean_a", "mean_b", "diff"]


def test_contrast_needs_two_replicates(runner, d1_labeled_file):
    assert _run(runner, "contrast", d1_labeled_file, "--a", "Sun", "--b", "Tue", "-B", 1).exit_code == EXIT_USAGE


def test_contrast_unknown_label_is_a_computation_error(runner, d1_labeled_file):
    result = _run(runner, "contrast", d1_labeled_file, "--a", "Sun", "--b", "Mon", "-B", 10)
    assert result.exit_code == EXIT_COMPUTATION
    assert "Mon" in result.stderr


def test_verify_enumeration_suite(runner, tmp_path):
    config = tmp_path / "verify.env"
    config.write_text("N_ENUMERATION_GRIDS=3\n")
    result = _run(runner, "verify", config, "--suite", "enumeration")
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    assert doc["outputs"]["status"] == "pass"
    assert doc["outputs"]["counts"]["fail"] == 0


def test_simulate_writes_readable_data(runner, tmp_path):
    config = tmp_path / "sim.env"
    config.write_text("kind=bernoulli\nR=8\nC=6\np=0.5\nseed=4\nsigma2_a=1\nsigma2_b=1\nsigma2_e=1\n")
    data = tmp_path / "sim.csv"
    result = _run(runner, "simulate", config, "--data-out", data)
    assert result.exit_code == 0, result.stderr
    doc = json.loads(result.stdout)
    summary = _run(runner, "summarize", data)
    assert json.loads(summary.stdout)["outputs"]["summary"]["N"] == doc["outputs"]["summary"]["N"]


def test_output_option_writes_document(runner, d1_file, tmp_path):
    out = tmp_path / "result.json"
    result = _run(runner, "--output", out, "summarize", d1_file)
    assert result.exit_code == 0
    assert result.stdout == ""
    assert json.loads(out.read_text())["command"] == "summarize"


def test_non_finite_numbers_are_emitted_as_null(capsys):
    doc = ResultDocument(command="summarize", outputs={"ratio": float("nan"), "t": [1.0, float("inf")]})
    emit(doc)
    text = capsys.readouterr().out
    assert "NaN" not in text and "Infinity" not in text
    payload = json.loads(text)
    assert payload["outputs"] == {"ratio": None, "t": [1.0, None]}
    assert payload["warnings"] == ["non-finite values reported as null: outputs.ratio, outputs.t[1]"]
