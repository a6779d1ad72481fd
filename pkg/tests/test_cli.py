"""Tests for the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from antiholo_moduli._germ import normal_form_family
from antiholo_moduli._main import main
from antiholo_moduli._version import ANTIHOLO_MODULI_PACKAGE_VERSION

from .conftest import make_data, make_record


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(normal_form_family(0.3).to_json()))
    return str(path)


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert result.output.strip() == ANTIHOLO_MODULI_PACKAGE_VERSION


def test_config_show(runner, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"nmax": 8}))
    result = runner.invoke(main, ["config", "show", "--config", str(path)])
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["config"]["nmax"] == 8
    assert data["user_config_path"].endswith("config.json")


def test_validate(runner, model_file):
    result = runner.invoke(main, ["validate", model_file])
    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["valid"] is True
    assert data["conjugating"] is True
    assert data["genericity_margin"] == pytest.approx(-0.5)
    assert "fixed_points_centered" in data


def test_malformed_input(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    result = runner.invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert '"error": "data"' in result.output

    result = runner.invoke(main, ["validate", str(tmp_path / "missing.json")])
    assert result.exit_code == 1
    assert '"error": "data"' in result.output


def test_prepare(runner, model_file, tmp_path):
    out = tmp_path / "prepared.json"
    report = tmp_path / "report.json"
    result = runner.invoke(
        main, ["prepare", model_file, "-o", str(out), "--report", str(report)]
    )
    assert result.exit_code == 0
    assert json.loads(out.read_text())["kind"] == "antiholomorphic-unfolding"
    data = json.loads(report.read_text())
    assert data["report"]["worst_residual"] < 1e-8
    assert data["config"]["radius"] == 0.5


def test_prepare_rejects_holomorphic_family(runner, tmp_path):
    path = tmp_path / "square.json"
    path.write_text(json.dumps(normal_form_family(0.3, squared=True).to_json()))
    result = runner.invoke(main, ["prepare", str(path)])
    assert result.exit_code == 1
    assert '"error": "preparation"' in result.output


def test_modulus_option_conflict(runner, model_file):
    result = runner.invoke(main, ["modulus", model_file, "--grid", "0.01", "--rays", "0"])
    assert result.exit_code == 1
    assert "mutually exclusive" in result.output


def test_sqrt_check_needs_holomorphic_family(runner, model_file):
    result = runner.invoke(main, ["sqrt", "check", model_file])
    assert result.exit_code == 1
    assert '"error": "criterion"' in result.output


def test_compare(runner, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    make_data(make_record({1: 0.1}, {-1: 0.05})).write(a)
    make_data(make_record({1: 0.15}, {-1: 0.05})).write(b)

    result = runner.invoke(main, ["compare", str(a), str(a)])
    assert result.exit_code == 0
    assert json.loads(result.output)["verdict"] == "equivalent"

    result = runner.invoke(main, ["compare", str(a), str(b)])
    assert result.exit_code == 2
    data = json.loads(result.output)
    assert data["verdict"] == "inequivalent"
    assert data["failing_record"] == 0

    out = tmp_path / "report.json"
    result = runner.invoke(main, ["compare", str(a), str(a), "-o", str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["shifts"] == [0.0]


def test_modulus_report_carries_config(runner, model_file, tmp_path):
    out = tmp_path / "modulus.json"
    result = runner.invoke(
        main, ["modulus", model_file, "--grid", "0", "--nmax", "4", "-o", str(out)]
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["config"]["nmax"] == 4
    assert "failed_records" in report
    assert json.loads(out.read_text())["config"]["nmax"] == 4


def test_random_family(runner, tmp_path):
    out = tmp_path / "random.json"
    result = runner.invoke(main, ["random", "--seed", "3", "-o", str(out)])
    assert result.exit_code == 0
    data = json.loads(out.read_text())
    assert data["kind"] == "antiholomorphic-unfolding"

    again = runner.invoke(main, ["random", "--seed", "3"])
    assert json.loads(again.output) == data
    other = runner.invoke(main, ["random", "--seed", "4"])
    assert json.loads(other.output) != data

    result = runner.invoke(main, ["validate", str(out)])
    assert result.exit_code == 0
    assert json.loads(result.output)["fixed_points_centered"] is True
