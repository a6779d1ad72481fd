"""Tests for run configuration loading and validation."""

import json
import math

import pytest

from antiholo_moduli._config import *
from antiholo_moduli._errors import ConfigError


def test_defaults():
    config = RunConfig()
    assert config.nmax == DEFAULTS["nmax"] == 16
    assert config.tol == 1e-8
    assert config.grid == (-0.04, -0.01, 0.01, 0.04)
    data = config.to_dict()
    assert data["grid"] == [-0.04, -0.01, 0.01, 0.04]
    assert set(data) == set(DEFAULTS)


@pytest.mark.parametrize(
    "changes",
    [
        {"nmax": 0},
        {"nmax": 33},
        {"tol": 0.0},
        {"delta": 2.0},
        {"grid": (0.06,)},
        {"eta_nodes": 7},
        {"escape_radius": 0.4},
        {"radii": (0.05,)},
        {"rays": (3 * math.pi,)},
        {"deg_w": 1},
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes)


def test_load_config_overrides():
    config = load_config(overrides={"nmax": 8, "tol": None}, use_user_file=False)
    assert config.nmax == 8
    assert config.tol == DEFAULTS["tol"]
    assert config.replace(height=2.0).height == 2.0


def test_load_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"height": 2.0, "grid": [-0.02, 0.02]}))
    config = load_config(path, {"height": 2.5}, use_user_file=False)
    assert config.grid == (-0.02, 0.02)
    assert config.height == 2.5


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json", use_user_file=False)

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad, use_user_file=False)

    bad.write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigError):
        load_config(bad, use_user_file=False)

    bad.write_text(json.dumps({"colour": "red"}))
    with pytest.raises(ConfigError) as info:
        load_config(bad, use_user_file=False)
    assert info.value.to_json()["error"] == "config"


def test_user_config_path():
    path = user_config_path()
    assert path.name == "config.json"
    assert "antiholo-moduli" in str(path)
