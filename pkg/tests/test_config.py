import json

import pytest
from pydantic import ValidationError

from src.config import RunConfig, load_run_config, parse_grid, parse_jump, parse_sizes
from src.core_model import JumpKind
from src.errors import ParameterError


def test_parse_jump_grammar():
    """Test the exp:<rate> and const:<x0> forms."""
    assert parse_jump("exp:2").kind is JumpKind.EXPONENTIAL
    assert parse_jump("exp:2").value == 2.0
    assert parse_jump("const:0.5").kind is JumpKind.DETERMINISTIC


@pytest.mark.parametrize("text", ["gamma:2", "exp", "exp:x", "const:-1"])
def test_parse_jump_rejects(text):
    with pytest.raises(ParameterError):
        parse_jump(text)


def test_parse_grid_range_includes_stop():
    grid = parse_grid("0:50:1")
    assert len(grid) == 51
    assert grid[0] == 0.0 and grid[-1] == 50.0


def test_parse_grid_list():
    assert parse_grid("1, 5,10") == (1.0, 5.0, 10.0)
    assert parse_grid([1, 2]) == (1.0, 2.0)


def test_parse_grid_empty():
    with pytest.raises(ParameterError, match="nonempty"):
        parse_grid("")


@pytest.mark.parametrize("text", ["1:5", "a,b", "0:5:0"])
def test_parse_grid_rejects_malformed(text):
    with pytest.raises(ParameterError):
        parse_grid(text)


def test_parse_sizes_rejects_zero():
    with pytest.raises(ParameterError):
        parse_sizes("0")
    assert parse_sizes("100,1000") == (100, 1000)


def test_defaults_are_curve_setup(curve_params):
    assert RunConfig().model_params() == curve_params


def test_flags_override_file(tmp_path):
    """Test precedence: file values replace defaults and flags replace file values."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"beta": 0.5, "end-time": 7.0, "grid": [1, 2, 3]}))
    cfg = load_run_config(str(path), {"beta": 0.75, "seed": None})
    assert cfg.beta == 0.75
    assert cfg.end_time == 7.0
    assert cfg.seed == 0
    assert cfg.time_grid() == (1.0, 2.0, 3.0)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"gamma": 1}))
    with pytest.raises(ValidationError):
        load_run_config(str(path), {})


def test_bad_json_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{not json")
    with pytest.raises(ParameterError):
        load_run_config(str(path), {})


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("STRESSRELEASE_WORKERS", "3")
    assert RunConfig().workers == 3


def test_pushgateway_from_environment(monkeypatch):
    monkeypatch.setenv("STRESSRELEASE_PUSHGATEWAY", "localhost:9091")
    assert RunConfig().pushgateway == "localhost:9091"
