import json

import pytest
from pydantic import ValidationError

from fsccert.config import (
    DEFAULT_BUDGET,
    RunConfig,
    env_overrides,
    load_config_file,
    parse_origins,
    resolve_config,
)


def test_defaults():
    config = resolve_config({}, environ={}, config_file="")
    assert config.budget == DEFAULT_BUDGET
    assert config.mode == "target"
    assert config.strategy == "auto"


def test_precedence_flags_env_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"budget": 10, "seed": 1, "restarts": 3}))
    environ = {"FSCCERT_BUDGET": "20", "FSCCERT_SEED": "2"}
    config = resolve_config({"budget": 30, "seed": None}, environ=environ, config_file=path)
    assert config.budget == 30
    assert config.seed == 2
    assert config.restarts == 3


def test_config_file_from_environment(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"iterations": 7}))
    config = resolve_config(environ={"FSCCERT_CONFIG": str(path)})
    assert config.iterations == 7


def test_env_overrides_only_known_variables():
    assert env_overrides({"FSCCERT_WORKERS": "4", "HOME": "/root"}) == {"workers": "4"}


def test_config_file_must_be_object(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("[1, 2]")
    with pytest.raises(ValueError, match="JSON object"):
        load_config_file(path)
    assert load_config_file("") == {}


def test_invalid_values_rejected():
    with pytest.raises(ValidationError):
        RunConfig(budget=0)
    with pytest.raises(ValidationError):
        RunConfig(n_range=(3, 2))


def test_result_fields_exclude_execution_settings():
    fields = RunConfig(workers=8, wall_time=5).result_fields()
    assert "workers" not in fields
    assert "wall_time" not in fields
    assert fields["budget"] == DEFAULT_BUDGET


def test_parse_origins():
    assert parse_origins("") == []
    assert parse_origins(" , ") == []
    assert parse_origins("https://a.example, ,https://b.example ") == ["https://a.example", "https://b.example"]
