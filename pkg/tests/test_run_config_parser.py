from __future__ import annotations

from pathlib import Path

import pytest

from backend.dirac_waveguide.models import RunConfig
from backend.dirac_waveguide.parsers import RunConfigParseError, load_run_config, parse_run_config


ROOT = Path(__file__).resolve().parents[1]


def test_parse_canonical_config_file() -> None:
    config = load_run_config(ROOT / "configs" / "canonical_bump.yaml")

    assert config.curve.kind == "polynomial_bump"
    assert config.epsilon == 0.1
    assert config.mass == 50.0
    assert config.grid.S_override == 12.0
    assert (config.grid.n_s, config.grid.n_t) == (241, 21)
    assert config.sweep.variable == "mass"
    assert config.transverse.p_values == [1, 2, 3, 4, 5, 6]
    assert config.output.formats == ["csv", "json", "svg"]


def test_empty_text_gives_defaults() -> None:
    config = parse_run_config("")
    assert config == RunConfig()
    assert config.grid.n_t % 2 == 1


def test_invalid_yaml_reports_the_line() -> None:
    with pytest.raises(RunConfigParseError) as exc:
        parse_run_config("epsilon: 0.1\ncurve: [polynomial_bump\nmass: 1\n")
    assert exc.value.line is not None
    assert exc.value.line >= 2


def test_non_mapping_document_is_rejected() -> None:
    with pytest.raises(RunConfigParseError) as exc:
        parse_run_config("- 1\n- 2\n")
    assert exc.value.line == 1


def test_even_n_t_points_at_its_line() -> None:
    text = "epsilon: 0.1\ngrid:\n  n_s: 21\n  n_t: 8\n"
    with pytest.raises(RunConfigParseError) as exc:
        parse_run_config(text)
    assert exc.value.line == 4
    assert "grid.n_t" in str(exc.value)


def test_unknown_keys_are_rejected() -> None:
    text = "curve:\n  kind: zero\n  colour: red\n"
    with pytest.raises(RunConfigParseError) as exc:
        parse_run_config(text)
    assert exc.value.line == 3


def test_sweep_values_must_be_sorted() -> None:
    text = "sweep:\n  variable: k\n  values: [0.0, 2.0, 1.0]\n"
    with pytest.raises(RunConfigParseError) as exc:
        parse_run_config(text)
    assert exc.value.line == 3


def test_epsilon_sweep_must_stay_positive() -> None:
    with pytest.raises(RunConfigParseError):
        parse_run_config("sweep:\n  variable: epsilon\n  values: [0.0, 0.1]\n")
    config = parse_run_config("sweep:\n  variable: k\n  values: [0.0, 0.1]\n")
    assert config.sweep.values == [0.0, 0.1]


def test_overrides_merge_into_nested_sections() -> None:
    text = "grid:\n  n_s: 11\n  n_t: 5\nsolver:\n  count: 3\n"
    config = parse_run_config(text, {"grid": {"n_t": 7}, "mass": 2.5})
    assert (config.grid.n_s, config.grid.n_t) == (11, 7)
    assert config.solver.count == 3
    assert config.mass == 2.5


def test_dumped_config_validates_back_to_itself() -> None:
    config = load_run_config(ROOT / "configs" / "canonical_bump.yaml")
    again = RunConfig.model_validate(config.model_dump(mode="json"))
    assert again == config


def test_missing_file_is_a_parse_error(tmp_path) -> None:
    with pytest.raises(RunConfigParseError, match="cannot read run config"):
        load_run_config(tmp_path / "missing.yaml")
