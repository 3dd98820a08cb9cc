from __future__ import annotations

import math
from pathlib import Path

import pytest

from bcslab.config import DEFAULT_LAMBDAS, build_config, parse_config
from bcslab.errors import ConfigError, PotentialError
from bcslab.linear_criterion import DEFAULT_ZERO_TEMPERATURE_SHIFT


def write(tmp_path: Path, text: str, name: str = "run.conf") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


MINIMAL = """\
# weakly bound pair
mu = 1.0
temperature = 0.05
potential.model = gaussian
potential.depth = 5
potential.width = 1   # in units of the Fermi length
"""


def test_minimal_config_gets_defaults(tmp_path):
    config = parse_config(write(tmp_path, MINIMAL))
    assert config.mu == 1.0
    assert config.temperature == 0.05
    assert config.potential.model == "gaussian"
    assert dict(config.potential.params) == {"depth": 5.0, "width": 1.0}
    assert config.solver.seed_mode == "constant"
    assert config.criterion.ell_max == 4
    assert config.lambdas == DEFAULT_LAMBDAS
    assert config.output.format == "csv"
    assert config.e_shift == 0.0
    assert config.t_floor == pytest.approx(1e-6)
    assert config.p_max > math.sqrt(config.mu)


def test_zero_temperature_keyword(tmp_path):
    config = parse_config(write(tmp_path, MINIMAL.replace("0.05", "zero")))
    assert config.temperature == 0.0
    assert config.params.is_zero_temperature
    assert config.e_shift == DEFAULT_ZERO_TEMPERATURE_SHIFT


def test_zero_shift_is_rejected_at_zero_temperature(tmp_path):
    text = MINIMAL.replace("0.05", "zero") + "criterion.e_shift = 0\n"
    with pytest.raises(ConfigError, match="e_shift"):
        parse_config(write(tmp_path, text))


def test_duplicate_key_names_both_lines(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(write(tmp_path, MINIMAL + "mu = 2.0\n"))
    assert info.value.context["line"] == 7
    assert info.value.context["first_line"] == 2


def test_out_of_range_value_reports_accepted_range(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(write(tmp_path, MINIMAL + "grid.grading_levels = -1\n"))
    assert info.value.context["key"] == "grid.grading_levels"
    assert info.value.context["line"] == 7
    assert info.value.context["accepted"] == "[0, 40]"


def test_non_numeric_value(tmp_path):
    with pytest.raises(ConfigError, match="must be a number"):
        parse_config(write(tmp_path, MINIMAL.replace("mu = 1.0", "mu = one")))


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'solver.tolerance'"):
        parse_config(write(tmp_path, MINIMAL + "solver.tolerance = 1e-8\n"))


def test_missing_required_key(tmp_path):
    with pytest.raises(ConfigError, match="missing required key 'mu'"):
        parse_config(write(tmp_path, MINIMAL.replace("mu = 1.0\n", "")))


def test_malformed_line(tmp_path):
    with pytest.raises(ConfigError, match="malformed line 7"):
        parse_config(write(tmp_path, MINIMAL + "= 3\n"))


def test_key_without_value(tmp_path):
    with pytest.raises(ConfigError, match="has no value"):
        parse_config(write(tmp_path, MINIMAL + "solver.tol\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config(tmp_path / "absent.conf")


def test_parameter_of_another_model_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not used by the gaussian potential"):
        parse_config(write(tmp_path, MINIMAL + "potential.radius = 2\n"))


def test_missing_model_parameter(tmp_path):
    with pytest.raises(ConfigError, match="potential.width is required"):
        parse_config(write(tmp_path, MINIMAL.replace("potential.width = 1   # in units of the Fermi length\n", "")))


def test_couplings_must_increase(tmp_path):
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config(write(tmp_path, MINIMAL + "sweep.lambdas = 1.0, 0.5\n"))
    config = parse_config(write(tmp_path, MINIMAL + "sweep.lambdas = 0.5, 1.0, 2\n"))
    assert config.lambdas == (0.5, 1.0, 2.0)


def test_p_max_must_exceed_the_fermi_momentum(tmp_path):
    with pytest.raises(ConfigError, match="sqrt"):
        parse_config(write(tmp_path, MINIMAL.replace("mu = 1.0", "mu = 4.0") + "grid.p_max = 1.5\n"))


def test_table_path_is_relative_to_the_config(tmp_path):
    tables = tmp_path / "tables"
    tables.mkdir()
    (tables / "well.dat").write_text("r V\n0.0 -2.0\n0.5 -1.5\n1.0 -0.5\n2.0 0.0\n")
    text = "mu = 1\npotential.model = tabulated\npotential.table = tables/well.dat\npotential.lambda_scale = 0.5\n"
    config = parse_config(write(tmp_path, text))
    assert config.table == (tables / "well.dat").resolve()
    assert config.potential.model == "tabulated"
    assert config.potential.lambda_scale == 0.5


def test_missing_table_is_a_config_error(tmp_path):
    text = "mu = 1\npotential.model = tabulated\npotential.table = nowhere.dat\n"
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(write(tmp_path, text))


def test_bad_table_is_a_potential_error(tmp_path):
    (tmp_path / "bad.dat").write_text("0.0 -1.0\n0.5 nope\n")
    text = "mu = 1\npotential.model = tabulated\npotential.table = bad.dat\n"
    with pytest.raises(PotentialError) as info:
        parse_config(write(tmp_path, text))
    assert info.value.context["key"] == "potential"


def test_build_config_from_a_plain_mapping():
    config = build_config(
        {"mu": "2", "potential.model": "square_well", "potential.depth": "1", "potential.radius": "1.5"}
    )
    assert config.potential.model == "square_well"
    assert config.build_grid().metadata()["p_max"] == pytest.approx(config.p_max)


def test_record_is_fully_resolved(tmp_path):
    path = write(tmp_path, MINIMAL + "output.format = json\n")
    record = parse_config(path).to_record()
    assert record["source"] == str(path)
    assert record["potential"] == {"model": "gaussian", "depth": 5.0, "width": 1.0, "lambda_scale": 1.0, "table": None}
    assert record["grid"]["p_max"] == pytest.approx(parse_config(path).p_max)
    assert record["tc"]["t_floor"] == pytest.approx(1e-6)
    assert record["output"] == {"dir": "results", "format": "json"}
