"""
Tests for experiment config validation, defaults and overrides.
"""
import json

import pytest

from scatlab.config import CACHE_ENV, WORKERS_ENV, expansion_from_dict, load_config, resolve_config
from scatlab.exceptions import ConfigError

PLANE_GAUSSIAN = {
    "name": "g",
    "dimension": 2,
    "electric": [{"family": "gaussian", "params": {"amplitude": -2.0, "width": 0.3}}],
    "decay": {"C": 100.0},
}


def forward_config(**extra):
    data = {"scenario": "forward", "energy": 1.0, "potential": PLANE_GAUSSIAN}
    data.update(extra)
    return data


class TestResolve:
    def test_defaults_follow_dimension(self):
        config = resolve_config(forward_config())
        assert config.dimension == 2
        assert config.points == 64
        assert config.side == 8.0
        assert config.degree == 4
        assert config.degrees == [2, 4, 6, 8]
        assert config.tolerances["unitarity"] == 1e-3
        assert config.grid.spacing == 0.125

    def test_space_defaults(self):
        data = {"scenario": "dtn", "energy": 2.0, "potential": {"dimension": 3}}
        config = resolve_config(data)
        assert config.points == 32
        assert config.xi().shape == (33, 3)

    def test_overrides(self):
        overrides = {"energy": 2.5, "points": 32, "side": 6.0, "no_cache": True, "degree": None}
        config = resolve_config(forward_config(), overrides)
        assert config.energy == 2.5
        assert (config.points, config.side) == (32, 6.0)
        assert config.degree == 4
        assert config.cache_enabled is False

    def test_overrides_leave_input_untouched(self):
        data = forward_config()
        resolve_config(data, {"points": 16})
        assert "grid" not in data

    def test_unknown_override(self):
        with pytest.raises(ConfigError) as info:
            resolve_config(forward_config(), {"tau": 3.0})
        assert info.value.record == {"override": "tau"}

    def test_partial_tolerances_merge_with_defaults(self):
        config = resolve_config(forward_config(tolerances={"solver": 1e-10}))
        assert config.solver_options()["tol"] == 1e-10
        assert config.tolerances["support"] == 1e-9

    def test_tolerances_reach_the_solver(self):
        config = resolve_config(forward_config(tolerances={"support": 1e-6, "unitarity": 1e-2}))
        options = config.solver_options()
        assert options["support_rtol"] == 1e-6
        assert options["unitarity_warn"] == 1e-2
        assert options["tol"] == 1e-8

    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv(CACHE_ENV, str(tmp_path))
        monkeypatch.setenv(WORKERS_ENV, "3")
        config = resolve_config(forward_config(solver={"method": "dense"}))
        assert config.cache_directory == str(tmp_path)
        assert config.solver_options() == {
            "tol": 1e-8,
            "support_rtol": 1e-9,
            "unitarity_warn": 1e-3,
            "method": "dense",
            "workers": 3,
        }

    def test_gauge_function(self):
        data = {
            "scenario": "gauge-check",
            "energy": 1.0,
            "potential": {"dimension": 3},
            "gauge": {"family": "bump", "width": 0.8, "center": [0.1, 0.0, 0.0]},
        }
        psi = resolve_config(data).gauge_function()
        assert psi.dimension == 3
        assert psi.center == (0.1, 0.0, 0.0)


class TestValidation:
    @pytest.mark.parametrize(
        "extra,location",
        [
            ({"grid": {"points": 33}}, "grid/points"),
            ({"energy": 0.0}, "energy"),
            ({"solver": {"method": "lu"}}, "solver/method"),
            ({"colour": "red"}, "<root>"),
        ],
    )
    def test_schema_violations(self, extra, location):
        with pytest.raises(ConfigError) as info:
            resolve_config(forward_config(**extra))
        assert info.value.record["path"] == location

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            resolve_config({"scenario": "tomography", "energy": 1.0})

    def test_missing_inputs(self):
        with pytest.raises(ConfigError) as info:
            resolve_config({"scenario": "forward", "energy": 1.0})
        assert info.value.record == {"missing": ["potential"]}
        with pytest.raises(ConfigError) as info:
            resolve_config({"scenario": "uniqueness", "energy": 1.0})
        assert info.value.record == {"missing": ["pair|expansions"]}

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError) as info:
            resolve_config(forward_config(dimension=3))
        assert info.value.record == {"potential": "g"}


class TestFiles:
    def test_load(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(forward_config()))
        assert load_config(path).scenario == "forward"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(tmp_path / "absent.json")
        assert info.value.exit_code == 2

    def test_not_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{scenario: forward")
        with pytest.raises(ConfigError):
            load_config(path)


def test_expansion_from_dict():
    data = {
        "interior": {"dimension": 3},
        "terms": [
            {"order": 2.5, "coefficients": [[1, 0, 0.5], [2, 1, 0.0, 0.25]]},
            {"order": 3.0, "kind": "magnetic", "axis": [0.0, 1.0, 0.0]},
        ],
        "R": 1.5,
    }
    expansion = expansion_from_dict(data)
    assert expansion.dimension == 3
    assert expansion.R == 1.5
    assert expansion.terms[0].coefficients == {(1, 0): 0.5 + 0j, (2, 1): 0.25j}
    assert expansion.terms[1].axis == (0.0, 1.0, 0.0)
    assert expansion.terms[1].amplitude == 1.0
