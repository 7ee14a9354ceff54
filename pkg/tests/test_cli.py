"""
Tests for the experiment runner command line.
"""
import csv
import json

import numpy as np
import pytest

from scatlab.cli import build_parser, main

from .test_config import PLANE_GAUSSIAN


def write_config(tmp_path, data, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def output(tmp_path):
    return tmp_path / "out"


class TestParser:
    def test_subcommands_share_overrides(self):
        args = build_parser().parse_args(["smatrix", "cfg.json", "--energy", "2.0", "--no-cache"])
        assert args.scenario == "smatrix"
        assert args.energy == 2.0
        assert args.no_cache is True

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["tomography", "cfg.json"])


class TestRuns:
    def test_free_forward_run(self, tmp_path, output):
        config = write_config(
            tmp_path, {"scenario": "forward", "energy": 1.0, "potential": {"dimension": 2, "name": "free"}}
        )
        status = main(["forward", config, "--points", "16", "--output", str(output), "--no-cache"])
        assert status == 0
        rows = read_rows(output / "farfield.csv")
        assert all(float(r["re"]) == 0.0 and float(r["im"]) == 0.0 for r in rows)
        assert (output / "phi.scfd").exists()
        manifest = json.loads((output / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["stages"][0]["stage"] == "forward"
        assert manifest["artifacts"] == ["farfield.csv", "phi.scfd"]
        assert manifest["config"]["cache_enabled"] is False

    def test_validate_run(self, tmp_path, output):
        config = write_config(tmp_path, {"scenario": "validate", "energy": 1.0, "potential": PLANE_GAUSSIAN})
        status = main(["--log-level", "WARNING", "validate", config, "--output", str(output), "--no-cache"])
        assert status == 0
        (row,) = read_rows(output / "decay.csv")
        assert row["potential"] == "g"
        assert row["passed"] == "1"
        assert len(row["hash"]) == 64

    def test_free_dtn_matches_bessel_ratio(self, tmp_path, output):
        well = {"dimension": 3, "electric": [{"family": "well", "params": {"radius": 1.0, "value": 0.0}}]}
        config = write_config(tmp_path, {"scenario": "dtn", "energy": 1.0, "potential": well, "degree": 2})
        assert main(["dtn", config, "--output", str(output), "--no-cache"]) == 0
        rows = read_rows(output / "dtn.csv")
        assert [int(r["l"]) for r in rows] == [0, 1, 2]
        for r in rows:
            assert float(r["dtn"]) == pytest.approx(float(r["free"]), rel=1e-8)

    def test_smatrix_run_uses_cache(self, tmp_path, output):
        data = {
            "scenario": "smatrix",
            "energy": 1.0,
            "degree": 2,
            "potential": PLANE_GAUSSIAN,
            "solver": {"method": "dense"},
            "cache": {"directory": str(tmp_path / "cache")},
        }
        config = write_config(tmp_path, data)
        assert main(["smatrix", config, "--output", str(output)]) == 0
        first = read_rows(output / "smatrix.csv")
        assert len(first) == 25
        assert main(["smatrix", config, "--output", str(output)]) == 0
        stages = json.loads((output / "manifest.json").read_text())["stages"]
        assert stages[0] == {"stage": "smatrix", "status": "ok", "potential": "g", "cache": "hit"}
        assert read_rows(output / "smatrix.csv") == first
        assert (output / "phase_shifts.csv").exists()


    def test_cache_separates_direction_rules(self, tmp_path, output):
        base = {
            "scenario": "smatrix",
            "energy": 1.0,
            "degree": 2,
            "potential": PLANE_GAUSSIAN,
            "solver": {"method": "dense"},
            "cache": {"directory": str(tmp_path / "cache")},
        }
        seen = []
        for rule in (6, 12, 12):
            config = write_config(tmp_path, dict(base, directions_degree=rule), name=f"rule{rule}.json")
            assert main(["smatrix", config, "--output", str(output)]) == 0
            stages = json.loads((output / "manifest.json").read_text())["stages"]
            seen.append(stages[0]["cache"])
        assert seen == ["miss", "miss", "hit"]


class TestRefusals:
    def test_invalid_config(self, tmp_path, output):
        data = {"scenario": "forward", "energy": 1.0, "potential": PLANE_GAUSSIAN, "grid": {"points": 33}}
        config = write_config(tmp_path, data)
        assert main(["forward", config, "--output", str(output)]) == 2
        error = json.loads((output / "error.json").read_text())
        assert error["error"] == "ConfigError"
        assert error["record"] == {"path": "grid/points"}

    def test_scenario_mismatch(self, tmp_path, output):
        config = write_config(tmp_path, {"scenario": "validate", "energy": 1.0, "potential": PLANE_GAUSSIAN})
        assert main(["forward", config, "--output", str(output)]) == 2

    def test_pair_differing_outside_ball(self, tmp_path, output):
        other = dict(PLANE_GAUSSIAN, name="h", electric=[{"family": "gaussian", "params": {"width": 0.3}}])
        data = {"scenario": "uniqueness", "energy": 1.0, "pair": [PLANE_GAUSSIAN, other], "ball_radius": 0.5}
        config = write_config(tmp_path, data)
        assert main(["uniqueness", config, "--output", str(output), "--no-cache"]) == 4
        error = json.loads((output / "error.json").read_text())
        assert error["error"] == "AgreementError"
        assert error["record"]["role"] == "V"
        assert np.linalg.norm(error["record"]["point"]) >= 0.5
        manifest = json.loads((output / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["error"]["exit_code"] == 4
