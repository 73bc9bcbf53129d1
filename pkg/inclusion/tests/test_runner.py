"""
Tests for run configuration, report files and the command line.
"""
import json

import pandas as pd
import pytest
from pydantic import ValidationError

from inclusion.exceptions import ConfigError
from inclusion.models import RunConfig, load_config
from runner.cli import main
from runner.pipeline import Overrides, resolve_settings, self_test

DISK_CAVITY = {
    "schema_version": 1,
    "name": "disk_cavity",
    "map": {"gamma": 1.0, "a": [{"re": 0.5, "im": 0.0}]},
    "material": {"lambda": 1.0, "mu": 1.0, "cavity": True},
    "loading": {"B": [{"re": 1.0}, {"im": 0.5}]},
    "truncation": 6,
}

ELLIPSE_INCLUSION = {
    "schema_version": 1,
    "name": "ellipse_inclusion",
    "map": {"gamma": 1.0, "a": [{"re": 0.0}, {"re": 0.3}]},
    "material": {"lambda": 1.0, "mu": 1.0, "lambda_int": 2.0, "mu_int": 3.0},
    "loading": {"A": [{"re": 0.5}], "B": [{"re": 1.0}]},
    "truncation": 8,
}


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestLoadConfig:
    def test_valid(self, tmp_path):
        config = load_config(write_config(tmp_path, {**DISK_CAVITY, "grid": "-2,2,-2,2,5,5"}))
        assert config.material.lambda_ext == 1.0
        assert config.grid.nx == 5
        assert config.loading.to_loading().B[1] == 0.5j

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_not_an_object(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, [1, 2, 3]))

    def test_schema_version(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {**DISK_CAVITY, "schema_version": 2}))

    def test_empty_loading(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(write_config(tmp_path, {**DISK_CAVITY, "loading": {}}))

    def test_settings_precedence(self):
        config = RunConfig.model_validate(DISK_CAVITY)
        settings = resolve_settings("field", config, Overrides(truncation=10))
        assert settings.truncation == 10
        assert settings.grid.nx == 41 and settings.grid.x1 == pytest.approx(3.0)
        assert settings.oracle is False
        assert resolve_settings("oracle-check", config, Overrides()).oracle is True

    def test_explicit_zero_override(self):
        config = RunConfig.model_validate({**DISK_CAVITY, "tolerance": 1e-6})
        assert resolve_settings("solve", config, Overrides(tolerance=0.0)).tolerance == 0.0
        assert resolve_settings("solve", config, Overrides()).tolerance == 1e-6


class TestCommandLine:
    def test_solve_writes_reports(self, tmp_path):
        config = write_config(tmp_path, DISK_CAVITY)
        out = tmp_path / "out"
        assert main(["solve", "--config", str(config), "--out-dir", str(out), "--log-level", "WARNING"]) == 0
        assert {p.name for p in out.iterdir()} == {"solution.json", "summary.txt", "manifest.json"}
        solution = json.loads((out / "solution.json").read_text())
        assert solution["mode"] == "cavity"
        assert set(solution["coefficients"]) == {"xe_plus", "xe_minus"}
        assert solution["diagnostics"]["converged"] is True
        assert solution["diagnostics"]["traction_free_residual"] < 1e-3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["material"]["lambda"] == 1.0
        assert "numpy" in manifest["versions"]

    def test_field_grid(self, tmp_path):
        config = write_config(tmp_path, ELLIPSE_INCLUSION)
        out = tmp_path / "out"
        code = main(["field", "--config", str(config), "--grid=-2,2,-2,2,3,3", "--out-dir", str(out)])
        assert code == 0
        frame = pd.read_csv(out / "field.csv")
        assert len(frame) == 9
        assert set(frame["region"]) == {"interior", "exterior"}
        solution = json.loads((out / "solution.json").read_text())
        assert "displacement_residual" in solution["diagnostics"]

    def test_oracle_mismatch_still_reports(self, tmp_path):
        payload = {**DISK_CAVITY, "oracle": {"nodes": 16, "samples": 8, "tolerance": 1e-300}}
        config = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert main(["oracle-check", "--config", str(config), "--out-dir", str(out)]) == 5
        assert (out / "oracle.json").exists()

    def test_oracle_gate_is_absolute(self, tmp_path):
        """A large loading keeps the relative discrepancy small but fails the absolute bound."""
        payload = {
            **DISK_CAVITY,
            "loading": {"B": [{"re": 1e12}]},
            "oracle": {"nodes": 64, "samples": 16, "tolerance": 1e-3},
        }
        out = tmp_path / "out"
        assert main(["oracle-check", "--config", str(write_config(tmp_path, payload)), "--out-dir", str(out)]) == 5
        report = json.loads((out / "oracle.json").read_text())
        assert report["far_max"] > 1e-3
        assert report["relative_far"] < 1e-3

    def test_missing_config_flag(self):
        assert main(["solve"]) == 2

    def test_invalid_config(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.json")]) == 2
        bad_material = {**DISK_CAVITY, "material": {"lambda": 1.0, "mu": -1.0}}
        assert main(["solve", "--config", str(write_config(tmp_path, bad_material))]) == 2

    def test_unwritable_output(self, tmp_path):
        config = write_config(tmp_path, DISK_CAVITY)
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        assert main(["solve", "--config", str(config), "--out-dir", str(blocker / "out")]) == 6

    def test_self_test(self, capsys):
        assert main(["self-test"]) == 0
        assert "disk cavity m=1" in capsys.readouterr().out

    def test_self_test_table(self):
        passed, table = self_test(order=6)
        assert passed
        assert list(table.columns) == ["check", "error", "tolerance", "passed"]
