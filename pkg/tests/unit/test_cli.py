"""Unit tests for the command-line front door."""

import json
from unittest.mock import patch

import pytest

from config.settings import settings
from noiselab.cli import build_parser, load_config_file, read_eps_file, resolve_config, run
from noiselab.core.exceptions import QuadratureError, UsageError
from noiselab.models.schemas import CheckResult, CommandReport, ScheduleKind


def _report(passed: bool) -> CommandReport:
    return CommandReport(
        command="measures",
        version="test",
        config={},
        results={},
        checks=[CheckResult(name="fake", passed=passed, margin=0.0)],
    )


class TestConfigFile:
    """Test cases for config file loading and precedence."""

    @pytest.fixture
    def config_path(self, tmp_path):
        """Config file with comments, lists and a hyphenated key."""
        path = tmp_path / "run.cfg"
        path.write_text(
            "# lab run\n"
            "alpha = 1.5\n"
            "N = 8   # small\n"
            "suite-size = 5\n"
            "scan_points = 16:0.5, 32:0.25\n"
            "k_list = 100, 1000\n",
            encoding="utf-8",
        )
        return path

    def test_values_parsed(self, config_path):
        """Test that the file is read into a valid configuration."""
        args = build_parser().parse_args(["gram", "--config", str(config_path)])
        cfg = resolve_config(args)

        assert cfg.alpha == 1.5
        assert cfg.N == 8
        assert cfg.suite_size == 5
        assert cfg.scan_points == [(16, 0.5), (32, 0.25)]
        assert cfg.k_list == [100, 1000]

    def test_flags_override_file(self, config_path):
        """Test defaults < file < flags."""
        args = build_parser().parse_args(["gram", "--config", str(config_path), "--N", "16"])
        cfg = resolve_config(args)

        assert cfg.N == 16
        assert cfg.alpha == 1.5
        assert cfg.T == 1.0

    def test_unknown_key(self, tmp_path):
        """Test that unknown keys name the key and line."""
        path = tmp_path / "bad.cfg"
        path.write_text("alpha = 2\nbeta = 3\n", encoding="utf-8")

        with pytest.raises(UsageError) as exc_info:
            load_config_file(str(path))

        assert "beta" in str(exc_info.value)
        assert exc_info.value.details == {"key": "beta", "line": 2}

    def test_missing_separator(self, tmp_path):
        """Test that a line without '=' is rejected."""
        path = tmp_path / "bad.cfg"
        path.write_text("alpha 2\n", encoding="utf-8")

        with pytest.raises(UsageError) as exc_info:
            load_config_file(str(path))

        assert "expected 'key = value'" in str(exc_info.value)

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a usage error."""
        with pytest.raises(UsageError) as exc_info:
            load_config_file(str(tmp_path / "absent.cfg"))

        assert "Cannot read config file" in str(exc_info.value)

    def test_invalid_value(self):
        """Test that validation failures become usage errors."""
        args = build_parser().parse_args(["kernel", "--alpha", "0.5"])

        with pytest.raises(UsageError) as exc_info:
            resolve_config(args)

        assert "Invalid configuration" in str(exc_info.value)

    def test_schedule_flag(self):
        """Test that schedule names map to the enum."""
        cfg = resolve_config(build_parser().parse_args(["zn-scan", "--schedule", "subcritical"]))

        assert cfg.schedule is ScheduleKind.SUBCRITICAL


class TestEpsFile:
    """Test cases for custom schedule files."""

    def test_pairs(self, tmp_path):
        """Test comma and whitespace separated pairs."""
        path = tmp_path / "eps.txt"
        path.write_text("64, 0.5\n128 0.25\n# done\n", encoding="utf-8")

        assert read_eps_file(str(path)) == [(64, 0.5), (128, 0.25)]

    def test_malformed_line(self, tmp_path):
        """Test that a line with three fields is rejected."""
        path = tmp_path / "eps.txt"
        path.write_text("64 0.5 1\n", encoding="utf-8")

        with pytest.raises(UsageError) as exc_info:
            read_eps_file(str(path))

        assert "Malformed eps file line" in str(exc_info.value)


class TestRun:
    """Test cases for exit codes and report files."""

    def test_unknown_command(self):
        """Test that an unknown subcommand exits with 1."""
        assert run(["bogus"]) == 1

    def test_unknown_flag(self):
        """Test that an unknown flag exits with 1."""
        assert run(["kernel", "--no-such-flag"]) == 1

    def test_simulate_requires_seed(self, tmp_path):
        """Test that simulate refuses to run unseeded."""
        assert run(["simulate", "--out", str(tmp_path)]) == 1

    def test_measures_writes_reports(self, tmp_path):
        """Test a full measures run with both output formats."""
        code = run(["measures", "--suite-size", "50", "--out", str(tmp_path)])

        assert code == 0
        assert (tmp_path / "measures_sandwich.csv").exists()
        summary = json.loads((tmp_path / "measures.json").read_text(encoding="utf-8"))
        assert summary["command"] == "measures"
        assert summary["config"]["suite_size"] == 50
        assert all(check["pass"] for check in summary["checks"])

    def test_json_only(self, tmp_path):
        """Test that --format json skips the CSV bodies."""
        assert run(["measures", "--suite-size", "10", "--format", "json", "--out", str(tmp_path)]) == 0

        assert (tmp_path / "measures.json").exists()
        assert not list(tmp_path.glob("*.csv"))

    def test_failed_check_exits_with_2(self):
        """Test that a report with a failing check exits with 2."""
        with patch.dict("noiselab.cli.COMMANDS", {"measures": lambda cfg: _report(False)}):
            assert run(["measures"]) == 2

    def test_numeric_failure_exits_with_2(self):
        """Test that numerical errors exit with 2."""
        def failing(cfg):
            raise QuadratureError("tolerance not met", error_code="QUAD_TOL")

        with patch.dict("noiselab.cli.COMMANDS", {"measures": failing}):
            assert run(["measures"]) == 2

    def test_unexpected_error_exits_with_1(self, capsys):
        """Test that errors outside the domain hierarchy are reported instead of escaping."""
        def broken(cfg):
            raise RuntimeError("lost the table")

        with patch.dict("noiselab.cli.COMMANDS", {"measures": broken}):
            assert run(["measures"]) == 1

        assert "lost the table" in capsys.readouterr().err

    def test_tol_quad_is_scoped_to_the_run(self):
        """Test that --tol-quad applies during the command and is restored after it."""
        previous = settings.quad_rtol
        seen = []

        def recording(cfg):
            seen.append(settings.quad_rtol)
            return _report(True)

        with patch.dict("noiselab.cli.COMMANDS", {"measures": recording}):
            assert run(["measures", "--tol-quad", "1e-6"]) == 0

        assert seen == [1e-6]
        assert settings.quad_rtol == previous


class TestEndToEnd:
    """Test cases running each command at small sizes."""

    @pytest.fixture
    def simulate_config(self, tmp_path):
        """Two full-cover scan points, where the sampled correlation is exactly 1."""
        path = tmp_path / "sim.cfg"
        path.write_text("scan_points = 16:1.0, 32:1.0\nsamples = 500\n", encoding="utf-8")
        return path

    @pytest.mark.parametrize("command,extra", [
        ("gram", ["--N", "16"]),
        ("zn-scan", ["--schedule", "subcritical", "--n-max", "1024"]),
        ("zn-scan", ["--schedule", "supercritical", "--n-max", "1024"]),
        ("separation", ["--n-max", "256"]),
        ("fock", ["--suite-size", "10"]),
    ])
    def test_command_writes_reports(self, tmp_path, command, extra):
        """Test exit code 0 with both the CSV and JSON reports written."""
        assert run([command, "--out", str(tmp_path)] + extra) == 0

        stem = command.replace("-", "_")
        assert (tmp_path / f"{stem}.json").exists()
        assert list(tmp_path.glob(f"{stem}_*.csv"))

    @pytest.mark.slow
    @pytest.mark.parametrize("command", ["kernel", "spectrum"])
    def test_spectral_commands_write_reports(self, tmp_path, command):
        """Test the kernel and spectrum commands with their defaults."""
        assert run([command, "--out", str(tmp_path)]) == 0

        assert (tmp_path / f"{command}.json").exists()
        assert list(tmp_path.glob(f"{command}_*.csv"))

    def test_simulate_writes_lag_sum_columns(self, tmp_path, simulate_config):
        """Test the simulate report, including the lag-sum cross values."""
        assert run(["simulate", "--seed", "3", "--config", str(simulate_config), "--out", str(tmp_path)]) == 0

        header = (tmp_path / "simulate_mc.csv").read_text(encoding="utf-8").splitlines()[0]
        assert "var_lagsum" in header
        assert "corr_lagsum" in header
        assert (tmp_path / "simulate.json").exists()

    def test_equal_seeds_give_identical_csv(self, tmp_path, simulate_config):
        """Test byte-identical CSV bodies for two runs with the same seed."""
        first, second = tmp_path / "first", tmp_path / "second"
        for out in (first, second):
            assert run(["simulate", "--seed", "5", "--config", str(simulate_config), "--out", str(out)]) == 0

        assert (first / "simulate_mc.csv").read_bytes() == (second / "simulate_mc.csv").read_bytes()

    def test_separation_reports_target_margin(self, tmp_path):
        """Test that a fixed-measure run reports the distance left above the 0.05 target."""
        run(["separation", "--mes", "0.5", "--n-max", "256", "--out", str(tmp_path)])

        results = json.loads((tmp_path / "separation.json").read_text(encoding="utf-8"))["results"]
        for system in ("A", "B"):
            relative = results[f"relative_distance_{system}"]
            assert results[f"target_margin_{system}"] == pytest.approx(relative[-1] - 0.05)
