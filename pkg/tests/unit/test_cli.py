"""Unit tests for CLI module."""

import json
import logging
from unittest.mock import patch

import pytest


class TestParsePairs:
    """Tests for parse_pairs."""

    def test_parses_floats(self):
        from contact_hybrid.cli import parse_pairs

        assert parse_pairs(["height=2", " mu = 0.5"], "--set") == {"height": 2.0, "mu": 0.5}
        assert parse_pairs(None, "--set") == {}

    @pytest.mark.parametrize("pair", ["height", "=1.0", "height=tall"])
    def test_rejects_malformed(self, pair):
        """Missing key, missing '=' or a non-number raise ValueError naming the option."""
        from contact_hybrid.cli import parse_pairs

        with pytest.raises(ValueError, match="--set"):
            parse_pairs([pair], "--set")


class TestParseValues:
    """Tests for parse_values."""

    def test_list(self):
        from contact_hybrid.cli import parse_values

        assert parse_values("0.1,0.2, 0.5") == [0.1, 0.2, 0.5]

    def test_inclusive_range(self):
        """start:stop:count includes both ends."""
        from contact_hybrid.cli import parse_values

        assert parse_values("0:1:5") == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        assert parse_values("0.3:1:1") == [0.3]

    @pytest.mark.parametrize("text", ["0:1", "0:1:0"])
    def test_bad_range(self, text):
        from contact_hybrid.cli import parse_values

        with pytest.raises(ValueError):
            parse_values(text)


class TestConfigureLogging:
    """Tests for configure_logging."""

    def test_default_is_warning(self):
        from contact_hybrid.cli import configure_logging

        with patch.dict("os.environ", {}, clear=True):
            assert configure_logging() == logging.WARNING

    def test_flags_win(self):
        """--verbose forces DEBUG and --quiet forces ERROR."""
        from contact_hybrid.cli import configure_logging

        with patch.dict("os.environ", {"CONTACT_HYBRID_LOG": "INFO"}):
            assert configure_logging(verbose=True) == logging.DEBUG
            assert configure_logging(quiet=True) == logging.ERROR

    def test_env_override(self):
        from contact_hybrid.cli import configure_logging

        with patch.dict("os.environ", {"CONTACT_HYBRID_LOG": "info"}):
            assert configure_logging() == logging.INFO

    def test_unknown_level_falls_back(self):
        from contact_hybrid.cli import configure_logging

        with patch.dict("os.environ", {"CONTACT_HYBRID_LOG": "chatty"}):
            assert configure_logging() == logging.WARNING


class TestCreateParser:
    """Tests for the argument parser."""

    def test_run_options(self, tmp_path):
        """Run options parse into the namespace."""
        from contact_hybrid.cli import create_parser

        args = create_parser().parse_args(
            [
                "run",
                "rocking_block",
                "--delta-t",
                "0",
                "--zeno-policy",
                "abort",
                "--set",
                "tilt=0.05",
                "--tol",
                "tol_lin=1e-9",
                "--out",
                str(tmp_path),
            ]
        )
        assert args.scenario == "rocking_block"
        assert args.delta_t == 0.0
        assert args.zeno_policy == "abort"
        assert args.set == ["tilt=0.05"]
        assert args.tol == ["tol_lin=1e-9"]
        assert args.out == tmp_path
        assert args.no_check is False

    def test_invalid_zeno_policy(self):
        from contact_hybrid.cli import create_parser

        with pytest.raises(SystemExit):
            create_parser().parse_args(["run", "ball_floor", "--zeno-policy", "retry"])

    def test_sweep_requires_param_and_values(self):
        from contact_hybrid.cli import create_parser

        with pytest.raises(SystemExit):
            create_parser().parse_args(["sweep", "ball_floor"])


class TestMain:
    """Tests for main and the command handlers."""

    def test_no_command_prints_help(self, capsys):
        from contact_hybrid.cli import main

        assert main([]) == 0
        assert "usage" in capsys.readouterr().out

    def test_list_json(self, capsys):
        """list --json describes every catalog entry."""
        from contact_hybrid.cli import main

        assert main(["--json", "list"]) == 0
        entries = json.loads(capsys.readouterr().out)
        assert len(entries) == 9
        hexapod = next(e for e in entries if e["id"] == "planar_hexapod")
        assert hexapod["massless"] is True
        assert "kappa_p" in hexapod["parameters"]

    def test_list_text(self, capsys):
        from contact_hybrid.cli import main

        assert main(["list"]) == 0
        out = capsys.readouterr().out
        assert "rocking_block" in out
        assert "[massless limbs]" in out
        assert "sweepable: impact_speed, tilt, mu" in out

    def test_validate_valid(self, scenario_file, capsys):
        from contact_hybrid.cli import main

        path = scenario_file({"scenario": "ball_floor", "parameters": {"height": 2.0}})
        assert main(["validate", str(path)]) == 0
        assert f"Scenario is valid: {path}" in capsys.readouterr().out

    def test_validate_json_errors(self, scenario_file, capsys):
        """Schema errors are listed with their lines."""
        from contact_hybrid.cli import main

        path = scenario_file("scenario: ball_floor\nrun:\n  delta_t: -1\n")
        assert main(["--json", "validate", str(path)]) == 1
        output = json.loads(capsys.readouterr().out)
        assert output["valid"] is False
        assert output["errors"][0].startswith("$.run.delta_t:")
        assert "(line 3)" in output["errors"][0]

    def test_validate_text_errors(self, scenario_file, capsys):
        from contact_hybrid.cli import main

        path = scenario_file({"scenario": "trampoline"})
        assert main(["validate", str(path)]) == 1
        assert "Validation failed with 1 error(s):" in capsys.readouterr().out

    def test_validate_missing_file(self, tmp_path, capsys):
        from contact_hybrid.cli import main

        assert main(["--json", "validate", str(tmp_path / "missing.yaml")]) == 1
        output = json.loads(capsys.readouterr().out)
        assert output["valid"] is False
        assert "missing.yaml" in output["error"]

    def test_run_json(self, tmp_path, capsys):
        """A successful run exits 0 and writes its outputs."""
        from contact_hybrid.cli import main

        code = main(
            ["--json", "run", "ball_floor", "--t-end", "0.6", "--set", "height=0.5", "--out", str(tmp_path)]
        )
        assert code == 0
        output = json.loads(capsys.readouterr().out)
        assert output["success"] is True
        assert output["word"] == ["none", "n1"]
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "events.jsonl").exists()
        assert (tmp_path / "report.json").exists()

    def test_run_text(self, tmp_path, capsys):
        from contact_hybrid.cli import main

        assert main(["run", "ball_floor", "--t-end", "0.6", "--no-check", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "Termination: ReachedTEnd" in out
        assert "Final mode: n1" in out

    def test_run_bad_override(self, tmp_path, capsys):
        """An invalid parameter is an error with exit code 1."""
        from contact_hybrid.cli import main

        code = main(["--json", "run", "ball_floor", "--set", "mass=-1", "--out", str(tmp_path)])
        assert code == 1
        output = json.loads(capsys.readouterr().out)
        assert output["success"] is False
        assert "mass" in output["error"]

    def test_run_diagnostic_exits_2(self, tmp_path, capsys):
        """A diagnostic termination exits with 2."""
        from contact_hybrid.cli import main
        from contact_hybrid.errors import NoSolutionError

        error = NoSolutionError("PIV", ["n1"], {})
        with patch("contact_hybrid.core.executor.select_transition", side_effect=error):
            code = main(["run", "ball_floor", "--no-check", "--out", str(tmp_path)])
        assert code == 2
        assert "Diagnostic: NoSolution" in capsys.readouterr().out

    def test_check_json(self, capsys):
        from contact_hybrid.cli import main

        assert main(["--json", "check", "ball_floor", "--t-end", "0.6"]) == 0
        output = json.loads(capsys.readouterr().out)
        assert output["success"] is True
        assert len(output["invariants"]) == 10

    def test_sweep_bad_values(self, tmp_path, capsys):
        from contact_hybrid.cli import main

        code = main(
            ["sweep", "ball_floor", "--param", "height", "--values", "1:2", "--out", str(tmp_path)]
        )
        assert code == 1
        assert "Error: range must be start:stop:count" in capsys.readouterr().out

    def test_sweep_json(self, tmp_path, capsys):
        from contact_hybrid.cli import main

        code = main(
            [
                "--json",
                "sweep",
                "ball_floor",
                "--param",
                "height",
                "--values",
                "0.05,0.1",
                "--t-end",
                "0.3",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        output = json.loads(capsys.readouterr().out)
        assert [p["value"] for p in output["points"]] == [0.05, 0.1]
        assert output["threshold"] == 0.1
        assert (tmp_path / "sweep.csv").exists()
