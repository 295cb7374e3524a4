"""Integration tests for the run command.

These tests drive the CLI end to end on catalog scenarios and inspect the
exit code, the JSON report and the written files.
"""

import csv
import json
from unittest.mock import patch

import numpy as np
import pytest

from contact_hybrid.cli import main


def run_json(capsys, *argv):
    code = main(["--json", "run", *argv])
    return code, json.loads(capsys.readouterr().out)


class TestBallDrop:
    """run ball_floor."""

    def test_two_intervals_one_impact(self, tmp_path, capsys):
        code, report = run_json(capsys, "ball_floor", "--out", str(tmp_path))
        assert code == 0
        assert report["word"] == ["none", "n1"]
        assert len(report["time_domain"]) == 2
        assert report["transitions"] == 1
        assert all(r["passed"] for r in report["invariants"])

        events = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
        assert len(events) == 1
        assert events[0]["time"] == pytest.approx(np.sqrt(2 / 9.81), rel=1e-8)
        assert events[0]["margins"]

    def test_trajectory_round_trips_exactly(self, tmp_path):
        """Values parsed back from the CSV equal the in-memory samples bit for bit."""
        from contact_hybrid.models.scenario import load_scenario, resolve_scenario
        from contact_hybrid.services.run import RunService

        config = load_scenario(resolve_scenario("ball_floor"))
        report = RunService(config, output_dir=tmp_path, check=False).run()
        with open(tmp_path / "trajectory.csv", newline="") as f:
            rows = list(csv.reader(f))[1:]

        samples = [
            (t, x, lam)
            for segment in report.execution.segments
            for t, x, lam in zip(segment.times, segment.states, segment.multipliers, strict=True)
        ]
        assert len(rows) == len(samples)
        for row, (t, x, lam) in zip(rows, samples, strict=True):
            assert float(row[0]) == t
            assert [float(v) for v in row[2:6]] == list(x)
            assert [float(v) for v in row[6:]] == list(lam)

    def test_overrides_take_precedence(self, tmp_path, capsys):
        """Command-line values override the scenario file."""
        code, report = run_json(
            capsys,
            "ball_floor",
            "--set",
            "height=0.1",
            "--t-end",
            "0.2",
            "--delta-t",
            "0.01",
            "--out",
            str(tmp_path),
        )
        assert code == 0
        assert report["t_end"] == 0.2
        assert report["settings"]["delta_t"] == 0.01
        assert report["final_time"] == pytest.approx(0.2)

    def test_scenario_file_path(self, tmp_path, scenario_file, capsys):
        """A scenario given as a path runs like a catalog id."""
        path = scenario_file(
            {"scenario": "ball_floor", "parameters": {"height": 0.2}, "run": {"t_end": 0.5}}
        )
        code, report = run_json(capsys, str(path), "--out", str(tmp_path / "out"))
        assert code == 0
        assert report["word"] == ["none", "n1"]

    def test_invalid_file_exits_1(self, tmp_path, scenario_file, capsys):
        path = scenario_file("scenario: ball_floor\nparameters:\n  height: -1.0\n")
        code = main(["run", str(path), "--out", str(tmp_path)])
        assert code == 1
        assert "parameters.height" in capsys.readouterr().out


class TestCurvedConstraints:
    """run ptex_a .. ptex_d: higher-order trends decide the first transition."""

    @pytest.mark.parametrize(
        "scenario_id, word",
        [
            ("ptex_a", ["none"]),
            ("ptex_b", ["none", "n1"]),
            ("ptex_c", ["n1", "none"]),
            ("ptex_d", ["n1"]),
        ],
    )
    def test_words(self, tmp_path, capsys, scenario_id, word):
        code, report = run_json(capsys, scenario_id, "--out", str(tmp_path))
        assert code == 0
        assert report["word"] == word
        assert report["termination"] == "ReachedTEnd"


class TestBallCeiling:
    """run ball_ceiling: two transitions at one event time."""

    def test_double_transition(self, tmp_path, capsys):
        code, report = run_json(capsys, "ball_ceiling", "--out", str(tmp_path))
        assert code == 0
        assert report["word"] == ["none", "n1", "none"]
        first, second = report["time_domain"][1]
        assert first == second
        assert all(r["passed"] for r in report["invariants"])


@pytest.mark.slow
class TestSlidingPoint:
    """run sliding_point: a slow arrival keeps the ground and comes to rest."""

    def test_slow_arrival_rests_in_the_corner(self, tmp_path, capsys):
        code, report = run_json(
            capsys,
            "sliding_point",
            "--set",
            "foot=0.05",
            "--set",
            "speed=0.1",
            "--t-end",
            "1.0",
            "--out",
            str(tmp_path),
        )
        assert code == 0
        active = report["final_mode"].split("+")
        assert "n1" in active and "n2" in active
        with open(tmp_path / "trajectory.csv", newline="") as f:
            last = list(csv.reader(f))[-1]
        assert float(last[4]) == pytest.approx(0.0, abs=1e-9)
        assert float(last[5]) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
class TestRockingBlock:
    """run rocking_block with and without the pseudo-impulse window."""

    def test_zero_window_is_zeno(self, tmp_path, capsys):
        """Without the window impacts accumulate geometrically."""
        code, report = run_json(capsys, "rocking_block", "--delta-t", "0", "--out", str(tmp_path))
        assert code == 0
        assert report["termination"] in ("ZenoProjected", "ZenoTruncated")
        assert report["zeno"]
        zeno = report["zeno"][0]
        assert 0.0 < zeno["ratio"] < 1.0
        assert zeno["events"] >= 8

        events = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
        times = sorted({e["time"] for e in events if e["kind"] != "zeno"})
        gaps = np.diff(times)
        assert len(gaps) >= 6
        assert np.all(gaps[-6:][1:] < gaps[-6:][:-1])

    def test_rejected_projection_truncates(self, tmp_path, capsys):
        """A rejected Zeno projection ends the run as truncated, not as a diagnostic."""
        from contact_hybrid.errors import ProjectionRejectedError

        error = ProjectionRejectedError("n1+t1+n2", "penetration n2=1.000e-03")
        with patch("contact_hybrid.core.zeno.project_limit", side_effect=error):
            code, report = run_json(
                capsys, "rocking_block", "--delta-t", "0", "--out", str(tmp_path)
            )
        assert code == 0
        assert report["termination"] == "ZenoTruncated"
        assert report["diagnostic"] is None
        zeno = report["zeno"][-1]
        assert zeno["projected"] is False
        assert zeno["rejected"] == "penetration n2=1.000e-03"

    def test_abort_policy_truncates(self, tmp_path, capsys):
        code, report = run_json(
            capsys,
            "rocking_block",
            "--delta-t",
            "0",
            "--zeno-policy",
            "abort",
            "--out",
            str(tmp_path),
        )
        assert code == 0
        assert report["termination"] == "ZenoTruncated"

    def test_window_settles(self, tmp_path, capsys):
        """With the window the block lands once and rests on both corners."""
        code, report = run_json(capsys, "rocking_block", "--out", str(tmp_path))
        assert code == 0
        assert report["termination"] == "ReachedTEnd"
        assert not report["zeno"]
        event_times = {interval[0] for interval in report["time_domain"][1:]}
        assert len(event_times) == 1
        active = report["final_mode"].split("+")
        assert "n1" in active and "n2" in active
        assert all(r["passed"] for r in report["invariants"])


@pytest.mark.slow
class TestHexapod:
    """run planar_hexapod: massless legs through several mode changes."""

    def test_runs_through_mode_changes(self, tmp_path, capsys):
        code, report = run_json(capsys, "planar_hexapod", "--no-check", "--out", str(tmp_path))
        assert report["termination"] != "Diagnostic", report["diagnostic_message"]
        assert code == 0
        assert report["transitions"] >= 3
        assert report["final_time"] == pytest.approx(report["t_end"])
