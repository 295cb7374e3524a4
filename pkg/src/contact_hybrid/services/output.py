"""Writers for trajectories, event logs and run reports."""

import csv
import json
import logging
from pathlib import Path

from contact_hybrid.core.executor import Execution

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
EVENTS_FILE = "events.jsonl"
REPORT_FILE = "report.json"


def trajectory_header(execution: Execution) -> list[str]:
    system = execution.system
    names = list(system.coordinate_names) or [f"q{i}" for i in range(system.dim)]
    return (
        ["t", "mode"]
        + [f"q:{name}" for name in names]
        + [f"qdot:{name}" for name in names]
        + [f"lambda:{system.label(i)}" for i in range(system.n_constraints)]
    )


def trajectory_rows(execution: Execution):
    """One row per sample: time, mode id, q, q̇ and the full multiplier vector.

    Floats are written with ``repr`` so that the CSV round-trips to the same doubles.
    """
    system = execution.system
    for segment in execution.segments:
        mode_id = system.mode_id(segment.mode)
        for t, x, lam in zip(segment.times, segment.states, segment.multipliers, strict=True):
            yield [repr(float(t)), mode_id] + [repr(float(v)) for v in x] + [
                repr(float(v)) for v in lam
            ]


def write_trajectory(execution: Execution, path: Path) -> int:
    """Write the sampled trajectory as CSV and return the number of rows."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(trajectory_header(execution))
        for row in trajectory_rows(execution):
            writer.writerow(row)
            count += 1
    logger.info("wrote path=%s rows=%d", path, count)
    return count


def write_events(execution: Execution, path: Path) -> int:
    """Write one JSON object per transition and return the number of lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for event in execution.events:
            f.write(json.dumps(event.to_dict(execution.system)) + "\n")
    logger.info("wrote path=%s events=%d", path, len(execution.events))
    return len(execution.events)


def write_report(report: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    logger.info("wrote path=%s", path)
