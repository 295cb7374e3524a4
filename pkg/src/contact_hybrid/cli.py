"""CLI entry point for contact-hybrid."""

import argparse
import logging
import os
import sys
from pathlib import Path

from contact_hybrid import __version__

# Environment variable overriding the default log level
LOG_ENV_VAR = "CONTACT_HYBRID_LOG"

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False, quiet: bool = False) -> int:
    """Configure stderr logging and return the level in effect.

    ``--verbose`` forces DEBUG and ``--quiet`` forces ERROR; otherwise CONTACT_HYBRID_LOG
    (DEBUG/INFO/WARNING/ERROR) applies, defaulting to WARNING.
    """
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.ERROR
    else:
        name = os.environ.get(LOG_ENV_VAR, "WARNING").strip().upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    logging.getLogger("jax").setLevel(max(level, logging.WARNING))
    return level


def parse_pairs(pairs: list[str] | None, option: str) -> dict[str, float]:
    """Parse repeated ``KEY=VALUE`` options into floats.

    Raises:
        ValueError: If a pair is malformed or its value is not a number.
    """
    result = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{option} expects KEY=VALUE, got {pair!r}")
        try:
            result[key.strip()] = float(value)
        except ValueError:
            raise ValueError(f"{option} {key.strip()}: {value!r} is not a number") from None
    return result


def parse_values(text: str) -> list[float]:
    """Parse ``a,b,c`` or ``start:stop:count`` (inclusive, evenly spaced)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("range count must be at least 1")
        if count == 1:
            return [start]
        step = (stop - start) / (count - 1)
        return [start + i * step for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _print_error(args: argparse.Namespace, message: str) -> None:
    if getattr(args, "json", False):
        import json

        print(json.dumps({"success": False, "error": message}))
    else:
        print(f"Error: {message}")


def _load(args: argparse.Namespace):
    """Load the scenario named on the command line with its overrides applied."""
    from contact_hybrid.models.scenario import load_scenario, resolve_scenario, with_overrides

    config = load_scenario(resolve_scenario(args.scenario))
    run = {
        "delta_t": args.delta_t,
        "t_end": args.t_end,
        "sample_dt": args.sample_dt,
        "zeno_policy": args.zeno_policy,
        "seed": args.seed,
        "strict_scope": True if args.strict_scope else None,
        "strict_uniqueness": True if args.strict_uniqueness else None,
    }
    return with_overrides(
        config,
        run=run,
        tolerances=parse_pairs(args.tol, "--tol"),
        parameters=parse_pairs(args.set, "--set"),
    )


def add_global_options(parser: argparse.ArgumentParser) -> None:
    """Add global options that apply to all commands."""
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "--json",
        action="store_true",
        help="Output in JSON format (for scripting)",
    )
    parser.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Suppress non-essential output",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Enable debug output",
    )


def add_run_options(parser: argparse.ArgumentParser) -> None:
    """Options shared by run, sweep and check; they override the scenario file."""
    parser.add_argument("scenario", help="Catalog id or path to a scenario YAML file")
    parser.add_argument("--delta-t", type=float, metavar="SECONDS", help="Pseudo-impulse window")
    parser.add_argument("--t-end", type=float, metavar="SECONDS", help="Simulation end time")
    parser.add_argument(
        "--sample-dt", type=float, metavar="SECONDS", help="Trajectory sampling interval"
    )
    parser.add_argument(
        "--zeno-policy", choices=["project", "abort"], help="What to do on Zeno detection"
    )
    parser.add_argument(
        "--strict-scope",
        action="store_true",
        help="Use the full touching scope for force-based mode selection",
    )
    parser.add_argument(
        "--strict-uniqueness",
        action="store_true",
        help="Fail when several inequivalent modes are admissible",
    )
    parser.add_argument("--seed", type=int, help="Seed for randomized invariant checks")
    parser.add_argument(
        "--tol",
        action="append",
        metavar="KEY=VALUE",
        help="Override a tolerance (repeatable)",
    )
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a scenario parameter (repeatable)",
    )


def _progress(args: argparse.Namespace):
    def progress(message: str, current: int, total: int):
        if not args.quiet and not args.json:
            print(f"  [{current}/{total}] {message}")

    return progress


def cmd_run(args: argparse.Namespace) -> int:
    """Handle the run command."""
    import json

    from contact_hybrid.errors import ContactHybridError
    from contact_hybrid.services.run import RunService

    try:
        config = _load(args)
        service = RunService(
            config,
            output_dir=args.out,
            check=not args.no_check,
            progress_callback=_progress(args),
        )
        if not args.quiet and not args.json:
            print(f"Running {config.scenario} -> {args.out}")
            print()
        report = service.run()
    except (ContactHybridError, ValueError) as e:
        _print_error(args, str(e))
        return 1

    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    elif not args.quiet:
        execution = report.execution
        print()
        print(f"Termination: {report.termination.value}")
        if execution.diagnostic:
            print(f"  Diagnostic: {execution.diagnostic}")
            print(f"  {execution.diagnostic_message}")
        print(f"  Transitions: {execution.transitions}")
        print(f"  Final mode: {execution.system.mode_id(execution.final_mode)}")
        for zeno in execution.zeno:
            print(f"  Zeno limit at t={zeno.limit_time:.9g} (ratio {zeno.ratio:.4f})")
        failed = [r for r in report.invariants if not r.passed]
        for result in failed:
            print(f"  Invariant failed: {result.name}: {result.detail}")
        for name, path in report.outputs.items():
            print(f"  {name}: {path}")
    return report.exit_code


def cmd_sweep(args: argparse.Namespace) -> int:
    """Handle the sweep command."""
    import json

    from contact_hybrid.errors import ContactHybridError
    from contact_hybrid.services.sweep import SweepService

    try:
        config = _load(args)
        values = parse_values(args.values)
        service = SweepService(
            config,
            args.param,
            values,
            output_dir=args.out,
            workers=args.workers,
            progress_callback=_progress(args),
        )
        if not args.quiet and not args.json:
            print(f"Sweeping {args.param} over {len(values)} value(s) of {config.scenario}")
            print()
        report = service.sweep()
    except (ContactHybridError, ValueError) as e:
        _print_error(args, str(e))
        return 1

    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    elif not args.quiet:
        print()
        for p in report.points:
            state = "settled" if p.settled else p.termination
            print(f"  {args.param}={p.value:g}: {state}, {p.transitions} transitions")
        if report.threshold is not None:
            print(f"Settle threshold: {args.param}={report.threshold:g}")
        else:
            print("No swept value settled at its first event")
        if report.output:
            print(f"Results written to {report.output}")
    return 2 if report.diagnostics else 0


def cmd_check(args: argparse.Namespace) -> int:
    """Handle the check command."""
    import json

    from contact_hybrid.errors import ContactHybridError
    from contact_hybrid.services.run import RunService

    try:
        config = _load(args)
        report = RunService(config, check=True, progress_callback=_progress(args)).run()
    except (ContactHybridError, ValueError) as e:
        _print_error(args, str(e))
        return 1

    if args.json:
        output = {
            "success": report.exit_code == 0,
            "scenario": report.scenario,
            "termination": report.termination.value,
            "diagnostic": report.diagnostic,
            "invariants": [r.to_dict() for r in report.invariants],
        }
        print(json.dumps(output, indent=2))
    elif not args.quiet:
        print()
        for result in report.invariants:
            mark = "ok" if result.passed else "FAILED"
            line = f"  {result.name}: {mark}"
            if result.detail:
                line += f" ({result.detail})"
            print(line)
        if report.diagnostic:
            print(f"Diagnostic: {report.diagnostic}")
    return report.exit_code


def cmd_list(args: argparse.Namespace) -> int:
    """Handle the list command."""
    import json

    from contact_hybrid.models.catalog import KNOWN_SCENARIOS

    if args.json:
        entries = [
            {
                "id": e.id,
                "description": e.description,
                "massless": e.massless,
                "sweepable": list(e.sweepable),
                "parameters": dict(e.builder.defaults),
            }
            for e in KNOWN_SCENARIOS
        ]
        print(json.dumps(entries, indent=2))
        return 0

    for e in KNOWN_SCENARIOS:
        flags = " [massless limbs]" if e.massless else ""
        print(f"{e.id:<16} {e.description}{flags}")
        if e.sweepable and not args.quiet:
            print(f"{'':<16}   sweepable: {', '.join(e.sweepable)}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    """Handle the validate command."""
    import json

    from contact_hybrid.errors import ScenarioFileError, ScenarioValidationError
    from contact_hybrid.models.scenario import load_scenario

    try:
        load_scenario(args.file)
    except ScenarioFileError as e:
        if args.json:
            print(json.dumps({"valid": False, "error": str(e)}))
        else:
            print(f"Error: {e}")
        return 1
    except ScenarioValidationError as e:
        if args.json:
            print(json.dumps({"valid": False, "errors": e.errors}))
        else:
            print(f"Validation failed with {len(e.errors)} error(s):")
            for err in e.errors:
                print(f"  - {err}")
        return 1

    if args.json:
        print(json.dumps({"valid": True}))
    elif not args.quiet:
        print(f"Scenario is valid: {args.file}")
    return 0


def create_parser() -> argparse.ArgumentParser:
    """Create the main argument parser with subcommands."""
    parser = argparse.ArgumentParser(
        prog="contact-hybrid",
        description="Event-driven simulation of rigid bodies with intermittent frictional contact",
    )
    add_global_options(parser)

    subparsers = parser.add_subparsers(dest="command", title="commands")

    # run command
    run_parser = subparsers.add_parser(
        "run",
        help="Simulate a scenario and write its trajectory",
        description="Simulate a scenario and write trajectory.csv, events.jsonl and report.json.",
    )
    add_run_options(run_parser)
    run_parser.add_argument(
        "--out",
        type=Path,
        default=Path("out"),
        metavar="DIR",
        help="Output directory (default: ./out)",
    )
    run_parser.add_argument(
        "--no-check",
        action="store_true",
        help="Skip the invariant checks",
    )
    run_parser.set_defaults(func=cmd_run)

    # sweep command
    sweep_parser = subparsers.add_parser(
        "sweep",
        help="Run a scenario over a range of parameter values",
        description="Run a scenario once per value of one parameter and aggregate the outcomes.",
    )
    add_run_options(sweep_parser)
    sweep_parser.add_argument("--param", required=True, metavar="NAME", help="Parameter to sweep")
    sweep_parser.add_argument(
        "--values",
        required=True,
        metavar="LIST",
        help="Comma-separated values or start:stop:count",
    )
    sweep_parser.add_argument(
        "--out",
        type=Path,
        default=Path("out"),
        metavar="DIR",
        help="Output directory for sweep.csv (default: ./out)",
    )
    sweep_parser.add_argument(
        "--workers", type=int, default=4, metavar="N", help="Concurrent runs (default: 4)"
    )
    sweep_parser.set_defaults(func=cmd_sweep)

    # check command
    check_parser = subparsers.add_parser(
        "check",
        help="Run a scenario and check execution invariants",
        description="Run a scenario without writing outputs and report every invariant check.",
    )
    add_run_options(check_parser)
    check_parser.set_defaults(func=cmd_check)

    # list command
    list_parser = subparsers.add_parser(
        "list",
        help="List the built-in scenarios",
        description="List the scenario catalog with sweepable parameters.",
    )
    list_parser.set_defaults(func=cmd_list)

    # validate command
    validate_parser = subparsers.add_parser(
        "validate",
        help="Validate a scenario file against the schema",
        description="Validate a scenario YAML file; errors carry their line numbers.",
    )
    validate_parser.add_argument("file", type=Path, help="Scenario YAML file")
    validate_parser.set_defaults(func=cmd_validate)

    return parser


def main(args: list[str] | None = None) -> int:
    """Main entry point for contact-hybrid CLI."""
    parser = create_parser()
    parsed = parser.parse_args(args)

    # If no command specified, show help
    if parsed.command is None:
        parser.print_help()
        return 0

    configure_logging(parsed.verbose, parsed.quiet)

    # Call the command handler
    return parsed.func(parsed)


if __name__ == "__main__":
    sys.exit(main())
