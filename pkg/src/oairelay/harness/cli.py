"""Command line for running scenario files against a simulated deployment."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from oairelay.harness.scenario import ScenarioError, load_scenario, run_scenario


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="oai-harness",
        description="Run simulated-deployment scenarios and report assertions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("scenario", help="path to a scenario YAML file")
    run.add_argument("--report", metavar="FILE", help="also write a JSON report")
    args = parser.parse_args(argv)

    try:
        spec = load_scenario(args.scenario)
        report = run_scenario(spec)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2

    for assertion in report.assertions:
        if assertion.passed:
            print(f"PASS {assertion.name}")
        else:
            print(f"FAIL {assertion.name}: {assertion.detail}")
    passed = sum(a.passed for a in report.assertions)
    verdict = "PASSED" if report.passed else "FAILED"
    print(f"{verdict} {report.name}: {passed}/{len(report.assertions)} assertions")

    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
