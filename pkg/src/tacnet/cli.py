"""Command line: ``tacnet run|check|validate|report|generate``.

Exit codes: 0 success, 1 property violation or failed expectation,
2 unreadable input or invalid scenario.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import workloads
from .checker import TraceUnreadable, check_trace
from .harness import EXIT_OK, EXIT_SCENARIO_ERROR, EXIT_VIOLATION, run_scenario
from .report import render_figures
from .scenario import ScenarioError, load_scenario

GENERATORS = {
    "demo": lambda seed: workloads.demo_scenario(seed),
    "density": lambda seed: workloads.density_scenario(seed=seed),
    "tsn": lambda seed: workloads.tsn_stream_scenario(seed),
    "timesync": lambda seed: workloads.timesync_star(seed=seed),
    "timesync-asym": lambda seed: workloads.timesync_star(seed=seed, asymmetric=True),
    "random": lambda seed: workloads.random_registration_scenario(seed),
}


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"{path}: {err}", file=sys.stderr)
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
    return None


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_SCENARIO_ERROR
    outcome = run_scenario(scenario, args.out, seed=args.seed, horizon=args.horizon, figures=args.figures)
    for line in outcome.verdict.lines():
        print(line)
    for problem in outcome.problems:
        print(f"problem: {problem}")
    for fig in outcome.figures:
        print(f"figure: {fig}")
    print(f"exit {outcome.exit_code}: outputs in {args.out}")
    return outcome.exit_code


def cmd_check(args) -> int:
    try:
        verdict = check_trace(args.trace)
    except TraceUnreadable as exc:
        print(f"{args.trace}: unreadable trace: {exc}", file=sys.stderr)
        return EXIT_SCENARIO_ERROR
    if args.json:
        print(json.dumps(verdict.to_json(), indent=2))
    else:
        for line in verdict.lines():
            print(line)
        if verdict.vacuous:
            print("vacuous: trace has no records")
    return EXIT_OK if verdict.ok else EXIT_VIOLATION


def cmd_validate(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_SCENARIO_ERROR
    print(f"{args.scenario}: ok ({len(scenario.graph.nodes)} nodes, {len(scenario.devices)} devices, "
          f"{len(scenario.use_cases)} use cases)")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    if not (out / "trace.jsonl").exists() or not (out / "metrics.jsonl").exists():
        print(f"{out}: not a run output directory", file=sys.stderr)
        return EXIT_SCENARIO_ERROR
    for fig in render_figures(out):
        print(f"figure: {fig}")
    return EXIT_OK


def cmd_generate(args) -> int:
    doc = GENERATORS[args.kind](args.seed)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tacnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write trace/metrics/summary/audit")
    run.add_argument("scenario")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--horizon", type=int, help="override the horizon (us)")
    run.add_argument("--figures", action="store_true", help="also render PNG figures")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="check a trace.jsonl against the built-in properties")
    check.add_argument("trace")
    check.add_argument("--json", action="store_true")
    check.set_defaults(func=cmd_check)

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("scenario")
    val.set_defaults(func=cmd_validate)

    rep = sub.add_parser("report", help="render figures for an existing run directory")
    rep.add_argument("out_dir")
    rep.set_defaults(func=cmd_report)

    gen = sub.add_parser("generate", help="write a generated scenario document")
    gen.add_argument("kind", choices=sorted(GENERATORS))
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_generate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
