"""Run a scenario end to end and write its output files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .checker import Verdict, check_records, check_trace
from .orchestrator import MultiDomainManager
from .report import qos_report, render_figures, summarize, use_case_status, write_metrics
from .scenario import Scenario
from .security import verify_chain

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_SCENARIO_ERROR = 2


@dataclass
class RunOutcome:
    exit_code: int
    manager: MultiDomainManager
    verdict: Verdict
    problems: list[str] = field(default_factory=list)
    metrics: list[dict] = field(default_factory=list)
    figures: list[Path] = field(default_factory=list)


def simulate(scenario: Scenario, seed: int | None = None, horizon: int | None = None) -> MultiDomainManager:
    if horizon is not None:
        scenario = replace(scenario, horizon=horizon)
    mgr = MultiDomainManager(scenario, seed)
    mgr.run()
    return mgr


def outcome_problems(mgr: MultiDomainManager) -> list[str]:
    """Reasons a finished run does not earn exit code 0 (trace properties aside)."""
    problems = []
    for dev, r in sorted(mgr.registrants.items()):
        if r.dte.provision_at is None:
            continue
        if not r.state.terminal:
            problems.append(f"device {dev} stuck in {r.state.value}")
        elif r.dte.expect_state is not None and r.state.value != r.dte.expect_state:
            problems.append(f"device {dev} ended {r.state.value}, expected {r.dte.expect_state}")
    for spec in mgr.scenario.use_cases:
        status = use_case_status(mgr, spec.name)
        expected = spec.expect or "Active"
        if expected != "Any" and status != expected:
            problems.append(f"use case {spec.name} is {status}, expected {expected}")
    bad = verify_chain(mgr.audit.records)
    if bad is not None:
        problems.append(f"audit chain breaks at record {bad}")
    eng = mgr.engine
    if eng.scheduled != eng.delivered + eng.dropped + eng.pending():
        problems.append("event conservation violated")
    return problems


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    horizon: int | None = None,
    figures: bool = False,
) -> RunOutcome:
    """Simulate, check and (with ``out_dir``) write trace/metrics/summary/audit."""
    mgr = simulate(scenario, seed, horizon)
    problems = outcome_problems(mgr)
    metrics = qos_report(mgr)
    trace = mgr.engine.trace
    if out_dir is None:
        verdict = check_records(trace.header, list(enumerate(trace.records, 2)))
    else:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
            trace.dump(fh)
        with open(out / "audit.jsonl", "w", encoding="utf-8") as fh:
            mgr.audit.dump(fh, mgr.seed)
        write_metrics(out / "metrics.jsonl", mgr.seed, metrics)
        verdict = check_trace(out / "trace.jsonl")
    problems += [f"property {r.name} fails at line {r.failure[0]}: {r.failure[1]}" for r in verdict.failures()]
    code = EXIT_OK if not problems else EXIT_VIOLATION
    outcome = RunOutcome(code, mgr, verdict, problems, metrics)
    if out_dir is not None:
        with open(Path(out_dir) / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summarize(mgr, metrics, verdict, problems, code), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if figures:
            outcome.figures = render_figures(Path(out_dir))
    return outcome


__all__ = ["RunOutcome", "run_scenario", "simulate", "outcome_problems"]
