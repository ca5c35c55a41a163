"""QoS metrics, run summaries and figures.

Metrics are derived from the manager's end state plus the trace (observed
latencies come only from replayed frame records).
"""

from __future__ import annotations

import json
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

from .engine import FORMAT_VERSION

METRICS_FORMAT = "tacnet-metrics"
SUMMARY_FORMAT = "tacnet-summary"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def observed_latency(trace_records) -> dict[tuple[str, int], int]:
    """Worst replayed latency per (use case, generation)."""
    worst: dict[tuple[str, int], int] = {}
    for rec in trace_records:
        if rec.get("kind") == "frame":
            key = (rec["use_case"], rec["generation"])
            worst[key] = max(worst.get(key, 0), rec["latency"])
    return worst


def frame_counts(trace_records) -> dict[str, list[int]]:
    """[delivered, lost] frames per use case over all generations."""
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for rec in trace_records:
        kind = rec.get("kind")
        if kind == "frame":
            counts[rec["use_case"]][0] += 1
        elif kind == "frame_lost":
            counts[rec["use_case"]][1] += 1
    return counts


def degraded_events(trace_records) -> list[dict]:
    return [r for r in trace_records if r.get("kind") == "provision_status"]


def use_case_status(mgr, name: str) -> str:
    prov = mgr.provisions.get(name)
    if prov is not None:
        return prov.status
    if name in mgr.failures:
        return "ProvisionFailure"
    return "Pending"


def qos_report(mgr) -> list[dict]:
    """Metric records: one per provision, used link, device and synced clock."""
    records = mgr.engine.trace.records
    observed = observed_latency(records)
    frames = frame_counts(records)
    out: list[dict] = []
    for spec in mgr.scenario.use_cases:
        name = spec.name
        prov = mgr.provisions.get(name)
        row = {"metric": "provision", "use_case": name, "status": use_case_status(mgr, name),
               "frames_delivered": frames[name][0], "frames_lost": frames[name][1]}
        if prov is not None:
            row.update(
                generation=prov.generation,
                total_latency=prov.total_latency,
                max_e2e_latency=prov.use_case.qos.max_e2e_latency,
                observed_max_latency=observed.get((name, prov.generation)),
                min_throughput_commit=min(b.throughput_commit for b in prov.budgets),
                domains=[b.domain.value for b in prov.legs[sorted(prov.legs)[0]]],
            )
        elif name in mgr.failures:
            row["reasons"] = mgr.failures[name].reasons
        out.append(row)

    graph = mgr.scenario.graph
    load: dict[str, Fraction] = defaultdict(Fraction)
    for res in mgr.cnc.reservations.values():
        for w in res.windows:
            load[w.link_id] += res.rate
    for b in mgr.bearers.values():
        for link_id in b.link_ids:
            load[link_id] += b.throughput
    for link_id in sorted(load):
        out.append({
            "metric": "link_utilization",
            "link_id": link_id,
            "domain": graph.links[link_id].domain.value,
            "utilization": float(load[link_id] / graph.links[link_id].capacity),
        })

    for dev, r in sorted(mgr.registrants.items()):
        row = {"metric": "registration", "device": dev, "state": r.state.value, "tsn": r.dte.is_tsn_end_device}
        if r.provisioned_at is not None:
            row["provisioned_at"] = r.provisioned_at
        if r.operational_at is not None:
            row["operational_at"] = r.operational_at
            row["duration"] = r.operational_at - r.provisioned_at
        out.append(row)

    if mgr.timesync is not None:
        res = mgr.timesync.result()
        for node, c in sorted(res.clocks.items()):
            row = {"metric": "sync", "node": node, "offset_true": c.offset_true, "offset_estimate": c.offset_estimate}
            row["residual"] = None if c.offset_estimate is None else abs(c.offset_estimate - c.offset_true)
            row["synced"] = node not in res.unsynced
            out.append(row)
    return out


def summarize(mgr, metrics: list[dict], verdict, problems: list[str], exit_code: int) -> dict:
    states = defaultdict(int)
    for r in mgr.registrants.values():
        states[r.state.value] += 1
    statuses = defaultdict(int)
    for m in metrics:
        if m["metric"] == "provision":
            statuses[m["status"]] += 1
    residuals = [m["residual"] for m in metrics if m["metric"] == "sync" and m["residual"] is not None]
    eng = mgr.engine
    return {
        "format": SUMMARY_FORMAT,
        "version": FORMAT_VERSION,
        "seed": mgr.seed,
        "scenario": mgr.scenario.name,
        "horizon": mgr.scenario.horizon,
        "exit_code": exit_code,
        "problems": problems,
        "registrations": dict(sorted(states.items())),
        "use_cases": dict(sorted(statuses.items())),
        "events": {"scheduled": eng.scheduled, "delivered": eng.delivered, "dropped": eng.dropped,
                   "pending": eng.pending()},
        "audit_records": len(mgr.audit),
        "max_sync_residual": max(residuals, default=None),
        "properties": verdict.to_json()["properties"],
    }


def write_metrics(path: Path, seed: int, metrics: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps({"format": METRICS_FORMAT, "version": FORMAT_VERSION, "seed": seed}) + "\n")
        for m in metrics:
            fh.write(_dumps(m) + "\n")


def read_jsonl(path: Path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return (rows[0], rows[1:]) if rows else ({}, [])


# -- figures ----------------------------------------------------------------


def render_figures(out_dir: Path) -> list[Path]:
    """Draw figures from the files of a finished run; returns the PNG paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    _, trace = read_jsonl(out_dir / "trace.jsonl")
    _, metrics = read_jsonl(out_dir / "metrics.jsonl")
    written = []

    # gate schedule of the reservations alive at the end of the run
    alive: dict[str, dict] = {}
    for rec in trace:
        if rec.get("kind") == "reservation":
            alive[rec["stream_id"]] = rec
        elif rec.get("kind") == "release":
            alive.pop(rec["stream_id"], None)
    if alive:
        links = sorted({w["link_id"] for r in alive.values() for w in r["windows"]})
        span = max(r["period"] for r in alive.values())
        span = min(span, 2_000)
        fig, ax = plt.subplots(figsize=(9, 0.5 * len(links) + 1.5))
        colors = plt.get_cmap("tab20")
        for i, (sid, r) in enumerate(sorted(alive.items())):
            for w in r["windows"]:
                y = links.index(w["link_id"])
                bars = [(o, w["duration"]) for o in range(w["offset"], span, r["period"])]
                ax.broken_barh(bars, (y - 0.4, 0.8), color=colors(i % 20))
        ax.set_yticks(range(len(links)), links)
        ax.set_xlim(0, span)
        ax.set_xlabel("time in cycle (us)")
        ax.set_title("Gate windows")
        fig.tight_layout()
        written.append(_save(fig, out_dir / "gate_schedule.png"))

    regs = [m for m in metrics if m["metric"] == "registration" and "duration" in m]
    if regs:
        fig, ax = plt.subplots(figsize=(6, 4))
        tsn = [m["duration"] for m in regs if m["tsn"]]
        plain = [m["duration"] for m in regs if not m["tsn"]]
        ax.hist([tsn, plain], bins=30, label=["TSN end device", "other"], stacked=True)
        ax.set_xlabel("OperatorProvision to Operational (us)")
        ax.set_ylabel("devices")
        ax.legend()
        fig.tight_layout()
        written.append(_save(fig, out_dir / "registration_durations.png"))

    provs = [m for m in metrics if m["metric"] == "provision" and "total_latency" in m]
    if provs:
        fig, ax = plt.subplots(figsize=(max(5, 0.8 * len(provs) + 2), 4))
        x = range(len(provs))
        ax.bar([i - 0.2 for i in x], [m["max_e2e_latency"] for m in provs], 0.4, label="bound")
        ax.bar([i + 0.2 for i in x], [m["observed_max_latency"] or 0 for m in provs], 0.4, label="observed max")
        ax.set_xticks(list(x), [m["use_case"] for m in provs], rotation=30, ha="right")
        ax.set_yscale("log")
        ax.set_ylabel("latency (us)")
        ax.legend()
        fig.tight_layout()
        written.append(_save(fig, out_dir / "latency_vs_bound.png"))
    return written


def _save(fig, path: Path) -> Path:
    import matplotlib.pyplot as plt

    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path

