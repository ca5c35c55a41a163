"""Offline conformance checker for trace.jsonl files.

Reads only the trace; it re-derives every property from the records and
shares no state with the simulator. Each property reports pass/fail, the
number of records it examined, and the first counterexample (line number
in the file, 1 = header).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

# Registration milestones: each needs the one before it in the same
# registration episode (an OperatorProvision starts a new episode).
MILESTONES = ("RadioAttachOk", "AuthzGranted", "ConfigDelivered", "CucRegistered", "TsnAnnounce")
REQUIRES = {
    "AuthChallenge": "AttachRequest",
    "AuthResponse": "AuthChallenge",
    "RadioAttachOk": "AuthResponse",
    "AuthzRequest": "RadioAttachOk",
    "AuthzGranted": "AuthzRequest",
    "ConfigRequest": "AuthzGranted",
    "ConfigDelivered": "ConfigRequest",
    "CucRegisterRequest": "ConfigDelivered",
    "CucRegistered": "CucRegisterRequest",
    "TsnAnnounce": "CucRegistered",
}

# (old state, event) -> allowed new states
LEGAL = {
    ("Unprovisioned", "OperatorProvision"): {"Provisioned"},
    ("Rejected", "OperatorProvision"): {"Provisioned"},
    ("Provisioned", "RadioAttachOk"): {"RadioAttached"},
    ("Provisioned", "RadioAttachFail"): {"Rejected"},
    ("RadioAttached", "AuthzGranted"): {"Authorized"},
    ("RadioAttached", "AuthzDenied"): {"Rejected"},
    ("Authorized", "ConfigDelivered"): {"Configured"},
    ("Authorized", "ConfigUnavailable"): {"Rejected"},
    ("Configured", "CucRegistered"): {"TsnRegistered"},
    ("Configured", "CucRejected"): {"Rejected"},
    ("Configured", "Activate"): {"Operational"},
    ("TsnRegistered", "Activate"): {"Operational"},
}

PROPERTIES = (
    "time-monotone",
    "registration-ordering",
    "auth-ordering",
    "scope-soundness",
    "legal-transitions",
    "gate-non-overlap",
    "budget-additivity",
    "dataplane-latency",
    "secure-control-plane",
)


class TraceUnreadable(Exception):
    pass


@dataclass
class PropertyResult:
    name: str
    checked: int = 0
    failure: tuple[int, str] | None = None

    @property
    def passed(self) -> bool:
        return self.failure is None

    def fail(self, line: int, why: str) -> None:
        if self.failure is None:
            self.failure = (line, why)

    def to_json(self) -> dict:
        out = {"property": self.name, "passed": self.passed, "checked": self.checked}
        if self.failure:
            out["line"], out["counterexample"] = self.failure
        return out


@dataclass
class Verdict:
    header: dict
    results: dict[str, PropertyResult] = field(default_factory=dict)
    records: int = 0

    @property
    def vacuous(self) -> bool:
        return self.records == 0

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results.values())

    def failures(self) -> list[PropertyResult]:
        return [r for r in self.results.values() if not r.passed]

    def lines(self) -> list[str]:
        out = []
        for r in self.results.values():
            status = "pass" if r.passed else "FAIL"
            tail = " (vacuous)" if self.vacuous else f" [{r.checked} checked]"
            if r.failure:
                tail += f" first counterexample at line {r.failure[0]}: {r.failure[1]}"
            out.append(f"{status} {r.name}{tail}")
        return out

    def to_json(self) -> dict:
        return {"ok": self.ok, "vacuous": self.vacuous, "records": self.records,
                "properties": [r.to_json() for r in self.results.values()]}


def read_trace(path) -> tuple[dict, list[tuple[int, dict]]]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise TraceUnreadable(str(exc)) from exc
    return parse_trace_lines(text.splitlines())


def parse_trace_lines(lines: Iterable[str]) -> tuple[dict, list[tuple[int, dict]]]:
    header: dict = {}
    records: list[tuple[int, dict]] = []
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceUnreadable(f"line {no}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise TraceUnreadable(f"line {no}: not an object")
        if no == 1 and "format" in obj:
            header = obj
        else:
            records.append((no, obj))
    return header, records


def check_trace(path) -> Verdict:
    header, records = read_trace(path)
    return check_records(header, records)


def check_records(header: dict, records: list[tuple[int, dict]]) -> Verdict:
    v = Verdict(header, {name: PropertyResult(name) for name in PROPERTIES}, len(records))
    _time_monotone(records, v.results["time-monotone"])
    _registration(records, v.results["registration-ordering"], v.results["scope-soundness"])
    _auth(records, v.results["auth-ordering"])
    _transitions(records, v.results["legal-transitions"])
    _gates(records, v.results["gate-non-overlap"])
    _budgets(records, v.results["budget-additivity"])
    _dataplane(records, v.results["dataplane-latency"])
    _secure(header, records, v.results["secure-control-plane"])
    return v


def _time_monotone(records, res: PropertyResult) -> None:
    last = None
    for no, rec in records:
        t = rec.get("time")
        res.checked += 1
        if not isinstance(t, int):
            res.fail(no, "record without integer time")
        elif last is not None and t < last:
            res.fail(no, f"time {t} after {last}")
        last = t if isinstance(t, int) else last


def _messages(records):
    for no, rec in records:
        if rec.get("kind") == "message" and rec.get("device") is not None:
            yield no, rec


def _registration(records, order: PropertyResult, scope: PropertyResult) -> None:
    seen: dict[str, set[str]] = {}
    granted: dict[str, set[str]] = {}
    for no, rec in _messages(records):
        dev, tag = rec["device"], rec["payload_tag"]
        if tag == "OperatorProvision":
            seen[dev] = set()
            granted[dev] = set()
            continue
        have = seen.setdefault(dev, set())
        if tag not in REQUIRES:
            have.add(tag)
            continue
        order.checked += 1
        need = REQUIRES[tag]
        if need not in have:
            order.fail(no, f"{tag} for {dev} without prior {need}")
        if tag in MILESTONES:
            idx = MILESTONES.index(tag)
            missing = [m for m in MILESTONES[:idx] if m not in have]
            if missing:
                order.fail(no, f"{tag} for {dev} before {missing[0]}")
        have.add(tag)
        if tag == "AuthzGranted":
            granted[dev] = set(rec.get("body", {}).get("scope", []))
        elif tag == "ConfigDelivered":
            scope.checked += 1
            if "ConfigServer" not in granted.get(dev, set()):
                scope.fail(no, f"ConfigDelivered to {dev} outside its scope")
        elif tag == "CucRegistered":
            scope.checked += 1
            if "CUC" not in granted.get(dev, set()):
                scope.fail(no, f"CucRegistered for {dev} outside its scope")


def _auth(records, res: PropertyResult) -> None:
    attached: dict[str, bool] = {}
    answered: dict[str, int] = {}
    for no, rec in records:
        kind = rec.get("kind")
        dev = rec.get("device")
        if kind == "order_violation":
            res.checked += 1
            res.fail(no, f"order violation for {dev}: {rec.get('detail', '')}")
        elif kind == "message" and rec.get("payload_tag") == "OperatorProvision":
            attached[dev] = False
            answered[dev] = 0
        elif kind == "message" and rec.get("payload_tag") == "AuthResponse":
            answered[dev] = answered.get(dev, 0) + 1
        elif kind == "auth_decision":
            res.checked += 1
            if rec.get("function") == "core_auth":
                if answered.get(dev, 0) <= 0:
                    res.fail(no, f"radio auth decision for {dev} without a challenge response")
                answered[dev] = answered.get(dev, 0) - 1
                attached[dev] = rec.get("outcome") == "RadioAttachOk"
            elif not attached.get(dev):
                res.fail(no, f"authorization decision for {dev} before radio attach")


def _transitions(records, res: PropertyResult) -> None:
    state: dict[str, str] = {}
    for no, rec in records:
        kind = rec.get("kind")
        if kind == "illegal_transition":
            res.checked += 1
            res.fail(no, f"illegal {rec.get('event')} in {rec.get('state')} for {rec.get('device')}")
        elif kind == "transition":
            res.checked += 1
            dev, old, new, ev = rec.get("device"), rec.get("old"), rec.get("new"), rec.get("event")
            if state.get(dev, "Unprovisioned") != old:
                res.fail(no, f"{dev} leaves {old} but was in {state.get(dev, 'Unprovisioned')}")
            if new not in LEGAL.get((old, ev), set()):
                res.fail(no, f"{dev}: {old} x {ev} -> {new} is not a legal transition")
            state[dev] = new


def _overlaps(a: dict, b: dict, wa: dict, wb: dict) -> int | None:
    """First time two window instance sets intersect within their joint hyperperiod."""
    h = math.lcm(a["period"], b["period"])
    spans = [(wa["offset"] + k * a["period"], wa["duration"]) for k in range(h // a["period"])]
    spans += [(wb["offset"] + k * b["period"], wb["duration"]) for k in range(h // b["period"])]
    spans.sort()
    end = None
    for start, dur in spans:
        if end is not None and start < end:
            return start
        end = start + dur if end is None else max(end, start + dur)
    # wrap-around: an instance spilling past h meets the first one of the next cycle
    if end is not None and end > h + spans[0][0]:
        return h
    return None


def _gates(records, res: PropertyResult) -> None:
    active: dict[str, dict] = {}
    for no, rec in records:
        kind = rec.get("kind")
        if kind == "release":
            active.pop(rec.get("stream_id"), None)
        elif kind == "reservation":
            res.checked += 1
            for w in rec["windows"]:
                if w["offset"] < 0 or w["offset"] + w["duration"] > rec["period"]:
                    res.fail(no, f"{rec['stream_id']} window on {w['link_id']} leaves its period")
                for other in active.values():
                    for ow in other["windows"]:
                        if ow["link_id"] != w["link_id"]:
                            continue
                        hit = _overlaps(rec, other, w, ow)
                        if hit is not None:
                            res.fail(no, f"{rec['stream_id']} overlaps {other['stream_id']} on {w['link_id']} at {hit}")
            active[rec["stream_id"]] = rec


def _budgets(records, res: PropertyResult) -> None:
    for no, rec in records:
        if rec.get("kind") != "provision" or rec.get("status") != "Active":
            continue
        res.checked += 1
        sums = [sum(b["latency_budget"] for b in leg) for leg in rec["legs"].values()]
        if any(b["latency_budget"] <= 0 for leg in rec["legs"].values() for b in leg):
            res.fail(no, f"{rec['use_case']} has a non-positive latency budget")
        if max(sums) != rec["total_latency"]:
            res.fail(no, f"{rec['use_case']} total {rec['total_latency']} != worst leg {max(sums)}")
        bound = rec["max_e2e_latency"]
        if rec.get("strict_latency") and not max(sums) < bound:
            res.fail(no, f"{rec['use_case']} total {max(sums)} not below {bound}")
        if max(sums) > bound:
            res.fail(no, f"{rec['use_case']} total {max(sums)} exceeds {bound}")
        commits = [b["throughput_commit"] for leg in rec["legs"].values() for b in leg]
        if min(commits) < rec.get("min_throughput", 0):
            res.fail(no, f"{rec['use_case']} commits {min(commits)} b/s below its minimum")


def _dataplane(records, res: PropertyResult) -> None:
    committed: dict[tuple[str, int], dict[str, int]] = {}
    for no, rec in records:
        kind = rec.get("kind")
        if kind == "provision":
            committed[(rec["use_case"], rec["generation"])] = {
                lst: sum(b["latency_budget"] for b in leg) for lst, leg in rec["legs"].items()
            }
        elif kind == "frame":
            res.checked += 1
            want = committed.get((rec["use_case"], rec["generation"]), {}).get(rec["listener"])
            if want is None:
                res.fail(no, f"frame for unprovisioned {rec['use_case']}")
            elif rec["latency"] != want:
                res.fail(no, f"{rec['use_case']} -> {rec['listener']}: latency {rec['latency']} != committed {want}")


def _secure(header, records, res: PropertyResult) -> None:
    insecure = set(header.get("insecure_links", []))
    for no, rec in records:
        if rec.get("kind") != "message" or not rec.get("path"):
            continue
        res.checked += 1
        bad = insecure.intersection(rec["path"])
        if bad:
            res.fail(no, f"{rec['payload_tag']} crossed insecure link {sorted(bad)[0]}")
