import json

import pytest

from tacnet import workloads
from tacnet.checker import PROPERTIES, TraceUnreadable, check_records, check_trace, parse_trace_lines
from tacnet.harness import run_scenario
from tacnet.scenario import parse_scenario


@pytest.fixture(scope="module")
def demo_lines(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    outcome = run_scenario(parse_scenario(workloads.demo_scenario()), out)
    assert outcome.exit_code == 0
    return (out / "trace.jsonl").read_text().splitlines()


def verdict(lines):
    return check_records(*parse_trace_lines(lines))


def test_clean_run_passes_everything(demo_lines):
    v = verdict(demo_lines)
    assert v.ok and not v.vacuous
    assert list(v.results) == list(PROPERTIES)
    assert all(r.checked > 0 for r in v.results.values())


def test_config_before_authz_fails_at_that_line(demo_lines):
    lines = list(demo_lines)
    granted = next(i for i, l in enumerate(lines) if '"payload_tag":"AuthzGranted"' in l and '"device":"sensor"' in l)
    delivered = next(l for l in lines if '"payload_tag":"ConfigDelivered"' in l and '"device":"sensor"' in l)
    lines.insert(granted, delivered)
    rec = json.loads(delivered)
    rec["time"] = json.loads(lines[granted - 1])["time"]
    lines[granted] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
    v = verdict(lines)
    res = v.results["registration-ordering"]
    assert not res.passed and res.failure[0] == granted + 1
    assert "ConfigDelivered" in res.failure[1]


def test_overlapping_reservations_are_caught():
    hdr = json.dumps({"format": "tacnet-trace", "version": 1, "seed": 0})
    mk = lambda sid, off: json.dumps({"kind": "reservation", "time": 0, "stream_id": sid, "period": 100,
                                      "windows": [{"link_id": "l", "offset": off, "duration": 10}]})
    assert verdict([hdr, mk("a", 0), mk("b", 10)]).ok
    v = verdict([hdr, mk("a", 0), mk("b", 5)])
    assert v.results["gate-non-overlap"].failure[0] == 3


def test_insecure_control_path_is_caught():
    hdr = json.dumps({"format": "tacnet-trace", "version": 1, "seed": 0, "insecure_links": ["x"]})
    msg = json.dumps({"kind": "message", "time": 1, "payload_tag": "AttachRequest", "path": ["a", "x"]})
    assert not verdict([hdr, msg]).results["secure-control-plane"].passed


def test_time_going_backwards():
    hdr = json.dumps({"format": "tacnet-trace", "version": 1, "seed": 0})
    v = verdict([hdr, '{"kind":"x","time":5}', '{"kind":"x","time":4}'])
    assert v.results["time-monotone"].failure[0] == 3


def test_frame_latency_must_match_commitment(demo_lines):
    lines = list(demo_lines)
    i = next(i for i, l in enumerate(lines) if '"kind":"frame"' in l)
    rec = json.loads(lines[i])
    rec["latency"] += 1
    lines[i] = json.dumps(rec)
    assert verdict(lines).results["dataplane-latency"].failure[0] == i + 1


def test_empty_trace_is_vacuous(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"format":"tacnet-trace","version":1,"seed":0}\n')
    v = check_trace(p)
    assert v.ok and v.vacuous
    assert all("vacuous" in line for line in v.lines())


def test_unreadable(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text("{not json\n")
    with pytest.raises(TraceUnreadable):
        check_trace(p)
    with pytest.raises(TraceUnreadable):
        check_trace(tmp_path / "missing.jsonl")
