import copy
import json
from pathlib import Path

import pytest

from tacnet import workloads
from tacnet.scenario import ScenarioError, dumps_scenario, load_scenario, parse_scenario, serialize_scenario

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def minimal():
    return {
        "name": "tiny",
        "version": 1,
        "seed": 1,
        "horizon": 1_000,
        "nodes": [
            {"id": "a", "kind": "TsnBridge", "domain": "TSN"},
            {"id": "b", "kind": "TsnBridge", "domain": "TSN"},
        ],
        "links": [{"id": "l", "endpoints": ["a", "b"], "capacity": 10**9, "propagation_delay": 2, "domain": "TSN"}],
        "devices": [],
        "functions": {k: "a" for k in ("core_auth", "authz", "config_server", "cuc", "cnc", "mdm")},
    }


def errors_of(doc):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc)
    return info.value.errors


def test_minimal_scenario_parses():
    sc = parse_scenario(minimal())
    assert sc.name == "tiny" and sc.seed == 1
    assert set(sc.graph.nodes) == {"a", "b"}


def test_function_nodes_must_exist():
    doc = minimal()
    del doc["functions"]
    assert "functions.cnc: undefined node 'cnc'" in errors_of(doc)


def test_undefined_endpoint_is_located():
    doc = minimal()
    doc["links"][0]["endpoints"][1] = "ghost"
    assert any(e.startswith("links[0].endpoints[1]") and "ghost" in e for e in errors_of(doc))


def test_duplicate_device_names_both_indices():
    doc = workloads.demo_scenario()
    doc["devices"].append(copy.deepcopy(doc["devices"][0]))
    dup = len(doc["devices"]) - 1
    errs = errors_of(doc)
    assert any(f"devices[{dup}]" in e and "devices[0]" in e and "duplicate" in e for e in errs)


def test_schema_error_path():
    doc = minimal()
    doc["links"][0]["capacity"] = "fast"
    assert any(e.startswith("links[0].capacity") for e in errors_of(doc))


def test_json_syntax_error_has_position():
    (err,) = errors_of('{\n  "name": "x",\n  oops\n}')
    assert err.startswith("line 3 column 3")


@pytest.mark.parametrize("doc", [workloads.demo_scenario(), workloads.tsn_stream_scenario(1, streams=20),
                                 workloads.timesync_star(10, asymmetric=True), workloads.random_registration_scenario(4)])
def test_round_trip(doc):
    sc = parse_scenario(doc)
    again = parse_scenario(dumps_scenario(sc))
    assert serialize_scenario(again) == serialize_scenario(sc)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_scenarios_load(path):
    load_scenario(path)


def test_shipped_demo_matches_generator():
    shipped = json.loads((SCENARIOS / "demo.json").read_text())
    assert shipped == workloads.demo_scenario()
