"""Scenario documents: parsing, validation and serialisation.

A scenario is one JSON document (see ``schema/scenario.schema.json``).
Structural problems are reported by JSON Schema, cross-references by the
semantic pass; both are collected and reported together with document
paths such as ``links[0].endpoints[1]``.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any

import jsonschema

from .engine import AuthReject, ConfigUnavailable, DropMessage, FaultSpec, LinkDown
from .model import (
    Bursty,
    Domain,
    NodeKind,
    Periodic,
    QoSProfile,
    Role,
    UseCase,
    UseCaseClass,
    UseCaseGroup,
    derive_qos_profile,
)
from .registration import CONFIG_SERVER, CUC
from .topology import Link, NetworkGraph, Node, NoPath, validate_graph

DEFAULT_FUNCTIONS = {
    "core_auth": "core-auth",
    "authz": "tacnet-authz",
    "config_server": "config-server",
    "cuc": "cuc",
    "cnc": "cnc",
    "mdm": "mdm",
}

DEFAULT_DOMAIN_LATENCY = {"FiveG": 1_000, "SDN": 200, "IndustrialEthernet": 500}

DEFAULT_REGISTRATION_TIMEOUT = 50_000


class ScenarioError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = errors


@dataclass
class DeviceSpec:
    device_id: str
    role: Role
    paired_with: str
    node: str
    secure_element_id: str | None = None
    se_secret: bytes | None = None
    response_secret: bytes | None = None
    dte_signature: bytes | None = None
    expected_signature: bytes | None = None
    is_tsn_end_device: bool = False
    authorized_systems: frozenset[str] = frozenset({CONFIG_SERVER, CUC})
    settings: dict = field(default_factory=dict)
    tsn_transmission_type: str | None = None
    provision_at: int | None = None
    expect_state: str | None = None


@dataclass
class UseCaseSpec:
    name: str
    use_case_class: UseCaseClass
    group: UseCaseGroup
    talker: str
    listeners: tuple[str, ...]
    provision_at: int
    qos: dict = field(default_factory=dict)
    expect: str | None = None


@dataclass
class TimeSyncSpec:
    reference: str
    at: int = 0
    rounds: int = 1
    nodes: tuple[str, ...] | None = None
    offsets: dict[str, int] = field(default_factory=dict)


@dataclass
class Scenario:
    graph: NetworkGraph
    devices: list[DeviceSpec]
    horizon: int
    seed: int = 0
    name: str = ""
    use_cases: list[UseCaseSpec] = field(default_factory=list)
    faults: list[FaultSpec] = field(default_factory=list)
    functions: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_FUNCTIONS))
    domain_latency: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_DOMAIN_LATENCY))
    profile_overrides: dict[str, dict] = field(default_factory=dict)
    registration_timeout: int = DEFAULT_REGISTRATION_TIMEOUT
    timesync: TimeSyncSpec | None = None
    services: dict = field(default_factory=dict)

    def device(self, device_id: str) -> DeviceSpec:
        return self.device_index[device_id]

    @functools.cached_property
    def device_index(self) -> dict[str, DeviceSpec]:
        return {d.device_id: d for d in self.devices}

    def dtes(self) -> list[DeviceSpec]:
        return [d for d in self.devices if d.role is Role.DTE]

    def node_of(self, ref: str) -> str:
        """Graph node for a device id or node id."""
        dev = self.device_index.get(ref)
        return dev.node if dev is not None else ref

    def profile(self, spec: UseCaseSpec) -> QoSProfile:
        if spec.group is UseCaseGroup.NONE:
            base = None
        else:
            base = derive_qos_profile(spec.group)
            if spec.group.value in self.profile_overrides:
                base = _apply_qos(base, self.profile_overrides[spec.group.value])
        return _apply_qos(base, spec.qos)

    def use_case(self, spec: UseCaseSpec) -> UseCase:
        return UseCase(
            spec.name, spec.use_case_class, spec.group, self.profile(spec), spec.talker, tuple(spec.listeners)
        )


def _traffic(d: dict):
    if d["type"] == "Periodic":
        return Periodic(d["period"], d["frame_bytes"])
    return Bursty(d["mean_rate"])


def _traffic_json(t) -> dict:
    if isinstance(t, Periodic):
        return {"type": "Periodic", "period": t.period, "frame_bytes": t.frame_bytes}
    return {"type": "Bursty", "mean_rate": t.mean_rate}


def _apply_qos(base: QoSProfile | None, over: dict) -> QoSProfile:
    fields = dict(over)
    if "traffic" in fields:
        fields["traffic"] = _traffic(fields["traffic"])
    if base is None:
        fields.setdefault("reliability_target", 0.99)
        fields.setdefault("priority", 7)
        return QoSProfile(**fields)
    return replace(base, **fields)


# -- parsing ----------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("tacnet").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


@functools.lru_cache(maxsize=1)
def _validator() -> jsonschema.Draft202012Validator:
    return jsonschema.Draft202012Validator(load_schema())


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _hex(value: str | None) -> bytes | None:
    return None if value is None else bytes.fromhex(value)


def parse_scenario(document: str | bytes | dict) -> Scenario:
    """Parse and validate a scenario; raises ScenarioError listing every problem."""
    if isinstance(document, dict):
        doc = document
    else:
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    errors = sorted(f"{_path(e.absolute_path)}: {e.message}" for e in _validator().iter_errors(doc))
    if errors:
        raise ScenarioError(errors)
    scenario = _build(doc)
    errors = _semantic_errors(doc, scenario)
    if errors:
        raise ScenarioError(errors)
    return scenario


def _build(doc: dict) -> Scenario:
    nodes = [Node(n["id"], NodeKind(n["kind"]), Domain(n["domain"])) for n in doc["nodes"]]
    links = [
        Link(
            l["id"],
            (l["endpoints"][0], l["endpoints"][1]),
            l["capacity"],
            l["propagation_delay"],
            Domain(l["domain"]),
            l.get("secure", True),
            l.get("reverse_propagation_delay"),
        )
        for l in doc["links"]
    ]
    devices = []
    for d in doc["devices"]:
        devices.append(
            DeviceSpec(
                device_id=d["id"],
                role=Role(d["role"]),
                paired_with=d["paired_with"],
                node=d["node"],
                secure_element_id=d.get("secure_element_id"),
                se_secret=_hex(d.get("se_secret")),
                response_secret=_hex(d.get("response_secret")),
                dte_signature=_hex(d.get("dte_signature")),
                expected_signature=_hex(d.get("expected_signature")),
                is_tsn_end_device=d.get("is_tsn_end_device", False),
                authorized_systems=frozenset(d.get("authorized_systems", (CONFIG_SERVER, CUC))),
                settings=d.get("settings", {}),
                tsn_transmission_type=d.get("tsn_transmission_type"),
                provision_at=d.get("provision_at"),
                expect_state=d.get("expect_state"),
            )
        )
    use_cases = [
        UseCaseSpec(
            u["name"],
            UseCaseClass(u["class"]),
            UseCaseGroup(u.get("group", "None")),
            u["talker"],
            tuple(u["listeners"]),
            u["provision_at"],
            u.get("qos", {}),
            u.get("expect"),
        )
        for u in doc.get("use_cases", [])
    ]
    faults: list[FaultSpec] = []
    for f in doc.get("faults", []):
        kind = f["kind"]
        if kind == "DropMessage":
            faults.append(
                DropMessage(f.get("tag"), f.get("src"), f.get("dst"), f.get("device"), f.get("from", 0), f.get("until"))
            )
        elif kind == "LinkDown":
            faults.append(LinkDown(f.get("link_id", ""), f.get("from", 0), f.get("until", f.get("from", 0))))
        elif kind == "AuthReject":
            faults.append(AuthReject(f.get("device_id", "")))
        else:
            faults.append(ConfigUnavailable(f.get("from", 0), f.get("until", f.get("from", 0))))
    ts = doc.get("timesync")
    timesync = None
    if ts is not None:
        timesync = TimeSyncSpec(
            ts["reference"],
            ts.get("at", 0),
            ts.get("rounds", 1),
            tuple(ts["nodes"]) if "nodes" in ts else None,
            dict(ts.get("offsets", {})),
        )
    return Scenario(
        graph=NetworkGraph.build(nodes, links),
        devices=devices,
        horizon=doc["horizon"],
        seed=doc.get("seed", 0),
        name=doc.get("name", ""),
        use_cases=use_cases,
        faults=faults,
        functions={**DEFAULT_FUNCTIONS, **doc.get("functions", {})},
        domain_latency={**DEFAULT_DOMAIN_LATENCY, **doc.get("domain_latency", {})},
        profile_overrides=doc.get("profile_overrides", {}),
        registration_timeout=doc.get("registration_timeout", DEFAULT_REGISTRATION_TIMEOUT),
        timesync=timesync,
        services=doc.get("services", {}),
    )


def _semantic_errors(doc: dict, sc: Scenario) -> list[str]:
    errors: list[str] = []
    node_ids: dict[str, int] = {}
    for i, n in enumerate(doc["nodes"]):
        if n["id"] in node_ids:
            errors.append(f"nodes[{i}].id: duplicate node id {n['id']!r} (also nodes[{node_ids[n['id']]}])")
        node_ids.setdefault(n["id"], i)
    link_ids: dict[str, int] = {}
    for i, l in enumerate(doc["links"]):
        if l["id"] in link_ids:
            errors.append(f"links[{i}].id: duplicate link id {l['id']!r} (also links[{link_ids[l['id']]}])")
        link_ids.setdefault(l["id"], i)
        for j, end in enumerate(l["endpoints"]):
            if end not in node_ids:
                errors.append(f"links[{i}].endpoints[{j}]: undefined node {end!r}")
        if l["capacity"] <= 0:
            errors.append(f"links[{i}].capacity: must be positive, got {l['capacity']}")
        if l["propagation_delay"] < 0:
            errors.append(f"links[{i}].propagation_delay: must be non-negative, got {l['propagation_delay']}")
        if l.get("reverse_propagation_delay", 0) < 0:
            errors.append(f"links[{i}].reverse_propagation_delay: must be non-negative")

    for key, node in sorted(sc.functions.items()):
        if node not in node_ids:
            errors.append(f"functions.{key}: undefined node {node!r}")

    dev_idx: dict[str, int] = {}
    for i, d in enumerate(doc["devices"]):
        if d["id"] in dev_idx:
            errors.append(f"devices[{i}].id: duplicate device id {d['id']!r} (devices[{dev_idx[d['id']]}] and devices[{i}])")
        dev_idx.setdefault(d["id"], i)
    roles = {d["id"]: d["role"] for d in doc["devices"]}
    for i, d in enumerate(doc["devices"]):
        if d["node"] not in node_ids:
            errors.append(f"devices[{i}].node: undefined node {d['node']!r}")
        partner = d["paired_with"]
        if partner not in roles:
            errors.append(f"devices[{i}].paired_with: undefined device {partner!r}")
        else:
            pd = doc["devices"][dev_idx[partner]]
            if roles[partner] == d["role"]:
                errors.append(f"devices[{i}].paired_with: {d['role']} paired with another {d['role']}")
            elif pd["paired_with"] != d["id"]:
                errors.append(f"devices[{i}].paired_with: {partner!r} is paired with {pd['paired_with']!r}")
        if d.get("is_tsn_end_device") and d["role"] != "DTE":
            errors.append(f"devices[{i}].is_tsn_end_device: only a DTE can be a TSN end device")
        if d["role"] == "DCE":
            for key in ("secure_element_id", "se_secret"):
                if key not in d:
                    errors.append(f"devices[{i}].{key}: required for a DCE")
        else:
            if "dte_signature" not in d:
                errors.append(f"devices[{i}].dte_signature: required for a DTE")
            if "provision_at" not in d:
                errors.append(f"devices[{i}].provision_at: required for a DTE")

    def resolves(ref: str) -> bool:
        return ref in dev_idx or ref in node_ids

    for i, u in enumerate(doc.get("use_cases", [])):
        cls, group = u["class"], u.get("group", "None")
        if (cls == "GeneralFunctionality") != (group == "None"):
            errors.append(f"use_cases[{i}].group: must be None iff class is GeneralFunctionality")
        if group == "None":
            for key in ("max_e2e_latency", "min_throughput", "traffic"):
                if key not in u.get("qos", {}):
                    errors.append(f"use_cases[{i}].qos.{key}: required for GeneralFunctionality")
        if not resolves(u["talker"]):
            errors.append(f"use_cases[{i}].talker: undefined device or node {u['talker']!r}")
        for j, lst in enumerate(u["listeners"]):
            if not resolves(lst):
                errors.append(f"use_cases[{i}].listeners[{j}]: undefined device or node {lst!r}")

    for i, f in enumerate(doc.get("faults", [])):
        kind = f["kind"]
        if kind == "LinkDown" and f.get("link_id") not in link_ids:
            errors.append(f"faults[{i}].link_id: undefined link {f.get('link_id')!r}")
        if kind == "AuthReject" and f.get("device_id") not in dev_idx:
            errors.append(f"faults[{i}].device_id: undefined device {f.get('device_id')!r}")
        if kind in ("LinkDown", "ConfigUnavailable"):
            if "from" not in f or "until" not in f:
                errors.append(f"faults[{i}]: {kind} needs 'from' and 'until'")
            elif f["from"] > f["until"]:
                errors.append(f"faults[{i}].until: interval end before start")

    ts = doc.get("timesync")
    if ts is not None:
        if ts["reference"] not in node_ids:
            errors.append(f"timesync.reference: undefined node {ts['reference']!r}")
        for j, n in enumerate(ts.get("nodes", [])):
            if n not in node_ids:
                errors.append(f"timesync.nodes[{j}]: undefined node {n!r}")

    if errors:
        return errors
    errors.extend(f"graph: {p}" for p in validate_graph(sc.graph))
    for i, u in enumerate(sc.use_cases):
        for lst in u.listeners:
            try:
                sc.graph.shortest_path(sc.node_of(u.talker), sc.node_of(lst))
            except NoPath:
                errors.append(f"use_cases[{i}]: {u.talker!r} and {lst!r} are not connected")
        try:
            sc.use_case(u)
        except (TypeError, ValueError) as exc:
            errors.append(f"use_cases[{i}].qos: {exc}")
    return errors


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- serialisation ----------------------------------------------------------


def _hexs(b: bytes | None) -> str | None:
    return None if b is None else b.hex()


def serialize_scenario(sc: Scenario) -> dict[str, Any]:
    def clean(d: dict) -> dict:
        return {k: v for k, v in d.items() if v is not None}

    devices = []
    for d in sc.devices:
        devices.append(
            clean(
                {
                    "id": d.device_id,
                    "role": d.role.value,
                    "paired_with": d.paired_with,
                    "node": d.node,
                    "secure_element_id": d.secure_element_id,
                    "se_secret": _hexs(d.se_secret),
                    "response_secret": _hexs(d.response_secret),
                    "dte_signature": _hexs(d.dte_signature),
                    "expected_signature": _hexs(d.expected_signature),
                    "is_tsn_end_device": d.is_tsn_end_device,
                    "authorized_systems": sorted(d.authorized_systems),
                    "settings": d.settings,
                    "tsn_transmission_type": d.tsn_transmission_type,
                    "provision_at": d.provision_at,
                    "expect_state": d.expect_state,
                }
            )
        )
    faults = []
    for f in sc.faults:
        if isinstance(f, DropMessage):
            faults.append(
                clean(
                    {"kind": "DropMessage", "tag": f.tag, "src": f.src, "dst": f.dst, "device": f.device,
                     "from": f.start, "until": f.until}
                )
            )
        elif isinstance(f, LinkDown):
            faults.append({"kind": "LinkDown", "link_id": f.link_id, "from": f.start, "until": f.until})
        elif isinstance(f, AuthReject):
            faults.append({"kind": "AuthReject", "device_id": f.device_id})
        else:
            faults.append({"kind": "ConfigUnavailable", "from": f.start, "until": f.until})
    doc: dict[str, Any] = {
        "version": 1,
        "name": sc.name,
        "seed": sc.seed,
        "horizon": sc.horizon,
        "functions": dict(sc.functions),
        "nodes": [{"id": n.id, "kind": n.kind.value, "domain": n.domain.value} for n in sc.graph.nodes.values()],
        "links": [
            clean(
                {
                    "id": l.link_id,
                    "endpoints": list(l.endpoints),
                    "capacity": l.capacity,
                    "propagation_delay": l.propagation_delay,
                    "reverse_propagation_delay": l.reverse_propagation_delay,
                    "domain": l.domain.value,
                    "secure": l.secure,
                }
            )
            for l in sc.graph.links.values()
        ],
        "devices": devices,
        "use_cases": [
            clean(
                {
                    "name": u.name,
                    "class": u.use_case_class.value,
                    "group": u.group.value,
                    "talker": u.talker,
                    "listeners": list(u.listeners),
                    "provision_at": u.provision_at,
                    "qos": u.qos or None,
                    "expect": u.expect,
                }
            )
            for u in sc.use_cases
        ],
        "faults": faults,
        "domain_latency": dict(sc.domain_latency),
        "profile_overrides": sc.profile_overrides,
        "registration_timeout": sc.registration_timeout,
        "services": sc.services,
    }
    if sc.timesync is not None:
        ts = sc.timesync
        doc["timesync"] = clean(
            {
                "reference": ts.reference,
                "at": ts.at,
                "rounds": ts.rounds,
                "nodes": list(ts.nodes) if ts.nodes is not None else None,
                "offsets": ts.offsets,
            }
        )
    return doc


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(serialize_scenario(sc), indent=2, sort_keys=True)


def qos_json(q: QoSProfile) -> dict:
    return {
        "max_e2e_latency": q.max_e2e_latency,
        "min_throughput": q.min_throughput,
        "reliability_target": q.reliability_target,
        "priority": q.priority,
        "strict_latency": q.strict_latency,
        "traffic": _traffic_json(q.traffic),
    }
