"""Scenario generators: the flagship demo, randomized registration runs,
desk-scale density, TSN stream workloads and time-sync topologies.

Every generator returns a plain scenario document (dict) so results can be
written to disk, validated and parsed like hand-written files.
"""

from __future__ import annotations

import hashlib
import random

from .scenario import DEFAULT_FUNCTIONS

GBPS = 1_000_000_000

FUNCTION_NODES = list(DEFAULT_FUNCTIONS.values())


def _node(node_id: str, kind: str, domain: str) -> dict:
    return {"id": node_id, "kind": kind, "domain": domain}


def _link(link_id, a, b, domain, capacity=GBPS, prop=2, **extra) -> dict:
    return {"id": link_id, "endpoints": [a, b], "capacity": capacity, "propagation_delay": prop,
            "domain": domain, **extra}


def _secret(label: str) -> str:
    return hashlib.sha256(label.encode()).hexdigest()


def core_block(hub: str = "core-sw") -> tuple[list[dict], list[dict]]:
    """Core network functions hanging off one SDN switch."""
    nodes = [_node(hub, "SdnSwitch", "SDN")]
    links = []
    for fn in FUNCTION_NODES:
        nodes.append(_node(fn, "CoreFunction", "SDN"))
        links.append(_link(f"l-{fn}", hub, fn, "SDN", 10 * GBPS, 5))
    return nodes, links


def device_pair(name: str, node: str, *, tsn: bool, provision_at: int | None = 0, **overrides) -> list[dict]:
    """DTE ``name`` and its modem ``name-dce`` with matching credentials."""
    dte = {
        "id": name,
        "role": "DTE",
        "paired_with": f"{name}-dce",
        "node": node,
        "dte_signature": _secret(f"sig:{name}"),
        "is_tsn_end_device": tsn,
        "settings": {"profile": "default"},
    }
    if tsn:
        dte["tsn_transmission_type"] = "E2E"
    if provision_at is not None:
        dte["provision_at"] = provision_at
    dce = {
        "id": f"{name}-dce",
        "role": "DCE",
        "paired_with": name,
        "node": node,
        "secure_element_id": f"se-{name}",
        "se_secret": _secret(f"se:{name}"),
    }
    for key, value in overrides.items():
        (dce if key in ("response_secret", "secure_element_id", "se_secret") else dte)[key] = value
    return [dte, dce]


# -- flagship ---------------------------------------------------------------


def demo_scenario(seed: int = 7) -> dict:
    """Factory cell with a 5G robot, TSN sensor/actuator loop, an edge cloud,
    a rogue device, a configuration-server outage and a bridge failure that
    forces re-provisioning over a backup path."""
    nodes, links = core_block()
    nodes += [
        _node("gnb", "BaseStation", "FiveG"),
        _node("br1", "TsnBridge", "TSN"),
        _node("br2", "TsnBridge", "TSN"),
        _node("br3", "TsnBridge", "TSN"),
        _node("edge", "EdgeCloud", "TSN"),
        _node("n-sensor", "EndDevice", "TSN"),
        _node("n-actuator", "EndDevice", "TSN"),
        _node("n-robot", "EndDevice", "FiveG"),
        _node("n-agv", "EndDevice", "FiveG"),
        _node("n-rogue", "EndDevice", "FiveG"),
        _node("inet", "SdnSwitch", "SDN"),
    ]
    links += [
        _link("l-sensor", "n-sensor", "br1", "TSN"),
        _link("l-actuator", "n-actuator", "br2", "TSN"),
        _link("l-br1-br2", "br1", "br2", "TSN"),
        _link("l-br1-br3", "br1", "br3", "TSN"),
        _link("l-br3-br2", "br3", "br2", "TSN"),
        _link("l-br2-edge", "br2", "edge", "TSN"),
        _link("l-robot-air", "n-robot", "gnb", "FiveG", GBPS, 10),
        _link("l-agv-air", "n-agv", "gnb", "FiveG", GBPS, 10),
        _link("l-rogue-air", "n-rogue", "gnb", "FiveG", GBPS, 10),
        _link("l-gnb-br1", "gnb", "br1", "FiveG", 10 * GBPS, 20),
        _link("l-gnb-core", "gnb", "core-sw", "FiveG", 10 * GBPS, 50),
        _link("l-br1-core", "br1", "core-sw", "SDN", 10 * GBPS, 5),
        _link("l-edge-inet", "edge", "inet", "SDN", GBPS, 30, secure=False),
        _link("l-inet-core", "inet", "core-sw", "SDN", GBPS, 30, secure=False),
    ]
    devices = (
        device_pair("sensor", "n-sensor", tsn=True, provision_at=0, expect_state="Operational")
        + device_pair("actuator", "n-actuator", tsn=True, provision_at=100, expect_state="Operational")
        + device_pair("robot", "n-robot", tsn=False, provision_at=200, expect_state="Operational")
        + device_pair("agv", "n-agv", tsn=False, provision_at=2_500, expect_state="Operational")
        + device_pair("rogue", "n-rogue", tsn=False, provision_at=300, expect_state="Rejected")
    )
    use_cases = [
        {"name": "closed-loop", "class": "IndustrialApplication", "group": "LocalControl",
         "talker": "sensor", "listeners": ["actuator"], "provision_at": 40_000, "expect": "Active"},
        {"name": "robot-telemetry", "class": "IndustrialApplication", "group": "MobileRobotics",
         "talker": "robot", "listeners": ["edge"], "provision_at": 40_100, "expect": "Active"},
        {"name": "teleoperation", "class": "IndustrialApplication", "group": "RemoteControl",
         "talker": "edge", "listeners": ["agv"], "provision_at": 40_200, "expect": "Active"},
        {"name": "plant-monitoring", "class": "IndustrialApplication", "group": "Monitoring",
         "talker": "sensor", "listeners": ["edge", "actuator"], "provision_at": 40_300, "expect": "Active"},
        {"name": "firmware-push", "class": "GeneralFunctionality", "group": "None",
         "talker": "edge", "listeners": ["sensor"], "provision_at": 40_400, "expect": "Active",
         "qos": {"max_e2e_latency": 50_000, "min_throughput": 80_000,
                 "traffic": {"type": "Periodic", "period": 50_000, "frame_bytes": 500}}},
    ]
    faults = [
        {"kind": "AuthReject", "device_id": "rogue"},
        {"kind": "ConfigUnavailable", "from": 2_500, "until": 4_000},
        {"kind": "LinkDown", "link_id": "l-br1-br2", "from": 120_000, "until": 1_000_000},
    ]
    offsets = {n: (i * 7919) % 2001 - 1000 for i, n in enumerate(["br1", "br2", "br3", "edge", "gnb"], 1)}
    return {
        "name": "flagship-demo",
        "version": 1,
        "seed": seed,
        "horizon": 200_000,
        "nodes": nodes,
        "links": links,
        "devices": devices,
        "use_cases": use_cases,
        "faults": faults,
        "timesync": {"reference": "cnc", "at": 1_000, "rounds": 1, "offsets": offsets},
        "services": {"spectrum_heartbeat": 50_000, "positions": {"robot": [12.5, 3.0], "sensor": [1.0, 1.0]}},
    }


# -- randomized registration ------------------------------------------------

REGISTRATION_TAGS = (
    "AttachRequest", "AuthChallenge", "AuthResponse", "RadioAttachOk", "AuthzRequest", "AuthzGranted",
    "ConfigRequest", "ConfigDelivered", "CucRegisterRequest", "CucRegistered",
)


def random_registration_scenario(seed: int) -> dict:
    """1-4 device pairs, random TSN mix, timing, credentials and faults."""
    rng = random.Random(seed)
    nodes, links = core_block()
    nodes += [_node("gnb", "BaseStation", "FiveG"), _node("br", "TsnBridge", "TSN")]
    links += [
        _link("l-gnb-core", "gnb", "core-sw", "FiveG", 10 * GBPS, rng.randint(10, 80)),
        _link("l-br-core", "br", "core-sw", "SDN", 10 * GBPS, rng.randint(1, 10)),
    ]
    devices: list[dict] = []
    faults: list[dict] = []
    access = []
    for i in range(rng.randint(1, 4)):
        name = f"d{i}"
        tsn = rng.random() < 0.5
        node = f"n-{name}"
        if tsn:
            nodes.append(_node(node, "EndDevice", "TSN"))
            links.append(_link(f"l-{name}", node, "br", "TSN", GBPS, rng.randint(1, 5)))
        else:
            nodes.append(_node(node, "EndDevice", "FiveG"))
            links.append(_link(f"l-{name}", node, "gnb", "FiveG", GBPS, rng.randint(5, 30)))
        access.append(f"l-{name}")
        extra: dict = {}
        roll = rng.random()
        if roll < 0.08:
            extra["response_secret"] = _secret(f"wrong:{name}")
        elif roll < 0.16:
            extra["expected_signature"] = _secret(f"other:{name}")
        elif roll < 0.24:
            extra["authorized_systems"] = rng.choice([["CUC"], ["ConfigServer"], []])
        devices += device_pair(name, node, tsn=tsn, provision_at=rng.randint(0, 20_000), **extra)
        if rng.random() < 0.15:
            faults.append({"kind": "AuthReject", "device_id": name})
        if rng.random() < 0.25:
            start = rng.randint(0, 30_000)
            faults.append({"kind": "DropMessage", "tag": rng.choice(REGISTRATION_TAGS), "device": name,
                           "from": start, "until": start + rng.randint(100, 20_000)})
    if rng.random() < 0.3:
        start = rng.randint(0, 20_000)
        faults.append({"kind": "ConfigUnavailable", "from": start, "until": start + rng.randint(500, 40_000)})
    if rng.random() < 0.2:
        start = rng.randint(0, 20_000)
        faults.append({"kind": "LinkDown", "link_id": rng.choice(access + ["l-gnb-core", "l-br-core"]),
                       "from": start, "until": start + rng.randint(100, 30_000)})
    return {
        "name": f"random-registration-{seed}",
        "version": 1,
        "seed": seed,
        "horizon": 400_000,
        "registration_timeout": rng.choice([5_000, 20_000, 50_000]),
        "nodes": nodes,
        "links": links,
        "devices": devices,
        "faults": faults,
    }


# -- density ----------------------------------------------------------------


def density_scenario(pairs: int = 10_000, cells: int = 100, reject_every: int = 97, seed: int = 1) -> dict:
    """``pairs`` DTE/DCE pairs spread over ``cells`` base stations; every
    ``reject_every``-th device has its radio authentication rejected."""
    nodes, links = core_block()
    for c in range(cells):
        nodes.append(_node(f"cell{c}", "BaseStation", "FiveG"))
        links.append(_link(f"l-cell{c}", f"cell{c}", "core-sw", "FiveG", 10 * GBPS, 40))
    devices, faults = [], []
    for i in range(pairs):
        name = f"dev{i}"
        devices += device_pair(name, f"cell{i % cells}", tsn=i % 3 == 0, provision_at=i * 10)
        if i % reject_every == reject_every - 1:
            faults.append({"kind": "AuthReject", "device_id": name})
    return {
        "name": f"density-{pairs}",
        "version": 1,
        "seed": seed,
        "horizon": pairs * 10 + 200_000,
        "nodes": nodes,
        "links": links,
        "devices": devices,
        "faults": faults,
    }


# -- TSN workloads ----------------------------------------------------------


def tsn_stream_scenario(seed: int, streams: int = 200, horizon: int = 20_000) -> dict:
    """Ring-and-spur TSN network carrying ``streams`` randomized streams
    (talkers/listeners are plain nodes, so no registration is needed)."""
    rng = random.Random(seed)
    bridges = [f"sw{i}" for i in range(6)]
    ends = [f"es{i}" for i in range(12)]
    nodes = [_node(b, "TsnBridge", "TSN") for b in bridges] + [_node(e, "EndDevice", "TSN") for e in ends]
    nodes += [_node(fn, "CoreFunction", "TSN") for fn in FUNCTION_NODES]
    links = [_link(f"r{i}", bridges[i], bridges[(i + 1) % 6], "TSN", GBPS, rng.randint(1, 4)) for i in range(6)]
    links += [_link(f"a{i}", e, bridges[i % 6], "TSN", GBPS, 1) for i, e in enumerate(ends)]
    links += [_link(f"f-{fn}", fn, bridges[0], "TSN", GBPS, 1) for fn in FUNCTION_NODES]
    use_cases = []
    for s in range(streams):
        talker = rng.choice(ends)
        listeners = rng.sample([e for e in ends if e != talker], rng.choice([1, 1, 1, 2, 3]))
        period = rng.choice([250, 500, 1_000, 2_000])
        use_cases.append({
            "name": f"s{s:03d}",
            "class": "GeneralFunctionality",
            "group": "None",
            "talker": talker,
            "listeners": listeners,
            "provision_at": s,
            "expect": "Any",  # admission under saturation is the point
            "qos": {"max_e2e_latency": period, "min_throughput": 0,
                    "traffic": {"type": "Periodic", "period": period, "frame_bytes": rng.choice([64, 128, 256, 1500])}},
        })
    return {
        "name": f"tsn-workload-{seed}",
        "version": 1,
        "seed": seed,
        "horizon": horizon,
        "nodes": nodes,
        "links": links,
        "devices": [],
        "use_cases": use_cases,
    }


# -- time sync --------------------------------------------------------------


def timesync_star(n: int = 100, seed: int = 3, asymmetric: bool = False) -> dict:
    """``n`` nodes one hop from the reference with random clock offsets in
    [-1e6, 1e6] us. With ``asymmetric`` each link's reverse delay differs
    from the forward delay by an even amount, so half the asymmetry is a
    whole number of microseconds."""
    rng = random.Random(seed)
    nodes = [_node("ref", "CoreFunction", "SDN")] + [_node(fn, "CoreFunction", "SDN") for fn in FUNCTION_NODES]
    links = [_link(f"f-{fn}", "ref", fn, "SDN", GBPS, 1) for fn in FUNCTION_NODES]
    offsets = {"ref": rng.randint(-1_000_000, 1_000_000)}
    for i in range(n):
        node = f"c{i}"
        nodes.append(_node(node, "EndDevice", "SDN"))
        fwd = rng.randint(1, 200)
        extra = {"reverse_propagation_delay": fwd + 2 * rng.randint(-((fwd - 1) // 2), 100)} if asymmetric else {}
        links.append(_link(f"l-{node}", node, "ref", "SDN", GBPS, fwd, **extra))
        offsets[node] = rng.randint(-1_000_000, 1_000_000)
    return {
        "name": f"timesync-{'asym' if asymmetric else 'sym'}-{n}",
        "version": 1,
        "seed": seed,
        "horizon": 300_000,
        "nodes": nodes,
        "links": links,
        "devices": [],
        "timesync": {"reference": "ref", "at": 0, "rounds": 1, "offsets": offsets,
                     "nodes": [f"c{i}" for i in range(n)]},
    }
