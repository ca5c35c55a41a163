"""Multi-domain manager: drives device registration through the simulated
control plane, provisions use cases across 5G/TSN/SDN/IE segments and keeps
their end-to-end QoS under observation.

Function placement (config server, CUC, ...) comes from the scenario. All
state is mutated from engine handlers only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from . import registration as reg
from .engine import Engine, Message, SimEvent
from .model import Bursty, DeviceRecord, Domain, RegistrationState, Role, UseCase
from .registration import CONFIG_SERVER, ConfigLocked, ConfigServer, DeviceConfig, transition
from .scenario import DeviceSpec, Scenario
from .security import (
    AuditLog,
    CredentialStore,
    OrderViolation,
    authorize_dte,
    challenge_response,
    radio_attach_auth,
)
from .timesync import ROUND_INTERVAL, TimeSyncService
from .topology import Hop, NetworkGraph, NoPath
from .tsn import CNC, CUCService, Rejection, StreamRequest, ingress_latency

log = logging.getLogger(__name__)

S = RegistrationState

# Period used when bursty traffic has to cross a gate-scheduled segment.
BURSTY_TSN_PERIOD = 1_000


@dataclass(frozen=True)
class DomainBudget:
    domain: Domain
    latency_budget: int
    throughput_commit: int
    backing: str
    hops: tuple[Hop, ...] = field(default=(), compare=False)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.value,
            "latency_budget": self.latency_budget,
            "throughput_commit": self.throughput_commit,
            "backing": self.backing,
            "links": [h.link_id for h in self.hops],
        }


@dataclass
class E2EProvision:
    use_case: UseCase
    legs: dict[str, tuple[DomainBudget, ...]]
    period: int
    release_phase: int
    status: str = "Active"
    generation: int = 0
    provisioned_at: int = 0

    def leg_latency(self, listener: str) -> int:
        return sum(b.latency_budget for b in self.legs[listener])

    @property
    def total_latency(self) -> int:
        return max(self.leg_latency(l) for l in self.legs)

    @property
    def budgets(self) -> list[DomainBudget]:
        return [b for leg in self.legs.values() for b in leg]

    def to_json(self) -> dict:
        q = self.use_case.qos
        return {
            "use_case": self.use_case.name,
            "group": self.use_case.group.value,
            "status": self.status,
            "generation": self.generation,
            "total_latency": self.total_latency,
            "max_e2e_latency": q.max_e2e_latency,
            "strict_latency": q.strict_latency,
            "min_throughput": q.min_throughput,
            "legs": {l: [b.to_json() for b in leg] for l, leg in sorted(self.legs.items())},
        }


@dataclass(frozen=True)
class ProvisionFailure:
    use_case: str
    reasons: dict[str, str]


@dataclass(frozen=True)
class Bearer:
    bearer_id: str
    domain: Domain
    link_ids: tuple[str, ...]
    throughput: int


@dataclass
class Registrant:
    dte: DeviceSpec
    dce: DeviceSpec
    state: S = S.Unprovisioned
    scope: frozenset[str] = frozenset()
    token: int = 0
    waiting: str | None = None
    config_attempt: int = 1
    provisioned_at: int | None = None
    operational_at: int | None = None

    @property
    def device_id(self) -> str:
        return self.dte.device_id


def split_segments(hops: list[Hop] | tuple[Hop, ...]) -> list[tuple[Domain, tuple[Hop, ...]]]:
    """Maximal runs of consecutive hops in the same domain."""
    segments: list[tuple[Domain, list[Hop]]] = []
    for h in hops:
        if segments and segments[-1][0] is h.link.domain:
            segments[-1][1].append(h)
        else:
            segments.append((h.link.domain, [h]))
    return [(d, tuple(hs)) for d, hs in segments]


def traffic_shape(uc: UseCase) -> tuple[int, int]:
    """(period, frame_bytes) used for gate scheduling and replay."""
    t = uc.qos.traffic
    if isinstance(t, Bursty):
        period = BURSTY_TSN_PERIOD
        return period, max(1, -(-t.mean_rate * period // 8_000_000))
    return t.period, t.frame_bytes


class MultiDomainManager:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.fn = scenario.functions
        insecure = sorted(l.link_id for l in scenario.graph.links.values() if not l.secure)
        self.engine = Engine(
            scenario.graph,
            self.seed,
            scenario.faults,
            header={"scenario": scenario.name, "insecure_links": insecure},
        )
        self.audit = AuditLog()
        self.credentials = self._credentials()
        self.registrants: dict[str, Registrant] = {}
        self.records: dict[str, DeviceRecord] = {}
        for d in scenario.dtes():
            dce = scenario.device(d.paired_with)
            self.registrants[d.device_id] = Registrant(d, dce)
            self.records[d.device_id] = DeviceRecord(
                d.device_id, Role.DTE, dce.device_id, None, d.dte_signature, d.is_tsn_end_device
            )
            self.records[dce.device_id] = DeviceRecord(dce.device_id, Role.DCE, d.device_id)
        self.config_server = ConfigServer(self._state_of)
        self.cuc = CUCService()
        self.cnc = CNC()
        self.bearers: dict[str, Bearer] = {}
        self.provisions: dict[str, E2EProvision] = {}
        self.failures: dict[str, ProvisionFailure] = {}
        self.attached: set[str] = set()
        self.challenges: dict[str, str] = {}
        self.grants: dict[str, frozenset[str]] = {}
        self.use_case_specs = {u.name: u for u in scenario.use_cases}
        self.timesync: TimeSyncService | None = None
        self._wire()

    # -- setup --

    def _credentials(self) -> CredentialStore:
        store = CredentialStore()
        for d in self.scenario.devices:
            if d.role is Role.DCE and d.secure_element_id is not None and d.se_secret is not None:
                store.se_secrets[d.secure_element_id] = d.se_secret
            elif d.role is Role.DTE:
                expected = d.expected_signature if d.expected_signature is not None else d.dte_signature
                if expected is not None:
                    store.dte_signatures[d.device_id] = expected
                store.authorized_systems[d.device_id] = d.authorized_systems
        return store

    def _wire(self) -> None:
        on = self.engine.on
        on("OperatorProvision", self._on_operator_provision)
        on("PowerOn", self._on_power_on)
        on("AttachRequest", self._on_attach_request)
        on("AuthChallenge", self._on_auth_challenge)
        on("AuthResponse", self._on_auth_response)
        on("RadioAttachOk", self._on_attach_result)
        on("RadioAttachFail", self._on_attach_result)
        on("AuthzRequest", self._on_authz_request)
        on("AuthzGranted", self._on_authz_result)
        on("AuthzDenied", self._on_authz_result)
        on("ConfigRequest", self._on_config_request)
        on("ConfigRetry", self._on_config_retry)
        on("ConfigDelivered", self._on_config_result)
        on("ConfigUnavailable", self._on_config_result)
        on("CucRegisterRequest", self._on_cuc_request)
        on("CucRegistered", self._on_cuc_result)
        on("CucRejected", self._on_cuc_result)
        on("Activate", self._on_activate)
        on("RegTimeout", self._on_timeout)
        on("ProvisionRequest", self._on_provision_request)
        on("FrameRelease", self._on_frame_release)
        on("DataFrame", self._on_data_frame)
        on("SpectrumHeartbeat", self._on_heartbeat)
        on("SyncRound", self._on_sync_round)

    def _state_of(self, device_id: str) -> S | None:
        r = self.registrants.get(device_id)
        return r.state if r else None

    # -- public driving API --

    def schedule_registration(self, dte_id: str, at: int) -> None:
        node = self.fn["config_server"]
        self.engine.schedule(at, Message(node, node, "OperatorProvision", device=dte_id))

    def register_device_e2e(self, dte_id: str, at: int | None = None, until: int | None = None):
        """Run the full registration of one DCE/DTE pair; returns (final state, trace segment)."""
        at = self.engine.clock if at is None else at
        self.schedule_registration(dte_id, at)
        self.engine.run_until(self.scenario.horizon if until is None else until)
        return self.registrants[dte_id].state, self.engine.trace.for_device(dte_id)

    def schedule_scenario(self) -> None:
        sc = self.scenario
        for d in sc.dtes():
            if d.provision_at is not None:
                self.schedule_registration(d.device_id, d.provision_at)
        mdm = self.fn["mdm"]
        for u in sc.use_cases:
            self.engine.schedule(u.provision_at, Message(mdm, mdm, "ProvisionRequest", {"use_case": u.name}))
        beat = sc.services.get("spectrum_heartbeat")
        if beat:
            self.engine.schedule(0, Message(mdm, mdm, "SpectrumHeartbeat", {"service": "spectrum"}))
        if sc.timesync is not None:
            ts = sc.timesync
            self.timesync = TimeSyncService(self.engine, ts.offsets, ts.reference)
            for r in range(ts.rounds):
                self.engine.schedule(
                    ts.at + r * ROUND_INTERVAL, Message(ts.reference, ts.reference, "SyncRound", {"round": r})
                )

    def run(self) -> None:
        self.schedule_scenario()
        self.engine.run_until(self.scenario.horizon)

    # -- registration plumbing --

    def _node(self, r: Registrant) -> str:
        return r.dte.node

    def _expect(self, r: Registrant, phase: str) -> int:
        r.token += 1
        r.waiting = phase
        node = self._node(r)
        self.engine.after(
            self.scenario.registration_timeout,
            Message(node, node, "RegTimeout", {"phase": phase, "token": r.token}, device=r.device_id),
        )
        return r.token

    def _matches(self, r: Registrant, phase: str, body: dict) -> bool:
        if r.waiting == phase and body.get("token") == r.token:
            r.waiting = None
            return True
        self.engine.record("stale_response", device=r.device_id, phase=phase)
        return False

    def _set_state(self, r: Registrant, new: S) -> None:
        for did in (r.dte.device_id, r.dce.device_id):
            self.records[did] = self.records[did].with_state(new)
        r.state = new

    def apply(self, r: Registrant, event: reg.RegistrationEvent) -> reg.Step:
        eng = self.engine
        old = r.state
        step = transition(old, event, r.dte.is_tsn_end_device)
        name = type(event).__name__
        if not step.legal:
            eng.record("illegal_transition", device=r.device_id, state=old.value, event=name)
            return step
        if step.state is not old:
            self._set_state(r, step.state)
            eng.record("transition", device=r.device_id, old=old.value, new=step.state.value, event=name)
            self.audit.append(eng.clock, r.device_id, "transition", f"{old.value}->{step.state.value}")
            if step.state is S.Provisioned:
                r.provisioned_at = eng.clock
            elif step.state is S.Operational:
                r.operational_at = eng.clock
            if step.state.terminal:
                r.waiting = None
        for action in step.actions:
            self._perform(r, action)
        return step

    def _perform(self, r: Registrant, action) -> None:
        eng = self.engine
        node = self._node(r)
        dev = r.device_id
        if isinstance(action, reg.PowerOn):
            eng.after(0, Message(node, node, "PowerOn", {"role": "DTE"}, device=dev))
            eng.after(0, Message(node, node, "PowerOn", {"role": "DCE"}, device=dev))
        elif isinstance(action, reg.RequestAuthorization):
            token = self._expect(r, "authz")
            sig = (r.dte.dte_signature or b"").hex()
            eng.send(Message(node, self.fn["authz"], "AuthzRequest", {"signature": sig, "token": token}, device=dev))
        elif isinstance(action, reg.RequestConfiguration):
            self._request_config(r, action.attempt)
        elif isinstance(action, reg.RetryConfiguration):
            eng.after(action.delay, Message(node, node, "ConfigRetry", {"attempt": action.attempt}, device=dev))
        elif isinstance(action, reg.RegisterAtCuc):
            token = self._expect(r, "cuc")
            ttype = r.dte.tsn_transmission_type or "E2E"
            eng.send(Message(node, self.fn["cuc"], "CucRegisterRequest", {"type": ttype, "token": token}, device=dev))
        elif isinstance(action, reg.AnnounceReady):
            eng.send(Message(node, self.fn["cuc"], "TsnAnnounce", {"ready": True}, device=dev))
        elif isinstance(action, reg.ScheduleActivate):
            eng.after(0, Message(node, node, "Activate", device=dev))

    def _request_config(self, r: Registrant, attempt: int) -> None:
        r.config_attempt = attempt
        token = self._expect(r, "config")
        self.engine.send(
            Message(
                self._node(r),
                self.fn["config_server"],
                "ConfigRequest",
                {"attempt": attempt, "token": token},
                device=r.device_id,
            )
        )

    # -- handlers: operator and device side --

    def _on_operator_provision(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        d = r.dte
        cfg = DeviceConfig(d.device_id, d.settings, d.authorized_systems, d.tsn_transmission_type)
        try:
            self.config_server.store_config(cfg)
        except ConfigLocked as exc:
            eng.record("config_locked", device=d.device_id, detail=str(exc))
        se_id = r.dce.secure_element_id or ""
        for did in (d.device_id, r.dce.device_id):
            self.records[did] = replace(self.records[did], secure_element_id=se_id)
        r.scope = frozenset()
        self.grants.pop(d.device_id, None)
        self.attached.discard(d.device_id)
        self.apply(r, reg.OperatorProvision(cfg, se_id))

    def _on_power_on(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        if ev.message.body["role"] != "DCE" or r.state is not S.Provisioned:
            return
        token = self._expect(r, "attach")
        eng.send(
            Message(
                self._node(r),
                self.fn["core_auth"],
                "AttachRequest",
                {"secure_element_id": r.dce.secure_element_id, "token": token},
                device=r.device_id,
            )
        )

    def _on_auth_challenge(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        body = ev.message.body
        if r.waiting != "attach" or body.get("token") != r.token:
            return
        secret = r.dce.response_secret if r.dce.response_secret is not None else (r.dce.se_secret or b"")
        response = challenge_response(secret, bytes.fromhex(body["challenge"])).hex()
        eng.send(
            Message(
                self._node(r),
                self.fn["core_auth"],
                "AuthResponse",
                {"secure_element_id": body["secure_element_id"], "response": response, "token": body["token"]},
                device=r.device_id,
            )
        )

    def _on_attach_result(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        if not self._matches(r, "attach", ev.message.body):
            return
        if ev.message.tag == "RadioAttachOk":
            self.apply(r, reg.RadioAttachOk())
        else:
            self.apply(r, reg.RadioAttachFail(ev.message.body.get("reason", "AuthFailure")))

    def _on_authz_result(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        body = ev.message.body
        if not self._matches(r, "authz", body):
            return
        if ev.message.tag == "AuthzGranted":
            r.scope = frozenset(body["scope"])
            self.apply(r, reg.AuthzGranted(r.scope))
        else:
            self.apply(r, reg.AuthzDenied(body.get("reason", "Denied")))

    def _on_config_retry(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        if r.state is S.Authorized:
            self._request_config(r, ev.message.body["attempt"])

    def _on_config_result(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        body = ev.message.body
        if not self._matches(r, "config", body):
            return
        if ev.message.tag == "ConfigDelivered":
            cfg = body["config"]
            self.apply(
                r,
                reg.ConfigDelivered(
                    DeviceConfig(
                        cfg["device_id"],
                        cfg["settings"],
                        frozenset(cfg["authorized_systems"]),
                        cfg.get("tsn_transmission_type"),
                    )
                ),
            )
        else:
            self.apply(r, reg.ConfigUnavailable(body["attempt"], body.get("permanent", False)))

    def _on_cuc_result(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        if not self._matches(r, "cuc", ev.message.body):
            return
        if ev.message.tag == "CucRegistered":
            self.apply(r, reg.CucRegistered(ev.message.body.get("type", "E2E")))
        else:
            self.apply(r, reg.CucRejected(ev.message.body.get("reason", "Rejected")))

    def _on_activate(self, eng: Engine, ev: SimEvent) -> None:
        self.apply(self.registrants[ev.message.device], reg.Activate())

    def _on_timeout(self, eng: Engine, ev: SimEvent) -> None:
        r = self.registrants[ev.message.device]
        body = ev.message.body
        phase = body["phase"]
        if r.waiting != phase or r.token != body["token"]:
            return
        r.waiting = None
        eng.record("timeout", device=r.device_id, phase=phase)
        if phase == "attach":
            self.apply(r, reg.RadioAttachFail("Timeout"))
        elif phase == "authz":
            self.apply(r, reg.AuthzDenied("Timeout"))
        elif phase == "config":
            self.apply(r, reg.ConfigUnavailable(r.config_attempt))
        elif phase == "cuc":
            self.apply(r, reg.CucRejected("Timeout"))

    # -- handlers: network functions --

    def _on_attach_request(self, eng: Engine, ev: SimEvent) -> None:
        dev = ev.message.device
        body = ev.message.body
        challenge = f"{eng.rng.getrandbits(64):016x}"
        self.challenges[dev] = challenge
        eng.send(
            Message(
                self.fn["core_auth"],
                ev.message.src,
                "AuthChallenge",
                {"challenge": challenge, "secure_element_id": body["secure_element_id"], "token": body["token"]},
                device=dev,
            )
        )

    def _on_auth_response(self, eng: Engine, ev: SimEvent) -> None:
        dev = ev.message.device
        body = ev.message.body
        challenge = self.challenges.pop(dev, None)
        if challenge is None:
            eng.record("order_violation", device=dev, detail="AuthResponse without a challenge")
            return
        result = radio_attach_auth(
            self.credentials,
            body["secure_element_id"],
            bytes.fromhex(challenge),
            bytes.fromhex(body["response"]),
            rejected=eng.auth_rejected(dev),
        )
        outcome = type(result).__name__
        eng.record("auth_decision", device=dev, function="core_auth", outcome=outcome)
        self.audit.append(eng.clock, self.fn["core_auth"], "auth", f"{dev}:{outcome}")
        reply = {"token": body["token"]}
        if isinstance(result, reg.RadioAttachOk):
            self.attached.add(dev)
        else:
            reply["reason"] = result.reason
        eng.send(Message(self.fn["core_auth"], ev.message.src, outcome, reply, device=dev))

    def _on_authz_request(self, eng: Engine, ev: SimEvent) -> None:
        dev = ev.message.device
        body = ev.message.body
        try:
            result = authorize_dte(self.credentials, dev, bytes.fromhex(body["signature"]), dev in self.attached)
        except OrderViolation as exc:
            eng.record("order_violation", device=dev, detail=str(exc))
            return
        outcome = type(result).__name__
        eng.record("auth_decision", device=dev, function="authz", outcome=outcome)
        self.audit.append(eng.clock, self.fn["authz"], "auth", f"{dev}:{outcome}")
        reply: dict = {"token": body["token"]}
        if isinstance(result, reg.AuthzGranted):
            self.grants[dev] = result.scope
            reply["scope"] = sorted(result.scope)
        else:
            reply["reason"] = result.reason
        eng.send(Message(self.fn["authz"], ev.message.src, outcome, reply, device=dev))

    def _on_config_request(self, eng: Engine, ev: SimEvent) -> None:
        dev = ev.message.device
        body = ev.message.body
        reply: dict = {"token": body["token"], "attempt": body["attempt"]}
        if CONFIG_SERVER not in self.grants.get(dev, frozenset()):
            reply.update(permanent=True, reason="OutOfScope")
            tag = "ConfigUnavailable"
        else:
            got = self.config_server.fetch_config(dev, unavailable=eng.config_unavailable())
            if isinstance(got, reg.ConfigUnavailable):
                reply["reason"] = "Unavailable"
                tag = "ConfigUnavailable"
            else:
                reply["config"] = got.to_json()
                tag = "ConfigDelivered"
        eng.send(Message(self.fn["config_server"], ev.message.src, tag, reply, device=dev))

    def _on_cuc_request(self, eng: Engine, ev: SimEvent) -> None:
        dev = ev.message.device
        body = ev.message.body
        r = self.registrants[dev]
        try:
            eng.route(self.fn["cuc"], self.fn["cnc"])
            reachable = True
        except NoPath:
            reachable = False
        try:
            result = self.cuc.cuc_register(
                dev, body["type"], r.state, r.dte.is_tsn_end_device, self.grants.get(dev, frozenset()), reachable
            )
        except OrderViolation as exc:
            eng.record("order_violation", device=dev, detail=str(exc))
            return
        reply = {"token": body["token"], "type": body["type"]}
        if isinstance(result, reg.CucRejected):
            reply["reason"] = result.reason
        eng.send(Message(self.fn["cuc"], ev.message.src, type(result).__name__, reply, device=dev))

    # -- stubs --

    def _on_heartbeat(self, eng: Engine, ev: SimEvent) -> None:
        interval = self.scenario.services["spectrum_heartbeat"]
        if eng.clock + interval <= self.scenario.horizon:
            eng.after(interval, ev.message)

    def localize(self, device_id: str) -> list[float] | None:
        """Fixed scenario-declared position; no localisation mechanism is modelled."""
        pos = self.scenario.services.get("positions", {}).get(device_id)
        self.engine.record("localization", device=device_id, position=pos)
        return pos

    def _on_sync_round(self, eng: Engine, ev: SimEvent) -> None:
        ts = self.scenario.timesync
        nodes = list(ts.nodes) if ts.nodes is not None else sorted(n for n in ts.offsets if n != ts.reference)
        self.timesync.start_round(nodes, ev.message.body["round"])

    # -- provisioning --

    def _on_provision_request(self, eng: Engine, ev: SimEvent) -> None:
        spec = self.use_case_specs[ev.message.body["use_case"]]
        self.provision_use_case(self.scenario.use_case(spec))

    def _operational(self, ref: str) -> bool:
        if ref in self.registrants:
            return self.registrants[ref].state is S.Operational
        if ref in self.scenario.device_index:
            dev = self.scenario.device(ref)
            return self.registrants[dev.paired_with].state is S.Operational
        return True  # plain network node (edge cloud, server)

    def provision_use_case(self, uc: UseCase, generation: int = 0) -> E2EProvision | ProvisionFailure:
        """Admit ``uc`` segment by segment along each talker->listener path.

        All-or-nothing: any failing segment releases what was already taken.
        """
        eng = self.engine
        now = eng.clock
        streams: list[str] = []
        bearers: list[str] = []

        def fail(reasons: dict[str, str]) -> ProvisionFailure:
            for sid in streams:
                self._release_stream(sid)
            for bid in bearers:
                self._release_bearer(bid)
            failure = ProvisionFailure(uc.name, reasons)
            self.failures[uc.name] = failure
            eng.record("provision_failure", use_case=uc.name, reasons=reasons, generation=generation)
            return failure

        not_ready = [x for x in (uc.talker, *uc.listeners) if not self._operational(x)]
        if not_ready:
            return fail({"E2E": f"NotOperational:{','.join(not_ready)}"})

        qos = uc.qos
        period, frame_bytes = traffic_shape(uc)
        tsn_commit = frame_bytes * 8 * 1_000_000 // period
        bearer_commit = max(qos.min_throughput, -(-int(qos.traffic.rate * 1000) // 1000))
        graph = eng.active_graph(now)
        talker = self.scenario.node_of(uc.talker)
        release_shift: int | None = None
        legs: dict[str, tuple[DomainBudget, ...]] = {}

        for lst in uc.listeners:
            try:
                hops = graph.shortest_path(talker, self.scenario.node_of(lst))
            except NoPath:
                return fail({"E2E": "NoPath"})
            if not hops:
                return fail({"E2E": "NoPath"})
            segments = split_segments(hops)
            const = [0 if d is Domain.TSN else self.scenario.domain_latency[d.value] for d, _ in segments]
            acc = 0
            budgets: list[DomainBudget] = []
            for si, (domain, seg) in enumerate(segments):
                if domain is Domain.TSN:
                    if tsn_commit < qos.min_throughput:
                        return fail({"TSN": "ThroughputBelowMinimum"})
                    remaining = qos.max_e2e_latency - acc - sum(const[si + 1 :]) - (1 if qos.strict_latency else 0)
                    if remaining <= 0:
                        return fail({"TSN": "LatencyExceeded"})
                    sid = f"{uc.name}/{lst}/{si}" + (f"#{generation}" if generation else "")
                    req = StreamRequest(sid, seg[0].src, (seg[-1].dst,), period, frame_bytes, remaining, qos.priority)
                    res = self.cnc.admit(req, _segment_graph(graph, seg), now)
                    if isinstance(res, Rejection):
                        return fail({"TSN": res.reason})
                    streams.append(sid)
                    eng.record("reservation", use_case=uc.name, **res.to_json())
                    if release_shift is None:
                        release_shift = acc
                    lat = ingress_latency(res, seg[-1].dst, (acc - release_shift) % period)
                    budgets.append(DomainBudget(domain, lat, tsn_commit, sid, seg))
                else:
                    bid = f"{uc.name}/{lst}/{si}" + (f"#{generation}" if generation else "")
                    for h in seg:
                        load = sum(b.throughput for b in self.bearers.values() if h.link_id in b.link_ids)
                        if load + bearer_commit > h.link.capacity:
                            return fail({domain.value: "CapacityExceeded"})
                    self.bearers[bid] = Bearer(bid, domain, tuple(h.link_id for h in seg), bearer_commit)
                    bearers.append(bid)
                    eng.record("bearer", use_case=uc.name, bearer_id=bid, domain=domain.value,
                               links=[h.link_id for h in seg], throughput=bearer_commit)
                    lat = const[si]
                    budgets.append(DomainBudget(domain, lat, bearer_commit, bid, seg))
                acc += lat
            if not qos.latency_ok(acc):
                return fail({"E2E": "LatencyExceeded"})
            legs[lst] = tuple(budgets)

        release_phase = (-(release_shift or 0)) % period
        prov = E2EProvision(uc, legs, period, release_phase, "Active", generation, now)
        self.provisions[uc.name] = prov
        self.failures.pop(uc.name, None)
        eng.record("provision", **prov.to_json())
        if self.scenario.services.get("positions"):
            self.localize(uc.talker)
        self._start_replay(prov)
        return prov

    def _release_stream(self, sid: str) -> None:
        self.cnc.release_stream(sid)
        self.engine.record("release", stream_id=sid)

    def _release_bearer(self, bid: str) -> None:
        del self.bearers[bid]
        self.engine.record("bearer_release", bearer_id=bid)

    def release_provision(self, prov: E2EProvision) -> None:
        for b in prov.budgets:
            if b.domain is Domain.TSN:
                if b.backing in self.cnc.reservations:
                    self._release_stream(b.backing)
            elif b.backing in self.bearers:
                self._release_bearer(b.backing)

    def handle_violation(self, prov: E2EProvision, observation: dict) -> E2EProvision:
        """Mark Degraded, try one re-provision on the live graph, else Withdraw."""
        eng = self.engine
        if prov.status == "Withdrawn" or self.provisions.get(prov.use_case.name) is not prov:
            return prov
        prov.status = "Degraded"
        eng.record("provision_status", use_case=prov.use_case.name, status="Degraded",
                   generation=prov.generation, observation=observation)
        self.release_provision(prov)
        result = self.provision_use_case(prov.use_case, prov.generation + 1)
        if isinstance(result, E2EProvision):
            return result
        prov.status = "Withdrawn"
        self.provisions[prov.use_case.name] = prov
        eng.record("provision_status", use_case=prov.use_case.name, status="Withdrawn", generation=prov.generation)
        return prov

    # -- data-plane replay --

    def _start_replay(self, prov: E2EProvision) -> None:
        eng = self.engine
        t = eng.clock + ((prov.release_phase - eng.clock) % prov.period)
        if t <= self.scenario.horizon:
            node = self.scenario.node_of(prov.use_case.talker)
            eng.schedule(t, Message(node, node, "FrameRelease", _frame_body(prov), control=False))

    def _live(self, body: dict) -> E2EProvision | None:
        prov = self.provisions.get(body["use_case"])
        if prov is None or prov.generation != body["generation"] or prov.status != "Active":
            return None
        return prov

    def _on_frame_release(self, eng: Engine, ev: SimEvent) -> None:
        prov = self._live(ev.message.body)
        if prov is None:
            return
        for lst in sorted(prov.legs):
            self._advance(prov, lst, 0, 0, eng.clock)
        nxt = eng.clock + prov.period
        if nxt <= self.scenario.horizon:
            eng.schedule(nxt, ev.message)

    def _on_data_frame(self, eng: Engine, ev: SimEvent) -> None:
        body = ev.message.body
        prov = self._live(body)
        if prov is not None:
            self._advance(prov, body["listener"], body["segment"], body["hop"], body["released"])

    def _advance(self, prov: E2EProvision, lst: str, si: int, hi: int, released: int) -> None:
        eng = self.engine
        leg = prov.legs[lst]
        now = eng.clock
        name = prov.use_case.name
        if si == len(leg):
            latency = now - released
            committed = prov.leg_latency(lst)
            eng.record("frame", use_case=name, listener=lst, released=released, latency=latency,
                       committed=committed, generation=prov.generation)
            if latency > committed:
                self.handle_violation(prov, {"listener": lst, "latency": latency, "committed": committed})
            return
        budget = leg[si]
        if budget.domain is Domain.TSN:
            res = self.cnc.reservations[budget.backing]
            hop = budget.hops[hi]
            w = res.window(hop.link_id)
            start = now + ((w.offset - now) % res.period)
            if eng.link_down(hop.link_id, start):
                return self._lost(prov, lst, hop.link_id, released)
            arrival = start + w.duration + hop.delay
            nsi, nhi = (si, hi + 1) if hi + 1 < len(budget.hops) else (si + 1, 0)
            node = hop.dst
        else:
            down = [h.link_id for h in budget.hops if eng.link_down(h.link_id, now)]
            if down:
                return self._lost(prov, lst, down[0], released)
            arrival = now + budget.latency_budget
            nsi, nhi = si + 1, 0
            node = budget.hops[-1].dst
        body = {**_frame_body(prov), "listener": lst, "segment": nsi, "hop": nhi, "released": released}
        eng.schedule(arrival, Message(node, node, "DataFrame", body, control=False))

    def _lost(self, prov: E2EProvision, lst: str, link_id: str, released: int) -> None:
        self.engine.record("frame_lost", use_case=prov.use_case.name, listener=lst, link_id=link_id,
                           released=released, generation=prov.generation)
        self.handle_violation(prov, {"listener": lst, "lost_on": link_id})


def _frame_body(prov: E2EProvision) -> dict:
    return {"use_case": prov.use_case.name, "generation": prov.generation}


def _segment_graph(graph: NetworkGraph, seg: tuple[Hop, ...]) -> NetworkGraph:
    nodes = {n: graph.nodes[n] for h in seg for n in (h.src, h.dst)}
    return NetworkGraph(nodes, {h.link_id: h.link for h in seg})
