"""CUC and CNC: TSN end-device registration and gate-window admission.

Every admitted stream owns one gate window per link of its distribution tree.
Windows repeat every stream period from the hyperperiod origin (t = 0) and
must not overlap any other stream's window instance on the same link.
Bridges add no queuing delay; a frame waits only for its next gate window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .model import RegistrationState
from .registration import CUC as CUC_SYSTEM
from .registration import CucRegistered, CucRejected
from .security import OrderViolation
from .topology import Hop, NetworkGraph, NoPath, tx_time

HYPERPERIOD_LIMIT = 2**32

# Rejection reasons, in the order the checks run.
FRAME_EXCEEDS_PERIOD = "FrameExceedsPeriod"
CAPACITY_EXCEEDED = "CapacityExceeded"
NO_FEASIBLE_SCHEDULE = "NoFeasibleSchedule"
LATENCY_EXCEEDED = "LatencyExceeded"


class HyperperiodOverflow(Exception):
    pass


class UnknownStream(KeyError):
    pass


class UnknownLink(KeyError):
    pass


@dataclass(frozen=True)
class StreamRequest:
    """A periodic stream; ``talker`` and ``listeners`` are graph node ids."""

    stream_id: str
    talker: str
    listeners: tuple[str, ...]
    period: int
    frame_bytes: int
    max_e2e_latency: int
    priority: int = 0

    def __post_init__(self):
        if self.period <= 0 or self.frame_bytes <= 0 or self.max_e2e_latency <= 0:
            raise ValueError(f"stream {self.stream_id}: period, frame_bytes and max_e2e_latency must be positive")
        if not self.listeners:
            raise ValueError(f"stream {self.stream_id}: no listeners")

    @property
    def frame_bits(self) -> int:
        return self.frame_bytes * 8


@dataclass(frozen=True)
class GateWindow:
    link_id: str
    offset: int
    duration: int

    @property
    def end(self) -> int:
        return self.offset + self.duration


@dataclass(frozen=True)
class StreamReservation:
    stream_id: str
    period: int
    frame_bytes: int
    windows: tuple[GateWindow, ...]
    paths: dict[str, tuple[Hop, ...]] = field(compare=False)
    e2e_latency: dict[str, int] = field(compare=False)
    admitted_at: int = 0

    @property
    def frame_bits(self) -> int:
        return self.frame_bytes * 8

    @property
    def rate(self) -> Fraction:
        return Fraction(self.frame_bits * 1_000_000, self.period)

    def window(self, link_id: str) -> GateWindow:
        for w in self.windows:
            if w.link_id == link_id:
                return w
        raise KeyError(link_id)

    @property
    def max_latency(self) -> int:
        return max(self.e2e_latency.values())

    def to_json(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "period": self.period,
            "frame_bytes": self.frame_bytes,
            "path": {lst: [h.link_id for h in hops] for lst, hops in sorted(self.paths.items())},
            "windows": [{"link_id": w.link_id, "offset": w.offset, "duration": w.duration} for w in self.windows],
            "e2e_latency": dict(sorted(self.e2e_latency.items())),
            "admitted_at": self.admitted_at,
        }


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str = ""


def compute_hyperperiod(periods: Iterable[int]) -> int:
    periods = list(periods)
    if not periods or any(p <= 0 for p in periods):
        raise ValueError("periods must be positive")
    h = math.lcm(*periods)
    if h > HYPERPERIOD_LIMIT:
        raise HyperperiodOverflow(f"hyperperiod {h} exceeds 2**32 us")
    return h


def link_utilization(link_id: str, reservations: Iterable[StreamReservation], graph: NetworkGraph) -> float:
    if link_id not in graph.links:
        raise UnknownLink(link_id)
    load = sum((r.rate for r in reservations if any(w.link_id == link_id for w in r.windows)), Fraction(0))
    return float(load / graph.links[link_id].capacity)


def _occupancy(link_id: str, existing: Iterable[StreamReservation], hyperperiod: int) -> bytearray:
    occ = bytearray(hyperperiod)
    for res in existing:
        for w in res.windows:
            if w.link_id != link_id:
                continue
            for base in range(w.offset, hyperperiod, res.period):
                occ[base : base + w.duration] = b"\x01" * w.duration
    return occ


def _next_free(occ: bytearray, period: int, duration: int) -> list[int | None]:
    """nxt[x] = smallest offset o >= x whose window instances are all free."""
    folded = bytearray(period)
    for x in range(len(occ)):
        if occ[x]:
            folded[x % period] = 1
    nxt: list[int | None] = [None] * (period + 1)
    run = 0  # free slots starting at x
    for x in range(period - 1, -1, -1):
        run = 0 if folded[x] else run + 1
        nxt[x] = x if run >= duration else nxt[x + 1]
    return nxt


def _tree(paths: dict[str, tuple[Hop, ...]]) -> tuple[list[Hop], dict[str, str | None]]:
    """Unique hops of the distribution tree in breadth-first order, plus each
    link's parent link (None for hops leaving the talker)."""
    order: list[Hop] = []
    parent: dict[str, str | None] = {}
    depth = max((len(p) for p in paths.values()), default=0)
    for k in range(depth):
        for lst in paths:
            hops = paths[lst]
            if k < len(hops) and hops[k].link_id not in parent:
                order.append(hops[k])
                parent[hops[k].link_id] = hops[k - 1].link_id if k else None
    return order, parent


def cnc_admit(
    request: StreamRequest,
    graph: NetworkGraph,
    existing: Iterable[StreamReservation],
    now: int = 0,
) -> StreamReservation | Rejection:
    """Admit ``request`` with first-fit gate windows or explain why not.

    Checks run in a fixed order: frame fits the period, link capacity,
    schedule search, latency. Each link, in path order, takes the earliest
    offset whose instances are free and that starts no sooner than the
    upstream window's end plus propagation. Latency is measured from the
    start of the period to arrival at the listener.
    """
    existing = list(existing)
    paths: dict[str, tuple[Hop, ...]] = {}
    for lst in request.listeners:
        try:
            paths[lst] = tuple(graph.shortest_path(request.talker, lst))
        except NoPath as exc:
            return Rejection(NO_FEASIBLE_SCHEDULE, str(exc))
        if not paths[lst]:
            return Rejection(NO_FEASIBLE_SCHEDULE, f"listener {lst} is the talker")
    order, parent = _tree(paths)
    bits = request.frame_bits
    dur = {h.link_id: tx_time(bits, h.link.capacity) for h in order}

    for h in order:
        if dur[h.link_id] > request.period:
            return Rejection(FRAME_EXCEEDS_PERIOD, f"{dur[h.link_id]} us on {h.link_id} > period {request.period}")

    rate = Fraction(bits * 1_000_000, request.period)
    for h in order:
        load = sum((r.rate for r in existing if any(w.link_id == h.link_id for w in r.windows)), Fraction(0))
        if load + rate > h.link.capacity:
            return Rejection(CAPACITY_EXCEEDED, f"link {h.link_id}: {float(load + rate):.0f} b/s > {h.link.capacity}")

    try:
        hyper = compute_hyperperiod([r.period for r in existing] + [request.period])
    except HyperperiodOverflow as exc:
        return Rejection(NO_FEASIBLE_SCHEDULE, str(exc))
    nxt = {h.link_id: _next_free(_occupancy(h.link_id, existing, hyper), request.period, dur[h.link_id]) for h in order}
    prop = {h.link_id: h.delay for h in order}

    # Subtrees hanging off distinct first hops share no links. Earliest
    # offsets everywhere also give the earliest arrival, so one greedy pass
    # per subtree is both complete and latency-optimal.
    offsets: dict[str, int] = {}
    for root in (h for h in order if parent[h.link_id] is None):
        trial = _greedy(nxt[root.link_id][0], _subtree(root.link_id, order, parent), parent, nxt, dur, prop, request.period)
        if trial is None:
            return Rejection(NO_FEASIBLE_SCHEDULE, f"no gate windows fit below link {root.link_id}")
        offsets.update(trial)
    latency = {lst: _latency(hops, offsets, dur, prop) for lst, hops in paths.items()}
    worst = max(latency.values())
    if worst > request.max_e2e_latency:
        return Rejection(LATENCY_EXCEEDED, f"{worst} us > {request.max_e2e_latency} us")

    windows = tuple(GateWindow(h.link_id, offsets[h.link_id], dur[h.link_id]) for h in order)
    return StreamReservation(request.stream_id, request.period, request.frame_bytes, windows, paths, latency, now)


def _subtree(root: str, order: list[Hop], parent: dict[str, str | None]) -> list[str]:
    members = [root]
    inside = {root}
    for h in order:
        p = parent[h.link_id]
        if p in inside and h.link_id not in inside:
            members.append(h.link_id)
            inside.add(h.link_id)
    return members


def _greedy(start, members, parent, nxt, dur, prop, period) -> dict[str, int] | None:
    if start is None:
        return None
    offsets = {members[0]: start}
    for link in members[1:]:
        up = parent[link]
        lb = offsets[up] + dur[up] + prop[up]
        o = nxt[link][lb] if lb <= period else None
        if o is None:
            return None
        offsets[link] = o
    return offsets


def _latency(hops: tuple[Hop, ...], offsets: dict[str, int], dur, prop) -> int:
    # Frames are released at the start of each period.
    last = hops[-1].link_id
    return offsets[last] + dur[last] + prop[last]


def ingress_latency(res: StreamReservation, listener: str, phase: int) -> int:
    """Latency to ``listener`` for a frame entering the talker's first link at
    ``phase`` within the period (0 = period start)."""
    phase %= res.period
    first = res.window(res.paths[listener][0].link_id).offset
    wait = 0 if phase <= first else res.period
    return res.e2e_latency[listener] + wait - phase


class CNC:
    """Holds admitted reservations; admission is strictly sequential."""

    def __init__(self):
        self.reservations: dict[str, StreamReservation] = {}

    def admit(self, request: StreamRequest, graph: NetworkGraph, now: int = 0) -> StreamReservation | Rejection:
        if request.stream_id in self.reservations:
            return Rejection(NO_FEASIBLE_SCHEDULE, f"stream {request.stream_id} already admitted")
        result = cnc_admit(request, graph, self.reservations.values(), now)
        if isinstance(result, StreamReservation):
            self.reservations[request.stream_id] = result
        return result

    def release_stream(self, stream_id: str) -> StreamReservation:
        try:
            return self.reservations.pop(stream_id)
        except KeyError:
            raise UnknownStream(stream_id) from None

    def link_utilization(self, link_id: str, graph: NetworkGraph) -> float:
        return link_utilization(link_id, self.reservations.values(), graph)


class CUCService:
    """Centralized User Configuration: records TSN end devices."""

    def __init__(self):
        self.registered: dict[str, str] = {}

    def cuc_register(
        self,
        device_id: str,
        tsn_transmission_type: str,
        state: RegistrationState,
        is_tsn_end_device: bool,
        scope: frozenset[str],
        cnc_reachable: bool = True,
    ) -> CucRegistered | CucRejected:
        if state is not RegistrationState.Configured or not is_tsn_end_device:
            raise OrderViolation(f"CUC registration for {device_id} in state {state.value}")
        if CUC_SYSTEM not in scope:
            return CucRejected("ScopeExcludesCUC")
        if not cnc_reachable:
            return CucRejected("CNCUnreachable")
        self.registered[device_id] = tsn_transmission_type
        return CucRegistered(tsn_transmission_type)
