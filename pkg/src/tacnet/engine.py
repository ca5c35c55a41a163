"""Deterministic discrete-event engine.

Virtual time is an integer microsecond clock. Events are ordered by
``(time, seq)`` where ``seq`` is the insertion counter, so identical inputs
produce identical traces.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, TextIO

from .topology import Hop, NetworkGraph, NoPath, tx_time

TRACE_FORMAT = "tacnet-trace"
FORMAT_VERSION = 1


class SchedulingInPast(Exception):
    pass


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    tag: str
    body: dict = field(default_factory=dict)
    device: str | None = None
    size_bits: int = 0
    control: bool = True


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    message: Message
    path: tuple[str, ...] = ()


# -- faults -----------------------------------------------------------------


@dataclass(frozen=True)
class DropMessage:
    """Drop network messages matching every given field inside [start, until)."""

    tag: str | None = None
    src: str | None = None
    dst: str | None = None
    device: str | None = None
    start: int = 0
    until: int | None = None

    def matches(self, msg: Message, now: int) -> bool:
        if now < self.start or (self.until is not None and now >= self.until):
            return False
        return (
            (self.tag is None or msg.tag == self.tag)
            and (self.src is None or msg.src == self.src)
            and (self.dst is None or msg.dst == self.dst)
            and (self.device is None or msg.device == self.device)
        )


@dataclass(frozen=True)
class LinkDown:
    link_id: str
    start: int
    until: int

    def __post_init__(self):
        if self.start > self.until:
            raise ValueError("LinkDown interval must satisfy start <= until")

    def active(self, now: int) -> bool:
        return self.start <= now < self.until


@dataclass(frozen=True)
class AuthReject:
    device_id: str


@dataclass(frozen=True)
class ConfigUnavailable:
    start: int
    until: int

    def __post_init__(self):
        if self.start > self.until:
            raise ValueError("ConfigUnavailable interval must satisfy start <= until")

    def active(self, now: int) -> bool:
        return self.start <= now < self.until


FaultSpec = DropMessage | LinkDown | AuthReject | ConfigUnavailable


# -- trace ------------------------------------------------------------------


class Trace:
    """Append-only list of trace records (plain dicts, JSON-ready)."""

    def __init__(self, header: dict | None = None):
        self.header = {"format": TRACE_FORMAT, "version": FORMAT_VERSION, **(header or {})}
        self.records: list[dict] = []

    def append(self, record: dict) -> None:
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    def for_device(self, device_id: str) -> list[dict]:
        return [r for r in self.records if r.get("device") == device_id]

    def dump(self, fh: TextIO) -> None:
        fh.write(_dumps(self.header) + "\n")
        for rec in self.records:
            fh.write(_dumps(rec) + "\n")

    def dumps(self) -> str:
        lines = [_dumps(self.header)] + [_dumps(r) for r in self.records]
        return "\n".join(lines) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def path_arrival(send_time: int, hops: Iterable[Hop], size_bits: int) -> int:
    """Arrival time over ``hops``: per link, propagation plus rounded-up serialisation."""
    t = send_time
    for hop in hops:
        t += hop.delay + tx_time(size_bits, hop.link.capacity)
    return t


Handler = Callable[["Engine", SimEvent], None]


class Engine:
    """Single-threaded event loop over a network graph.

    Handlers are registered per payload tag and run to completion, one at a
    time, on the virtual clock. All randomness comes from ``self.rng``.
    """

    def __init__(self, graph: NetworkGraph, seed: int = 0, faults: Iterable[FaultSpec] = (), header=None):
        self.graph = graph
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock = 0
        self.trace = Trace({"seed": seed, **(header or {})})
        self.faults: list[FaultSpec] = []
        self.handlers: dict[str, Handler] = {}
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self._path_cache: dict[tuple, tuple[Hop, ...] | None] = {}
        self._graph_cache: dict[tuple, NetworkGraph] = {}
        self.scheduled = 0
        self.delivered = 0
        self.dropped = 0
        self.current: SimEvent | None = None
        for f in faults:
            self.inject_fault(f)

    # -- configuration --

    def on(self, tag: str, handler: Handler) -> None:
        self.handlers[tag] = handler

    def inject_fault(self, spec: FaultSpec) -> None:
        self.faults.append(spec)
        if isinstance(spec, LinkDown):
            self._path_cache.clear()
            self._graph_cache.clear()

    # -- fault queries --

    def down_links(self, now: int | None = None) -> frozenset[str]:
        now = self.clock if now is None else now
        return frozenset(f.link_id for f in self.faults if isinstance(f, LinkDown) and f.active(now))

    def link_down(self, link_id: str, now: int | None = None) -> bool:
        return link_id in self.down_links(now)

    def auth_rejected(self, device_id: str) -> bool:
        return any(isinstance(f, AuthReject) and f.device_id == device_id for f in self.faults)

    def config_unavailable(self, now: int | None = None) -> bool:
        now = self.clock if now is None else now
        return any(isinstance(f, ConfigUnavailable) and f.active(now) for f in self.faults)

    def active_graph(self, now: int | None = None, secure_only: bool = False) -> NetworkGraph:
        """Graph of live links (optionally only those flagged secure)."""
        down = self.down_links(now)
        key = (down, secure_only)
        if key not in self._graph_cache:
            if secure_only:
                down = down | {l.link_id for l in self.graph.links.values() if not l.secure}
            self._graph_cache[key] = self.graph.without(down)
        return self._graph_cache[key]

    # -- routing --

    def route(self, src: str, dst: str, now: int | None = None, control: bool = True) -> tuple[Hop, ...]:
        """Live route; control traffic is confined to secure links."""
        key = (src, dst, self.down_links(now), control)
        if key not in self._path_cache:
            try:
                self._path_cache[key] = tuple(self.active_graph(now, control).shortest_path(src, dst))
            except NoPath:
                self._path_cache[key] = None
        hops = self._path_cache[key]
        if hops is None:
            raise NoPath(f"no path {src} -> {dst} at t={self.clock if now is None else now}")
        return hops

    def deliver(self, msg: Message, hops: Iterable[Hop], send_time: int | None = None) -> int:
        """Arrival time of ``msg`` sent over ``hops``; NoPath if any hop is down."""
        send_time = self.clock if send_time is None else send_time
        hops = tuple(hops)
        down = self.down_links(send_time)
        for hop in hops:
            if hop.link_id in down:
                raise NoPath(f"link {hop.link_id} is down at t={send_time}")
        return path_arrival(send_time, hops, msg.size_bits)

    # -- scheduling --

    def schedule(self, at: int, msg: Message, path: tuple[str, ...] = ()) -> SimEvent:
        if at < self.clock:
            raise SchedulingInPast(f"cannot schedule at {at} < clock {self.clock}")
        ev = SimEvent(at, self._seq, msg, path)
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._queue, (at, ev.seq, ev))
        return ev

    def after(self, delay: int, msg: Message) -> SimEvent:
        """Schedule a local (timer) message ``delay`` microseconds from now."""
        return self.schedule(self.clock + delay, msg)

    def send(self, msg: Message) -> SimEvent | None:
        """Route ``msg`` over the live graph and schedule its arrival.

        Local messages (src == dst) arrive immediately. Messages with no
        live route or matching a DropMessage fault are recorded as dropped.
        """
        now = self.clock
        if msg.src == msg.dst:
            return self.schedule(now, msg)
        try:
            hops = self.route(msg.src, msg.dst, now, msg.control)
        except NoPath:
            self._record_drop(msg, "NoPath")
            return None
        for f in self.faults:
            if isinstance(f, DropMessage) and f.matches(msg, now):
                self._record_drop(msg, "DropMessage")
                return None
        arrival = path_arrival(now, hops, msg.size_bits)
        return self.schedule(arrival, msg, tuple(h.link_id for h in hops))

    def _record_drop(self, msg: Message, reason: str) -> None:
        self.scheduled += 1
        self.dropped += 1
        self.record(
            "drop", src=msg.src, dst=msg.dst, payload_tag=msg.tag, device=msg.device, reason=reason
        )

    # -- running --

    def record(self, kind: str, **fields: Any) -> dict:
        rec = {"time": self.clock, "seq": self.current.seq if self.current else None, "kind": kind}
        rec.update({k: v for k, v in fields.items() if v is not None})
        self.trace.append(rec)
        return rec

    def pending(self) -> int:
        return len(self._queue)

    def next_time(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: int) -> Trace:
        if t_end < self.clock:
            raise SchedulingInPast(f"run_until({t_end}) before clock {self.clock}")
        while self._queue and self._queue[0][0] <= t_end:
            _, _, ev = heapq.heappop(self._queue)
            self.clock = ev.time
            self.current = ev
            self.delivered += 1
            msg = ev.message
            rec = {
                "time": ev.time,
                "seq": ev.seq,
                "kind": "message",
                "src": msg.src,
                "dst": msg.dst,
                "payload_tag": msg.tag,
            }
            if msg.device is not None:
                rec["device"] = msg.device
            if msg.body:
                rec["body"] = msg.body
            if ev.path:
                rec["path"] = list(ev.path)
            self.trace.append(rec)
            handler = self.handlers.get(msg.tag)
            if handler is not None:
                handler(self, ev)
            self.current = None
        self.clock = t_end
        return self.trace

    def run(self, limit: int | None = None) -> Trace:
        """Run until the queue drains (or ``limit``)."""
        while self._queue:
            t = self._queue[0][0]
            if limit is not None and t > limit:
                break
            self.run_until(t)
        if limit is not None and limit >= self.clock:
            self.clock = limit
        return self.trace
