"""Two-way time synchronisation over the simulated network.

Each node's clock reads ``true_time + offset``. The reference node is the
server; a node (client) stamps t0/t3 on its own clock, the server stamps
t1/t2 on its clock, and the client estimates the server-minus-client offset
as ((t1 - t0) + (t2 - t3)) / 2, rounded toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import Engine, Message

SERVER_PROCESSING = 1
SYNC_TIMEOUT = 100_000


@dataclass
class ClockState:
    node_id: str
    offset_true: int
    offset_estimate: int | None = None


def timesync_exchange(t0: int, t1: int, t2: int, t3: int) -> int:
    """Server-minus-client offset estimate from one exchange."""
    total = (t1 - t0) + (t2 - t3)
    half = abs(total) // 2
    return half if total >= 0 else -half


@dataclass
class SyncResult:
    max_residual: int
    clocks: dict[str, ClockState]
    unsynced: list[str] = field(default_factory=list)

    def residual(self, node_id: str) -> int:
        c = self.clocks[node_id]
        return abs(c.offset_estimate - c.offset_true)


class TimeSyncService:
    """Runs sync rounds as engine messages (SyncRequest / SyncResponse).

    ``offsets`` holds each node's true clock offset relative to true time.
    A node's ``offset_estimate`` is its offset relative to the reference,
    which is what the protocol can observe.
    """

    def __init__(self, engine: Engine, offsets: dict[str, int], reference: str):
        self.engine = engine
        self.offsets = offsets
        self.reference = reference
        self.clocks: dict[str, ClockState] = {}
        self._pending: dict[tuple[str, int], int] = {}
        self._failed: set[str] = set()
        engine.on("SyncRequest", self._on_request)
        engine.on("SyncServe", self._on_serve)
        engine.on("SyncResponse", self._on_response)
        engine.on("SyncTimeout", self._on_timeout)

    def local(self, node: str, t: int) -> int:
        return t + self.offsets.get(node, 0)

    def start_round(self, nodes: list[str], round_no: int) -> None:
        eng = self.engine
        for node in nodes:
            if node == self.reference:
                continue
            true = self.offsets.get(node, 0) - self.offsets.get(self.reference, 0)
            self.clocks.setdefault(node, ClockState(node, true))
            t0 = self.local(node, eng.clock)
            self._pending[(node, round_no)] = t0
            eng.send(Message(node, self.reference, "SyncRequest", {"t0": t0, "round": round_no, "client": node}))
            eng.after(SYNC_TIMEOUT, Message(node, node, "SyncTimeout", {"round": round_no, "client": node}))

    def _on_request(self, eng: Engine, ev) -> None:
        body = ev.message.body
        t1 = self.local(self.reference, eng.clock)
        eng.after(SERVER_PROCESSING, Message(self.reference, self.reference, "SyncServe", {**body, "t1": t1}))

    def _on_serve(self, eng: Engine, ev) -> None:
        body = ev.message.body
        t2 = self.local(self.reference, eng.clock)
        eng.send(Message(self.reference, body["client"], "SyncResponse", {**body, "t2": t2}))

    def _on_response(self, eng: Engine, ev) -> None:
        body = ev.message.body
        key = (body["client"], body["round"])
        if key not in self._pending:
            return
        del self._pending[key]
        t3 = self.local(body["client"], eng.clock)
        est = timesync_exchange(body["t0"], body["t1"], body["t2"], t3)
        # est is reference-minus-client; report client relative to reference
        self.clocks[body["client"]].offset_estimate = -est
        self._failed.discard(body["client"])

    def _on_timeout(self, eng: Engine, ev) -> None:
        body = ev.message.body
        if self._pending.pop((body["client"], body["round"]), None) is not None:
            self._failed.add(body["client"])

    def result(self) -> SyncResult:
        unsynced = sorted(n for n, c in self.clocks.items() if c.offset_estimate is None or n in self._failed)
        residuals = [
            abs(c.offset_estimate - c.offset_true) for n, c in self.clocks.items() if c.offset_estimate is not None
        ]
        return SyncResult(max(residuals, default=0), dict(self.clocks), unsynced)


ROUND_INTERVAL = 2 * SYNC_TIMEOUT


def sync_all(
    engine: Engine,
    offsets: dict[str, int],
    reference: str,
    nodes: list[str] | None = None,
    rounds: int = 1,
) -> SyncResult:
    """Sync every node against ``reference`` for ``rounds`` rounds and report
    the worst residual |offset_estimate - offset_true|."""
    nodes = sorted(offsets) if nodes is None else list(nodes)
    svc = TimeSyncService(engine, offsets, reference)
    start = engine.clock
    for r in range(rounds):
        engine.run_until(start + r * ROUND_INTERVAL)
        svc.start_round(nodes, r)
    engine.run_until(start + rounds * ROUND_INTERVAL)
    return svc.result()
