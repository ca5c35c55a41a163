"""Multi-domain network graph and routing helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .model import Domain, NodeKind


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    domain: Domain


@dataclass(frozen=True)
class Link:
    """Bidirectional link; ``endpoints`` is an ordered pair for identity only.

    ``reverse_propagation_delay`` applies in the endpoint[1] -> endpoint[0]
    direction and defaults to ``propagation_delay``.
    """

    link_id: str
    endpoints: tuple[str, str]
    capacity: int
    propagation_delay: int
    domain: Domain
    secure: bool = True
    reverse_propagation_delay: int | None = None

    def other(self, node: str) -> str:
        a, b = self.endpoints
        return b if node == a else a

    def delay_from(self, node: str) -> int:
        if node == self.endpoints[1] and self.reverse_propagation_delay is not None:
            return self.reverse_propagation_delay
        return self.propagation_delay


@dataclass(frozen=True)
class Hop:
    """One link traversed in a given direction."""

    link: Link
    src: str
    dst: str

    @property
    def link_id(self) -> str:
        return self.link.link_id

    @property
    def delay(self) -> int:
        return self.link.delay_from(self.src)


class NoPath(Exception):
    pass


def tx_time(bits: int, capacity: int) -> int:
    """Serialisation time in whole microseconds, rounded up."""
    return -(-bits * 1_000_000 // capacity)


@dataclass
class NetworkGraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)

    def __post_init__(self):
        self._adj: dict[str, list[Link]] | None = None

    @classmethod
    def build(cls, nodes: Iterable[Node], links: Iterable[Link]) -> NetworkGraph:
        return cls({n.id: n for n in nodes}, {l.link_id: l for l in links})

    def adjacency(self) -> dict[str, list[Link]]:
        if self._adj is None:
            adj: dict[str, list[Link]] = {n: [] for n in self.nodes}
            for link in self.links.values():
                for end in set(link.endpoints):
                    adj.setdefault(end, []).append(link)
            for lst in adj.values():
                lst.sort(key=lambda l: l.link_id)
            self._adj = adj
        return self._adj

    def without(self, link_ids: Iterable[str]) -> NetworkGraph:
        drop = set(link_ids)
        if not drop:
            return self
        return NetworkGraph(dict(self.nodes), {k: v for k, v in self.links.items() if k not in drop})

    def shortest_path(self, src: str, dst: str) -> list[Hop]:
        """Minimum-hop path; ties go to the lexicographically smallest link-id sequence.

        Raises NoPath when ``dst`` is unreachable.
        """
        if src not in self.nodes or dst not in self.nodes:
            raise NoPath(f"{src} -> {dst}: unknown node")
        if src == dst:
            return []
        adj = self.adjacency()
        # best[node] = smallest link-id tuple among minimum-hop paths found so far
        best: dict[str, tuple[str, ...]] = {src: ()}
        via: dict[str, tuple[str, Link]] = {}
        frontier = [src]
        while frontier and dst not in best:
            layer: dict[str, tuple[str, ...]] = {}
            for u in frontier:
                prefix = best[u]
                for link in adj.get(u, ()):
                    v = link.other(u)
                    if v in best:
                        continue
                    cand = prefix + (link.link_id,)
                    if v not in layer or cand < layer[v]:
                        layer[v] = cand
                        via[v] = (u, link)
            best.update(layer)
            frontier = sorted(layer)
        if dst not in best:
            raise NoPath(f"no path {src} -> {dst}")
        hops: list[Hop] = []
        node = dst
        while node != src:
            prev, link = via[node]
            hops.append(Hop(link, prev, node))
            node = prev
        hops.reverse()
        return hops


def validate_graph(graph: NetworkGraph) -> list[str]:
    """Every invariant violation in ``graph``; an empty list means valid."""
    problems = []
    for node_id, node in graph.nodes.items():
        if node.id != node_id:
            problems.append(f"node {node_id!r}: keyed under a different id {node.id!r}")
    for link_id, link in sorted(graph.links.items()):
        for end in link.endpoints:
            if end not in graph.nodes:
                problems.append(f"link {link_id!r}: endpoint {end!r} is not a node")
        if link.capacity <= 0:
            problems.append(f"link {link_id!r}: capacity {link.capacity} must be positive")
        if link.propagation_delay < 0:
            problems.append(f"link {link_id!r}: propagation delay {link.propagation_delay} is negative")
        if link.reverse_propagation_delay is not None and link.reverse_propagation_delay < 0:
            problems.append(
                f"link {link_id!r}: reverse propagation delay {link.reverse_propagation_delay} is negative"
            )
    return problems
