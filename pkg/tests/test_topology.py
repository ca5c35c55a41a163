import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import chain_graph
from tacnet.model import Domain, NodeKind
from tacnet.topology import Link, NetworkGraph, Node, NoPath, tx_time


def _graph(edges):
    names = sorted({n for _, a, b in edges for n in (a, b)})
    nodes = [Node(n, NodeKind.TsnBridge, Domain.TSN) for n in names]
    return NetworkGraph.build(nodes, [Link(i, (a, b), 10**9, 1, Domain.TSN) for i, a, b in edges])


def brute_force_path(graph, src, dst):
    """Shortest (hops, link ids) over all simple paths, by enumeration."""
    best = None
    links = list(graph.links.values())
    for k in range(1, len(links) + 1):
        for combo in itertools.permutations(links, k):
            node, ok = src, True
            for l in combo:
                if node not in l.endpoints:
                    ok = False
                    break
                node = l.other(node)
            if ok and node == dst:
                ids = tuple(l.link_id for l in combo)
                if best is None or ids < best:
                    best = ids
        if best is not None:
            return best
    return None


class TestShortestPath:
    def test_min_hop_beats_lower_id(self):
        g = _graph([("a", "s", "x"), ("b", "x", "t"), ("z", "s", "t")])
        assert [h.link_id for h in g.shortest_path("s", "t")] == ["z"]

    def test_lexicographic_tie_break(self):
        g = _graph([("b1", "s", "x"), ("b2", "x", "t"), ("a1", "s", "y"), ("c2", "y", "t")])
        assert [h.link_id for h in g.shortest_path("s", "t")] == ["a1", "c2"]

    def test_direction_and_delay(self):
        g = NetworkGraph.build(
            [Node("a", NodeKind.EndDevice, Domain.SDN), Node("b", NodeKind.EndDevice, Domain.SDN)],
            [Link("l", ("a", "b"), 10**9, 3, Domain.SDN, reverse_propagation_delay=7)],
        )
        (fwd,) = g.shortest_path("a", "b")
        (rev,) = g.shortest_path("b", "a")
        assert (fwd.src, fwd.dst, fwd.delay) == ("a", "b", 3)
        assert (rev.src, rev.dst, rev.delay) == ("b", "a", 7)

    def test_no_path(self):
        g = _graph([("a", "s", "x"), ("b", "y", "t")])
        with pytest.raises(NoPath):
            g.shortest_path("s", "t")
        with pytest.raises(NoPath):
            g.shortest_path("s", "nowhere")

    def test_without_removes_links(self):
        g = chain_graph(2)
        with pytest.raises(NoPath):
            g.without(["e1"]).shortest_path("v0", "v2")
        assert g.without([]) is g

    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=6))
    def test_matches_enumeration(self, pairs):
        edges = [(f"l{i}", f"n{a}", f"n{b}") for i, (a, b) in enumerate(pairs) if a != b]
        if not edges:
            return
        g = _graph(edges)
        src, dst = edges[0][1], edges[-1][2]
        expected = brute_force_path(g, src, dst) if src != dst else ()
        try:
            got = tuple(h.link_id for h in g.shortest_path(src, dst))
        except NoPath:
            got = None
        assert got == expected


def test_tx_time_rounds_up():
    assert tx_time(10_000, 10**9) == 10
    assert tx_time(10_001, 10**9) == 11
    assert tx_time(0, 10**9) == 0
    assert tx_time(20_000, 20 * 10**9) == 1
