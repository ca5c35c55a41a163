import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import GBPS, chain_graph
from oracles import feasible_schedule, overlap_count
from tacnet.model import Domain, NodeKind, RegistrationState as S
from tacnet.registration import CucRegistered, CucRejected
from tacnet.security import OrderViolation
from tacnet.topology import Link, NetworkGraph, Node
from tacnet.tsn import (
    CAPACITY_EXCEEDED,
    CNC,
    CUCService,
    FRAME_EXCEEDS_PERIOD,
    LATENCY_EXCEEDED,
    NO_FEASIBLE_SCHEDULE,
    HyperperiodOverflow,
    Rejection,
    StreamRequest,
    StreamReservation,
    UnknownLink,
    UnknownStream,
    cnc_admit,
    compute_hyperperiod,
    ingress_latency,
    link_utilization,
)


def req(sid, period=100, size=1250, bound=50, talker="v0", listeners=("v1",)):
    return StreamRequest(sid, talker, tuple(listeners), period, size, bound)


def windows_of(reservations):
    return [(w.link_id, w.offset, w.duration, r.period) for r in reservations for w in r.windows]


class TestAdmission:
    def test_first_stream(self, single_link):
        res = cnc_admit(req("A"), single_link, [])
        assert isinstance(res, StreamReservation)
        assert [(w.offset, w.end) for w in res.windows] == [(0, 10)]
        assert res.e2e_latency == {"v1": 12}

    def test_second_stream_follows(self, single_link):
        cnc = CNC()
        cnc.admit(req("A"), single_link)
        b = cnc.admit(req("B"), single_link)
        assert [(w.offset, w.end) for w in b.windows] == [(10, 20)]
        assert b.e2e_latency == {"v1": 22}

    def test_frame_exceeds_period(self, single_link):
        res = cnc_admit(req("A", period=5), single_link, [])
        assert isinstance(res, Rejection) and res.reason == FRAME_EXCEEDS_PERIOD

    def test_eleventh_stream(self, single_link):
        cnc = CNC()
        for i in range(10):
            assert isinstance(cnc.admit(req(f"s{i}", bound=200), single_link), StreamReservation)
        res = cnc.admit(req("s10", bound=200), single_link)
        assert isinstance(res, Rejection) and res.reason == CAPACITY_EXCEEDED
        chain = [("e0", GBPS, 2)]
        existing = [(l, o, d, p, 10_000) for l, o, d, p in windows_of(cnc.reservations.values())]
        assert feasible_schedule(chain, 100, 10_000, 200, existing) is None

    def test_latency_exceeded(self, single_link):
        cnc = CNC()
        cnc.admit(req("A"), single_link)
        res = cnc.admit(req("B", bound=15), single_link)
        assert isinstance(res, Rejection) and res.reason == LATENCY_EXCEEDED
        assert "B" not in cnc.reservations

    def test_fragmented_link_has_no_schedule(self, single_link):
        # 50 us free in five 10 us holes; a 20 us frame fits nowhere.
        cnc = CNC()
        for i in range(10):
            cnc.admit(req(f"s{i}", bound=200), single_link)
        for i in range(0, 10, 2):
            cnc.release_stream(f"s{i}")
        res = cnc.admit(req("big", size=2500, bound=200), single_link)
        assert isinstance(res, Rejection) and res.reason == NO_FEASIBLE_SCHEDULE

    def test_no_path(self):
        g = NetworkGraph.build([Node("a", NodeKind.TsnBridge, Domain.TSN), Node("b", NodeKind.TsnBridge, Domain.TSN)], [])
        res = cnc_admit(req("A", talker="a", listeners=("b",)), g, [])
        assert res.reason == NO_FEASIBLE_SCHEDULE

    def test_duplicate_stream_id(self, single_link):
        cnc = CNC()
        cnc.admit(req("A"), single_link)
        assert isinstance(cnc.admit(req("A"), single_link), Rejection)

    def test_multi_hop_sequencing(self):
        g = chain_graph(3)
        res = cnc_admit(req("A", talker="v0", listeners=("v3",)), g, [])
        offs = [w.offset for w in res.windows]
        assert offs == [0, 12, 24]
        assert res.e2e_latency == {"v3": 36}

    def test_multicast_tree_shares_trunk(self):
        nodes = [Node(n, NodeKind.TsnBridge, Domain.TSN) for n in ("t", "s", "a", "b")]
        links = [Link("l-t-s", ("t", "s"), GBPS, 2, Domain.TSN),
                 Link("l-s-a", ("s", "a"), GBPS, 2, Domain.TSN),
                 Link("l-s-b", ("s", "b"), GBPS, 2, Domain.TSN)]
        g = NetworkGraph.build(nodes, links)
        res = cnc_admit(req("M", talker="t", listeners=("a", "b")), g, [])
        assert len(res.windows) == 3
        assert res.e2e_latency == {"a": 24, "b": 24}

    def test_invalid_request(self):
        with pytest.raises(ValueError):
            req("A", period=0)
        with pytest.raises(ValueError):
            StreamRequest("A", "v0", (), 100, 10, 10)


class TestHyperperiod:
    @pytest.mark.parametrize("periods,expected", [([100], 100), ([100, 250], 500), ([7, 11, 13], 1001)])
    def test_lcm(self, periods, expected):
        assert compute_hyperperiod(periods) == expected

    def test_overflow(self):
        with pytest.raises(HyperperiodOverflow):
            compute_hyperperiod([2**31 + 1, 2**31 + 3])

    @given(st.lists(st.integers(1, 5_000), min_size=1, max_size=5))
    def test_lcm_or_overflow(self, periods):
        expected = math.lcm(*periods)
        if expected > 2**32:
            with pytest.raises(HyperperiodOverflow):
                compute_hyperperiod(periods)
        else:
            assert compute_hyperperiod(periods) == expected


class TestReleaseAndUtilization:
    def test_release_frees_window(self, single_link):
        cnc = CNC()
        cnc.admit(req("A"), single_link)
        cnc.release_stream("A")
        assert cnc.admit(req("B"), single_link).windows[0].offset == 0

    def test_unknown_and_double_release(self):
        with pytest.raises(UnknownStream):
            CNC().release_stream("nope")
        cnc = CNC()
        cnc.admit(req("A"), chain_graph(1))
        cnc.release_stream("A")
        with pytest.raises(UnknownStream):
            cnc.release_stream("A")

    def test_utilization(self, single_link):
        cnc = CNC()
        assert cnc.link_utilization("e0", single_link) == 0
        cnc.admit(req("A"), single_link)
        assert cnc.link_utilization("e0", single_link) == pytest.approx(0.1)
        with pytest.raises(UnknownLink):
            link_utilization("zz", [], single_link)

    def test_ingress_latency(self, single_link):
        cnc = CNC()
        cnc.admit(req("A"), single_link)
        b = cnc.admit(req("B"), single_link)
        assert ingress_latency(b, "v1", 0) == 22
        assert ingress_latency(b, "v1", 10) == 12
        assert ingress_latency(b, "v1", 11) == 111


class TestCuc:
    def test_register(self):
        cuc = CUCService()
        assert cuc.cuc_register("d", "E2E", S.Configured, True, frozenset({"CUC"})) == CucRegistered("E2E")
        assert cuc.registered == {"d": "E2E"}

    def test_scope_and_reachability(self):
        cuc = CUCService()
        assert isinstance(cuc.cuc_register("d", "E2E", S.Configured, True, frozenset({"ConfigServer"})), CucRejected)
        assert isinstance(cuc.cuc_register("d", "E2E", S.Configured, True, frozenset({"CUC"}), False), CucRejected)

    def test_order(self):
        with pytest.raises(OrderViolation):
            CUCService().cuc_register("d", "E2E", S.Authorized, True, frozenset({"CUC"}))
        with pytest.raises(OrderViolation):
            CUCService().cuc_register("d", "E2E", S.Configured, False, frozenset({"CUC"}))


stream_st = st.tuples(
    st.integers(0, 2), st.integers(1, 3), st.sampled_from([50, 100, 200, 400]),
    st.sampled_from([125, 625, 1250, 2500]), st.integers(20, 400),
)


@settings(max_examples=60)
@given(st.lists(stream_st, max_size=14))
def test_admitted_sets_never_overlap_or_overfill(streams):
    g = chain_graph(3)
    cnc = CNC()
    for i, (a, hops, period, size, bound) in enumerate(streams):
        b = min(a + hops, 3)
        res = cnc.admit(req(f"s{i}", period, size, bound, f"v{a}", (f"v{b}",)), g)
        alive = list(cnc.reservations.values())
        h = compute_hyperperiod([r.period for r in alive]) if alive else 1
        assert overlap_count(windows_of(alive), h) == 0
        for link in g.links:
            assert cnc.link_utilization(link, g) <= 1
        if isinstance(res, StreamReservation):
            assert res.max_latency <= bound
            prev = None
            for hop in res.paths[f"v{b}"]:
                w = res.window(hop.link_id)
                if prev is not None:
                    assert w.offset >= prev
                prev = w.end + hop.delay
            assert res.e2e_latency[f"v{b}"] == prev


@settings(max_examples=60)
@given(st.lists(stream_st, max_size=6), stream_st)
def test_rejection_agrees_with_exhaustive_oracle(prefix, last):
    g = chain_graph(3)
    cnc = CNC()
    for i, (a, hops, period, size, bound) in enumerate(prefix):
        cnc.admit(req(f"s{i}", period, size, bound, f"v{a}", (f"v{min(a + hops, 3)}",)), g)
    a, hops, period, size, bound = last
    b = min(a + hops, 3)
    res = cnc.admit(req("x", period, size, bound, f"v{a}", (f"v{b}",)), g)
    existing = [(w.link_id, w.offset, w.duration, r.period, r.frame_bits)
                for r in cnc.reservations.values() if r.stream_id != "x" for w in r.windows]
    oracle = feasible_schedule([(f"e{i}", GBPS, 2) for i in range(a, b)], period, size * 8, bound, existing)
    assert isinstance(res, StreamReservation) == (oracle is not None)
