import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from tacnet.model import Domain, NodeKind  # noqa: E402
from tacnet.topology import Link, NetworkGraph, Node  # noqa: E402

GBPS = 1_000_000_000


def chain_graph(n: int, capacity: int = GBPS, prop: int = 2, domain: Domain = Domain.TSN) -> NetworkGraph:
    """v0 -e0- v1 -e1- ... -e(n-1)- vn"""
    nodes = [Node(f"v{i}", NodeKind.TsnBridge, domain) for i in range(n + 1)]
    links = [Link(f"e{i}", (f"v{i}", f"v{i + 1}"), capacity, prop, domain) for i in range(n)]
    return NetworkGraph.build(nodes, links)


@pytest.fixture
def single_link():
    return chain_graph(1)
