import pytest

from multislot_gd.fixtures import random_instance, single_edge
from multislot_gd.model import Contract, Edge, ProblemInstance, SupplyNode


@pytest.fixture
def tiny():
    return single_edge(capacity=10.0, demand=5.0, pv_cap=10.0)


@pytest.fixture
def three_by_two():
    """3 supplies x 2 contracts, dense, with one binding page-view cap."""
    supplies = (
        SupplyNode("s1", 20.0, 20.0, "top"),
        SupplyNode("s2", 10.0, 3.0, "top"),
        SupplyNode("s3", 30.0, 30.0, "bottom"),
    )
    contracts = (
        Contract("c1", 25.0, priority=1.0, smoothness=1.0, interest_weight=0.5),
        Contract("c2", 15.0, priority=0.5, smoothness=2.0, interest_weight=1.0),
    )
    edges = tuple(
        Edge(s.id, c.id, interest)
        for (s, c), interest in zip(
            [(s, c) for s in supplies for c in contracts], [0.9, 0.2, 0.5, 0.4, 0.1, 0.8]
        )
    )
    return ProblemInstance(supplies, contracts, edges)


@pytest.fixture(params=range(5))
def random_small(request):
    return random_instance(100 + request.param)
