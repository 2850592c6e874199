"""Seeded instance builders shared by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import numpy as np

from .model import Contract, Edge, ProblemInstance, SupplyNode


def single_edge(capacity=10.0, demand=5.0, pv_cap=10.0, priority=0.0,
                smoothness=1.0, interest_weight=0.0, interest=0.0) -> ProblemInstance:
    return ProblemInstance(
        (SupplyNode("s1", capacity, pv_cap, "slot-1"),),
        (Contract("c1", demand, priority, smoothness, interest_weight),),
        (Edge("s1", "c1", interest),),
    )


def random_instance(seed: int, max_supplies: int = 12, max_contracts: int = 6,
                    density: float = 0.6) -> ProblemInstance:
    """Random small instance; every contract has at least one eligible supply.

    Demands are drawn as a target ratio times eligible capacity so both slack
    and binding demand constraints show up, and page-view caps are set below
    capacity often enough that some of them bind.
    """
    rng = np.random.default_rng(seed)
    n_s = int(rng.integers(2, max_supplies + 1))
    n_c = int(rng.integers(1, max_contracts + 1))
    n_slots = int(rng.integers(1, 4))
    caps = rng.uniform(5.0, 50.0, n_s)
    pv = caps * rng.uniform(0.1, 1.0, n_s)
    supplies = tuple(
        SupplyNode(f"s{i}", round(float(caps[i]), 3), round(float(pv[i]), 3), f"slot-{i % n_slots + 1}")
        for i in range(n_s)
    )
    adj = rng.random((n_s, n_c)) < density
    for j in range(n_c):
        if not adj[:, j].any():
            adj[rng.integers(n_s), j] = True
    contracts = []
    edges = []
    for j in range(n_c):
        eligible = float(sum(supplies[i].capacity for i in range(n_s) if adj[i, j]))
        theta = rng.uniform(0.1, 0.8)
        contracts.append(Contract(
            f"c{j}",
            demand=round(theta * eligible, 3),
            priority=round(float(rng.uniform(0.0, 2.0)), 3),
            smoothness=round(float(rng.uniform(0.5, 3.0)), 3),
            interest_weight=round(float(rng.uniform(0.0, 1.0)), 3),
        ))
    for i in range(n_s):
        for j in range(n_c):
            if adj[i, j]:
                edges.append(Edge(f"s{i}", f"c{j}", round(float(rng.uniform(0.0, 1.0)), 3)))
    return ProblemInstance(supplies, tuple(contracts), tuple(edges))


def sufficient_supply(num_pages: int = 50_000):
    """Two slots with disjoint contracts, theta_j <= 0.5 and capacity matching arrivals.

    Returns ``(instance, supply_mix)``; capacities equal expected arrivals over
    ``num_pages`` pages so the plan's budgets are on the same scale as the stream.
    """
    mix = {"s1": 0.6, "s2": 0.4, "s3": 0.5, "s4": 0.5}
    slot = {"s1": "slot-1", "s2": "slot-1", "s3": "slot-2", "s4": "slot-2"}
    supplies = tuple(
        SupplyNode(k, num_pages * p, num_pages * p, slot[k]) for k, p in mix.items()
    )
    cap = {n.id: n.capacity for n in supplies}
    eligible = {"c1": ["s1", "s2"], "c2": ["s1"], "c3": ["s3", "s4"], "c4": ["s4"]}
    theta = {"c1": 0.3, "c2": 0.4, "c3": 0.5, "c4": 0.25}
    contracts = tuple(
        Contract(j, theta[j] * sum(cap[i] for i in eligible[j]), priority=1.0,
                 smoothness=1.0, interest_weight=0.5)
        for j in eligible
    )
    edges = tuple(
        Edge(i, j, 0.5 + 0.1 * k)
        for j in eligible for k, i in enumerate(eligible[j])
    )
    return ProblemInstance(supplies, contracts, edges), mix


def shared_contracts(num_pages: int = 10_000):
    """Three slots whose supply nodes all reach the same contracts.

    Returns ``(instance, supply_mix)``.  Every contract is eligible in every
    slot, so the exclusivity rule is exercised on nearly every page.
    """
    mix = {"a1": 0.7, "a2": 0.3, "b1": 1.0, "c1": 0.5, "c2": 0.5}
    slot = {"a1": "top", "a2": "top", "b1": "middle", "c1": "bottom", "c2": "bottom"}
    supplies = tuple(SupplyNode(k, num_pages * p, num_pages * p, slot[k]) for k, p in mix.items())
    contracts = tuple(
        Contract(f"k{j}", demand=0.2 * num_pages, priority=1.0 + 0.2 * j, smoothness=1.0,
                 interest_weight=1.0)
        for j in range(4)
    )
    edges = tuple(
        Edge(n.id, c.id, round(0.2 + 0.15 * ((a + 2 * b) % 5), 3),
             ctr=round(0.05 + 0.02 * ((a * 3 + b) % 7), 3), cvr=0.5)
        for a, n in enumerate(supplies) for b, c in enumerate(contracts)
    )
    return ProblemInstance(supplies, contracts, edges), mix
