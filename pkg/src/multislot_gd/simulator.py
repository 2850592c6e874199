"""Seeded page-view traffic served through a solved plan and the roulette engine.

The offline plan is consumed as a pacing budget: edge ``(i, j)`` may deliver
about ``s_i * x_ij`` impressions, never more than the page-view cap, and a
contract's roulette weight on a page is whatever is left of that budget for
the supply node that arrived.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .model import ProblemInstance
from .selection import UNIFORM, CandidateAd, PageAssignment, PageRequest, SlotPool, assemble_page
from .solver import AllocationPlan

DEFAULT_BIDWORD = "*"


@dataclass(frozen=True)
class StreamConfig:
    num_pages: int
    slots_per_page: int
    seed: int
    supply_mix: dict[str, float]
    k1: float = 0.0
    # contract id -> bidwords it can be recalled under; missing means DEFAULT_BIDWORD
    contract_bidwords: dict[str, list[str]] = field(default_factory=dict)
    bidword_fallback: str = UNIFORM

    def __post_init__(self) -> None:
        if self.num_pages < 1:
            raise ValueError("num_pages must be >= 1")
        if self.slots_per_page < 1:
            raise ValueError("slots_per_page must be >= 1")
        if any(p < 0 for p in self.supply_mix.values()):
            raise ValueError("supply_mix has a negative arrival probability")
        if self.k1 < 0:
            raise ValueError("k1 must be non-negative")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "StreamConfig":
        return cls(
            num_pages=int(doc["num_pages"]),
            slots_per_page=int(doc["slots_per_page"]),
            seed=int(doc.get("seed", 0)),
            supply_mix={str(k): float(v) for k, v in doc["supply_mix"].items()},
            k1=float(doc.get("k1", 0.0)),
            contract_bidwords={str(k): [str(b) for b in v]
                               for k, v in doc.get("contract_bidwords", {}).items()},
            bidword_fallback=str(doc.get("bidword_fallback", UNIFORM)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_pages": self.num_pages,
            "slots_per_page": self.slots_per_page,
            "seed": self.seed,
            "supply_mix": dict(self.supply_mix),
            "k1": self.k1,
            "contract_bidwords": {k: list(v) for k, v in self.contract_bidwords.items()},
            "bidword_fallback": self.bidword_fallback,
        }


@dataclass
class PageViewEvent:
    page: PageRequest
    supply_by_slot: dict[str, str]


@dataclass
class DeliveryLedger:
    delivered: dict[str, int] = field(default_factory=dict)
    per_slot: dict[str, int] = field(default_factory=dict)
    per_edge: dict[tuple[str, str], int] = field(default_factory=dict)
    duplicate_violations: int = 0
    unfilled_slots: int = 0
    pages: int = 0

    def record(self, event: PageViewEvent, assignment: PageAssignment) -> None:
        self.pages += 1
        seen: Counter[str] = Counter()
        for slot_id, win in assignment.winners.items():
            if win is None:
                self.unfilled_slots += 1
                continue
            cid = win[0]
            seen[cid] += 1
            self.delivered[cid] = self.delivered.get(cid, 0) + 1
            self.per_slot[slot_id] = self.per_slot.get(slot_id, 0) + 1
            key = (event.supply_by_slot[slot_id], cid)
            self.per_edge[key] = self.per_edge.get(key, 0) + 1
        self.duplicate_violations += sum(n - 1 for n in seen.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "pages": self.pages,
            "delivered": dict(sorted(self.delivered.items())),
            "per_slot": dict(sorted(self.per_slot.items())),
            "per_edge": [
                {"supply_id": s, "contract_id": c, "count": n}
                for (s, c), n in sorted(self.per_edge.items())
            ],
            "duplicate_violations": self.duplicate_violations,
            "unfilled_slots": self.unfilled_slots,
        }


def slot_order(instance: ProblemInstance) -> list[str]:
    """Distinct slot ids in order of first appearance."""
    return list(dict.fromkeys(n.slot_id for n in instance.supplies))


def _arrival_tables(config: StreamConfig, instance: ProblemInstance) -> list[tuple[str, list[str], np.ndarray]]:
    slots = slot_order(instance)
    if config.slots_per_page > len(slots):
        raise ValueError(
            f"slots_per_page={config.slots_per_page} but the instance defines {len(slots)} slots"
        )
    known = {n.id for n in instance.supplies}
    unknown = set(config.supply_mix) - known
    if unknown:
        raise ValueError(f"supply_mix references unknown supplies {sorted(unknown)}")
    tables = []
    for slot_id in slots[: config.slots_per_page]:
        ids = [n.id for n in instance.supplies if n.slot_id == slot_id]
        p = np.array([config.supply_mix.get(i, 0.0) for i in ids])
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"arrival probabilities for {slot_id} sum to {p.sum():.12g}, not 1")
        tables.append((slot_id, ids, p))
    return tables


def generate_stream(config: StreamConfig, instance: ProblemInstance, plan: AllocationPlan,
                    ledger: DeliveryLedger | None = None) -> Iterator[PageViewEvent]:
    """Yield page views lazily.

    Arrivals depend only on ``config.seed``.  Candidate weights are read from
    ``ledger`` at yield time, so a consumer that records each page before
    asking for the next sees budgets shrink as they are spent.
    """
    ledger = ledger if ledger is not None else DeliveryLedger()
    tables = _arrival_tables(config, instance)
    supply = {n.id: n for n in instance.supplies}
    edges_by_supply: dict[str, list] = {}
    for e in instance.edges:
        edges_by_supply.setdefault(e.supply_id, []).append(e)
    bidwords_of = {c.id: config.contract_bidwords.get(c.id, [DEFAULT_BIDWORD])
                   for c in instance.contracts}
    bidword_pool = tuple(dict.fromkeys(b for c in instance.contracts for b in bidwords_of[c.id]))

    rng = np.random.default_rng(config.seed)
    for n in range(config.num_pages):
        slots = []
        supply_by_slot = {}
        picks = [ids[int(rng.choice(len(ids), p=p))] for _, ids, p in tables]
        page_seed = int(rng.integers(2**63 - 1))
        for (slot_id, _, _), sid in zip(tables, picks):
            supply_by_slot[slot_id] = sid
            node = supply[sid]
            pools: dict[str, list[CandidateAd]] = {b: [] for b in bidword_pool}
            for e in edges_by_supply.get(sid, []):
                planned = edge_budget(node.capacity, node.pv_cap, plan.x[(sid, e.contract_id)])
                remaining = max(0.0, planned - ledger.per_edge.get((sid, e.contract_id), 0))
                ad = CandidateAd(
                    e.contract_id,
                    remaining,
                    e.interest if e.ctr is None else e.ctr,
                    1.0 if e.cvr is None else e.cvr,
                )
                for b in bidwords_of[e.contract_id]:
                    pools[b].append(ad)
            slots.append(SlotPool(slot_id, {b: tuple(v) for b, v in pools.items()}))
        yield PageViewEvent(
            PageRequest(f"q{n}", bidword_pool, tuple(slots), page_seed),
            supply_by_slot,
        )


def edge_budget(capacity: float, pv_cap: float, x: float) -> float:
    """Impressions an edge may deliver; the solver meets the cap only to tolerance."""
    return min(capacity * x, pv_cap)


def run_simulation(instance: ProblemInstance, plan: AllocationPlan, config: StreamConfig,
                   k1: float | None = None,
                   assignment_log: list[PageAssignment] | None = None) -> DeliveryLedger:
    """Serve ``config.num_pages`` pages; the plan is only read."""
    k1 = config.k1 if k1 is None else k1
    ledger = DeliveryLedger()
    for c in instance.contracts:
        ledger.delivered[c.id] = 0
    for event in generate_stream(config, instance, plan, ledger):
        assignment = assemble_page(event.page, k1, config.bidword_fallback)
        ledger.record(event, assignment)
        if assignment_log is not None:
            assignment_log.append(assignment)
    return ledger


def fulfillment_rate(ledger: DeliveryLedger, instance: ProblemInstance) -> dict[str, float]:
    return {c.id: min(1.0, ledger.delivered.get(c.id, 0) / c.demand) for c in instance.contracts}


def slot_share(ledger: DeliveryLedger) -> dict[str, float]:
    total = sum(ledger.per_slot.values())
    if total == 0:
        return {k: 0.0 for k in ledger.per_slot}
    return {k: v / total for k, v in sorted(ledger.per_slot.items())}


def expected_delivery(instance: ProblemInstance, plan: AllocationPlan,
                      config: StreamConfig) -> dict[str, tuple[float, float]]:
    """Mean and standard deviation of per-contract delivery, no k1 and no overlap.

    Supply ``i`` arrives Binomial(N, p_i) times.  If even a 3-sigma low draw
    covers every edge budget, each edge ends at ``ceil(s_i x_ij)`` exactly;
    otherwise arrivals are split in proportion to the budgets and the
    arrival noise is passed through to the contracts.
    """
    N = config.num_pages
    mean: dict[str, float] = {c.id: 0.0 for c in instance.contracts}
    var: dict[str, float] = {c.id: 0.0 for c in instance.contracts}
    by_supply: dict[str, list[tuple[str, float]]] = {}
    for e in instance.edges:
        s = next(n for n in instance.supplies if n.id == e.supply_id)
        by_supply.setdefault(e.supply_id, []).append(
            (e.contract_id, edge_budget(s.capacity, s.pv_cap, plan.x[(e.supply_id, e.contract_id)]))
        )
    for sid, budgets in by_supply.items():
        p = config.supply_mix.get(sid, 0.0)
        m, sd = N * p, math.sqrt(N * p * (1.0 - p))
        need = sum(math.ceil(b) for _, b in budgets)
        total = sum(b for _, b in budgets)
        for cid, b in budgets:
            if m - 3.0 * sd >= need:
                mean[cid] += math.ceil(b)
            elif total > 0:
                share = b / total
                mean[cid] += min(math.ceil(b), m * share)
                var[cid] += (sd * share) ** 2
    return {cid: (mean[cid], math.sqrt(var[cid])) for cid in mean}
