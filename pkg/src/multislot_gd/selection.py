"""Contract-roulette serving path for one multi-slot page.

Per slot: pick a bidword, recall that bidword's candidate pool, drop ads
scoring under ``k1``, rank by score and draw a winner with probability
proportional to delivery weight.  A contract may win only the slot where it
ranks best, which gives page-level exclusivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

UNIFORM = "uniform"
WEIGHTED = "weighted"


class AllZeroWeights(ValueError):
    pass


@dataclass(frozen=True)
class CandidateAd:
    contract_id: str
    delivery_weight: float
    ctr: float
    cvr: float

    def __post_init__(self) -> None:
        if self.delivery_weight < 0:
            raise ValueError(f"{self.contract_id}: negative delivery_weight")
        if not (0.0 <= self.ctr <= 1.0 and 0.0 <= self.cvr <= 1.0):
            raise ValueError(f"{self.contract_id}: ctr/cvr outside [0, 1]")


@dataclass(frozen=True)
class SlotPool:
    slot_id: str
    pools: dict[str, tuple[CandidateAd, ...]]

    def recall(self, bidword: str | None) -> tuple[CandidateAd, ...]:
        if bidword is None:
            return ()
        return tuple(self.pools.get(bidword, ()))


@dataclass(frozen=True)
class PageRequest:
    query_id: str
    bidword_pool: tuple[str, ...]
    slots: tuple[SlotPool, ...]
    rng_seed: int

    def __post_init__(self) -> None:
        if not self.slots:
            raise ValueError("page has no slots")
        if not self.bidword_pool:
            raise ValueError("page has an empty bidword pool")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PageRequest":
        slots = tuple(
            SlotPool(
                slot_id=str(s["slot_id"]),
                pools={
                    str(b): tuple(
                        CandidateAd(str(a["contract_id"]), float(a["delivery_weight"]),
                                    float(a["ctr"]), float(a["cvr"]))
                        for a in ads
                    )
                    for b, ads in s["pools"].items()
                },
            )
            for s in doc["slots"]
        )
        return cls(str(doc["query_id"]), tuple(str(b) for b in doc["bidword_pool"]),
                   slots, int(doc["rng_seed"]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "bidword_pool": list(self.bidword_pool),
            "rng_seed": self.rng_seed,
            "slots": [
                {
                    "slot_id": s.slot_id,
                    "pools": {
                        b: [
                            {"contract_id": a.contract_id, "delivery_weight": a.delivery_weight,
                             "ctr": a.ctr, "cvr": a.cvr}
                            for a in ads
                        ]
                        for b, ads in s.pools.items()
                    },
                }
                for s in self.slots
            ],
        }


@dataclass
class PageAssignment:
    query_id: str
    winners: dict[str, tuple[str, str] | None]
    bidwords: dict[str, str | None]
    ranks: dict[str, list[str]]
    chosen_slot: dict[str, str]
    resampled: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "winners": {
                slot: None if w is None else {"contract_id": w[0], "bidword": w[1]}
                for slot, w in self.winners.items()
            },
            "bidwords": dict(self.bidwords),
            "ranks": {k: list(v) for k, v in self.ranks.items()},
            "chosen_slot": dict(self.chosen_slot),
            "resampled": list(self.resampled),
        }


def roulette_probabilities(candidates: Sequence[CandidateAd]) -> dict[str, float]:
    total = float(sum(a.delivery_weight for a in candidates))
    if not total > 0:
        raise AllZeroWeights("every candidate has zero delivery weight")
    probs: dict[str, float] = {}
    for a in candidates:
        probs[a.contract_id] = probs.get(a.contract_id, 0.0) + a.delivery_weight / total
    return probs


def roulette_sample(candidates: Sequence[CandidateAd], rng: np.random.Generator) -> str:
    """Spin the wheel once; consumes exactly one uniform draw from ``rng``."""
    weights = np.array([a.delivery_weight for a in candidates], dtype=float)
    total = weights.sum()
    if not total > 0:
        raise AllZeroWeights("every candidate has zero delivery weight")
    u = rng.random() * total
    cum = np.cumsum(weights)
    # strict comparison keeps zero-width sectors unreachable
    k = int(np.searchsorted(cum, u, side="right"))
    k = min(k, len(candidates) - 1)
    while weights[k] == 0:  # only reachable through float round-off at the top end
        k -= 1
    return candidates[k].contract_id


def score(ad: CandidateAd) -> float:
    return ad.ctr * ad.cvr


def filter_by_threshold(ads: Sequence[CandidateAd], k1: float) -> list[CandidateAd]:
    return [a for a in ads if score(a) >= k1]


def dedup_best_rank(per_slot_rankings: dict[str, Sequence[str]]) -> dict[str, str]:
    """Map each contract to the slot where its 1-based rank is smallest.

    Slots are visited in page order and only a strictly better rank moves a
    contract, so ties go to the earlier slot.
    """
    best: dict[str, tuple[int, str]] = {}
    for slot_id, ranking in per_slot_rankings.items():
        for rank, cid in enumerate(ranking, start=1):
            if cid not in best or rank < best[cid][0]:
                best[cid] = (rank, slot_id)
    return {cid: slot for cid, (_, slot) in best.items()}


def select_bidword(slot_index: int, page: PageRequest, used_bidwords: Sequence[str],
                   prev_bidword: str | None, rng: np.random.Generator,
                   fallback: str = UNIFORM) -> str | None:
    """Adaptive bidword rule; ``slot_index`` is 1-based.

    Slot 1 samples the whole pool.  Later slots keep the previous bidword when
    it still recalls something for this slot, otherwise they sample among
    unused bidwords that do recall something (``None`` if there are none).
    """
    if slot_index < 1:
        raise ValueError("slot_index is 1-based")
    pool = page.bidword_pool
    if slot_index == 1:
        return pool[int(rng.integers(len(pool)))]
    slot = page.slots[slot_index - 1]
    if prev_bidword is not None and slot.recall(prev_bidword):
        return prev_bidword
    used = set(used_bidwords)
    avail = [b for b in pool if b not in used and slot.recall(b)]
    if not avail:
        return None
    if fallback == WEIGHTED:
        mass = np.array([sum(a.delivery_weight for a in slot.recall(b)) for b in avail])
        if mass.sum() > 0:
            return avail[int(rng.choice(len(avail), p=mass / mass.sum()))]
    elif fallback != UNIFORM:
        raise ValueError(f"unknown bidword fallback {fallback!r}")
    return avail[int(rng.integers(len(avail)))]


def _draw(pool: Sequence[CandidateAd], rng: np.random.Generator) -> str | None:
    if not any(a.delivery_weight > 0 for a in pool):
        return None
    return roulette_sample(pool, rng)


def assemble_page(page: PageRequest, k1: float, fallback: str = UNIFORM) -> PageAssignment:
    rng = np.random.default_rng(page.rng_seed)
    bidwords: dict[str, str | None] = {}
    ranked: dict[str, list[CandidateAd]] = {}
    first_pass: dict[str, str | None] = {}

    used: list[str] = []
    prev: str | None = None
    for i, slot in enumerate(page.slots, start=1):
        b = select_bidword(i, page, used, prev, rng, fallback)
        bidwords[slot.slot_id] = b
        if b is not None:
            used.append(b)
        prev = b
        kept = filter_by_threshold(slot.recall(b), k1)
        kept.sort(key=score, reverse=True)  # stable: equal scores keep recall order
        ranked[slot.slot_id] = kept
        first_pass[slot.slot_id] = _draw(kept, rng)

    ranks = {sid: [a.contract_id for a in ads] for sid, ads in ranked.items()}
    chosen = dedup_best_rank(ranks)

    winners: dict[str, tuple[str, str] | None] = {}
    resampled: list[str] = []
    for slot in page.slots:
        sid = slot.slot_id
        cid = first_pass[sid]
        if cid is not None and chosen[cid] != sid:
            # single re-draw restricted to contracts whose best slot is this one
            resampled.append(sid)
            pool = [a for a in ranked[sid] if chosen[a.contract_id] == sid]
            cid = _draw(pool, rng)
        taken = {w[0] for w in winners.values() if w is not None}
        if cid is not None and cid in taken:
            cid = None
        winners[sid] = None if cid is None else (cid, bidwords[sid])

    return PageAssignment(page.query_id, winners, bidwords, ranks, chosen, resampled)


def duplicate_count(assignment: PageAssignment) -> int:
    """Number of surplus appearances of any contract on the page."""
    seen: dict[str, int] = {}
    for w in assignment.winners.values():
        if w is not None:
            seen[w[0]] = seen.get(w[0], 0) + 1
    return sum(n - 1 for n in seen.values())
