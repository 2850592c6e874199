"""Domain types for the page-view constrained allocation problem.

A problem is a bipartite graph between supply nodes (audience segment x ad
slot aggregates) and guaranteed-delivery contracts.  Edges carry the user
interest score between the two ends.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np


@dataclass(frozen=True)
class SupplyNode:
    id: str
    capacity: float
    pv_cap: float
    slot_id: str = "slot-1"


@dataclass(frozen=True)
class Contract:
    id: str
    demand: float
    priority: float = 0.0
    smoothness: float = 1.0
    interest_weight: float = 0.0


@dataclass(frozen=True)
class Edge:
    supply_id: str
    contract_id: str
    interest: float
    # serving-side scores; only the simulator reads them
    ctr: float | None = None
    cvr: float | None = None


@dataclass
class ValidationReport:
    ok: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "errors": list(self.errors), "warnings": list(self.warnings)}


@dataclass(frozen=True)
class EdgeArrays:
    """Flat, index-aligned numpy view of an instance (one row per edge)."""

    supply_idx: np.ndarray
    contract_idx: np.ndarray
    s: np.ndarray  # per supply
    pv: np.ndarray  # per supply
    d: np.ndarray  # per contract
    w: np.ndarray
    V: np.ndarray
    lam: np.ndarray
    c: np.ndarray  # per edge
    theta: np.ndarray  # per contract

    @property
    def n_supplies(self) -> int:
        return len(self.s)

    @property
    def n_contracts(self) -> int:
        return len(self.d)

    @property
    def n_edges(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class ProblemInstance:
    supplies: tuple[SupplyNode, ...]
    contracts: tuple[Contract, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "supplies", tuple(self.supplies))
        object.__setattr__(self, "contracts", tuple(self.contracts))
        object.__setattr__(self, "edges", tuple(self.edges))

    @cached_property
    def supply_index(self) -> dict[str, int]:
        return {s.id: k for k, s in enumerate(self.supplies)}

    @cached_property
    def contract_index(self) -> dict[str, int]:
        return {c.id: k for k, c in enumerate(self.contracts)}

    def eligible_supplies(self, contract_id: str) -> list[str]:
        """Gamma(j): supply ids that can serve ``contract_id``."""
        return [e.supply_id for e in self.edges if e.contract_id == contract_id]

    def eligible_contracts(self, supply_id: str) -> list[str]:
        """Gamma(i): contract ids that ``supply_id`` can serve."""
        return [e.contract_id for e in self.edges if e.supply_id == supply_id]

    def edge_keys(self) -> list[tuple[str, str]]:
        return [(e.supply_id, e.contract_id) for e in self.edges]

    @cached_property
    def arrays(self) -> EdgeArrays:
        si = np.array([self.supply_index[e.supply_id] for e in self.edges], dtype=np.intp)
        cj = np.array([self.contract_index[e.contract_id] for e in self.edges], dtype=np.intp)
        s = np.array([n.capacity for n in self.supplies], dtype=float)
        d = np.array([c.demand for c in self.contracts], dtype=float)
        eligible = np.bincount(cj, weights=s[si], minlength=len(d))
        with np.errstate(divide="ignore"):
            theta = d / eligible
        return EdgeArrays(
            supply_idx=si,
            contract_idx=cj,
            s=s,
            pv=np.array([n.pv_cap for n in self.supplies], dtype=float),
            d=d,
            w=np.array([c.priority for c in self.contracts], dtype=float),
            V=np.array([c.smoothness for c in self.contracts], dtype=float),
            lam=np.array([c.interest_weight for c in self.contracts], dtype=float),
            c=np.array([e.interest for e in self.edges], dtype=float),
            theta=theta,
        )

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        edges = []
        for e in self.edges:
            row: dict[str, Any] = {
                "supply_id": e.supply_id,
                "contract_id": e.contract_id,
                "interest": e.interest,
            }
            if e.ctr is not None:
                row["ctr"] = e.ctr
            if e.cvr is not None:
                row["cvr"] = e.cvr
            edges.append(row)
        return {
            "supplies": [
                {"id": n.id, "capacity": n.capacity, "pv_cap": n.pv_cap, "slot_id": n.slot_id}
                for n in self.supplies
            ],
            "contracts": [
                {
                    "id": c.id,
                    "demand": c.demand,
                    "priority": c.priority,
                    "smoothness": c.smoothness,
                    "interest_weight": c.interest_weight,
                }
                for c in self.contracts
            ],
            "edges": edges,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProblemInstance":
        try:
            supplies = [
                SupplyNode(
                    id=str(r["id"]),
                    capacity=float(r["capacity"]),
                    pv_cap=float(r["pv_cap"]),
                    slot_id=str(r.get("slot_id", "slot-1")),
                )
                for r in doc["supplies"]
            ]
            contracts = [
                Contract(
                    id=str(r["id"]),
                    demand=float(r["demand"]),
                    priority=float(r.get("priority", 0.0)),
                    smoothness=float(r.get("smoothness", 1.0)),
                    interest_weight=float(r.get("interest_weight", 0.0)),
                )
                for r in doc["contracts"]
            ]
            edges = [
                Edge(
                    supply_id=str(r["supply_id"]),
                    contract_id=str(r["contract_id"]),
                    interest=float(r["interest"]),
                    ctr=None if r.get("ctr") is None else float(r["ctr"]),
                    cvr=None if r.get("cvr") is None else float(r["cvr"]),
                )
                for r in doc["edges"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance document: {exc!r}") from exc
        return cls(tuple(supplies), tuple(contracts), tuple(edges))


def load_instance(path: str | Path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return ProblemInstance.from_dict(json.load(fh))


def save_instance(instance: ProblemInstance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_instance(instance: ProblemInstance) -> ValidationReport:
    """Check every structural and coefficient invariant; never raises."""
    errors: list[str] = []
    warnings: list[str] = []

    supply_ids = [s.id for s in instance.supplies]
    contract_ids = [c.id for c in instance.contracts]
    for kind, ids in (("supply", supply_ids), ("contract", contract_ids)):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                errors.append(f"duplicate {kind} id {i!r}")
            seen.add(i)

    for s in instance.supplies:
        if not _finite(s.capacity) or s.capacity < 0:
            errors.append(f"supply {s.id!r}: negative or non-finite capacity {s.capacity}")
        if not _finite(s.pv_cap) or s.pv_cap < 0:
            errors.append(f"supply {s.id!r}: negative or non-finite pv_cap {s.pv_cap}")
    for c in instance.contracts:
        if not _finite(c.demand) or c.demand <= 0:
            errors.append(f"contract {c.id!r}: demand must be positive, got {c.demand}")
        if not _finite(c.smoothness) or c.smoothness <= 0:
            errors.append(f"contract {c.id!r}: smoothness must be positive, got {c.smoothness}")
        if not _finite(c.interest_weight) or c.interest_weight < 0:
            errors.append(
                f"contract {c.id!r}: negative interest_weight {c.interest_weight}"
            )
        if not _finite(c.priority):
            errors.append(f"contract {c.id!r}: non-finite priority")

    known_s, known_c = set(supply_ids), set(contract_ids)
    pairs: set[tuple[str, str]] = set()
    for e in instance.edges:
        if e.supply_id not in known_s:
            errors.append(f"dangling edge: unknown supply {e.supply_id!r}")
        if e.contract_id not in known_c:
            errors.append(f"dangling edge: unknown contract {e.contract_id!r}")
        key = (e.supply_id, e.contract_id)
        if key in pairs:
            errors.append(f"duplicate edge {key}")
        pairs.add(key)
        if not _finite(e.interest) or not 0.0 <= e.interest <= 1.0:
            errors.append(f"edge {key}: interest out of range [0,1]: {e.interest}")
        for name in ("ctr", "cvr"):
            v = getattr(e, name)
            if v is not None and (not _finite(v) or not 0.0 <= v <= 1.0):
                errors.append(f"edge {key}: {name} out of range [0,1]: {v}")

    capacity = {s.id: s.capacity for s in instance.supplies}
    eligible: dict[str, float] = {c: 0.0 for c in contract_ids}
    degree: dict[str, int] = {c: 0 for c in contract_ids}
    for e in instance.edges:
        if e.contract_id in eligible and e.supply_id in capacity:
            eligible[e.contract_id] += capacity[e.supply_id]
            degree[e.contract_id] += 1
    for c in instance.contracts:
        if degree.get(c.id, 0) == 0:
            errors.append(f"contract {c.id!r}: empty eligibility set")
        elif eligible[c.id] <= 0:
            errors.append(f"contract {c.id!r}: eligible supply has zero total capacity")
        elif _finite(c.demand) and c.demand > eligible[c.id]:
            warnings.append(
                f"contract {c.id!r}: over-demanded, theta = {c.demand / eligible[c.id]:.6g} > 1"
            )

    return ValidationReport(ok=not errors, errors=errors, warnings=warnings)


def compute_target_ratios(instance: ProblemInstance) -> dict[str, float]:
    """theta_j = d_j / sum of capacities over Gamma(j)."""
    capacity = {s.id: s.capacity for s in instance.supplies}
    eligible = {c.id: 0.0 for c in instance.contracts}
    for e in instance.edges:
        eligible[e.contract_id] += capacity[e.supply_id]
    return {c.id: c.demand / eligible[c.id] for c in instance.contracts}
