"""JSON round-tripping for plans, ledgers and run manifests."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from . import __version__
from .solver import AllocationPlan, DualState


def _num(v: float) -> float | None:
    return None if isinstance(v, float) and math.isnan(v) else v


def _edge_list(values: dict[tuple[str, str], float]) -> list[dict[str, Any]]:
    return [{"supply_id": s, "contract_id": c, "value": v} for (s, c), v in values.items()]


def _edge_map(rows: list[dict[str, Any]]) -> dict[tuple[str, str], float]:
    return {(str(r["supply_id"]), str(r["contract_id"])): float(r["value"]) for r in rows}


def make_manifest(command: str, instance: str | None = None, config: str | None = None,
                  plan: str | None = None, seed: int | None = None,
                  out: str | None = None) -> dict[str, Any]:
    return {
        "command": command,
        "instance": instance,
        "config": config,
        "plan": plan,
        "seed": seed,
        "out": out,
        "version": __version__,
    }


def plan_to_dict(plan: AllocationPlan, manifest: dict[str, Any] | None = None,
                 extra: dict[str, Any] | None = None) -> dict[str, Any]:
    d = plan.duals
    doc = {
        "manifest": manifest,
        "converged": plan.converged,
        "iterations": d.iteration,
        "kkt_residual": _num(plan.kkt_residual),
        "residual_families": dict(plan.residual_families),
        "feasibility": dict(plan.feasibility),
        "objective_value": plan.objective_value,
        "steps": dict(plan.steps),
        "x": _edge_list(plan.x),
        "duals": {
            "alpha": dict(d.alpha),
            "beta": dict(d.beta),
            "delta": _edge_list(d.delta),
            "gamma_diag": _edge_list(d.gamma_diag),
            "grad": dict(d.grad),
        },
        "history": list(plan.history),
    }
    if extra:
        doc.update(extra)
    return doc


def plan_from_dict(doc: dict[str, Any]) -> AllocationPlan:
    dd = doc["duals"]
    residual = doc.get("kkt_residual")
    return AllocationPlan(
        x=_edge_map(doc["x"]),
        duals=DualState(
            alpha={k: float(v) for k, v in dd["alpha"].items()},
            beta={k: float(v) for k, v in dd["beta"].items()},
            delta=_edge_map(dd["delta"]),
            gamma_diag=_edge_map(dd.get("gamma_diag", [])),
            iteration=int(doc.get("iterations", 0)),
            grad={k: float(v) for k, v in dd.get("grad", {}).items()},
        ),
        feasibility={k: float(v) for k, v in doc["feasibility"].items()},
        kkt_residual=float("nan") if residual is None else float(residual),
        objective_value=float(doc["objective_value"]),
        converged=bool(doc.get("converged", True)),
        residual_families={k: float(v) for k, v in doc.get("residual_families", {}).items()},
        steps={k: float(v) for k, v in doc.get("steps", {}).items()},
        history=[float(v) for v in doc.get("history", [])],
    )


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
