"""Command-line entry point: ``multislot-gd <command> ...``.

Exit codes: 0 success, 1 validation/check failure, 2 I/O failure,
3 instance too large for the oracle, 4 plan does not match the instance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .fixtures import random_instance, shared_contracts, sufficient_supply
from .kkt import kkt_residuals
from .model import ProblemInstance, validate_instance
from .oracle import InstanceTooLarge, solve_primal_reference
from .selection import PageRequest, assemble_page, UNIFORM, WEIGHTED
from .serialize import dumps, make_manifest, plan_from_dict, plan_to_dict, read_json
from .simulator import (DeliveryLedger, StreamConfig, fulfillment_rate, run_simulation,
                        slot_share)
from .solver import AllocationPlan, NonConvergence, SolverConfig, solve

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_TOO_LARGE = 3
EXIT_MISMATCH = 4

ORACLE_GAP = 1e-3

log = logging.getLogger("multislot_gd")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read(path: str):
    try:
        return read_json(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_IO, f"{path} is not valid JSON: {exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_instance(path: str, require_valid: bool = True) -> ProblemInstance:
    try:
        inst = ProblemInstance.from_dict(_read(path))
    except ValueError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from exc
    if require_valid:
        report = validate_instance(inst)
        if not report.ok:
            raise CliError(EXIT_INVALID, "invalid instance: " + "; ".join(report.errors))
    return inst


def _load_plan(path: str, instance: ProblemInstance) -> AllocationPlan:
    try:
        plan = plan_from_dict(_read(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_IO, f"malformed plan {path}: {exc!r}") from exc
    if set(plan.x) != set(instance.edge_keys()):
        raise CliError(EXIT_MISMATCH, f"plan {path} does not cover the instance edge set")
    return plan


def metrics_rows(instance: ProblemInstance, ledger: DeliveryLedger) -> list[tuple[str, str, str]]:
    rows = [("fulfillment", cid, repr(v)) for cid, v in fulfillment_rate(ledger, instance).items()]
    rows += [("slot_share", sid, repr(v)) for sid, v in slot_share(ledger).items()]
    rows += [
        ("count", "pages", str(ledger.pages)),
        ("count", "duplicate_violations", str(ledger.duplicate_violations)),
        ("count", "unfilled_slots", str(ledger.unfilled_slots)),
    ]
    return rows


def metrics_csv(instance: ProblemInstance, ledger: DeliveryLedger) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "key", "value"])
    writer.writerows(metrics_rows(instance, ledger))
    return buf.getvalue()


def ledger_from_dict(doc: dict) -> DeliveryLedger:
    return DeliveryLedger(
        delivered={k: int(v) for k, v in doc["delivered"].items()},
        per_slot={k: int(v) for k, v in doc["per_slot"].items()},
        per_edge={(r["supply_id"], r["contract_id"]): int(r["count"]) for r in doc["per_edge"]},
        duplicate_violations=int(doc["duplicate_violations"]),
        unfilled_slots=int(doc["unfilled_slots"]),
        pages=int(doc.get("pages", 0)),
    )


# -- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    inst = _load_instance(args.instance, require_valid=False)
    report = validate_instance(inst)
    sys.stdout.write(dumps(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    cfg_doc = _read(args.config) if args.config else {}
    if args.seed is not None:
        cfg_doc = {**cfg_doc, "seed": args.seed}
    try:
        config = SolverConfig.from_dict(cfg_doc)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"bad solver config: {exc}") from exc
    with warnings.catch_warnings():
        # reported below in CLI form
        warnings.simplefilter("ignore", NonConvergence)
        plan = solve(inst, config)
    manifest = make_manifest("solve", args.instance, args.config, None, config.seed, args.out)
    doc = plan_to_dict(plan, manifest, {"solver_config": config.to_dict()})
    _write_text(Path(args.out), dumps(doc))
    if not plan.converged:
        print(f"warning: not converged after {plan.duals.iteration} iterations", file=sys.stderr)
    print(f"converged: {plan.converged}")
    print(f"iterations: {plan.duals.iteration}")
    print(f"kkt_residual: {plan.kkt_residual:.3e}")
    print(f"objective: {plan.objective_value:.9g}")
    for fam, v in plan.feasibility.items():
        print(f"violation[{fam}]: {v:.3e}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load_instance(args.instance)
    plan = _load_plan(args.plan, inst)
    try:
        ref = solve_primal_reference(inst)
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    gap = abs(plan.objective_value - ref.objective_value) / max(abs(ref.objective_value), 1e-12)
    viol_delta = max(abs(plan.feasibility[k] - ref.feasibility[k]) for k in ref.feasibility)
    checked = kkt_residuals(inst, plan)
    print(f"solver_objective: {plan.objective_value:.9g}")
    print(f"oracle_objective: {ref.objective_value:.9g}")
    print(f"relative_gap: {gap:.3e}")
    print(f"max_violation_delta: {viol_delta:.3e}")
    print(f"kkt_residual_recomputed: {checked.kkt_residual:.3e}")
    if args.out:
        manifest = make_manifest("oracle", args.instance, None, args.plan, None, args.out)
        _write_text(Path(args.out), dumps(plan_to_dict(ref, manifest)))
    return EXIT_OK if gap <= ORACLE_GAP else EXIT_INVALID


def cmd_simulate(args) -> int:
    inst = _load_instance(args.instance)
    plan = _load_plan(args.plan, inst)
    doc = _read(args.config)
    if args.seed is not None:
        doc = {**doc, "seed": args.seed}
    try:
        config = StreamConfig.from_dict(doc)
        assignments: list | None = [] if args.log else None
        ledger = run_simulation(inst, plan, config, assignment_log=assignments)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"bad stream config: {exc}") from exc
    out = Path(args.out)
    manifest = make_manifest("simulate", args.instance, args.config, args.plan, config.seed, args.out)
    ledger_doc = {
        "manifest": manifest,
        "stream_config": config.to_dict(),
        "ledger": ledger.to_dict(),
        "fulfillment": fulfillment_rate(ledger, inst),
        "slot_share": slot_share(ledger),
    }
    _write_text(out / "ledger.json", dumps(ledger_doc))
    _write_text(out / "metrics.csv", metrics_csv(inst, ledger))
    if assignments is not None:
        lines = "".join(json.dumps(a.to_dict(), sort_keys=True) + "\n" for a in assignments)
        _write_text(out / "assignments.jsonl", lines)
    if args.figures:
        from .plotting import render_report
        render_report(out, inst, plan, fulfillment_rate(ledger, inst), slot_share(ledger))
    sys.stdout.write(metrics_csv(inst, ledger))
    return EXIT_OK


def cmd_select(args) -> int:
    doc = _read(args.pages)
    try:
        pages = [PageRequest.from_dict(p) for p in doc]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"bad page fixture: {exc}") from exc
    lines = "".join(
        json.dumps(assemble_page(p, args.k1, args.fallback).to_dict(), sort_keys=True) + "\n"
        for p in pages
    )
    if args.out:
        _write_text(Path(args.out), lines)
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def cmd_report(args) -> int:
    from .plotting import render_report

    inst = _load_instance(args.instance)
    plan = _load_plan(args.plan, inst)
    out = Path(args.out)
    fulfillment = share = None
    if args.ledger:
        ledger = ledger_from_dict(_read(args.ledger)["ledger"])
        fulfillment, share = fulfillment_rate(ledger, inst), slot_share(ledger)
        _write_text(out / "metrics.csv", metrics_csv(inst, ledger))
    rows = [("supply_id", "contract_id", "x", "delta")]
    rows += [(s, c, repr(v), repr(plan.duals.delta.get((s, c), 0.0))) for (s, c), v in plan.x.items()]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    _write_text(out / "allocation.csv", buf.getvalue())
    try:
        paths = render_report(out, inst, plan, fulfillment, share)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write figures to {out}: {exc}") from exc
    for p in [out / "allocation.csv", *paths]:
        print(p)
    return EXIT_OK


def cmd_fixture(args) -> int:
    if args.kind == "random":
        inst, mix = random_instance(args.seed), None
    elif args.kind == "sufficient":
        inst, mix = sufficient_supply(args.pages)
    else:
        inst, mix = shared_contracts(args.pages)
    out = Path(args.out)
    _write_text(out / "instance.json", dumps(inst.to_dict()))
    if mix is not None:
        slots = len(dict.fromkeys(n.slot_id for n in inst.supplies))
        stream = StreamConfig(args.pages, slots, args.seed, mix)
        _write_text(out / "stream.json", dumps(stream.to_dict()))
    print(out / "instance.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multislot-gd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run the dual solver and write a plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--out", required=True, help="plan JSON path")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", aliases=["oracle-check"],
                       help="compare a plan with the primal reference solver")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", help="optional path for the oracle's own plan")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="serve a seeded page stream through a plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--config", required=True, help="stream config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--log", action="store_true", help="also write assignments.jsonl")
    p.add_argument("--figures", action="store_true", help="also render report figures")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("select", help="assemble pages from a page fixture file")
    p.add_argument("--pages", required=True)
    p.add_argument("--k1", type=float, default=0.0)
    p.add_argument("--fallback", choices=[UNIFORM, WEIGHTED], default=UNIFORM)
    p.add_argument("--out", help="JSON lines output (default stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="write allocation CSV and figures")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--ledger", help="ledger.json from simulate")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fixture", help="write a bundled instance (and stream config)")
    p.add_argument("kind", choices=["random", "sufficient", "shared"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pages", type=int, default=10_000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
