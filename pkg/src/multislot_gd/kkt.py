"""Independent KKT residual checker.

Deliberately written as plain loops over dictionaries so that it shares no
code with the vectorized bookkeeping inside :mod:`multislot_gd.solver`.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .model import ProblemInstance, compute_target_ratios
from .solver import AllocationPlan


@dataclass
class ResidualReport:
    families: dict[str, float]
    gamma: dict[tuple[str, str], float]

    @property
    def kkt_residual(self) -> float:
        return max(self.families.values())


def kkt_residuals(instance: ProblemInstance, plan: AllocationPlan) -> ResidualReport:
    theta = compute_target_ratios(instance)
    supply = {n.id: n for n in instance.supplies}
    contract = {c.id: c for c in instance.contracts}
    alpha, beta, delta = plan.duals.alpha, plan.duals.beta, plan.duals.delta

    fam = defaultdict(float)

    def bump(name: str, value: float) -> None:
        if value > fam[name]:
            fam[name] = value

    delivered = defaultdict(float)
    row = defaultdict(float)
    gamma = {}
    for e in instance.edges:
        key = (e.supply_id, e.contract_id)
        n, c = supply[e.supply_id], contract[e.contract_id]
        x = plan.x[key]
        a, b, dl = alpha.get(c.id, 0.0), beta.get(n.id, 0.0), delta.get(key, 0.0)
        delivered[c.id] += n.capacity * x
        row[n.id] += x

        # stationarity divided through by s_i; gamma absorbs a positive
        # remainder only where x sits on its lower bound
        g = (c.smoothness / theta[c.id]) * (x - theta[c.id]) - c.priority \
            - c.interest_weight * e.interest + a + b + dl
        gam = 0.0
        if n.capacity > 0:
            if x > 0:
                bump("stationarity", abs(g))
            elif g >= 0:
                gam = n.capacity * g
            else:
                bump("stationarity", -g)
        gamma[key] = gam

        gap = n.capacity * x - n.pv_cap
        scale = n.capacity if n.capacity > 0 else 1.0
        bump("cs_gamma", abs(gam * x) / scale)
        bump("cs_delta", abs(dl * gap) / scale)
        bump("page_view", max(gap, 0.0))
        bump("nonnegativity", max(-x, 0.0))
        bump("dual_feasibility", max(-dl, -gam, 0.0))

    for c in instance.contracts:
        a = alpha.get(c.id, 0.0)
        bump("cs_alpha", abs(a * (delivered[c.id] - c.demand)) / c.demand)
        bump("demand", max(delivered[c.id] - c.demand, 0.0) / c.demand)
        bump("dual_feasibility", max(-a, 0.0))
    for n in instance.supplies:
        b = beta.get(n.id, 0.0)
        bump("cs_beta", abs(b * (row[n.id] - 1.0)))
        bump("request", max(row[n.id] - 1.0, 0.0))
        bump("dual_feasibility", max(-b, 0.0))

    names = ("stationarity", "cs_alpha", "cs_beta", "cs_gamma", "cs_delta",
             "demand", "request", "nonnegativity", "page_view", "dual_feasibility")
    return ResidualReport({k: fam[k] for k in names}, gamma)
