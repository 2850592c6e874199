"""Slow primal reference solver used to certify the dual solver.

Projected gradient descent on the quadratic objective, where the projection
onto the feasible polytope is computed by Dykstra's alternating projections
between two easy sets:

* ``rows``: box bounds plus one "sum of x over a supply <= 1" halfspace per supply;
* ``demand``: box bounds plus one "delivered <= demand" halfspace per contract.

Both sub-projections are solved exactly by bisection on a single multiplier.
All geometry is measured in the metric induced by the objective's diagonal
Hessian, which makes a unit gradient step exact for the unconstrained part.
Nothing here is shared with the dual solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ProblemInstance
from .solver import AllocationPlan, DualState

MAX_SUPPLIES = 12
MAX_CONTRACTS = 6


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    step: float = 1.0
    max_steps: int = 200
    stall_tolerance: float = 1e-12
    projection_rounds: int = 20000
    projection_tolerance: float = 1e-13

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class ProjectionTrace:
    rounds: int = 0
    violation: list[float] = field(default_factory=list)


def _capped_shift(v, weight, h, lo, hi, cap):
    """argmin sum h (x - v)^2  s.t. lo <= x <= hi, sum weight*x <= cap."""
    x = np.clip(v, lo, hi)
    if weight @ x <= cap:
        return x
    # tau >= 0 multiplier; sum weight*clip(v - tau*weight/h) is non-increasing
    lo_t, hi_t = 0.0, 1.0
    while weight @ np.clip(v - hi_t * weight / h, lo, hi) > cap:
        hi_t *= 2.0
        if hi_t > 1e300:
            break
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        if weight @ np.clip(v - mid * weight / h, lo, hi) > cap:
            lo_t = mid
        else:
            hi_t = mid
        if hi_t - lo_t <= 1e-16 * max(1.0, hi_t):
            break
    return np.clip(v - hi_t * weight / h, lo, hi)


class _Polytope:
    def __init__(self, instance: ProblemInstance, h: np.ndarray):
        A = instance.arrays
        self.h = h
        s_e = A.s[A.supply_idx]
        self.lo = np.zeros(A.n_edges)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.hi = np.where(s_e > 0, np.minimum(1.0, A.pv[A.supply_idx] / s_e), 1.0)
        self.s_e = s_e
        self.rows = [np.flatnonzero(A.supply_idx == i) for i in range(A.n_supplies)]
        self.cols = [np.flatnonzero(A.contract_idx == j) for j in range(A.n_contracts)]
        self.d = A.d
        self.supply_idx, self.contract_idx = A.supply_idx, A.contract_idx
        self.n_supplies, self.n_contracts = A.n_supplies, A.n_contracts

    def project_rows(self, v):
        out = np.clip(v, self.lo, self.hi)
        for idx in self.rows:
            if idx.size:
                out[idx] = _capped_shift(v[idx], np.ones(idx.size), self.h[idx],
                                         self.lo[idx], self.hi[idx], 1.0)
        return out

    def project_demand(self, v):
        out = np.clip(v, self.lo, self.hi)
        for j, idx in enumerate(self.cols):
            if idx.size:
                out[idx] = _capped_shift(v[idx], self.s_e[idx], self.h[idx],
                                         self.lo[idx], self.hi[idx], self.d[j])
        return out

    def violation(self, x) -> float:
        row = np.bincount(self.supply_idx, weights=x, minlength=self.n_supplies)
        dem = np.bincount(self.contract_idx, weights=self.s_e * x, minlength=self.n_contracts)
        return float(max(
            np.max(np.maximum(row - 1.0, 0.0), initial=0.0),
            np.max(np.maximum(dem - self.d, 0.0) / self.d, initial=0.0),
            np.max(np.maximum(self.lo - x, 0.0), initial=0.0),
            np.max(np.maximum(x - self.hi, 0.0), initial=0.0),
        ))

    def project(self, v, rounds: int, tol: float, dykstra: bool = True,
                trace: ProjectionTrace | None = None):
        """Metric projection of ``v`` onto rows ∩ demand.

        ``dykstra=False`` gives plain alternating projections, which land in
        the intersection but not necessarily at the nearest point.
        """
        x = v.copy()
        p = np.zeros_like(v)
        q = np.zeros_like(v)
        for r in range(rounds):
            y = self.project_rows(x + p)
            x_new = self.project_demand(y + q if dykstra else y)
            change = float(np.max(np.abs(x_new - x)))
            if dykstra:
                # x can sit still for many rounds while the corrections drift
                p_new = x + p - y
                q_new = y + q - x_new
                change = max(change, float(np.max(np.abs(p_new - p))),
                             float(np.max(np.abs(q_new - q))))
                p, q = p_new, q_new
            x = x_new
            if trace is not None:
                trace.rounds = r + 1
                trace.violation.append(self.violation(x))
            if change <= tol:
                break
        return x


def solve_primal_reference(instance: ProblemInstance, config: OracleConfig | None = None) -> AllocationPlan:
    config = config or OracleConfig()
    A = instance.arrays
    if A.n_supplies > MAX_SUPPLIES or A.n_contracts > MAX_CONTRACTS:
        raise InstanceTooLarge(
            f"oracle handles at most {MAX_SUPPLIES} supplies x {MAX_CONTRACTS} contracts, "
            f"got {A.n_supplies} x {A.n_contracts}"
        )
    si, cj = A.supply_idx, A.contract_idx
    s_e = A.s[si]
    theta = A.theta[cj]
    h = np.maximum(s_e * A.V[cj] / theta, 1e-12)
    lin = (A.w[cj] + A.lam[cj] * A.c) * s_e
    poly = _Polytope(instance, h)

    def objective(x):
        return float(0.5 * np.sum(h * (x - theta) ** 2) - np.sum(lin * x))

    x = poly.project(np.minimum(theta, 1.0), config.projection_rounds, config.projection_tolerance)
    f = objective(x)
    steps = 0
    for steps in range(1, config.max_steps + 1):
        grad = h * (x - theta) - lin
        x = poly.project(x - config.step * grad / h, config.projection_rounds,
                         config.projection_tolerance)
        f_new = objective(x)
        stalled = abs(f - f_new) < config.stall_tolerance
        f = f_new
        if stalled:
            break

    keys = instance.edge_keys()
    row = np.bincount(si, weights=x, minlength=A.n_supplies)
    delivered = np.bincount(cj, weights=s_e * x, minlength=A.n_contracts)
    feas = {
        "demand": float(np.max(np.maximum(delivered - A.d, 0.0) / A.d, initial=0.0)),
        "request": float(np.max(np.maximum(row - 1.0, 0.0), initial=0.0)),
        "nonnegativity": float(np.max(np.maximum(-x, 0.0), initial=0.0)),
        "page_view": float(np.max(np.maximum(s_e * x - A.pv[si], 0.0), initial=0.0)),
    }
    zero_edges = {k: 0.0 for k in keys}
    duals = DualState(
        alpha={c.id: 0.0 for c in instance.contracts},
        beta={n.id: 0.0 for n in instance.supplies},
        delta=dict(zero_edges),
        gamma_diag=dict(zero_edges),
        iteration=steps,
        grad={c.id: float(delivered[k] - A.d[k]) for k, c in enumerate(instance.contracts)},
    )
    # the oracle carries no multipliers, so no KKT residual is reported
    return AllocationPlan(
        x={k: float(v) for k, v in zip(keys, x)},
        duals=duals,
        feasibility=feas,
        kkt_residual=float("nan"),
        objective_value=f,
        converged=True,
    )
