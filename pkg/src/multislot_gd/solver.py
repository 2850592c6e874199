"""Dual-ascent solver for the page-view constrained allocation problem.

The primal is a separable quadratic program over edge probabilities ``x_ij``.
Given the multipliers of the demand (alpha), request (beta) and page-view
(delta) constraints, the minimizer of the Lagrangian has a closed form, so the
solver only iterates on the multipliers and re-derives ``x`` each round.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import ProblemInstance

Key = tuple[str, str]


class NonConvergence(RuntimeWarning):
    """Iteration budget exhausted before the KKT tolerance was reached."""


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 20000
    # None selects a step from the instance curvature (see ``default_steps``)
    step_beta: float | None = None
    step_delta: float | None = None
    kkt_tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("step_beta", "step_delta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SolverConfig":
        known = {"max_iterations", "step_beta", "step_delta", "kkt_tolerance", "seed"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_iterations": self.max_iterations,
            "step_beta": self.step_beta,
            "step_delta": self.step_delta,
            "kkt_tolerance": self.kkt_tolerance,
            "seed": self.seed,
        }


@dataclass
class DualState:
    alpha: dict[str, float]
    beta: dict[str, float]
    delta: dict[Key, float]
    gamma_diag: dict[Key, float]
    iteration: int
    grad: dict[str, float]


@dataclass
class AllocationPlan:
    x: dict[Key, float]
    duals: DualState
    feasibility: dict[str, float]
    kkt_residual: float
    objective_value: float
    converged: bool = True
    residual_families: dict[str, float] = field(default_factory=dict)
    steps: dict[str, float] = field(default_factory=dict)
    history: list[float] = field(default_factory=list)


# -- scalar update rules ----------------------------------------------------
# All of these broadcast, so the vectorized loop below reuses them directly.


def closed_form_x(theta_j, V_j, w_j, lambda_j, c_ij, alpha_j, beta_i, delta_ij):
    """Lagrangian minimizer for one edge, projected onto [0, 1]."""
    raw = theta_j * (1.0 + (w_j + lambda_j * c_ij - alpha_j - beta_i - delta_ij) / V_j)
    return np.minimum(1.0, np.maximum(0.0, raw))


def update_alpha(alpha_j, V_j, delivered_j, d_j):
    return np.maximum(0.0, alpha_j - V_j * (1.0 - delivered_j / d_j))


def update_beta(beta_i, step_beta, row_sum_i):
    return np.maximum(0.0, beta_i + step_beta * (row_sum_i - 1.0))


def update_delta(delta_ij, step_delta, s_i, x_ij, pv_i):
    return np.maximum(0.0, delta_ij + step_delta * (s_i * x_ij - pv_i))


# -- objective and vectorized diagnostics -------------------------------------


def _objective(A, x: np.ndarray) -> float:
    si, cj = A.supply_idx, A.contract_idx
    s = A.s[si]
    theta = A.theta[cj]
    quad = 0.5 * s * (A.V[cj] / theta) * (x - theta) ** 2
    lin = (A.w[cj] + A.lam[cj] * A.c) * s * x
    return float(np.sum(quad) - np.sum(lin))


def evaluate_objective(instance: ProblemInstance, x: dict[Key, float]) -> float:
    """Smoothness penalty minus priority and interest rewards."""
    A = instance.arrays
    vec = np.array([x[k] for k in instance.edge_keys()], dtype=float)
    return _objective(A, vec)


def _residuals(A, x, alpha, beta, delta):
    """Residual families plus recovered gamma, all as numpy arrays."""
    si, cj = A.supply_idx, A.contract_idx
    s = A.s[si]
    theta = A.theta[cj]
    g = (A.V[cj] / theta) * (x - theta) - A.w[cj] - A.lam[cj] * A.c + alpha[cj] + beta[si] + delta
    positive = x > 0
    gamma = np.where(positive, 0.0, s * np.maximum(g, 0.0))
    stat = np.where(positive, np.abs(g), np.maximum(-g, 0.0))
    stat = np.where(s > 0, stat, 0.0)
    safe_s = np.where(s > 0, s, 1.0)

    delivered = np.bincount(cj, weights=s * x, minlength=A.n_contracts)
    row = np.bincount(si, weights=x, minlength=A.n_supplies)
    pv_gap = s * x - A.pv[si]

    fam = {
        "stationarity": stat,
        "cs_alpha": np.abs(alpha * (delivered - A.d)) / A.d,
        "cs_beta": np.abs(beta * (row - 1.0)),
        "cs_gamma": np.abs(gamma * x) / safe_s,
        "cs_delta": np.abs(delta * pv_gap) / safe_s,
        "demand": np.maximum(delivered - A.d, 0.0) / A.d,
        "request": np.maximum(row - 1.0, 0.0),
        "nonnegativity": np.maximum(-x, 0.0),
        "page_view": np.maximum(pv_gap, 0.0),
        "dual_feasibility": np.concatenate(
            [np.maximum(-alpha, 0), np.maximum(-beta, 0), np.maximum(-delta, 0), np.maximum(-gamma, 0)]
        ),
    }
    maxima = {k: float(v.max()) if v.size else 0.0 for k, v in fam.items()}
    return maxima, gamma, delivered


FEASIBILITY_FAMILIES = ("demand", "request", "nonnegativity", "page_view")


def default_steps(instance: ProblemInstance) -> tuple[float, float]:
    """Steps for beta and delta scaled by the inverse dual curvature.

    The alpha rule already takes a Newton-sized step, so the beta and delta
    blocks get a combined share below one to keep the Jacobi sweep contractive.
    """
    A = instance.arrays
    si, cj = A.supply_idx, A.contract_idx
    ratio = A.theta[cj] / A.V[cj]
    row_curv = np.bincount(si, weights=ratio, minlength=A.n_supplies)
    edge_curv = A.s[si] * ratio
    step_beta = 0.45 / max(float(row_curv.max()), 1e-12)
    step_delta = 0.45 / max(float(edge_curv.max()), 1e-12)
    return step_beta, step_delta


def _raw_x(A, alpha, beta, delta):
    si, cj = A.supply_idx, A.contract_idx
    reward = A.w[cj] + A.lam[cj] * A.c
    return np.maximum(0.0, A.theta[cj] * (1.0 + (reward - alpha[cj] - beta[si] - delta) / A.V[cj]))


def dual_step(instance: ProblemInstance, alpha, beta, delta, x, step_beta, step_delta):
    """One Jacobi sweep: alpha, beta and delta all read the same ``x``.

    ``x`` is the unclamped edge vector from the previous sweep.  Returns the
    new ``(alpha, beta, delta, x)`` arrays; inputs are not modified.
    """
    A = instance.arrays
    si, cj = A.supply_idx, A.contract_idx
    s_e = A.s[si]
    delivered = np.bincount(cj, weights=s_e * x, minlength=A.n_contracts)
    row = np.bincount(si, weights=x, minlength=A.n_supplies)
    alpha = update_alpha(alpha, A.V, delivered, A.d)
    beta = update_beta(beta, step_beta, row)
    delta = update_delta(delta, step_delta, s_e, x, A.pv[si])
    return alpha, beta, delta, _raw_x(A, alpha, beta, delta)


def initial_duals(instance: ProblemInstance):
    """alpha_j = w_j + lambda_j * (mean interest over Gamma(j)); beta = delta = 0."""
    A = instance.arrays
    cj = A.contract_idx
    counts = np.bincount(cj, minlength=A.n_contracts)
    c_mean = np.bincount(cj, weights=A.c, minlength=A.n_contracts) / np.maximum(counts, 1)
    alpha = np.maximum(0.0, A.w + A.lam * c_mean)
    return alpha, np.zeros(A.n_supplies), np.zeros(A.n_edges)


def solve(instance: ProblemInstance, config: SolverConfig | None = None) -> AllocationPlan:
    """Run the alpha/beta/delta dual iteration until the KKT residual is small."""
    config = config or SolverConfig()
    A = instance.arrays

    auto_beta, auto_delta = default_steps(instance)
    eta_b = config.step_beta if config.step_beta is not None else auto_beta
    eta_d = config.step_delta if config.step_delta is not None else auto_delta

    alpha, beta, delta = initial_duals(instance)
    # dual gradients use the unclamped minimizer; the [0,1] clamp is only
    # applied to the reported x, otherwise a clamped edge can stall beta
    xr = _raw_x(A, alpha, beta, delta)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        alpha, beta, delta, xr = dual_step(instance, alpha, beta, delta, xr, eta_b, eta_d)
        maxima, _, _ = _residuals(A, np.minimum(xr, 1.0), alpha, beta, delta)
        res = max(maxima.values())
        history.append(res)
        if res <= config.kkt_tolerance:
            converged = True
            break

    x = np.minimum(xr, 1.0)
    maxima, gamma, delivered = _residuals(A, x, alpha, beta, delta)
    residual = max(maxima.values())
    if not converged:
        warnings.warn(
            f"stopped after {it} iterations with kkt residual {residual:.3e} "
            f"> {config.kkt_tolerance:.1e}",
            NonConvergence,
            stacklevel=2,
        )

    keys = instance.edge_keys()
    duals = DualState(
        alpha={c.id: float(alpha[k]) for k, c in enumerate(instance.contracts)},
        beta={n.id: float(beta[k]) for k, n in enumerate(instance.supplies)},
        delta={key: float(v) for key, v in zip(keys, delta)},
        gamma_diag={key: float(v) for key, v in zip(keys, gamma)},
        iteration=it,
        grad={c.id: float(delivered[k] - A.d[k]) for k, c in enumerate(instance.contracts)},
    )
    return AllocationPlan(
        x={key: float(v) for key, v in zip(keys, x)},
        duals=duals,
        feasibility={k: maxima[k] for k in FEASIBILITY_FAMILIES},
        kkt_residual=residual,
        objective_value=_objective(A, x),
        converged=converged,
        residual_families=maxima,
        steps={"beta": float(eta_b), "delta": float(eta_d)},
        history=history,
    )
