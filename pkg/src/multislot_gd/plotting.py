"""Report figures.  Everything renders off-screen with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import ProblemInstance  # noqa: E402
from .solver import AllocationPlan  # noqa: E402

REPORT_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}
# fixed metadata keeps reruns byte-comparable
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_fulfillment(fulfillment: dict[str, float], path: Path, target: float = 0.95) -> Path:
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots(figsize=(max(3.5, 0.5 * len(fulfillment) + 2), 2.8))
        ids = list(fulfillment)
        vals = [fulfillment[k] for k in ids]
        colors = ["tab:blue" if v >= target else "tab:red" for v in vals]
        ax.bar(ids, vals, color=colors)
        ax.axhline(target, color="0.4", lw=0.8, ls="--")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("fulfillment rate")
        ax.set_title("Delivered / contracted impressions")
        return _save(fig, path)


def plot_slot_share(share: dict[str, float], path: Path) -> Path:
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots(figsize=(3.5, 2.8))
        ax.bar(list(share), list(share.values()), color="tab:green")
        ax.set_ylabel("share of impressions")
        ax.set_title("Exposure by slot")
        return _save(fig, path)


def plot_allocation(instance: ProblemInstance, plan: AllocationPlan, path: Path) -> Path:
    """Heat map of x over supply rows and contract columns; blank cells are ineligible."""
    mat = np.full((len(instance.supplies), len(instance.contracts)), np.nan)
    for (s, c), v in plan.x.items():
        mat[instance.supply_index[s], instance.contract_index[c]] = v
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots(figsize=(1.0 + 0.6 * mat.shape[1], 1.0 + 0.35 * mat.shape[0]))
        im = ax.imshow(mat, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
        ax.set_xticks(range(mat.shape[1]), [c.id for c in instance.contracts], rotation=45)
        ax.set_yticks(range(mat.shape[0]), [s.id for s in instance.supplies])
        ax.set_title("Allocation probability")
        fig.colorbar(im, ax=ax, shrink=0.8)
        return _save(fig, path)


def plot_convergence(history: list[float], path: Path, tolerance: float | None = None) -> Path:
    with plt.rc_context(REPORT_RC):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        ax.semilogy(np.arange(1, len(history) + 1), np.maximum(history, 1e-300), lw=1.0)
        if tolerance is not None:
            ax.axhline(tolerance, color="0.4", lw=0.8, ls="--")
        ax.set_xlabel("iteration")
        ax.set_ylabel("KKT residual")
        ax.set_title("Dual iteration")
        return _save(fig, path)


def render_report(out_dir: Path, instance: ProblemInstance, plan: AllocationPlan,
                  fulfillment: dict[str, float] | None = None,
                  share: dict[str, float] | None = None,
                  tolerance: float | None = None) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [plot_allocation(instance, plan, out_dir / "allocation.png")]
    if plan.history:
        paths.append(plot_convergence(plan.history, out_dir / "convergence.png", tolerance))
    if fulfillment:
        paths.append(plot_fulfillment(fulfillment, out_dir / "fulfillment.png"))
    if share:
        paths.append(plot_slot_share(share, out_dir / "slot_share.png"))
    return paths
