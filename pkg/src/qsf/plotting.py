"""Figure rendering for the CLI report paths.

Uses the Agg backend so figures always go to files; the CSV streams remain
the primary machine-readable output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_bound_curves", "save_schedule_figure"]


def save_bound_curves(rows: list[dict], path: str) -> None:
    """Performance-limit curves: fidelity error floor against T*delta.

    One curve per robustness-measure value; infeasible grid points are
    clipped (the floor is vacuous there).
    """
    by_j: dict[float, list] = {}
    for r in rows:
        by_j.setdefault(r["J_rbst"], []).append(r)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    styles = ["-", ":", "--", "-."]
    for i, (j, pts) in enumerate(sorted(by_j.items())):
        pts = sorted(pts, key=lambda r: r["T_delta"])
        xs = [p["T_delta"] for p in pts if p["feasible"] and p["F_lb"] < 1.0]
        ys = [np.log10(1.0 - p["F_lb"]) for p in pts if p["feasible"] and p["F_lb"] < 1.0]
        ax.plot(xs, ys, styles[i % len(styles)], label=f"J_rbst = {j:g}")
    ax.set_xlabel(r"uncertainty error $T\,\delta_{unc}$")
    ax.set_ylabel(r"$\log_{10}(1 - F_{lb})$")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_schedule_figure(schedule, report, path: str) -> None:
    """Optimized pulse staircase plus the two optimization-stage traces."""
    fig, (ax_tr, ax_pu) = plt.subplots(2, 1, figsize=(6.0, 6.0))

    if report.stage1_trace:
        ax_tr.semilogy(
            [max(1.0 - f, 1e-16) for f in report.stage1_trace],
            label="stage 1: 1 - F_nom",
        )
    if report.stage2_trace:
        ax_tr.semilogy(
            [max(j, 1e-16) for j in report.stage2_trace],
            label="stage 2: J_rbst",
        )
    ax_tr.set_xlabel("accepted step")
    ax_tr.legend()
    ax_tr.grid(True, alpha=0.3)

    k = schedule.segments
    edges = np.linspace(0.0, schedule.horizon, k + 1)
    for ch in range(schedule.channels):
        ax_pu.stairs(schedule.amplitudes[ch], edges, label=f"channel {ch}")
    ax_pu.set_xlabel("time")
    ax_pu.set_ylabel("amplitude")
    ax_pu.legend()
    ax_pu.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
