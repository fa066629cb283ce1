"""Static PNG renderers for run reports.

Everything draws through the Agg backend into files next to the CSV output;
nothing here opens a window.  Figures are a convenience view of data the CSV
already carries, so report code treats them as optional and they stay out of
the reproducibility contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = [
    "save_trajectory",
    "save_einstein_scan",
    "save_mobility_fit",
    "save_rn_scan",
    "save_interval_bars",
]

_DPI = 120


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_trajectory(path, traj) -> Path:
    """Position against the trajectory clock (steps, or time if present)."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    clock = traj.times if traj.times is not None else range(len(traj.positions))
    ax.step(clock, traj.positions, where="post", lw=0.9)
    ax.set_xlabel("time" if traj.times is not None else "step")
    ax.set_ylabel("position")
    ax.set_title(f"walk, lam={traj.lam:g}, {traj.n_steps} jumps")
    fig.tight_layout()
    return _finish(fig, path)


def save_einstein_scan(path, rows) -> Path:
    """|finite difference - diffusivity| against the step, log-log."""
    h = [r[0] for r in rows]
    gap = [max(r[1], 1e-18) for r in rows]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(h, gap, "o-")
    ref = [gap[-1] * (x / h[-1]) ** 2 for x in h]
    ax.loglog(h, ref, "--", color="gray", lw=0.8, label="slope 2")
    ax.set_xlabel("difference step h")
    ax.set_ylabel("|mobility FD - D|")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)


def save_mobility_fit(path, report) -> Path:
    """Measured v/lam with the zero-bias extrapolation and measured D."""
    lams = [r[0] for r in report.rows]
    mob = [r[3] for r in report.rows]
    err = [r[4] for r in report.rows]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.errorbar(lams, mob, yerr=err, fmt="o", capsize=3, label="v/lam")
    xs = [0.0] + lams
    ax.plot(xs, [report.intercept + report.slope * x for x in xs], "-", lw=1.0)
    ax.errorbar(
        [0.0],
        [report.d_hat.value],
        yerr=[report.d_hat.stderr],
        fmt="s",
        capsize=3,
        color="crimson",
        label="measured D",
    )
    ax.set_xlabel("bias lam")
    ax.set_ylabel("mobility")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)


def save_rn_scan(path, rows, p) -> Path:
    """Density norms of the biased steady state against the bias."""
    lams = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(lams, [r[1] for r in rows], "o-", label=f"L^{p:g} norm")
    ax.plot(lams, [r[2] for r in rows], "s--", label="sup")
    ax.set_xlabel("bias lam")
    ax.set_ylabel("density size")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)


def save_interval_bars(path, entries) -> Path:
    """Estimates with error bars beside their exact targets.

    entries: iterables of (label, estimate, stderr, truth or None).
    """
    entries = list(entries)
    xs = range(len(entries))
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(entries), 3.6))
    ax.errorbar(
        xs,
        [e[1] for e in entries],
        yerr=[3.0 * e[2] for e in entries],
        fmt="o",
        capsize=4,
        label="estimate (3 s.e.)",
    )
    truths = [(x, e[3]) for x, e in zip(xs, entries) if e[3] is not None]
    if truths:
        ax.plot(
            [t[0] for t in truths],
            [t[1] for t in truths],
            "_",
            ms=22,
            color="crimson",
            label="exact",
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels([e[0] for e in entries], rotation=20, ha="right")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)
