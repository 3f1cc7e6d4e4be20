"""Render report figures next to the delimited outputs.

Each function takes the same rows a report writes to CSV and saves one PNG.
Rendering is always opt-in from the CLI (`--figures DIR`); nothing here is
needed to produce or consume the data itself.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def fit1d_figure(rows, path):
    """Loss curves of the vanilla and projected fitting arms (log scale)."""
    steps = [r["step"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(steps, [r["mse_vanilla"] for r in rows], label="vanilla")
    ax.semilogy(steps, [r["mse_projected"] for r in rows], label="projected")
    ax.set_xlabel("step")
    ax.set_ylabel("MSE")
    ax.legend()
    return _save(fig, path)


def training_figure(rows, path):
    """Losses, critic gradient norm, and mode coverage over a training run."""
    steps = [r["step"] for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(steps, [r["critic_loss"] for r in rows], label="critic")
    axes[0].plot(steps, [r["gen_loss"] for r in rows], label="generator")
    axes[0].set_xlabel("step")
    axes[0].set_ylabel("loss")
    axes[0].legend()
    axes[1].semilogy(steps, [max(r["critic_grad_norm"], 1e-300) for r in rows])
    axes[1].set_xlabel("step")
    axes[1].set_ylabel("critic grad norm")
    cov = [r["mode_coverage"] for r in rows]
    if not all(isinstance(c, float) and math.isnan(c) for c in cov):
        axes[2].plot(steps, cov)
        axes[2].set_ylim(-0.2, 8.2)
    axes[2].set_xlabel("step")
    axes[2].set_ylabel("modes covered")
    return _save(fig, path)


def ring_scatter_figure(samples, centers, path):
    """Generated 2-D samples against the mode centers."""
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter(samples[:, 0], samples[:, 1], s=2, alpha=0.3, label="samples")
    ax.scatter(centers[:, 0], centers[:, 1], marker="x", s=60, c="k", label="modes")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def sparsity_figure(rows, path):
    """Channel-norm histogram from a sparsity probe."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    widths = [r["bin_right"] - r["bin_left"] for r in rows]
    ax.bar([r["bin_left"] for r in rows], [r["count"] for r in rows],
           width=widths, align="edge")
    ax.set_xlabel("channel norm")
    ax.set_ylabel("count")
    frac = rows[0]["frac_le_eps"] if rows else float("nan")
    ax.set_title(f"fraction at zero: {frac:.3f}", fontsize=10)
    return _save(fig, path)


def compensation_figure(rows, path):
    """Compensation factor versus subset rate, one curve per filter total."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    totals = sorted({r["total"] for r in rows})
    for total in totals:
        pts = sorted((r["rate"], r["g_formula"]) for r in rows if r["total"] == total)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"{total} filters")
    ax.set_xlabel("subset rate")
    ax.set_ylabel("compensation factor")
    ax.legend(fontsize=8)
    return _save(fig, path)


def singvals_figure(rows, path):
    """Grouped per-layer bars of the exact, reshape, and peak-Fourier norms."""
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    idx = range(len(rows))
    width = 0.27
    for k, key in enumerate(("exact", "reshape", "san")):
        ax.bar([i + (k - 1) * width for i in idx], [r[key] for r in rows],
               width=width, label=key)
    ax.set_xticks(list(idx), [f"layer {r['layer']}" for r in rows])
    ax.set_ylabel("norm")
    ax.legend()
    return _save(fig, path)


def bench_figure(rows, path):
    """Median per-update wall time per normalization method."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([r["method"] for r in rows], [r["median_ms"] for r in rows])
    ax.set_ylabel("median update time (ms)")
    return _save(fig, path)
