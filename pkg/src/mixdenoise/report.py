"""Benchmark figures rendered with matplotlib (Agg backend, files only)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def case_panel(clean, noisy, restored, path: str | os.PathLike, title: str = "", psnrs=None) -> None:
    """Side-by-side clean / noisy / restored images."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 4.4))
    labels = ["clean", "noisy", "restored"]
    for ax, img, label in zip(axes, (clean, noisy, restored), labels):
        if img is None:
            ax.set_axis_off()
            continue
        ax.imshow(np.clip(img, 0, 255), cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        if psnrs and label in psnrs:
            label = f"{label} ({psnrs[label]:.2f} dB)"
        ax.set_title(label, fontsize=11)
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title, fontsize=12)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def psnr_bars(rows: list[dict], path: str | os.PathLike) -> None:
    """Grouped bars of noisy and denoised PSNR per case."""
    rows = [r for r in rows if r.get("denoised_psnr") is not None]
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(rows) + 2), 4))
    if rows:
        pos = np.arange(len(rows))
        noisy = [r["noisy_psnr"] for r in rows]
        den = [r["denoised_psnr"] for r in rows]
        ax.bar(pos - 0.2, noisy, width=0.4, label="noisy", color="0.7")
        ax.bar(pos + 0.2, den, width=0.4, label="denoised", color="tab:blue")
        ax.set_xticks(pos)
        ax.set_xticklabels(
            [f"{r['image']}\n{r['kind']} {100 * r['rate']:.0f}%" for r in rows], fontsize=8
        )
        ax.legend(frameon=False)
    ax.set_ylabel("PSNR (dB)")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def trace_plot(trace: list[dict], path: str | os.PathLike) -> None:
    """Objective and splitting residuals against iteration count."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.6))
    it = np.arange(1, len(trace) + 1)
    ax1.plot(it, [t["objective"] for t in trace], marker=".")
    ax1.set_xlabel("inner iteration")
    ax1.set_ylabel("objective")
    ax2.semilogy(it, [max(t["x_minus_u"], 1e-12) for t in trace], label="rms(x - u)")
    ax2.semilogy(it, [max(t["x_minus_w"], 1e-12) for t in trace], label="rms(x - w)")
    ax2.set_xlabel("inner iteration")
    ax2.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
