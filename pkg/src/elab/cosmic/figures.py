"""Matplotlib renderings for offline reports.

The pipeline never imports this module: plots that become catalog products
go through the deterministic SVG renderer in svgplot. These figures exist
for the CLI report path, where a PNG next to the delimited output is the
point and byte stability is not.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .flux import FluxPoint
from .lifetime import FitResult, Histogram
from .shower import CoincidenceGroup


def lifetime_figure(hist: Histogram, fit: FitResult | None, title: str = "Muon lifetime"):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    centers = np.asarray(hist.centers)
    counts = np.asarray(hist.counts, dtype=float)
    yerr = np.sqrt(np.clip(counts, 1.0, None))
    ax.errorbar(
        centers,
        counts,
        yerr=yerr,
        fmt="o",
        markersize=3,
        linewidth=1,
        capsize=2,
        color="#1f4e9c",
        label=f"{int(counts.sum())} candidates",
    )
    if fit is not None:
        xs = np.linspace(hist.bin_edges[0], hist.bin_edges[-1], 400)
        ax.plot(
            xs,
            fit.A * np.exp(-xs / fit.tau_us) + fit.B,
            color="#c0392b",
            label=(
                f"$\\tau$ = {fit.tau_us:.3f} $\\pm$ {fit.sigma_tau_us:.3f} $\\mu$s"
                + ("" if fit.converged else " (not converged)")
            ),
        )
    ax.set_xlabel("Time between pulses (microseconds)")
    ax.set_ylabel("Counts")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig


def flux_figure(points: list[FluxPoint], title: str = "Flux"):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    xs = [p.bin_start_s for p in points]
    width = xs[1] - xs[0] if len(xs) > 1 else 1.0
    ax.errorbar(
        [x + width / 2.0 for x in xs],
        [p.rate_hz for p in points],
        yerr=[p.error_hz for p in points],
        fmt="o",
        markersize=3,
        linewidth=1,
        color="#1f4e9c",
    )
    ax.set_xlabel("Time (seconds)")
    ax.set_ylabel("Rate (Hz)")
    ax.set_ylim(bottom=0.0)
    ax.set_title(title)
    fig.tight_layout()
    return fig


def shower_figure(groups: list[CoincidenceGroup], title: str = "Shower candidates"):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    if groups:
        t0 = groups[0].start_ns
        xs = [(g.start_ns - t0) / 1e9 for g in groups]
        ys = [len(g.detectors) for g in groups]
        sizes = [10 + 6 * len(g.pulses) for g in groups]
        ax.scatter(xs, ys, s=sizes, color="#1f4e9c", alpha=0.7)
        ax.set_ylim(0, max(ys) + 1)
    ax.set_xlabel("Time since first candidate (seconds)")
    ax.set_ylabel("Detectors in coincidence")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=150)
    plt.close(fig)
