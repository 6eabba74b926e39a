"""Figure rendering for detection reports (written to files, never shown)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .segmentation import SegmentationReport
from .telegraph import GridSample

__all__ = ["save_detection_figures"]

_PNG_META = {"Software": "telegraph-cpd"}


def save_detection_figures(
    report: SegmentationReport,
    sample: GridSample,
    outdir: str | Path,
    dpi: int = 150,
) -> list[Path]:
    """Render the detection overview and one |D_k| profile per analyzed segment.

    Returns the list of written paths.  Output is deterministic for a fixed
    report (fixed size, dpi and metadata), so reruns are byte-identical.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    eta = sample.increments
    idx = np.arange(1, eta.size + 1)

    fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(9.0, 6.0), sharex=True)
    ax_top.plot(idx, eta, lw=0.8, color="0.25")
    for k in report.changes:
        ax_top.axvline(k, color="C3", ls="--", lw=1.0)
        ax_top.annotate(str(k), (k, ax_top.get_ylim()[1]), ha="center", va="bottom",
                        fontsize=8, color="C3")
    ax_top.set_ylabel("increment")
    ax_top.set_title("detected changes: " + (", ".join(map(str, report.changes)) or "none"))

    root = report.root
    if root.profile is not None:
        k_local = np.arange(1, root.profile.d.size + 1)
        ax_bot.plot(root.start + k_local, np.abs(root.profile.d), lw=0.9, color="C0")
        if root.change_index is not None:
            ax_bot.axvline(root.change_index, color="C3", ls="--", lw=1.0)
    ax_bot.set_ylabel("|D_k|")
    ax_bot.set_xlabel("index")
    fig.tight_layout()
    overview = outdir / "detection_overview.png"
    fig.savefig(overview, dpi=dpi, metadata=_PNG_META)
    plt.close(fig)
    written.append(overview)

    for seg in report.iter_segments():
        if seg.profile is None:
            continue
        fig, ax = plt.subplots(figsize=(7.0, 3.2))
        k_local = np.arange(1, seg.profile.d.size + 1)
        ax.plot(seg.start + k_local, np.abs(seg.profile.d), lw=0.9, color="C0")
        if seg.change_index is not None:
            ax.axvline(seg.change_index, color="C3", ls="--", lw=1.0)
        pv = "n/a" if seg.test is None else f"{seg.test.p_value:.4g}"
        ax.set_title(f"segment [{seg.start}, {seg.end}) depth {seg.depth}  p={pv}")
        ax.set_xlabel("index")
        ax.set_ylabel("|D_k|")
        fig.tight_layout()
        path = outdir / f"segment_{seg.start:06d}_{seg.end:06d}_dprofile.png"
        fig.savefig(path, dpi=dpi, metadata=_PNG_META)
        plt.close(fig)
        written.append(path)
    return written
