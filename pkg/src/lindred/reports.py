"""Report rendering: dimension tables, trajectory CSVs and figures.

Reports are deterministic JSON documents (sorted keys, no timestamps);
trajectory data goes to CSV with a header row, '.' decimals and '\\n' line
endings, with a matplotlib overlay figure rendered next to it.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .opalg import Array


def format_blocks(blocks: Sequence[tuple[int, int]]) -> str:
    """Human-readable block-structure string, e.g. '2C + 2C^4x4 + C^6x6'."""
    sizes = sorted(nk for nk, _ in blocks)
    parts = []
    i = 0
    while i < len(sizes):
        j = i
        while j < len(sizes) and sizes[j] == sizes[i]:
            j += 1
        count = j - i
        term = "C" if sizes[i] == 1 else f"C^{sizes[i]}x{sizes[i]}"
        parts.append((f"{count}" if count > 1 else "") + term)
        i = j
    return " + ".join(parts)


def dimension_table(rows: list[dict]) -> str:
    """Aligned plain-text table of dimension records."""
    cols = ["model", "space", "dim N_perp", "dim O", "blocks"]
    table = [[str(r.get("model", "")), str(r.get("space_dim", "")),
              str(r.get("observable_dim", "")), str(r.get("output_algebra_dim", "")),
              r.get("block_structure", "")] for r in rows]
    widths = [max(len(c), *(len(t[i]) for t in table)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for t in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(t, widths)))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path: str | Path, times: Sequence[float],
                         labels: Sequence[str],
                         full_rows: list[list[dict[str, complex]]],
                         reduced_rows: list[list[dict[str, complex]]]) -> float:
    """Write t, per-output full, per-output reduced and |delta| columns.

    Multiple initial states are stacked with a leading seed-index column.
    Returns the maximum absolute deviation over everything written.
    """
    header = ["seed", "t"]
    for lab in labels:
        header.append(f"full_{lab}")
    for lab in labels:
        header.append(f"reduced_{lab}")
    for lab in labels:
        header.append(f"absdiff_{lab}")
    worst = 0.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for si, (full, red) in enumerate(zip(full_rows, reduced_rows)):
            for t, yf, yr in zip(times, full, red):
                row = [si, repr(float(t))]
                for lab in labels:
                    row.append(repr(float(np.real(yf[lab]))))
                for lab in labels:
                    row.append(repr(float(np.real(yr[lab]))))
                for lab in labels:
                    d = abs(yf[lab] - yr[lab])
                    worst = max(worst, d)
                    row.append(repr(float(d)))
                writer.writerow(row)
    return worst


def render_compare_figure(path: str | Path, times: Sequence[float],
                          labels: Sequence[str],
                          full: list[dict[str, complex]],
                          reduced: list[dict[str, complex]]) -> None:
    """Overlay of full (solid) versus reduced (dotted) outputs plus the
    deviation on a log scale, for one initial state."""
    times = np.asarray(times, dtype=float)
    fig, (ax, axd) = plt.subplots(
        2, 1, figsize=(7.0, 5.4), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]})
    for lab in labels:
        yf = np.array([np.real(row[lab]) for row in full])
        yr = np.array([np.real(row[lab]) for row in reduced])
        line, = ax.plot(times, yf, lw=1.2, label=lab)
        ax.plot(times, yr, ls=":", lw=2.2, color=line.get_color())
        axd.semilogy(times, np.maximum(
            np.array([abs(f[lab] - r[lab]) for f, r in zip(full, reduced)]), 1e-18),
            lw=0.9, color=line.get_color())
    ax.set_ylabel("output")
    ax.legend(fontsize=7, ncol=max(1, len(labels) // 6), loc="upper right")
    axd.set_xlabel("t")
    axd.set_ylabel("|full - reduced|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_block_figure(path: str | Path, hamiltonian: Array,
                        noise_ops: Sequence[Array],
                        block_dims: Sequence[int] | None = None) -> None:
    """Magnitude heat maps of the reduced Hamiltonian and noise operators,
    with the algebra block boundaries drawn in."""
    ops = [("H", hamiltonian)] + [(f"L{u}", L) for u, L in enumerate(noise_ops)]
    ncols = len(ops)
    fig, axes = plt.subplots(1, ncols, figsize=(2.6 * ncols, 2.8))
    if ncols == 1:
        axes = [axes]
    for axis, (name, op) in zip(axes, ops):
        axis.imshow(np.abs(op), cmap="viridis")
        axis.set_title(name, fontsize=9)
        axis.set_xticks([])
        axis.set_yticks([])
        if block_dims:
            pos = 0.0
            for d in block_dims[:-1]:
                pos += d
                axis.axhline(pos - 0.5, color="w", lw=0.7)
                axis.axvline(pos - 0.5, color="w", lw=0.7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
