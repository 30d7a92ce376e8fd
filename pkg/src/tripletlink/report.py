"""Delimited output and figure rendering.

CSV files use a comma separator, ``\\n`` line endings, UTF-8, a mandatory
header row, and numbers formatted with 12 significant digits in lowercase
scientific notation, so identical runs produce byte-identical files.
Figures are rendered with matplotlib (Agg) next to the CSV they visualize.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def format_number(x) -> str:
    """12 significant digits, lowercase scientific notation."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def write_csv(path, header, rows) -> Path:
    """Write rows of numbers (or strings) under a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else format_number(cell)
            for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def trajectory_rows(times, states, ef_values, purities, excited):
    """Rows for the trajectory export: t, purity, excited population, EF,
    then the 16 nuclear density-matrix entries interleaved re/im."""
    rows = []
    for t, rho, ef, pur, exc in zip(times, states, ef_values, purities, excited):
        row = [t, pur, exc, ef]
        for a in range(4):
            for b in range(4):
                row.extend([rho[a, b].real, rho[a, b].imag])
        rows.append(row)
    return rows


def trajectory_header():
    head = ["t", "purity", "excited_population", "EF"]
    for a in range(4):
        for b in range(4):
            head.extend([f"rho_{a}{b}_re", f"rho_{a}{b}_im"])
    return head


def render_lines(path, x, curves, xlabel, ylabel, title="", logx=False) -> Path:
    """Simple multi-line figure; ``curves`` maps label -> y array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(frameon=False)
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def render_surface(path, x, y, z, xlabel, ylabel, title="") -> Path:
    """Filled-contour rendering of z(y, x) on a rectangular grid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.0, 3.8), constrained_layout=True)
    m = ax.pcolormesh(x, y, z, shading="auto")
    fig.colorbar(m, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path
