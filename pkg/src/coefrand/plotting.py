"""Matplotlib figures written next to the delimited outputs.

Figures use the non-interactive Agg backend and PNG output without a
software tag, so identical inputs give identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from coefrand.asymptotics import QuantileSurface  # noqa: E402
from coefrand.montecarlo import Table  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=120, metadata=_PNG_META)
    plt.close(fig)


def _series_label(row) -> str:
    if row.corr2 is None:
        return f"corr = {row.corr:g}"
    return f"corr = ({row.corr:g}, {row.corr2:g})"


def plot_quantile_surface(surface: QuantileSurface, path) -> None:
    """Quantile and size curves against ``-c_x``, one line per correlation."""
    groups: dict = {}
    for r in surface.rows:
        groups.setdefault((r.corr, r.corr2), []).append(r)
    fig, (ax_q, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
    for rows in groups.values():
        rows = sorted(rows, key=lambda r: -r.c_x)
        c = [-r.c_x for r in rows]
        ax_q.plot(c, [r.quantile for r in rows], marker="o", ms=3, label=_series_label(rows[0]))
        ax_s.plot(c, [r.size for r in rows], marker="o", ms=3, label=_series_label(rows[0]))
    ax_q.set_title(f"{surface.kind.value}: {1 - surface.alpha:g} quantile")
    ax_s.set_title(f"{surface.kind.value}: subsampling size")
    ax_s.axhline(surface.alpha, color="grey", lw=0.8, ls="--")
    for ax in (ax_q, ax_s):
        ax.set_xlabel("-c_x")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    _save(fig, path)


def plot_table(table: Table, path, ylabel: str = "rejection rate", reference: float | None = None) -> None:
    """Grouped bars, one group per table row and one bar per column."""
    n_rows, n_cols = len(table.rows), len(table.columns)
    fig, ax = plt.subplots(figsize=(max(5.0, 0.9 * n_rows * max(n_cols, 1) / 2 + 2), 4))
    width = 0.8 / max(n_cols, 1)
    xs = np.arange(n_rows)
    for j, col in enumerate(table.columns):
        vals = [np.nan if row[j] is None else float(row[j]) for _, row in table.rows]
        ax.bar(xs + (j - (n_cols - 1) / 2) * width, vals, width, label=col)
    labels = [", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in zip(table.row_keys, key)) for key, _ in table.rows]
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=45 if n_rows > 4 else 0, ha="right" if n_rows > 4 else "center", fontsize=8)
    if reference is not None:
        ax.axhline(reference, color="grey", lw=0.8, ls="--")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    _save(fig, path)


def plot_series(dates, series: dict, path, title: str = "") -> None:
    """Line plot of aligned series, e.g. a simulated path."""
    fig, axes = plt.subplots(len(series), 1, figsize=(8, 2.2 * len(series)), sharex=True, squeeze=False)
    t = np.arange(len(dates))
    for ax, (name, v) in zip(axes[:, 0], series.items()):
        ax.plot(t, v, lw=0.9)
        ax.set_ylabel(name)
        ax.grid(alpha=0.3)
    axes[0, 0].set_title(title)
    axes[-1, 0].set_xlabel("t")
    _save(fig, path)
