"""Render category statistics to files: delimited rows plus a figure.

Used by the ``stats --report-dir`` path. Writing is the only side
effect; the figure uses the Agg backend so no display is required.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .registry import TOTAL_LABEL, CategoryStat

CSV_NAME = "categories.csv"
FIGURE_NAME = "categories.png"


def write_category_csv(rows: Iterable[CategoryStat], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "available", "solves"])
        for row in rows:
            writer.writerow([row.category, row.available, row.solves])


def write_category_figure(rows: Sequence[CategoryStat], path: Path) -> None:
    # The Total row would dwarf every bar; plot per-category rows only.
    plotted = [r for r in rows if r.category != TOTAL_LABEL]
    labels = [r.category for r in plotted]
    positions = range(len(plotted))

    fig, ax = plt.subplots(figsize=(10, 5))
    width = 0.4
    ax.bar(
        [p - width / 2 for p in positions],
        [r.available for r in plotted],
        width=width,
        label="available",
    )
    ax.bar(
        [p + width / 2 for p in positions],
        [r.solves for r in plotted],
        width=width,
        label="solves",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(labels, rotation=40, ha="right")
    ax.set_ylabel("challenges")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_category_report(rows: Sequence[CategoryStat], out_dir: Path) -> tuple[Path, Path]:
    """Write ``categories.csv`` and ``categories.png`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / CSV_NAME
    fig_path = out_dir / FIGURE_NAME
    write_category_csv(rows, csv_path)
    write_category_figure(rows, fig_path)
    return csv_path, fig_path
