"""SVG trend charts for sweep results.

Rendering goes through matplotlib's SVG backend with a pinned hash salt and
no date metadata, so identical inputs produce identical bytes. Each metric
series carries a stable SVG group id ("series-<metric>") for inspection.
"""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

from .results import SweepResult

SVG_HASHSALT = "demandplan"


def emit_chart(
    result: SweepResult,
    path,
    title: str | None = None,
    ylabel: str = "value",
    xlabel: str = "compression ratio",
) -> None:
    """Render one line per metric (x = ratio, y = value) to an SVG file."""
    if not result.rows:
        raise ValueError("cannot chart an empty sweep result")
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    for metric in result.metrics():
        points = result.series(metric)
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        (line,) = ax.plot(xs, ys, marker="o", label=metric)
        line.set_gid(f"series-{metric}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
