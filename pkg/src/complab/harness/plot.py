"""Deterministic SVG overlays of position responses."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

STYLES = {
    "target": {"color": "0.5", "linestyle": ":", "linewidth": 1.0},
    "reference": {"color": "k", "linestyle": "-", "linewidth": 1.6},
    "uncompensated": {"color": "tab:red", "linestyle": "--", "linewidth": 1.2},
    "compensated": {"color": "tab:blue", "linestyle": "-", "linewidth": 1.2},
}


@dataclass(frozen=True)
class Series:
    label: str
    t: Sequence[float]
    y: Sequence[float]
    role: str = "compensated"


@dataclass(frozen=True)
class PlotStyle:
    title: str = ""
    xlabel: str = "t [s]"
    ylabel: str = "position [mm]"
    width: float = 6.0
    height: float = 3.6


def render_svg(series: Sequence[Series], style: PlotStyle = PlotStyle()) -> bytes:
    fig = Figure(figsize=(style.width, style.height))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    for s in series:
        ax.plot(s.t, s.y, label=s.label, **STYLES.get(s.role, {}))
    ax.set_xlabel(style.xlabel)
    ax.set_ylabel(style.ylabel)
    if style.title:
        ax.set_title(style.title)
    ax.grid(True, linewidth=0.4, alpha=0.5)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    buf = io.BytesIO()
    # Fixed id salt and no date stamp keep the output byte-stable.
    with matplotlib.rc_context({"svg.hashsalt": "complab", "svg.fonttype": "none", "path.simplify": False}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def emit_plot(series: Sequence[Series], path: str | Path, style: PlotStyle = PlotStyle()) -> Path:
    path = Path(path)
    path.write_bytes(render_svg(series, style))
    return path
