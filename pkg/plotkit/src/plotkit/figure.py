"""Panel figures from sweep tables.

One sub-panel per bath temperature, one curve per j (and per coupling
channel when several are mixed in the same table), gamma on a log axis.
The file-format end of the pipeline lives in table.py; this module only
turns an already-validated Table into a matplotlib figure.

The Agg backend is selected on import: this package renders to files and
must work on headless boxes.
"""

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import SchemaError
from .table import PathLike, Table, read_table

# the house style: light dotted curve for the smallest spin, darkening and
# solidifying toward the largest
STYLE_MAP = {
    0.5: {"color": "red", "linestyle": ":"},
    1.0: {"color": "green", "linestyle": (0, (3, 2))},
    1.5: {"color": "blue", "linestyle": "--"},
    2.0: {"color": "purple", "linestyle": (0, (8, 3))},
    2.5: {"color": "black", "linestyle": "-"},
}
FALLBACK_STYLE = {"color": "gray", "linestyle": "-"}
RASTER_DPI = 200


@dataclass(frozen=True)
class PlotSpec:
    inputs: Tuple[PathLike, ...]
    output: PathLike
    panel_by: str = "temperature"
    curve_by: str = "j"
    styles: Optional[dict] = None

    def __post_init__(self):
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.panel_by != "temperature":
            raise SchemaError(
                f"panels can only be grouped by temperature, got {self.panel_by!r}")
        if self.curve_by != "j":
            raise SchemaError(
                f"curves can only be grouped by j, got {self.curve_by!r}")


def j_label(j: float) -> str:
    twoj = int(round(2 * j))
    return f"j={twoj // 2}" if twoj % 2 == 0 else f"j={twoj}/2"


def curve_style(j: float, styles: Optional[dict] = None) -> dict:
    table = STYLE_MAP if styles is None else styles
    return dict(table.get(j, FALLBACK_STYLE))


def series(table: Table, temperature: float, j: float, channel: str):
    """The plotted data for one curve: gammas ascending, ties in file order."""
    pts = [p for p in table.points
           if p.temperature == temperature and p.j == j and p.channel == channel]
    pts.sort(key=lambda p: p.gamma)
    return [p.gamma for p in pts], [p.efficiency for p in pts]


def build_figure(table: Table, styles: Optional[dict] = None):
    temps = table.temperatures()
    curves = table.curve_keys()
    tag_channel = len(table.channels()) > 1

    fig, axes = plt.subplots(
        len(temps), 1, sharex=True, sharey=True,
        figsize=(7.0, 3.4 * len(temps)), constrained_layout=True, squeeze=False)
    for ax, temp in zip(axes[:, 0], temps):
        for j, channel in curves:
            xs, ys = series(table, temp, j, channel)
            if not xs:
                continue
            label = j_label(j) + (f" ({channel})" if tag_channel else "")
            ax.plot(xs, ys, label=label,
                    marker="o" if len(xs) == 1 else "",
                    **curve_style(j, styles))
        ax.set_xscale("log")
        ax.set_ylim(0.0, 1.0)
        ax.set_title(rf"$k_B T/\Omega = {temp:g}$", fontsize=10)
        ax.set_ylabel("transfer efficiency")
        ax.legend(fontsize=8, loc="lower left")
    axes[-1, 0].set_xlabel(r"$\gamma/\Omega$")
    if table.n_failed:
        fig.text(0.01, 0.005,
                 f"{table.n_failed} failed record(s) excluded",
                 fontsize=7, color="dimgray")
    return fig


def render(spec: PlotSpec) -> str:
    """Read the input CSVs and write the figure; returns the output path."""
    table = read_table(spec.inputs)
    fig = build_figure(table, spec.styles)
    out = os.fspath(spec.output)
    root, ext = os.path.splitext(out)
    if not ext:
        out = root + ".svg"
        ext = ".svg"
    try:
        fig.savefig(out, dpi=RASTER_DPI if ext.lower() != ".svg" else "figure")
    finally:
        plt.close(fig)
    return out
