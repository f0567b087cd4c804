"""Panel figures from transfer-efficiency sweep CSVs."""

from .errors import EmptyDataError, PlotkitError, SchemaError
from .figure import (
    FALLBACK_STYLE,
    STYLE_MAP,
    PlotSpec,
    build_figure,
    curve_style,
    j_label,
    render,
    series,
)
from .table import REQUIRED_COLUMNS, Point, Table, read_table

__all__ = [
    "EmptyDataError",
    "FALLBACK_STYLE",
    "PlotkitError",
    "PlotSpec",
    "Point",
    "REQUIRED_COLUMNS",
    "STYLE_MAP",
    "SchemaError",
    "Table",
    "build_figure",
    "curve_style",
    "j_label",
    "read_table",
    "render",
    "series",
]
