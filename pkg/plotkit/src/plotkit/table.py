"""Reading and validating sweep CSVs.

The input contract is the sweep writer's schema; this module re-states it
independently so the renderer keeps working against the file format alone,
with no import of the producing package.
"""

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import EmptyDataError, SchemaError

PathLike = Union[str, os.PathLike]

# required by the schema; files may carry extra columns, which are ignored
REQUIRED_COLUMNS = (
    "j",
    "gamma_over_omega",
    "kBT_over_omega",
    "channel",
    "efficiency",
    "trace_drift",
    "min_eigenvalue",
    "failed",
    "wall_time_s",
)


@dataclass(frozen=True)
class Point:
    j: float
    gamma: float
    temperature: float
    channel: str
    efficiency: float


@dataclass(frozen=True)
class Table:
    points: tuple
    n_failed: int

    def temperatures(self):
        return sorted({p.temperature for p in self.points})

    def curve_keys(self):
        """(j, channel) pairs, ascending j then channel name."""
        return sorted({(p.j, p.channel) for p in self.points})

    def channels(self):
        return sorted({p.channel for p in self.points})


def _parse_float(row, column, origin, line):
    raw = row[column]
    try:
        return float(raw)
    except ValueError:
        raise SchemaError(
            f"{origin}: line {line}: column '{column}' is not a number: {raw!r}"
        ) from None


def read_table(paths: Sequence[PathLike]) -> Table:
    """Parse one or more sweep CSVs into a single table.

    Failed records are dropped here and only reported through `n_failed`;
    everything downstream sees clean points.
    """
    points = []
    n_failed = 0
    for path in paths:
        origin = os.fspath(path)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise SchemaError(
                    f"{origin}: missing required column(s): {', '.join(missing)}"
                )
            for line, row in enumerate(reader, start=2):
                flag = row["failed"].strip()
                if flag not in ("0", "1"):
                    raise SchemaError(
                        f"{origin}: line {line}: column 'failed' must be 0 or 1, "
                        f"got {row['failed']!r}"
                    )
                if flag == "1":
                    n_failed += 1
                    continue
                eff = _parse_float(row, "efficiency", origin, line)
                if math.isnan(eff):
                    raise SchemaError(
                        f"{origin}: line {line}: column 'efficiency' is NaN on a "
                        f"record not marked failed"
                    )
                points.append(Point(
                    j=_parse_float(row, "j", origin, line),
                    gamma=_parse_float(row, "gamma_over_omega", origin, line),
                    temperature=_parse_float(row, "kBT_over_omega", origin, line),
                    channel=row["channel"],
                    efficiency=eff,
                ))
    if not points:
        detail = (f"all {n_failed} records are flagged failed"
                  if n_failed else "no data rows")
        raise EmptyDataError(f"nothing to plot: {detail}")
    return Table(points=tuple(points), n_failed=n_failed)
