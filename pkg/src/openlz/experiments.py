"""Population-transfer sweeps over coupling strength, spin size, and bath.

Efficiency is defined in the bare Jz basis: start in |j,-j>_z at -t0, read
the |j,j>_z population at +t0.  Grid values are quoted relative to the Rabi
frequency (gamma/Omega, kBT/Omega); absolute bath parameters are formed
against model.omega_rabi before propagation.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .dissipator import NoiseConfig
from .errors import (
    InvalidParameterError,
    PropagationError,
    ResourceLimitError,
)
from .integrator import IntegratorConfig, propagate_density
from .model import ModelParams
from .spin import validate_j

CSV_HEADER = (
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

Channel = Union[str, np.ndarray]


def default_gamma_grid(n_points: int = 25,
                       lo: float = 1e-4,
                       hi: float = 1.0) -> np.ndarray:
    """Log-spaced gamma/Omega grid bracketing the unaffected and
    fully-degraded regimes."""
    if n_points < 1 or lo <= 0.0 or hi < lo:
        raise InvalidParameterError("need n_points >= 1 and 0 < lo <= hi")
    if n_points == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, n_points)


@dataclass(frozen=True)
class SweepSpec:
    j_list: Sequence[float] = (0.5, 1.0, 1.5, 2.0, 2.5)
    gamma_grid: Sequence[float] = field(default_factory=default_gamma_grid)
    channels: Sequence[Channel] = ("Jz",)
    temperatures: Sequence[float] = (0.001, 10.0)
    model: ModelParams = field(default_factory=lambda: ModelParams(j=0.5))
    # grid points at small gamma ride close to the boundary of state space,
    # so the local tolerance sits well below validity_tol by default
    integrator: IntegratorConfig = field(
        default_factory=lambda: IntegratorConfig(rel_tol=1e-10))
    workers: int = 1

    def __post_init__(self):
        if len(self.j_list) == 0:
            raise InvalidParameterError("j_list is empty")
        for j in self.j_list:
            validate_j(j)
        if len(self.gamma_grid) == 0:
            raise InvalidParameterError("gamma_grid is empty")
        for g in self.gamma_grid:
            if not (g >= 0.0 and math.isfinite(g)):
                raise InvalidParameterError(f"gamma/Omega {g} must be >= 0")
        if len(self.channels) == 0:
            raise InvalidParameterError("channels is empty")
        for c in self.channels:
            if isinstance(c, str):
                if c not in ("Jz", "Jx"):
                    raise InvalidParameterError(
                        f"channel {c!r} not one of Jz, Jx")
            else:
                x = np.asarray(c)
                if x.ndim != 2 or x.shape[0] != x.shape[1]:
                    raise InvalidParameterError("custom coupling not square")
                for j in self.j_list:
                    if x.shape[0] != int(round(2 * j)) + 1:
                        raise InvalidParameterError(
                            "custom coupling dimension fits only a single j; "
                            f"got j={j} in j_list")
        if len(self.temperatures) == 0:
            raise InvalidParameterError("temperatures is empty")
        for t in self.temperatures:
            if not (t >= 0.0 and math.isfinite(t)):
                raise InvalidParameterError(f"kBT/Omega {t} must be >= 0")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    def n_points(self) -> int:
        return (len(self.j_list) * len(self.channels)
                * len(self.temperatures) * len(self.gamma_grid))


@dataclass
class ResultRecord:
    j: float
    gamma: float           # gamma/Omega
    temperature: float     # kBT/Omega
    channel: str
    efficiency: float
    trace_drift: float
    min_eigenvalue: float
    failed: bool = False
    wall_time: float = 0.0
    # diagnostic only, not part of the CSV schema
    hermiticity_drift: float = 0.0

    def csv_row(self) -> list:
        return [
            repr(float(self.j)),
            repr(float(self.gamma)),
            repr(float(self.temperature)),
            self.channel,
            repr(float(self.efficiency)),
            repr(float(self.trace_drift)),
            repr(float(self.min_eigenvalue)),
            "1" if self.failed else "0",
            repr(float(self.wall_time)),
        ]


def channel_tag(coupling: Channel) -> str:
    return coupling if isinstance(coupling, str) else "custom"


def initial_state(j: float) -> np.ndarray:
    """|j,-j><j,-j| in the descending-m Jz basis."""
    d = int(round(2 * j)) + 1
    rho = np.zeros((d, d), complex)
    rho[-1, -1] = 1.0
    return rho


def transfer_efficiency(j: float,
                        n: NoiseConfig,
                        p: ModelParams,
                        cfg: Optional[IntegratorConfig] = None,
                        ) -> ResultRecord:
    """Propagate |j,-j>_z across the sweep and read the |j,j>_z population.

    Propagation failures are raised with their report attached; callers
    running grids catch these and record flagged rows instead.
    """
    validate_j(j)
    if cfg is None:
        cfg = IntegratorConfig(rel_tol=1e-10)
    if p.j != j:
        p = dataclasses.replace(p, j=j)
    rho0 = initial_state(j)
    start = time.perf_counter()
    rep = propagate_density(p, n, rho0, (-p.t0, p.t0), cfg)
    elapsed = time.perf_counter() - start
    if rep.failed:
        raise PropagationError(
            f"sweep point j={j} gamma={n.gamma_flat} failed: "
            f"{rep.failure_reason}", report=rep)
    eff = float(rep.final_state[0, 0].real)
    if not (-cfg.validity_tol <= eff <= 1.0 + cfg.validity_tol):
        raise PropagationError(
            f"efficiency {eff} outside [0,1] beyond validity_tol", report=rep)
    return ResultRecord(
        j=float(j),
        gamma=float(n.gamma_flat / p.omega_rabi),
        temperature=float(n.temperature / p.omega_rabi),
        channel=channel_tag(n.coupling),
        efficiency=eff,
        trace_drift=float(rep.max_trace_drift),
        min_eigenvalue=float(rep.min_eigenvalue_seen),
        failed=False,
        wall_time=elapsed,
        hermiticity_drift=float(rep.max_hermiticity_drift),
    )


def _grid_points(spec: SweepSpec) -> list:
    pts = []
    for j in spec.j_list:
        for c in spec.channels:
            for temp in spec.temperatures:
                for g in spec.gamma_grid:
                    pts.append((float(j), c, float(temp), float(g)))
    return pts


def _run_point(args) -> ResultRecord:
    spec, (j, c, temp, g) = args
    omega = spec.model.omega_rabi
    n = NoiseConfig(coupling=c, gamma_flat=g * omega,
                    temperature=temp * omega)
    try:
        return transfer_efficiency(j, n, spec.model, spec.integrator)
    except (PropagationError, ResourceLimitError):
        return ResultRecord(
            j=j, gamma=g, temperature=temp, channel=channel_tag(c),
            efficiency=float("nan"), trace_drift=float("nan"),
            min_eigenvalue=float("nan"), failed=True, wall_time=0.0,
            hermiticity_drift=float("nan"))


def run_sweep(spec: SweepSpec,
              output_path: Optional[Union[str, os.PathLike]] = None,
              ) -> list:
    """Run every grid point in (j, channel, T, gamma) order.

    Failed points are kept as flagged records so a long sweep is auditable
    rather than aborted.  Records come back order-stable regardless of
    worker completion order.
    """
    pts = _grid_points(spec)
    jobs = [(spec, pt) for pt in pts]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(_run_point, jobs))
    else:
        records = [_run_point(job) for job in jobs]
    if output_path is not None:
        write_csv(records, output_path)
    return records


def write_csv(records: Sequence[ResultRecord],
              path: Union[str, os.PathLike]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.csv_row())


def read_csv(path: Union[str, os.PathLike]) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != CSV_HEADER:
            raise InvalidParameterError(
                f"unexpected CSV header {header!r}")
        out = []
        for row in rd:
            out.append(ResultRecord(
                j=float(row[0]),
                gamma=float(row[1]),
                temperature=float(row[2]),
                channel=row[3],
                efficiency=float(row[4]),
                trace_drift=float(row[5]),
                min_eigenvalue=float(row[6]),
                failed=row[7] == "1",
                wall_time=float(row[8]),
            ))
    return out
