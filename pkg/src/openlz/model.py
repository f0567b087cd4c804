"""Spin-j avoided-crossing sweep model.

H(t) = kappa*t*Jz + sqrt(2)*Omega*Jx = omega(t) * J_theta with
tan(theta) = sqrt(2)*Omega / (kappa*t) and omega(t) = sqrt((kappa*t)^2 + 2*Omega^2).

The instantaneous eigenstates are |j,m>_theta = exp(-i*theta*Jy)|j,m>_z with
eigenvalues m*omega(t); theta runs from just below pi at the start of the
sweep through pi/2 at the crossing to just above 0 at the end.  Frames are
built from that analytic rotation, never from a numerical eigensolver, so the
eigenvector columns are smooth in t with no phase or ordering jumps.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, InvalidParameterError
from .spin import SpinSet, build_spin, rotation_y, validate_j

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ModelParams:
    """Sweep parameters.  Defaults reproduce the reference operating point
    kappa/Omega^2 = 0.1 and kappa*t0/Omega = 25 in units where Omega = 1."""

    j: float
    omega_rabi: float = 1.0
    kappa: float = 0.1
    t0: float = 250.0

    def __post_init__(self):
        object.__setattr__(self, "j", validate_j(self.j))
        for name in ("omega_rabi", "kappa", "t0"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)

    def spin(self) -> SpinSet:
        return build_spin(self.j)


def mixing_angle(t: float, p: ModelParams) -> float:
    """theta(t) = atan2(sqrt(2)*Omega, kappa*t), continuous on (0, pi)."""
    return float(np.arctan2(SQRT2 * p.omega_rabi, p.kappa * t))


def gap(t: float, p: ModelParams) -> float:
    """Level spacing omega(t) between adjacent instantaneous eigenstates."""
    return float(np.hypot(p.kappa * t, SQRT2 * p.omega_rabi))


def hamiltonian(t: float, p: ModelParams, s: SpinSet) -> np.ndarray:
    if s.j != p.j:
        raise ContractViolationError(f"spin set is for j={s.j}, params say j={p.j}")
    return p.kappa * t * s.jz + SQRT2 * p.omega_rabi * s.jx


@dataclass(frozen=True)
class InstantaneousFrame:
    """Instantaneous eigenframe of H(t).

    eigvecs columns are |j,m>_theta ordered by descending m (top level first);
    projectors[k] = |j,m_k>_theta <j,m_k|_theta.  Eigenvalue of column k is
    m_k * omega.
    """

    t: float
    theta: float
    omega: float
    spin: SpinSet
    eigvecs: np.ndarray
    projectors: np.ndarray  # (d, d, d), projectors[k] onto level m_k

    @property
    def energies(self) -> np.ndarray:
        return self.spin.m * self.omega


def frame(t: float, p: ModelParams, s: SpinSet) -> InstantaneousFrame:
    """Build the instantaneous frame at time t from the analytic y-rotation."""
    if s.j != p.j:
        raise ContractViolationError(f"spin set is for j={s.j}, params say j={p.j}")
    theta = mixing_angle(t, p)
    omega = gap(t, p)
    vecs = rotation_y(s, -theta)
    projs = np.einsum("ak,bk->kab", vecs, vecs.conj())
    return InstantaneousFrame(
        t=float(t), theta=theta, omega=omega, spin=s, eigvecs=vecs, projectors=projs
    )
