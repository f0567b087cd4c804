"""Thermal weak-coupling generator in the instantaneous eigenframe.

The bath couples through a system operator X (Jz for dephasing-type noise,
Jx for dissipation-type noise, or a custom Hermitian matrix).  X is split
into ladder components between instantaneous eigenstates,

    X(nu) = sum_{m'-m=nu} P_m X P_m',   nu = m' - m,

so X(nu) with nu > 0 lowers the adiabatic label by nu.  With a flat bath
spectrum each component enters the master equation

    drho/dt = -i[H(t), rho]
              + sum_nu r(nu) (X(nu) rho X(nu)^+ - 1/2 {X(nu)^+ X(nu), rho})

with golden-rule rates evaluated at the instantaneous splitting |nu|*omega(t):

    r(nu) = gamma * (N(|nu|*omega, T) + 1)   for nu > 0  (emission)
    r(nu) = gamma *  N(|nu|*omega, T)        for nu < 0  (absorption)

where N(e, T) = 1/(exp(e/T) - 1) is the Bose occupation.  Note the sign and
grouping: N is positive for positive splitting and temperature, emission
carries the spontaneous +1, and detailed balance r(-nu)/r(+nu) = exp(-e/T)
holds at every instant.  The nu = 0 (pure dephasing within a level) term is
excluded by default; include_nu_zero adds it with a user-chosen rate for
exploration.
"""

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import ContractViolationError, InvalidParameterError
from .model import InstantaneousFrame, ModelParams, frame
from .spin import SpinSet, frob_norm

CHANNELS = ("Jz", "Jx")

# exp(x) overflows float64 near 709; past ~700 the occupation underflows to 0
_EXP_ARG_MAX = 700.0


@dataclass(frozen=True)
class NoiseConfig:
    """Bath coupling: channel, flat-spectrum strength, temperature.

    coupling: 'Jz', 'Jx', or an explicit Hermitian matrix of the right
    dimension.  gamma_flat and temperature are in units of Omega (and
    k_B = hbar = 1).
    """

    coupling: Union[str, np.ndarray]
    gamma_flat: float
    temperature: float
    include_nu_zero: bool = False
    nu_zero_rate: float = 0.0

    def __post_init__(self):
        if isinstance(self.coupling, str):
            if self.coupling not in CHANNELS:
                raise InvalidParameterError(
                    f"coupling must be one of {CHANNELS} or a matrix, got {self.coupling!r}"
                )
        else:
            x = np.asarray(self.coupling, dtype=complex)
            if x.ndim != 2 or x.shape[0] != x.shape[1]:
                raise ContractViolationError(f"coupling matrix must be square, got {x.shape}")
            if frob_norm(x - x.conj().T) > 1e-10 * max(frob_norm(x), 1.0):
                raise ContractViolationError("coupling matrix must be Hermitian")
            object.__setattr__(self, "coupling", x)
        for name in ("gamma_flat", "temperature"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)
        if float(self.nu_zero_rate) < 0:
            raise InvalidParameterError("nu_zero_rate must be >= 0")

    @property
    def channel_label(self) -> str:
        return self.coupling if isinstance(self.coupling, str) else "custom"


def coupling_matrix(n: NoiseConfig, s: SpinSet) -> np.ndarray:
    """Resolve the coupling to an explicit matrix in the bare |j,m> basis."""
    if isinstance(n.coupling, str):
        return s.jz if n.coupling == "Jz" else s.jx
    x = n.coupling
    if x.shape[0] != s.dim:
        raise ContractViolationError(
            f"coupling matrix is {x.shape[0]}-dimensional, spin space is {s.dim}"
        )
    return x


@dataclass(frozen=True)
class LindbladTerm:
    nu: int
    x_nu: np.ndarray
    rate: Optional[float] = None


@dataclass(frozen=True)
class LindbladTerms:
    terms: tuple


def jump_operators(f: InstantaneousFrame, n: NoiseConfig) -> LindbladTerms:
    """Ladder decomposition of the coupling at frame f; rates left unset.

    Returned terms run over nu = -2j..2j excluding 0 (plus 0 itself when
    include_nu_zero).  Completeness: sum of all x_nu plus the nu=0 block
    reconstructs X exactly; X(-nu) = X(nu)^dag.
    """
    s = f.spin
    x = coupling_matrix(n, s)
    v = f.eigvecs
    xf = v.conj().T @ x @ v  # coupling in the frame basis, index k <-> m_k = j - k
    d = s.dim
    terms = []
    nu_range = range(-(d - 1), d)
    for nu in nu_range:
        if nu == 0 and not n.include_nu_zero:
            continue
        # entry (a, b): m_b - m_a = (j-b) - (j-a) = a - b = nu
        band = np.zeros_like(xf)
        for a in range(d):
            b = a - nu
            if 0 <= b < d:
                band[a, b] = xf[a, b]
        x_nu = v @ band @ v.conj().T
        terms.append(LindbladTerm(nu=nu, x_nu=x_nu))
    return LindbladTerms(terms=tuple(terms))


def bose_occupation(nu_bar: float, temperature: float) -> float:
    """Thermal occupation N = 1/(exp(nu_bar/T) - 1) at splitting nu_bar > 0."""
    nu_bar = float(nu_bar)
    if not np.isfinite(nu_bar) or nu_bar <= 0:
        raise InvalidParameterError(f"splitting must be positive, got {nu_bar}")
    temperature = float(temperature)
    if temperature < 0:
        raise InvalidParameterError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0.0:
        return 0.0
    x = nu_bar / temperature
    if x > _EXP_ARG_MAX:
        return 0.0
    return 1.0 / np.expm1(x)


def rates(nu: int, omega_gap: float, n: NoiseConfig) -> float:
    """Golden-rule rate for the nu component at level spacing omega_gap."""
    nu = int(nu)
    if nu == 0:
        if not n.include_nu_zero:
            raise InvalidParameterError("nu=0 rate requested without include_nu_zero")
        return n.gamma_flat * n.nu_zero_rate
    occupation = bose_occupation(abs(nu) * omega_gap, n.temperature)
    if nu > 0:
        return n.gamma_flat * (occupation + 1.0)
    return n.gamma_flat * occupation


def with_rates(terms: LindbladTerms, omega_gap: float, n: NoiseConfig) -> LindbladTerms:
    return LindbladTerms(
        terms=tuple(replace(term, rate=rates(term.nu, omega_gap, n)) for term in terms.terms)
    )


def lindblad_rhs(
    t: float, rho: np.ndarray, p: ModelParams, n: NoiseConfig, s: SpinSet
) -> np.ndarray:
    """Right-hand side of the master equation at time t (reference implementation).

    The jump operators and their rates are rebuilt from the instantaneous
    frame at exactly this t; the integrator therefore sees them move with
    every internal stage.  The compiled propagation kernels evaluate the same
    expression in the rotated frame; tests pin the two against each other.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (s.dim, s.dim):
        raise ContractViolationError(f"rho has shape {rho.shape}, expected {(s.dim, s.dim)}")
    f = frame(t, p, s)
    h = p.kappa * t * s.jz + np.sqrt(2.0) * p.omega_rabi * s.jx
    out = -1j * (h @ rho - rho @ h)
    if n.gamma_flat > 0.0 or (n.include_nu_zero and n.nu_zero_rate > 0.0):
        for term in with_rates(jump_operators(f, n), f.omega, n).terms:
            if term.rate == 0.0:
                continue
            x_nu = term.x_nu
            xr = x_nu @ rho
            out += term.rate * (xr @ x_nu.conj().T)
            xx = x_nu.conj().T @ x_nu
            out -= 0.5 * term.rate * (xx @ rho + rho @ xx)
    return out
