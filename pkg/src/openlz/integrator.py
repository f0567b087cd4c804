"""Deterministic RK4 propagation with step doubling and validity tracking.

Density matrices are integrated in the instantaneous eigenframe (an exact
change of variables, see _kernels); the bare-basis state is recovered by
rotating back at the end.  Trace, Hermiticity defect and eigenvalues are
invariant under that rotation, so the validity diagnostics reported here
apply to the physical state.

Diagnostics are measured and reported, never corrected: there is no trace
renormalization or positivity projection anywhere in the propagation.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _kernels
from .dissipator import NoiseConfig, coupling_matrix
from .errors import InvalidParameterError, PropagationError, ResourceLimitError
from .model import ModelParams, mixing_angle
from .spin import SpinSet, build_spin, frob_norm, rotation_y

METHODS = ("rk4_doubling", "rk4_fixed")

# hard floor for the adaptive step (units 1/Omega); the controller never
# shrinks below this, and fails loudly if the tolerance needs it to
DT_MIN = 1e-5

# spectrum check cadence: full eigensolve every this many accepted steps
POSITIVITY_CHECK_INTERVAL = 100


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4_doubling"
    dt: float = 0.01
    rel_tol: float = 1e-8
    max_steps: int = 20_000_000
    validity_tol: float = 1e-7

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if not (np.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise InvalidParameterError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_steps <= 0:
            raise InvalidParameterError(f"max_steps must be > 0, got {self.max_steps}")
        if not (np.isfinite(self.validity_tol) and self.validity_tol > 0):
            raise InvalidParameterError(f"validity_tol must be > 0, got {self.validity_tol}")


@dataclass(frozen=True)
class PropagationReport:
    final_state: np.ndarray
    steps_taken: int
    n_rejected: int
    max_trace_drift: float
    max_hermiticity_drift: float
    min_eigenvalue_seen: float
    t_final: float
    failed: bool = False
    failure_reason: Optional[str] = None


def _check_span(t_span) -> Tuple[float, float]:
    t_start, t_end = float(t_span[0]), float(t_span[1])
    if not (np.isfinite(t_start) and np.isfinite(t_end)) or t_end <= t_start:
        raise InvalidParameterError(f"need finite t_end > t_start, got {t_span}")
    return t_start, t_end


def _jy_eigenbasis(s: SpinSet) -> np.ndarray:
    # columns ordered so column k carries Jy eigenvalue m[k] (descending),
    # matching the kernel's  exp(-i theta Jy) = R diag(exp(-i theta m)) R^+
    vals, vecs = np.linalg.eigh(s.jy)
    return np.ascontiguousarray(vecs[:, ::-1])


def _jx_band(s: SpinSet) -> np.ndarray:
    # Jx[k, k+1] = b_k, real positive
    return np.ascontiguousarray(np.diagonal(s.jx, 1).real)


def _jy_band(s: SpinSet) -> np.ndarray:
    # kernel convention Jy[k, k+1] = i*c_k: store the real c_k (= -i*Jy[k, k+1])
    return np.ascontiguousarray((-1j * np.diagonal(s.jy, 1)).real)


def _validate_density(rho0: np.ndarray, s: SpinSet, tol: float) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (s.dim, s.dim):
        raise InvalidParameterError(f"rho0 has shape {rho0.shape}, expected {(s.dim, s.dim)}")
    if abs(np.trace(rho0).real - 1.0) > tol or abs(np.trace(rho0).imag) > tol:
        raise InvalidParameterError(f"rho0 trace is {np.trace(rho0)}, expected 1")
    if frob_norm(rho0 - rho0.conj().T) > tol:
        raise InvalidParameterError("rho0 is not Hermitian within validity_tol")
    if np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T)).min() < -tol:
        raise InvalidParameterError("rho0 has negative eigenvalues beyond validity_tol")
    return rho0


def propagate_density(
    p: ModelParams,
    n: NoiseConfig,
    rho0: np.ndarray,
    t_span,
    cfg: IntegratorConfig,
    freeze_time: Optional[float] = None,
) -> PropagationReport:
    """Integrate the master equation over t_span, returning state + diagnostics.

    freeze_time pins the Hamiltonian (and frame) at that instant while the
    dissipator and time grid still run, giving a time-independent generator;
    used for fixed-point and convergence-order studies.

    A validity violation (trace, Hermiticity or positivity beyond
    cfg.validity_tol) stops the run and returns a report with failed=True;
    exceeding cfg.max_steps raises ResourceLimitError.
    """
    s = build_spin(p.j)
    t_start, t_end = _check_span(t_span)
    rho0 = _validate_density(rho0, s, cfg.validity_tol)

    if isinstance(n.coupling, str):
        mode = _kernels.MODE_JZ if n.coupling == "Jz" else _kernels.MODE_JX
        xmat = np.zeros((1, 1), dtype=complex)
        ry = np.zeros((1, 1), dtype=complex)
    else:
        mode = _kernels.MODE_CUSTOM
        xmat = np.ascontiguousarray(coupling_matrix(n, s))
        ry = _jy_eigenbasis(s)

    frozen = freeze_time is not None
    t_frozen = float(freeze_time) if frozen else 0.0
    theta_in = mixing_angle(t_frozen if frozen else t_start, p)
    theta_out = mixing_angle(t_frozen if frozen else t_end, p)

    # into the frame: sigma = U_f^+ rho U_f with U_f = exp(-i theta Jy)
    sig = rotation_y(s, theta_in) @ rho0 @ rotation_y(s, -theta_in)
    sig = np.ascontiguousarray(sig)

    adaptive = cfg.method == "rk4_doubling"
    t = t_start
    dt = cfg.dt
    n_acc_total = 0
    n_rej_total = 0
    max_tr = 0.0
    max_herm = 0.0
    min_eig = float(np.linalg.eigvalsh(0.5 * (sig + sig.conj().T)).min())
    failed = False
    reason = None

    while True:
        budget = cfg.max_steps - (n_acc_total + n_rej_total)
        if budget <= 0:
            raise ResourceLimitError(
                f"max_steps = {cfg.max_steps} exceeded at t = {t:.6g}"
            )
        sig, t, dt, n_acc, n_rej, tr, herm, status = _kernels.advance_density(
            sig, t, t_end, dt, p.kappa, p.omega_rabi, s.m,
            _jx_band(s), _jy_band(s), mode, xmat, ry,
            n.gamma_flat, n.temperature, n.include_nu_zero, n.nu_zero_rate,
            adaptive, cfg.rel_tol, DT_MIN, POSITIVITY_CHECK_INTERVAL, budget,
            frozen, t_frozen,
        )
        n_acc_total += n_acc
        n_rej_total += n_rej
        max_tr = max(max_tr, tr)
        max_herm = max(max_herm, herm)
        if not np.isfinite(sig).all():
            failed = True
            reason = f"state diverged (non-finite entries) at t = {t:.6g}"
            break
        eig_now = float(np.linalg.eigvalsh(0.5 * (sig + sig.conj().T)).min())
        min_eig = min(min_eig, eig_now)
        if max_tr > cfg.validity_tol:
            failed, reason = True, f"trace drift {max_tr:.3e} exceeds validity_tol"
        elif max_herm > cfg.validity_tol:
            failed, reason = True, f"Hermiticity drift {max_herm:.3e} exceeds validity_tol"
        elif min_eig < -cfg.validity_tol:
            failed, reason = True, f"eigenvalue {min_eig:.3e} below -validity_tol"
        if failed:
            break
        if status == _kernels.DONE:
            break
        if status == _kernels.MAX_STEPS:
            raise ResourceLimitError(
                f"max_steps = {cfg.max_steps} exceeded at t = {t:.6g}"
            )
        if status == _kernels.DT_UNDERFLOW:
            failed = True
            reason = f"step floor {DT_MIN} cannot meet rel_tol = {cfg.rel_tol} at t = {t:.6g}"
            break
        # status == CHUNK: keep going

    rho_final = rotation_y(s, -theta_out) @ sig @ rotation_y(s, theta_out)
    return PropagationReport(
        final_state=rho_final,
        steps_taken=n_acc_total,
        n_rejected=n_rej_total,
        max_trace_drift=max_tr,
        max_hermiticity_drift=max_herm,
        min_eigenvalue_seen=min_eig,
        t_final=t,
        failed=failed,
        failure_reason=reason,
    )


def _rk4_generic(h_of_t, t, u, dt, k1=None):
    if k1 is None:
        k1 = -1j * (h_of_t(t) @ u)
    k2 = -1j * (h_of_t(t + dt / 2.0) @ (u + (dt / 2.0) * k1))
    k3 = -1j * (h_of_t(t + dt / 2.0) @ (u + (dt / 2.0) * k2))
    k4 = -1j * (h_of_t(t + dt) @ (u + dt * k3))
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


def propagate_unitary(h_of_t: Callable[[float], np.ndarray], t_span, cfg: IntegratorConfig) -> np.ndarray:
    """Solve i dU/dt = H(t) U with U(t_start) = I for an arbitrary H(t).

    Plain dense implementation for generic callables; the collective-sweep
    fast path lives in propagate_model_unitary.
    """
    t_start, t_end = _check_span(t_span)
    h0 = np.asarray(h_of_t(t_start), dtype=complex)
    dim = h0.shape[0]
    u = np.eye(dim, dtype=complex)
    t = t_start
    dt = cfg.dt
    adaptive = cfg.method == "rk4_doubling"
    steps = 0
    span_eps = 1e-12 * (abs(t_start) + abs(t_end))
    while t < t_end - span_eps:
        if steps >= cfg.max_steps:
            raise ResourceLimitError(f"max_steps = {cfg.max_steps} exceeded at t = {t:.6g}")
        dt_step = min(dt, t_end - t)
        if not adaptive:
            u, _ = _rk4_generic(h_of_t, t, u, dt_step)
            t += dt_step
            steps += 1
            continue
        y_full, k1 = _rk4_generic(h_of_t, t, u, dt_step)
        h = dt_step / 2.0
        y_mid, _ = _rk4_generic(h_of_t, t, u, h, k1=k1)
        y_half, _ = _rk4_generic(h_of_t, t + h, y_mid, h)
        err = frob_norm(y_half - y_full) / 15.0
        scale = max(frob_norm(y_half), 1e-12)
        tol = cfg.rel_tol * scale
        steps += 1
        if err <= tol:
            u = y_half
            t += dt_step
            fac = 4.0 if err == 0.0 else 0.9 * (tol / err) ** 0.2
            dt = dt_step * min(4.0, max(0.25, fac))
        else:
            if dt_step <= DT_MIN:
                raise PropagationError(
                    f"step floor {DT_MIN} cannot meet rel_tol = {cfg.rel_tol} at t = {t:.6g}"
                )
            dt = dt_step * max(0.25, 0.9 * (tol / err) ** 0.2)
        if dt < DT_MIN:
            dt = DT_MIN
    if not np.isfinite(u).all():
        raise PropagationError(
            f"propagator diverged (non-finite entries); dt = {cfg.dt} too coarse"
        )
    return u


def propagate_model_unitary(p: ModelParams, t_span, cfg: IntegratorConfig) -> np.ndarray:
    """Full sweep propagator for the collective Hamiltonian, frame-accelerated.

    Same object as propagate_unitary(lambda t: hamiltonian(t, p, s), ...) but
    integrated in the rotating eigenframe with a compiled kernel, which keeps
    tight tolerances affordable on long spans.
    """
    s = build_spin(p.j)
    t_start, t_end = _check_span(t_span)
    theta_in = mixing_angle(t_start, p)
    theta_out = mixing_angle(t_end, p)
    jyband = _jy_band(s)
    # G(t) = U_f(t)^+ U(t); G(t_start) = U_f(t_start)^+
    g0 = np.ascontiguousarray(rotation_y(s, theta_in))
    adaptive = cfg.method == "rk4_doubling"
    g, t, dt, n_acc, n_rej, status = _kernels.advance_unitary(
        g0, t_start, t_end, cfg.dt, p.kappa, p.omega_rabi, s.m, jyband,
        adaptive, cfg.rel_tol, DT_MIN, cfg.max_steps,
    )
    if status == _kernels.MAX_STEPS:
        raise ResourceLimitError(f"max_steps = {cfg.max_steps} exceeded at t = {t:.6g}")
    if status == _kernels.DT_UNDERFLOW:
        raise PropagationError(
            f"step floor {DT_MIN} cannot meet rel_tol = {cfg.rel_tol} at t = {t:.6g}"
        )
    return rotation_y(s, -theta_out) @ g
