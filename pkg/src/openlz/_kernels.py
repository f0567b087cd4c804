"""Compiled inner loops for time propagation.

Everything here integrates in the instantaneous eigenframe: with
U_f(t) = exp(-i*theta(t)*Jy) and sigma = U_f^+ rho U_f, the master equation
turns into

    dsigma/dt = -i[omega(t)*diag(m) - thetadot(t)*Jy, sigma] + D_f(sigma)

where D_f keeps the ladder structure of the dissipator but with the coupling
expressed in the frame:  Xf = cos(theta)Jz - sin(theta)Jx  for a Jz channel,
Xf = sin(theta)Jz + cos(theta)Jx  for Jx,  Xf = U_f^+ X U_f  for a custom
coupling.  This is an exact change of variables, not an approximation; the
wrappers in integrator.py transform in and out of the frame at the span
endpoints.  Trace, Hermiticity defect and the spectrum of sigma coincide with
those of rho, so the validity diagnostics can be taken directly on sigma.

Rates and ladder components are rebuilt at every Runge-Kutta stage time from
scratch, so the integrator always sees the instantaneous generator.

Step doubling: one full RK4 step is compared against two half steps; the
difference/15 estimates the local error of the accepted (two-half-step)
value.  No Richardson extrapolation and no renormalization of any kind is
applied to the state.
"""

import numpy as np
from numba import njit

SQRT2 = np.sqrt(2.0)
_EXP_ARG_MAX = 700.0

# status codes returned by the advance kernels
DONE = 0
CHUNK = 1
MAX_STEPS = 2
DT_UNDERFLOW = 3

# coupling modes
MODE_JZ = 0
MODE_JX = 1
MODE_CUSTOM = 2


@njit(cache=True)
def _occupation(e, temperature):
    if temperature <= 0.0:
        return 0.0
    x = e / temperature
    if x > _EXP_ARG_MAX:
        return 0.0
    return 1.0 / np.expm1(x)


@njit(cache=True)
def _frame_coupling(theta, m, jxband, mode, xmat, ry, xf):
    """Fill xf with the coupling operator in the instantaneous frame."""
    d = m.size
    if mode == MODE_CUSTOM:
        # U = ry @ diag(exp(-i m theta)) @ ry^+, xf = U^+ xmat U
        u = ry * np.exp(-1j * theta * m)  # scales column k by phase of m[k]
        u = u @ ry.conj().T
        xf[:, :] = u.conj().T @ (xmat @ u)
    else:
        cz = np.cos(theta) if mode == MODE_JZ else np.sin(theta)
        cx = -np.sin(theta) if mode == MODE_JZ else np.cos(theta)
        xf[:, :] = 0.0
        for k in range(d):
            xf[k, k] = cz * m[k]
        for k in range(d - 1):
            xf[k, k + 1] = cx * jxband[k]
            xf[k + 1, k] = cx * jxband[k]


@njit(cache=True)
def density_rhs(
    t_eval, sig, kappa, om, m, jxband, jyband, mode, xmat, ry,
    gamma, temperature, inz, nzr, frozen, t_frozen, xf, gain, out,
):
    """out <- generator applied to sig at model time t_eval (frame basis).

    frozen pins the Hamiltonian (and therefore the frame) at t_frozen; the
    frame is then static, so the thetadot term vanishes identically.
    """
    d = m.size
    te = t_frozen if frozen else t_eval
    w = np.hypot(kappa * te, SQRT2 * om)
    theta = np.arctan2(SQRT2 * om, kappa * te)
    thetadot = 0.0 if frozen else -SQRT2 * om * kappa / (w * w)
    # coherent part: -i[w*diag(m) - thetadot*Jy, sig]
    # Jy is tridiagonal with Jy[k, k+1] = i*jyband[k], Jy[k+1, k] = -i*jyband[k]
    for a in range(d):
        for b in range(d):
            acc = -1j * w * (m[a] - m[b]) * sig[a, b]
            v = 0.0 + 0.0j  # (Jy sig - sig Jy)[a, b]
            if a > 0:
                v += (-1j * jyband[a - 1]) * sig[a - 1, b]
            if a < d - 1:
                v += (1j * jyband[a]) * sig[a + 1, b]
            if b > 0:
                v -= sig[a, b - 1] * (1j * jyband[b - 1])
            if b < d - 1:
                v -= sig[a, b + 1] * (-1j * jyband[b])
            acc += 1j * thetadot * v
            out[a, b] = acc
    has_thermal = gamma > 0.0
    has_nzr = inz and nzr > 0.0
    if not (has_thermal or has_nzr):
        return
    _frame_coupling(theta, m, jxband, mode, xmat, ry, xf)
    tridiag = mode != MODE_CUSTOM
    for c in range(d):
        gain[c] = 0.0
    for nu in range(-(d - 1), d):
        if nu == 0 and not inz:
            continue
        if tridiag and (nu < -1 or nu > 1):
            continue
        if nu == 0:
            r = gamma * nzr
        elif nu > 0:
            r = gamma * (_occupation(nu * w, temperature) + 1.0)
        else:
            r = gamma * _occupation(-nu * w, temperature)
        if r == 0.0:
            continue
        # ladder component A[a, a-nu] = xf[a, a-nu]; gain term A sig A^+,
        # loss term -(1/2){A^+ A, sig} with A^+ A diagonal
        for a in range(d):
            b0 = a - nu
            if 0 <= b0 < d:
                gain[b0] += r * (xf[a, b0].real ** 2 + xf[a, b0].imag ** 2)
        for a in range(d):
            if not (0 <= a - nu < d):
                continue
            for b in range(d):
                if not (0 <= b - nu < d):
                    continue
                out[a, b] += r * xf[a, a - nu] * np.conj(xf[b, b - nu]) * sig[a - nu, b - nu]
    for a in range(d):
        for b in range(d):
            out[a, b] -= 0.5 * (gain[a] + gain[b]) * sig[a, b]


@njit(cache=True)
def _rk4_density(
    t, sig, dt, kappa, om, m, jxband, jyband, mode, xmat, ry,
    gamma, temperature, inz, nzr, frozen, t_frozen,
    xf, gain, k1, k2, k3, k4, tmp, k1_ready,
):
    """One classic RK4 step; k1 may be passed in precomputed (k1_ready)."""
    if not k1_ready:
        density_rhs(t, sig, kappa, om, m, jxband, jyband, mode, xmat, ry,
                    gamma, temperature, inz, nzr, frozen, t_frozen, xf, gain, k1)
    tmp[:, :] = sig + (dt / 2.0) * k1
    density_rhs(t + dt / 2.0, tmp, kappa, om, m, jxband, jyband, mode, xmat, ry,
                gamma, temperature, inz, nzr, frozen, t_frozen, xf, gain, k2)
    tmp[:, :] = sig + (dt / 2.0) * k2
    density_rhs(t + dt / 2.0, tmp, kappa, om, m, jxband, jyband, mode, xmat, ry,
                gamma, temperature, inz, nzr, frozen, t_frozen, xf, gain, k3)
    tmp[:, :] = sig + dt * k3
    density_rhs(t + dt, tmp, kappa, om, m, jxband, jyband, mode, xmat, ry,
                gamma, temperature, inz, nzr, frozen, t_frozen, xf, gain, k4)
    return sig + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def advance_density(
    sig, t, t_end, dt, kappa, om, m, jxband, jyband, mode, xmat, ry,
    gamma, temperature, inz, nzr,
    adaptive, rel_tol, dt_min, chunk_accepts, budget, frozen, t_frozen,
):
    """Advance sigma toward t_end, stopping after chunk_accepts accepted steps.

    Returns (sig, t, dt, n_accepted, n_rejected, max_trace_drift,
    max_herm_drift, status).  budget caps accepted+rejected steps for the
    remainder of the whole propagation.
    """
    d = m.size
    xf = np.empty((d, d), np.complex128)
    gain = np.empty(d, np.float64)
    k1 = np.empty((d, d), np.complex128)
    k2 = np.empty((d, d), np.complex128)
    k3 = np.empty((d, d), np.complex128)
    k4 = np.empty((d, d), np.complex128)
    tmp = np.empty((d, d), np.complex128)
    n_acc = 0
    n_rej = 0
    max_tr = 0.0
    max_herm = 0.0
    span_eps = 1e-12 * (abs(t_end) + abs(t))
    status = CHUNK
    while t < t_end - span_eps:
        if n_acc >= chunk_accepts:
            status = CHUNK
            break
        if n_acc + n_rej >= budget:
            status = MAX_STEPS
            break
        dt_step = dt if t + dt <= t_end else t_end - t
        if not adaptive:
            y = _rk4_density(t, sig, dt_step, kappa, om, m, jxband, jyband, mode,
                             xmat, ry, gamma, temperature, inz, nzr, frozen,
                             t_frozen, xf, gain, k1, k2, k3, k4, tmp, False)
            sig = y
            t += dt_step
            n_acc += 1
        else:
            # full step (fills k1 at t), then two half steps reusing k1
            y_full = _rk4_density(t, sig, dt_step, kappa, om, m, jxband, jyband,
                                  mode, xmat, ry, gamma, temperature, inz, nzr,
                                  frozen, t_frozen,
                                  xf, gain, k1, k2, k3, k4, tmp, False)
            h = dt_step / 2.0
            y_mid = _rk4_density(t, sig, h, kappa, om, m, jxband, jyband,
                                 mode, xmat, ry, gamma, temperature, inz, nzr,
                                 frozen, t_frozen,
                                 xf, gain, k1, k2, k3, k4, tmp, True)
            y_half = _rk4_density(t + h, y_mid, h, kappa, om, m, jxband, jyband,
                                  mode, xmat, ry, gamma, temperature, inz, nzr,
                                  frozen, t_frozen,
                                  xf, gain, k1, k2, k3, k4, tmp, False)
            err2 = 0.0
            ynorm2 = 0.0
            for a in range(d):
                for b in range(d):
                    e = y_half[a, b] - y_full[a, b]
                    err2 += e.real * e.real + e.imag * e.imag
                    yv = y_half[a, b]
                    ynorm2 += yv.real * yv.real + yv.imag * yv.imag
            err = np.sqrt(err2) / 15.0
            scale = max(np.sqrt(ynorm2), 1e-12)
            tol = rel_tol * scale
            if err <= tol:
                sig = y_half
                t += dt_step
                n_acc += 1
                fac = 4.0 if err == 0.0 else 0.9 * (tol / err) ** 0.2
                dt = dt_step * min(4.0, max(0.25, fac))
            else:
                n_rej += 1
                if dt_step <= dt_min:
                    status = DT_UNDERFLOW
                    break
                dt = dt_step * max(0.25, 0.9 * (tol / err) ** 0.2)
            if dt < dt_min:
                dt = dt_min
        # cheap per-step validity tracking (trace and Hermiticity defect)
        tr = 0.0
        herm2 = 0.0
        for a in range(d):
            tr += sig[a, a].real
            for b in range(d):
                e = sig[a, b] - np.conj(sig[b, a])
                herm2 += e.real * e.real + e.imag * e.imag
        drift = abs(tr - 1.0)
        if drift > max_tr:
            max_tr = drift
        hd = np.sqrt(herm2)
        if hd > max_herm:
            max_herm = hd
    if t >= t_end - span_eps:
        status = DONE
    return sig, t, dt, n_acc, n_rej, max_tr, max_herm, status


@njit(cache=True)
def unitary_rhs(t_eval, g, kappa, om, m, jyband, out):
    """out <- -i*(omega*diag(m) - thetadot*Jy) @ g   (frame propagator)."""
    d = m.size
    w = np.hypot(kappa * t_eval, SQRT2 * om)
    thetadot = -SQRT2 * om * kappa / (w * w)
    for a in range(d):
        for b in range(d):
            acc = -1j * w * m[a] * g[a, b]
            v = 0.0 + 0.0j  # (Jy g)[a, b]
            if a > 0:
                v += (-1j * jyband[a - 1]) * g[a - 1, b]
            if a < d - 1:
                v += (1j * jyband[a]) * g[a + 1, b]
            acc += 1j * thetadot * v
            out[a, b] = acc


@njit(cache=True)
def _rk4_unitary(t, g, dt, kappa, om, m, jyband, k1, k2, k3, k4, tmp, k1_ready):
    if not k1_ready:
        unitary_rhs(t, g, kappa, om, m, jyband, k1)
    tmp[:, :] = g + (dt / 2.0) * k1
    unitary_rhs(t + dt / 2.0, tmp, kappa, om, m, jyband, k2)
    tmp[:, :] = g + (dt / 2.0) * k2
    unitary_rhs(t + dt / 2.0, tmp, kappa, om, m, jyband, k3)
    tmp[:, :] = g + dt * k3
    unitary_rhs(t + dt, tmp, kappa, om, m, jyband, k4)
    return g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def advance_unitary(g, t, t_end, dt, kappa, om, m, jyband,
                    adaptive, rel_tol, dt_min, budget):
    """Adaptive/fixed RK4 for the frame propagator over the whole span."""
    d = m.size
    k1 = np.empty((d, d), np.complex128)
    k2 = np.empty((d, d), np.complex128)
    k3 = np.empty((d, d), np.complex128)
    k4 = np.empty((d, d), np.complex128)
    tmp = np.empty((d, d), np.complex128)
    n_acc = 0
    n_rej = 0
    span_eps = 1e-12 * (abs(t_end) + abs(t))
    status = DONE
    while t < t_end - span_eps:
        if n_acc + n_rej >= budget:
            status = MAX_STEPS
            break
        dt_step = dt if t + dt <= t_end else t_end - t
        if not adaptive:
            g = _rk4_unitary(t, g, dt_step, kappa, om, m, jyband,
                             k1, k2, k3, k4, tmp, False)
            t += dt_step
            n_acc += 1
            continue
        y_full = _rk4_unitary(t, g, dt_step, kappa, om, m, jyband,
                              k1, k2, k3, k4, tmp, False)
        h = dt_step / 2.0
        y_mid = _rk4_unitary(t, g, h, kappa, om, m, jyband,
                             k1, k2, k3, k4, tmp, True)
        y_half = _rk4_unitary(t + h, y_mid, h, kappa, om, m, jyband,
                              k1, k2, k3, k4, tmp, False)
        err2 = 0.0
        ynorm2 = 0.0
        for a in range(d):
            for b in range(d):
                e = y_half[a, b] - y_full[a, b]
                err2 += e.real * e.real + e.imag * e.imag
                yv = y_half[a, b]
                ynorm2 += yv.real * yv.real + yv.imag * yv.imag
        err = np.sqrt(err2) / 15.0
        scale = max(np.sqrt(ynorm2), 1e-12)
        tol = rel_tol * scale
        if err <= tol:
            g = y_half
            t += dt_step
            n_acc += 1
            fac = 4.0 if err == 0.0 else 0.9 * (tol / err) ** 0.2
            dt = dt_step * min(4.0, max(0.25, fac))
        else:
            n_rej += 1
            if dt_step <= dt_min:
                status = DT_UNDERFLOW
                break
            dt = dt_step * max(0.25, 0.9 * (tol / err) ** 0.2)
        if dt < dt_min:
            dt = dt_min
    return g, t, dt, n_acc, n_rej, status


@njit(cache=True)
def noise_batch(
    xi, t_start, dt, n_steps, alpha,
    kappa, om, zc, xc, vc, zs, xs, vs,
    frozen, t_frozen, sum_comp, sum_sing, group_size,
):
    """Fixed-step trajectories of i dU/dt = (H(t) + alpha*eta(t) V) U.

    xi holds standard normals, one row per trajectory; eta is piecewise
    constant over each step with variance 1/dt, shared by the composite
    register (zc/xc/vc) and the single spin (zs/xs/vs).  Final propagators
    are accumulated into per-group sums (group g = row // group_size).
    """
    n_traj = xi.shape[0]
    dc = zc.shape[0]
    ds = zs.shape[0]
    hc = np.empty((dc, dc), np.complex128)
    hs = np.empty((ds, ds), np.complex128)
    kc1 = np.empty((dc, dc), np.complex128); kc2 = np.empty((dc, dc), np.complex128)
    kc3 = np.empty((dc, dc), np.complex128); kc4 = np.empty((dc, dc), np.complex128)
    tc = np.empty((dc, dc), np.complex128)
    ks1 = np.empty((ds, ds), np.complex128); ks2 = np.empty((ds, ds), np.complex128)
    ks3 = np.empty((ds, ds), np.complex128); ks4 = np.empty((ds, ds), np.complex128)
    ts = np.empty((ds, ds), np.complex128)
    inv_sqrt_dt = 1.0 / np.sqrt(dt)
    for r in range(n_traj):
        uc = np.zeros((dc, dc), np.complex128)
        us = np.zeros((ds, ds), np.complex128)
        for a in range(dc):
            uc[a, a] = 1.0
        for a in range(ds):
            us[a, a] = 1.0
        t = t_start
        for i in range(n_steps):
            eta = xi[r, i] * inv_sqrt_dt
            # RK4 stages at t, t+dt/2, t+dt with eta frozen over the step
            for stage in range(4):
                if stage == 0:
                    ta = t
                elif stage == 3:
                    ta = t + dt
                else:
                    ta = t + dt / 2.0
                te = t_frozen if frozen else ta
                for a in range(dc):
                    for b in range(dc):
                        hc[a, b] = kappa * te * zc[a, b] + SQRT2 * om * xc[a, b] \
                            + alpha * eta * vc[a, b]
                for a in range(ds):
                    for b in range(ds):
                        hs[a, b] = kappa * te * zs[a, b] + SQRT2 * om * xs[a, b] \
                            + alpha * eta * vs[a, b]
                if stage == 0:
                    _mm_minus_i(hc, uc, kc1)
                    _mm_minus_i(hs, us, ks1)
                elif stage == 1:
                    _axpy(uc, kc1, dt / 2.0, tc)
                    _mm_minus_i(hc, tc, kc2)
                    _axpy(us, ks1, dt / 2.0, ts)
                    _mm_minus_i(hs, ts, ks2)
                elif stage == 2:
                    _axpy(uc, kc2, dt / 2.0, tc)
                    _mm_minus_i(hc, tc, kc3)
                    _axpy(us, ks2, dt / 2.0, ts)
                    _mm_minus_i(hs, ts, ks3)
                else:
                    _axpy(uc, kc3, dt, tc)
                    _mm_minus_i(hc, tc, kc4)
                    _axpy(us, ks3, dt, ts)
                    _mm_minus_i(hs, ts, ks4)
            for a in range(dc):
                for b in range(dc):
                    uc[a, b] += (dt / 6.0) * (kc1[a, b] + 2.0 * kc2[a, b]
                                              + 2.0 * kc3[a, b] + kc4[a, b])
            for a in range(ds):
                for b in range(ds):
                    us[a, b] += (dt / 6.0) * (ks1[a, b] + 2.0 * ks2[a, b]
                                              + 2.0 * ks3[a, b] + ks4[a, b])
            t += dt
        grp = r // group_size
        for a in range(dc):
            for b in range(dc):
                sum_comp[grp, a, b] += uc[a, b]
        for a in range(ds):
            for b in range(ds):
                sum_sing[grp, a, b] += us[a, b]


@njit(cache=True)
def _mm_minus_i(h, u, out):
    """out <- -i * h @ u, explicit loops (small dims)."""
    n = h.shape[0]
    for a in range(n):
        for b in range(n):
            acc = 0.0 + 0.0j
            for c in range(n):
                acc += h[a, c] * u[c, b]
            out[a, b] = -1j * acc


@njit(cache=True)
def _axpy(u, k, w, out):
    n = u.shape[0]
    for a in range(n):
        for b in range(n):
            out[a, b] = u[a, b] + w * k[a, b]
