import numpy as np
import pytest

from openlz.dissipator import (
    LindbladTerms,
    NoiseConfig,
    bose_occupation,
    coupling_matrix,
    jump_operators,
    lindblad_rhs,
    rates,
    with_rates,
)
from openlz.errors import ContractViolationError, InvalidParameterError
from openlz.model import ModelParams, frame, gap, hamiltonian
from openlz.spin import build_spin, frob_norm

SQRT2 = np.sqrt(2.0)


def test_noise_config_validation():
    with pytest.raises(InvalidParameterError):
        NoiseConfig(coupling="Jy", gamma_flat=0.1, temperature=0.0)
    with pytest.raises(InvalidParameterError):
        NoiseConfig(coupling="Jz", gamma_flat=-0.1, temperature=0.0)
    with pytest.raises(InvalidParameterError):
        NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=-1.0)
    with pytest.raises(ContractViolationError):
        NoiseConfig(coupling=np.array([[0.0, 1.0], [0.0, 0.0]]), gamma_flat=0.1, temperature=0.0)
    n = NoiseConfig(coupling="Jx", gamma_flat=0.5, temperature=2.0)
    assert n.channel_label == "Jx"
    ncust = NoiseConfig(coupling=np.eye(2), gamma_flat=0.5, temperature=2.0)
    assert ncust.channel_label == "custom"


def test_coupling_matrix_dimension_check():
    s = build_spin(1.0)
    n = NoiseConfig(coupling=np.eye(2), gamma_flat=0.1, temperature=0.0)
    with pytest.raises(ContractViolationError):
        coupling_matrix(n, s)
    nz = NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=0.0)
    assert np.allclose(coupling_matrix(nz, s), s.jz)


def projector_sum_component(f, x, nu):
    # the defining sum X(nu) = sum_{m'-m=nu} P_m X P_m', written directly
    # from the frame projectors; independent of the banded implementation
    d = x.shape[0]
    out = np.zeros_like(x, dtype=complex)
    for a in range(d):
        for b in range(d):
            # label of projector k is m_k = j - k; m' - m = nu
            if (f.spin.m[b] - f.spin.m[a]) == nu:
                out += f.projectors[a] @ x @ f.projectors[b]
    return out


@pytest.mark.parametrize("j", [0.5, 1.0, 2.5])
@pytest.mark.parametrize("channel", ["Jz", "Jx"])
@pytest.mark.parametrize("t", [-25.0, 0.0, 3.3])
def test_jump_operators_match_projector_sum(j, channel, t):
    p = ModelParams(j=j)
    s = build_spin(j)
    f = frame(t, p, s)
    x = s.jz if channel == "Jz" else s.jx
    n = NoiseConfig(coupling=channel, gamma_flat=0.1, temperature=1.0)
    terms = jump_operators(f, n)
    got = {term.nu: term.x_nu for term in terms.terms}
    assert 0 not in got
    for nu in range(-(s.dim - 1), s.dim):
        if nu == 0:
            continue
        want = projector_sum_component(f, x, nu)
        have = got[nu]
        assert frob_norm(have - want) < 1e-12
        assert term_rate_unset(terms, nu)


def term_rate_unset(terms: LindbladTerms, nu):
    return next(t.rate for t in terms.terms if t.nu == nu) is None


def test_jump_operators_custom_matrix_and_nu_zero():
    rng = np.random.default_rng(3)
    j = 1.5
    p = ModelParams(j=j)
    s = build_spin(j)
    a = rng.normal(size=(s.dim, s.dim)) + 1j * rng.normal(size=(s.dim, s.dim))
    x = a + a.conj().T
    n = NoiseConfig(coupling=x, gamma_flat=0.1, temperature=0.0,
                    include_nu_zero=True, nu_zero_rate=0.3)
    f = frame(-7.7, p, s)
    terms = jump_operators(f, n)
    nus = sorted(term.nu for term in terms.terms)
    assert nus == list(range(-(s.dim - 1), s.dim))
    total = np.zeros_like(x, dtype=complex)
    for term in terms.terms:
        assert frob_norm(term.x_nu - projector_sum_component(f, x, term.nu)) < 1e-12
        total += term.x_nu
    # completeness: all components together rebuild the coupling
    assert frob_norm(total - x) < 1e-12


@pytest.mark.parametrize("channel", ["Jz", "Jx"])
@pytest.mark.parametrize("j", [1.0, 2.5])
def test_completeness_and_hermiticity_structure(channel, j):
    p = ModelParams(j=j)
    s = build_spin(j)
    x = s.jz if channel == "Jz" else s.jx
    n = NoiseConfig(coupling=channel, gamma_flat=0.1, temperature=1.0)
    for t in (-100.0, -0.4, 18.0):
        f = frame(t, p, s)
        terms = jump_operators(f, n)
        got = {term.nu: term.x_nu for term in terms.terms}
        total = sum(got.values()) + projector_sum_component(f, x, 0)
        assert frob_norm(total - x) < 1e-12
        for nu, x_nu in got.items():
            assert frob_norm(got[-nu] - x_nu.conj().T) < 1e-12


@pytest.mark.parametrize("channel", ["Jz", "Jx"])
def test_selection_rule_standard_channels(channel):
    # rotated Jz/Jx live in the adjoint of su(2): only |nu| <= 1 survives
    p = ModelParams(j=2.5)
    s = build_spin(2.5)
    n = NoiseConfig(coupling=channel, gamma_flat=0.1, temperature=1.0)
    for t in (-60.0, 0.0, 1.7, 333.0):
        f = frame(t, p, s)
        for term in jump_operators(f, n).terms:
            if abs(term.nu) >= 2:
                assert frob_norm(term.x_nu) < 1e-13


def test_jump_operators_lower_the_label():
    p = ModelParams(j=1.5)
    s = build_spin(1.5)
    n = NoiseConfig(coupling="Jx", gamma_flat=0.1, temperature=1.0)
    f = frame(2.4, p, s)
    for term in jump_operators(f, n).terms:
        for a in range(s.dim):
            for b in range(s.dim):
                block = f.projectors[a] @ term.x_nu @ f.projectors[b]
                if (s.m[b] - s.m[a]) != term.nu:
                    assert frob_norm(block) < 1e-13


def test_jz_at_late_time_becomes_diagonal():
    # X = Jz commutes with H once the sweep term dominates: ladder parts die
    p = ModelParams(j=1.0)
    s = build_spin(1.0)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=1.0)
    f = frame(1e8, p, s)
    for term in jump_operators(f, n).terms:
        assert frob_norm(term.x_nu) < 1e-6


def test_jump_operator_norms_j1_crossing():
    # hand-evaluated 3x3 oracle at t=0: rotated coupling is -Jx in the frame,
    # whose first off-diagonal is 1/sqrt(2) in two places -> norm 1
    p = ModelParams(j=1.0)
    s = build_spin(1.0)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=1.0)
    f = frame(0.0, p, s)
    got = {term.nu: term.x_nu for term in jump_operators(f, n).terms}
    assert frob_norm(got[1]) == pytest.approx(1.0, abs=1e-12)
    assert frob_norm(got[-1]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("j", [0.5, 1.0, 1.5, 2.0, 2.5])
def test_dephasing_limit_norm_bound(j):
    # for X = Jz the ladder norm is exactly sin(theta) * ||Jx band||_F;
    # c_j frozen from the analytic band elements
    p = ModelParams(j=j)
    s = build_spin(j)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=1.0)
    c_j = np.sqrt((np.diagonal(s.jx, 1).real ** 2).sum())
    for t in (-200.0, -31.0, -2.0, 0.1, 5.0, 100.0, 249.0):
        f = frame(t, p, s)
        got = {term.nu: term.x_nu for term in jump_operators(f, n).terms}
        sin_theta = np.sin(f.theta)
        assert frob_norm(got[1]) <= c_j * sin_theta + 1e-12
        assert frob_norm(got[1]) == pytest.approx(c_j * sin_theta, abs=1e-12)


def test_bose_occupation_values():
    assert bose_occupation(1.0, 0.0) == 0.0
    assert bose_occupation(np.log(2.0), 1.0) == pytest.approx(1.0, abs=1e-14)
    # direct evaluation at the crossing gap and hot bath
    want = 1.0 / np.expm1(SQRT2 / 10.0)
    assert bose_occupation(SQRT2, 10.0) == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(6.582849, abs=1e-5)
    # classical limit N -> T/nu
    assert bose_occupation(1e-6, 1.0) == pytest.approx(1e6, rel=1e-5)
    # far-detuned cold limit underflows to zero, no overflow error
    assert bose_occupation(1e6, 1.0) == 0.0


def test_bose_occupation_errors():
    with pytest.raises(InvalidParameterError):
        bose_occupation(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        bose_occupation(-1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        bose_occupation(1.0, -0.5)


def test_rates_zero_temperature():
    n = NoiseConfig(coupling="Jz", gamma_flat=0.7, temperature=0.0)
    assert rates(1, 2.0, n) == pytest.approx(0.7)
    assert rates(3, 2.0, n) == pytest.approx(0.7)
    assert rates(-1, 2.0, n) == 0.0
    assert rates(-2, 2.0, n) == 0.0


def test_rates_detailed_balance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        omega = rng.uniform(0.2, 30.0)
        temp = rng.uniform(0.05, 50.0)
        n = NoiseConfig(coupling="Jz", gamma_flat=1.3, temperature=temp)
        for nu in (1, 2, 3):
            ratio = rates(-nu, omega, n) / rates(nu, omega, n)
            assert ratio == pytest.approx(np.exp(-nu * omega / temp), rel=1e-12)


def test_rates_emission_absorption_ratio_at_crossing():
    n = NoiseConfig(coupling="Jz", gamma_flat=1.0, temperature=10.0)
    ratio = rates(1, SQRT2, n) / rates(-1, SQRT2, n)
    assert ratio == pytest.approx(np.exp(SQRT2 / 10.0), rel=1e-12)
    assert ratio == pytest.approx(1.152, abs=5e-4)


def test_rates_nu_zero_guarded():
    n = NoiseConfig(coupling="Jz", gamma_flat=1.0, temperature=1.0)
    with pytest.raises(InvalidParameterError):
        rates(0, 1.0, n)
    nz = NoiseConfig(coupling="Jz", gamma_flat=2.0, temperature=1.0,
                     include_nu_zero=True, nu_zero_rate=0.25)
    assert rates(0, 1.0, nz) == pytest.approx(0.5)


def test_with_rates_attaches_rates():
    p = ModelParams(j=1.0)
    s = build_spin(1.0)
    n = NoiseConfig(coupling="Jx", gamma_flat=0.4, temperature=3.0)
    f = frame(1.0, p, s)
    terms = with_rates(jump_operators(f, n), f.omega, n)
    for term in terms.terms:
        assert term.rate == pytest.approx(rates(term.nu, f.omega, n))


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("j,channel,gamma,temp", [
    (0.5, "Jz", 0.3, 0.0),
    (1.0, "Jx", 0.05, 10.0),
    (2.5, "Jx", 1.0, 0.001),
])
def test_lindblad_rhs_structure(j, channel, gamma, temp):
    rng = np.random.default_rng(int(j * 10))
    p = ModelParams(j=j)
    s = build_spin(j)
    n = NoiseConfig(coupling=channel, gamma_flat=gamma, temperature=temp)
    for t in (-40.0, 0.0, 13.0):
        rho = random_density(rng, s.dim)
        out = lindblad_rhs(t, rho, p, n, s)
        assert abs(np.trace(out)) < 1e-12
        assert frob_norm(out - out.conj().T) <= 1e-12 * max(frob_norm(out), 1.0)


def test_lindblad_rhs_gamma_zero_is_von_neumann():
    rng = np.random.default_rng(8)
    p = ModelParams(j=1.5)
    s = build_spin(1.5)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.0, temperature=4.0)
    rho = random_density(rng, s.dim)
    t = 2.2
    h = hamiltonian(t, p, s)
    want = -1j * (h @ rho - rho @ h)
    assert frob_norm(lindblad_rhs(t, rho, p, n, s) - want) < 1e-13


def test_lindblad_rhs_dimension_mismatch():
    p = ModelParams(j=1.0)
    s = build_spin(1.0)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.1, temperature=0.0)
    with pytest.raises(ContractViolationError):
        lindblad_rhs(0.0, np.eye(2) / 2.0, p, n, s)


def liouvillian_matrix(t, p, n, s):
    d = s.dim
    L = np.zeros((d * d, d * d), complex)
    for col in range(d * d):
        e = np.zeros((d, d), complex)
        e[col // d, col % d] = 1.0
        L[:, col] = lindblad_rhs(t, e, p, n, s).reshape(-1)
    return L


def test_frozen_crossing_fixed_point_is_ground_state():
    # frozen H(0) = sqrt(2) Omega Jx with X = Jz at T = 0: the dressed-basis
    # amplitude damping has the H(0) ground projector as its unique fixed
    # point.  (X = Jx would commute with H(0), kill every jump operator, and
    # leave the fixed point degenerate, so Jz is the channel that exercises
    # the damping structure.)
    p = ModelParams(j=0.5)
    s = build_spin(0.5)
    n = NoiseConfig(coupling="Jz", gamma_flat=0.2, temperature=0.0)
    L = liouvillian_matrix(0.0, p, n, s)
    vals, vecs = np.linalg.eig(L)
    order = np.argsort(np.abs(vals))
    assert abs(vals[order[0]]) < 1e-12
    assert abs(vals[order[1]]) > 1e-3  # nondegenerate kernel
    fp = vecs[:, order[0]].reshape(2, 2)
    fp = fp / np.trace(fp)
    evals, evecs = np.linalg.eigh(hamiltonian(0.0, p, s))
    ground = np.outer(evecs[:, 0], evecs[:, 0].conj())
    assert frob_norm(fp - ground) < 1e-10
    # the same rhs applied to the ground projector vanishes identically
    assert frob_norm(lindblad_rhs(0.0, ground, p, n, s)) < 1e-13


def test_frozen_crossing_jx_channel_has_no_jump_operators():
    # companion to the fixed-point test: at t = 0 the Jx coupling is diagonal
    # in the instantaneous basis, so every off-diagonal component vanishes
    # and nothing damps
    p = ModelParams(j=0.5)
    s = build_spin(0.5)
    n = NoiseConfig(coupling="Jx", gamma_flat=0.2, temperature=0.0)
    f = frame(0.0, p, s)
    for term in jump_operators(f, n).terms:
        assert frob_norm(term.x_nu) < 1e-14
