"""Spin-j operator algebra on the (2j+1)-dimensional multiplet.

Basis convention used everywhere in this package: |j,m> ordered by
*descending* m, i.e. m = j, j-1, ..., -j.  Index 0 is therefore always the
top state, which keeps the top adiabatic level in the first row/column of
every matrix built downstream.

The only rotation needed by the sweep model is about y.  It is evaluated
through the exact spectrum of Jy (eigenvalues m), not by a generic
scaling-and-squaring matrix exponential, so the result stays unitary to
roundoff for any angle.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import ContractViolationError, InvalidParameterError, ResourceLimitError

# Largest number of explicit qubit factors (2j for the symmetric embedding,
# n_spins for product-space constructions).  2^6 = 64 keeps everything dense
# and instant; raise deliberately if you know what you are doing.
QUBIT_CAP = 6


def validate_j(j) -> float:
    """Check that j is a positive integer or half-integer and return it as float."""
    j = float(j)
    if not np.isfinite(j) or j <= 0:
        raise InvalidParameterError(f"j must be positive, got {j}")
    two_j = 2 * j
    if abs(two_j - round(two_j)) > 1e-12:
        raise InvalidParameterError(f"2j must be an integer, got j={j}")
    return round(two_j) / 2


@dataclass(frozen=True)
class SpinSet:
    """Spin operators for one j, all (2j+1)x(2j+1) complex arrays."""

    j: float
    m: np.ndarray   # magnetic quantum numbers, descending
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jp: np.ndarray  # raising J+
    jm: np.ndarray  # lowering J-

    @property
    def dim(self) -> int:
        return self.m.size


def build_spin(j) -> SpinSet:
    """Construct the spin-j operator set from the J+ matrix elements.

    <j,m+1|J+|j,m> = sqrt(j(j+1) - m(m+1)); everything else follows from
    Jx = (J+ + J-)/2, Jy = (J+ - J-)/2i, Jz = diag(m).
    """
    j = validate_j(j)
    d = int(round(2 * j)) + 1
    m = j - np.arange(d, dtype=float)
    jp = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        # column k holds m[k]; J+ lifts it to m[k]+1 which sits at row k-1
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(m).astype(complex)
    return SpinSet(j=j, m=m, jx=jx, jy=jy, jz=jz, jp=jp, jm=jm)


def rotation_y(s: SpinSet, theta: float) -> np.ndarray:
    """exp(i*theta*Jy) through the exact Jy eigendecomposition.

    Jy has the same spectrum m as Jz, so the exponential is
    R diag(e^{i m theta}) R^dag with R the Jy eigenvector matrix.
    """
    theta = float(theta)
    vals, vecs = np.linalg.eigh(s.jy)
    return (vecs * np.exp(1j * theta * vals)) @ vecs.conj().T


def frob_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def frob_close(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    """Frobenius-norm closeness, relative to the larger operand (or absolute
    when both are tiny)."""
    scale = max(frob_norm(a), frob_norm(b), 1.0)
    return frob_norm(a - b) <= tol * scale


def hermitian_eigensystem(h: np.ndarray, tol: float = 1e-10):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Raises ContractViolationError if h is not square or not Hermitian within
    tol (relative Frobenius).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {h.shape}")
    scale = max(frob_norm(h), 1.0)
    if frob_norm(h - h.conj().T) > tol * scale:
        raise ContractViolationError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(h)
    return vals, vecs


def _check_qubit_count(n: int, cap: int) -> int:
    n = int(n)
    if n < 1:
        raise InvalidParameterError(f"need at least one spin, got {n}")
    if n > cap:
        raise ResourceLimitError(
            f"{n} qubit factors exceed the cap of {cap} (dim 2^{n}); "
            "raise the cap explicitly to override"
        )
    return n


def kron_all(ops) -> np.ndarray:
    """Kronecker product of a sequence of operators, left factor outermost."""
    ops = list(ops)
    if not ops:
        raise InvalidParameterError("kron_all needs at least one operator")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def collective_operator(component: str, n_spins: int, cap: int = QUBIT_CAP) -> np.ndarray:
    """Sum of single-spin-1/2 operators S_c over n_spins qubits.

    component is one of 'x', 'y', 'z'.  Returns a 2^n x 2^n array.
    """
    n = _check_qubit_count(n_spins, cap)
    half = build_spin(0.5)
    try:
        local = {"x": half.jx, "y": half.jy, "z": half.jz}[component]
    except KeyError:
        raise InvalidParameterError(f"unknown component {component!r}") from None
    eye = np.eye(2, dtype=complex)
    total = np.zeros((2**n, 2**n), dtype=complex)
    for k in range(n):
        total += kron_all([local if i == k else eye for i in range(n)])
    return total


def dicke_isometry(j, cap: int = QUBIT_CAP) -> np.ndarray:
    """Isometry V from the spin-j multiplet into the symmetric subspace of 2j qubits.

    Column for |j,m> (columns ordered by descending m, matching build_spin)
    is the normalized symmetric state with j+m spins up.  Qubit basis: tensor
    index with bit 0 = up, bit 1 = down, leftmost factor = most significant
    bit, consistent with kron_all/collective_operator.

    V^dag V = 1 on the multiplet and V^dag (sum_k S_c^{(k)}) V = J_c.
    """
    j = validate_j(j)
    n = _check_qubit_count(int(round(2 * j)), cap)
    d = n + 1
    v = np.zeros((2**n, d), dtype=complex)
    for col in range(d):
        n_up = n - col  # m = j - col, so j+m = 2j - col
        norm = 1.0 / np.sqrt(comb(n, n_up))
        for downs in combinations(range(n), n - n_up):
            idx = 0
            for q in downs:
                idx |= 1 << (n - 1 - q)
            v[idx, col] = norm
    return v
