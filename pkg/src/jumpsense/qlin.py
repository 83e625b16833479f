"""Dense complex linear algebra for small qubit registers.

Operators, state vectors and density matrices are plain ``numpy`` arrays.
Basis ordering: qubit 1 is the most significant (leftmost Kronecker factor),
and within a qubit the excited state ``up`` (sigma_z = +1) comes before
``down``.  For the non-decaying "good" qubit, ``0`` (sigma_z = +1) comes
before ``1``.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
EIG_COND_MAX = 1e8
EXPM_SELFCHECK_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_- = |down><up|, sigma_+ = sigma_-^dagger
SM = np.array([[0, 0], [1, 0]], dtype=complex)
SP = SM.conj().T

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
ZERO = UP  # good-qubit |0>, sigma_z = +1
ONE = DOWN
PLUS = (UP + DOWN) / np.sqrt(2)
MINUS = (UP - DOWN) / np.sqrt(2)

_PAULI = {"i": I2, "x": SX, "y": SY, "z": SZ, "+": SP, "-": SM}


class ExpmError(ArithmeticError):
    """Matrix exponential failed its self-consistency check."""


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of operators or of state vectors (left = qubit 1)."""
    if not factors:
        raise ValueError("tensor needs at least one factor")
    return reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors])


def pauli_on(n_qubits: int, site: int, axis: str) -> np.ndarray:
    """Single-site Pauli (or ladder) operator on a register, 1-based site.

    ``axis`` is one of ``x, y, z, +, -`` (also ``i``).
    """
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} out of range for {n_qubits} qubits")
    key = axis.lower()
    if key == "−":  # unicode minus
        key = "-"
    if key not in _PAULI:
        raise ValueError(f"unknown axis {axis!r}")
    return tensor(*[_PAULI[key] if k == site else I2 for k in range(1, n_qubits + 1)])


def paulis(n_qubits: int, spec: str) -> np.ndarray:
    """Product of Paulis written as e.g. ``"y1 z2"`` or ``"x1 x2 x3"``."""
    out = np.eye(2**n_qubits, dtype=complex)
    for token in spec.split():
        out = out @ pauli_on(n_qubits, int(token[1:]), token[0])
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - dagger(a))) < tol


def is_unitary(a: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return np.max(np.abs(dagger(a) @ a - np.eye(a.shape[0]))) < tol


def is_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-9, eig_tol=1e-9) -> bool:
    if not is_hermitian(rho, herm_tol):
        return False
    if abs(np.trace(rho) - 1) > trace_tol:
        return False
    return np.min(np.linalg.eigvalsh((rho + dagger(rho)) / 2)) >= -eig_tol


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


def normalize(psi: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(psi)
    if n == 0:
        raise ValueError("cannot normalize a zero vector")
    return psi / n


def projector(*states: np.ndarray) -> np.ndarray:
    """Sum of |s><s| over the (assumed orthonormal) states."""
    return sum(np.outer(s, np.conj(s)) for s in states)


def expectation(psi: np.ndarray, a: np.ndarray) -> complex:
    """Normalized expectation <psi|A|psi>/<psi|psi>."""
    nn = np.vdot(psi, psi).real
    if nn == 0:
        raise ValueError("expectation of a zero-norm state")
    return complex(np.vdot(psi, a @ psi) / nn)


def _relerr(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def _expm_eig(m: np.ndarray) -> np.ndarray | None:
    w, v = np.linalg.eig(m)
    if np.linalg.cond(v) > EIG_COND_MAX:
        return None
    return (v * np.exp(w)) @ np.linalg.inv(v)


def expm(m: np.ndarray, check: bool = True, tol: float = EXPM_SELFCHECK_TOL) -> np.ndarray:
    """exp(m) for a small dense matrix.

    Eigendecomposition when the eigenvector matrix is well conditioned,
    otherwise scipy's scaling-and-squaring Pade.  With ``check`` the result
    is compared against the square of exp(m/2).
    """
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite entries in exponent")
    candidates = []
    e = _expm_eig(m)
    if e is not None:
        candidates.append(("eig", e))
    candidates.append(("pade", None))
    last = np.inf
    for method, e in candidates:
        if e is None:
            e = scipy.linalg.expm(m)
        if not check:
            return e
        half = _expm_eig(m / 2) if method == "eig" else scipy.linalg.expm(m / 2)
        if half is None:
            continue
        last = _relerr(e, half @ half)
        if last < tol:
            return e
    raise ExpmError(f"matrix exponential did not converge (self-check error {last:.2e})")


def propagator(h_nh: np.ndarray, t: float, check: bool = True) -> np.ndarray:
    """exp(-i H_nh t)."""
    if t < 0:
        raise ValueError("negative evolution time")
    return expm(-1j * np.asarray(h_nh) * t, check=check)


def evolve_nonhermitian(psi: np.ndarray, h_nh: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H_nh t) psi, without renormalizing."""
    psi = np.asarray(psi, dtype=complex)
    if h_nh.shape != (psi.size, psi.size):
        raise ValueError("dimension mismatch between state and H_nh")
    if t == 0:
        return psi.copy()
    return propagator(h_nh, t) @ psi


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def bloch_state(theta: float, phi: float) -> np.ndarray:
    """Single-qubit state with Bloch vector (sin t cos p, sin t sin p, cos t)."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def bloch_vector(psi: np.ndarray) -> np.ndarray:
    return np.array([expectation(psi, s).real for s in (SX, SY, SZ)])


def gram_schmidt(vectors, against=(), tol: float = 1e-9) -> list[np.ndarray]:
    """Orthonormalize ``vectors`` (in order) against ``against`` and each other,
    dropping ones that are linearly dependent within ``tol``."""
    basis = [normalize(np.asarray(a, dtype=complex)) for a in against]
    out = []
    for v in vectors:
        w = np.asarray(v, dtype=complex).copy()
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis + out:
                w = w - np.vdot(b, w) * b
        n = np.linalg.norm(w)
        if n > tol:
            out.append(w / n)
    return out
