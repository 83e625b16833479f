"""Knill-Laflamme style conditions for jump-assisted error correction.

With photodetection the jump index is known, so only the diagonal
conditions <a|E_i^dag E_i|b> = c_i delta_ab are needed.  A signal is
sensable when both code states are eigenstates with different eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import qlin

KL_TOL = 1e-9


@dataclass
class KLReport:
    full_ok: bool | None = None
    diagonal_ok: bool | None = None
    violations: list = field(default_factory=list)
    sensable_axes: dict = field(default_factory=dict)
    tolerance: float = KL_TOL

    def to_dict(self) -> dict:
        return {
            "full_ok": self.full_ok,
            "diagonal_ok": self.diagonal_ok,
            "violations": [{"i": i, "j": j, "alpha": a, "beta": b,
                            "value": [float(np.real(v)), float(np.imag(v))]}
                           for i, j, a, b, v in self.violations],
            "sensable_axes": {f"{th:.6f},{ph:.6f}": bool(ok)
                              for (th, ph), ok in self.sensable_axes.items()},
            "tolerance": self.tolerance,
        }


def _check_orthonormal(states, tol=1e-10):
    gram = np.array([[np.vdot(x, y) for y in states] for x in states])
    if np.max(np.abs(gram - np.eye(len(states)))) > tol:
        raise ValueError("code states are not orthonormal")


def kl_matrix(code_states, errors) -> np.ndarray:
    """M[i, j, a, b] = <psi_a|E_i^dag E_j|psi_b>."""
    images = np.array([[e @ s for s in code_states] for e in errors])  # (n_err, 2, dim)
    return np.einsum("iad,jbd->ijab", images.conj(), images)


def _violations(m, pairs, tol):
    out = []
    for i, j in pairs:
        block = m[i, j]
        for a, b in ((0, 1), (1, 0)):
            if abs(block[a, b]) > tol:
                out.append((i, j, a, b, complex(block[a, b])))
        diff = block[0, 0] - block[1, 1]
        if abs(diff) > tol:
            out.append((i, j, 0, 0, complex(diff)))
    return out


def kl_full_check(code_states, errors, tol: float = KL_TOL) -> KLReport:
    _check_orthonormal(code_states)
    m = kl_matrix(code_states, errors)
    n = len(errors)
    v = _violations(m, [(i, j) for i in range(n) for j in range(n)], tol)
    return KLReport(full_ok=not v, violations=v, tolerance=tol)


def kl_diagonal_check(code_states, errors, tol: float = KL_TOL) -> KLReport:
    _check_orthonormal(code_states)
    m = kl_matrix(code_states, errors)
    v = _violations(m, [(i, i) for i in range(len(errors))], tol)
    return KLReport(diagonal_ok=not v, violations=v, tolerance=tol)


def expectation_gap(code_states, signal) -> float:
    a, b = code_states
    return float((np.vdot(a, signal @ a) - np.vdot(b, signal @ b)).real)


def sensable(code_states, signal, tol: float = KL_TOL, mode: str = "strict"):
    """Strict mode: both states are eigenstates of the signal (normalized by
    its spectral norm) and the eigenvalues differ.  Mode ``gap`` returns the
    expectation gap <1|S|1> - <2|S|2> instead."""
    if mode == "gap":
        return expectation_gap(code_states, signal)
    if mode != "strict":
        raise ValueError(f"unknown mode {mode!r}")
    scale = np.linalg.norm(signal, 2)
    if scale == 0:
        return False
    s = signal / scale
    lams = []
    for psi in code_states:
        lam = np.vdot(psi, s @ psi)
        if np.linalg.norm(s @ psi - lam * psi) > tol:
            return False
        lams.append(lam)
    return bool(abs(lams[0] - lams[1]) > tol)


def lowering_errors(n_qubits: int, shift: float = 0.0):
    """sigma_-^i + shift for every qubit."""
    eye = np.eye(2**n_qubits)
    return [qlin.pauli_on(n_qubits, i, "-") + shift * eye for i in range(1, n_qubits + 1)]


def _pack(states):
    v = np.concatenate(states)
    return np.concatenate([v.real, v.imag])


def _unpack(x, dim):
    v = x[:2 * dim] + 1j * x[2 * dim:]
    return v[:dim], v[dim:]


def _condition_forms(errors, dim):
    """Matrices M_k and offsets c_k with residual_k = Re(v^dag M_k v) - c_k,
    v = (a, b), covering normalization, orthogonality and the diagonal
    conditions."""
    z = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(dim)

    def blk(aa=z, ab=z, ba=z, bb=z):
        return np.block([[aa, ab], [ba, bb]])

    forms = [(blk(aa=eye), 1.0), (blk(bb=eye), 1.0),
             (blk(ab=eye), 0.0), (blk(ab=-1j * eye), 0.0)]
    for e in errors:
        m = qlin.dagger(e) @ e
        forms += [(blk(ab=m), 0.0), (blk(ab=-1j * m), 0.0), (blk(aa=m, bb=-m), 0.0)]
    mats = np.array([f[0] for f in forms])
    return mats, np.array([f[1] for f in forms])


def repair_code(code_states, errors, tol: float = KL_TOL, max_nfev: int = 200):
    """Move a code onto the diagonal-KL manifold by least squares starting
    from ``code_states``.  Returns the repaired orthonormal pair, or None if
    the residual cannot be pushed below ``tol``."""
    dim = code_states[0].size
    mats, offs = _condition_forms(errors, dim)
    mats_h = np.conj(np.transpose(mats, (0, 2, 1)))

    def vec(x):
        return x[:2 * dim] + 1j * x[2 * dim:]

    def resid(x):
        v = vec(x)
        return np.einsum("i,kij,j->k", v.conj(), mats, v).real - offs

    def jac(x):
        v = vec(x)
        mv = mats @ v
        mhv = mats_h @ v
        return np.hstack([(mv + mhv).real, (mv + mhv).imag])

    # minimum-norm Gauss-Newton converges quadratically on this underdetermined
    # system; trust-region least squares is the fallback
    x = _pack(code_states)
    for _ in range(30):
        r = resid(x)
        if np.max(np.abs(r)) < tol / 10:
            break
        x = x - np.linalg.lstsq(jac(x), r, rcond=None)[0]
        if not np.all(np.isfinite(x)):
            x = _pack(code_states)
            break
    if not np.max(np.abs(resid(x))) < tol / 10:
        x = least_squares(resid, x, jac=jac, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                          max_nfev=max_nfev, method="trf").x
    if np.max(np.abs(resid(x))) > tol / 10:
        return None
    a, b = _unpack(x, dim)
    # exact re-orthonormalization
    a = qlin.normalize(a)
    b = qlin.normalize(b - np.vdot(a, b) * a)
    return a, b


def random_code(n_qubits: int, rng: np.random.Generator):
    u = qlin.haar_unitary(2**n_qubits, rng)
    return u[:, 0].copy(), u[:, 1].copy()


@dataclass
class NoGoReport:
    n_sampled: int
    n_passing: int
    n_excluded: int
    violations: list
    by_qubits: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"n_sampled": self.n_sampled, "n_passing": self.n_passing,
                "n_excluded": self.n_excluded, "n_violations": len(self.violations),
                "by_qubits": {str(k): v for k, v in self.by_qubits.items()}}


def sigma_z_nogo_scan(n_random_codes: int, seed: int = 0, qubits=(1, 2, 3),
                      tol: float = KL_TOL, repair: bool = True) -> NoGoReport:
    """Sample random codes; those satisfying the diagonal condition for
    {sigma_-^i} must have equal <sigma_z^i> on both states and must not
    sense a random sum_i a_i sigma_z^i.

    Code k uses n_qubits = qubits[k % len(qubits)] and its own stream
    derived from (seed, k).
    """
    if n_random_codes < 1:
        raise ValueError("n_random_codes must be >= 1")
    violations = []
    passing = excluded = 0
    by_q = {q: [0, 0] for q in qubits}
    for k in range(n_random_codes):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        n = qubits[k % len(qubits)]
        errors = lowering_errors(n)
        code = random_code(n, rng)
        if repair:
            code = repair_code(code, errors, tol)
        if code is None or not kl_diagonal_check(code, errors, tol).diagonal_ok:
            excluded += 1
            by_q[n][1] += 1
            continue
        passing += 1
        by_q[n][0] += 1
        zs = [qlin.pauli_on(n, i, "z") for i in range(1, n + 1)]
        for i, z in enumerate(zs, start=1):
            gap = expectation_gap(code, z)
            if abs(gap) > 10 * tol:
                violations.append((k, n, f"z{i}", gap))
        coeffs = rng.standard_normal(n)
        h = sum(c * z for c, z in zip(coeffs, zs))
        if sensable(code, h, tol):
            violations.append((k, n, "sum", expectation_gap(code, h)))
    return NoGoReport(n_random_codes, passing, excluded, violations,
                      {q: {"passing": v[0], "excluded": v[1]} for q, v in by_q.items()})


def bloch_operator(direction, n_qubits: int = 2, site: int = 1) -> np.ndarray:
    x, y, z = direction
    return (x * qlin.pauli_on(n_qubits, site, "x") + y * qlin.pauli_on(n_qubits, site, "y")
            + z * qlin.pauli_on(n_qubits, site, "z"))


def gap_vector(code_states, n_qubits: int, site: int = 1) -> np.ndarray:
    """(gap of X, gap of Y, gap of Z) on ``site`` between the code states."""
    return np.array([expectation_gap(code_states, qlin.pauli_on(n_qubits, site, ax))
                     for ax in "xyz"])


def sensable_axes(code_states, n_qubits: int, n_theta: int = 7, n_phi: int = 8,
                  tol: float = 1e-6, site: int = 1) -> dict:
    """Map (theta, phi) -> whether n(theta, phi).sigma on ``site`` has a
    nonzero expectation gap."""
    v = gap_vector(code_states, n_qubits, site)
    out = {}
    for th in np.linspace(0, np.pi, n_theta):
        for ph in np.linspace(0, 2 * np.pi, n_phi, endpoint=False):
            d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            out[(float(th), float(ph))] = bool(abs(d @ v) > tol)
    return out


@dataclass
class BlockedScan:
    blocked_axis: np.ndarray
    singular_values: np.ndarray
    n_codes: int
    z_sensable: bool
    z_gap_max: float


def homodyne_blocked_scan(b: float, n_codes: int = 200, seed: int = 0,
                          tol: float = KL_TOL) -> BlockedScan:
    """Random 2-qubit codes repaired onto the diagonal-KL manifold for the
    single error sigma_-^1 + b.  The expectation-gap vectors of qubit-1
    Paulis span a plane; its normal is the blocked direction."""
    errors = [qlin.pauli_on(2, 1, "-") + b * np.eye(4)]
    gaps = []
    for k in range(n_codes):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        code = repair_code(random_code(2, rng), errors, tol)
        if code is None:
            continue
        gaps.append(gap_vector(code, 2))
    if len(gaps) < 3:
        raise RuntimeError("too few codes satisfied the diagonal condition")
    g = np.array(gaps)
    _, s, vt = np.linalg.svd(g)
    axis = vt[-1]
    axis = axis * np.sign(axis[2] if abs(axis[2]) > 1e-12 else axis[0])
    zmax = float(np.max(np.abs(g[:, 2])))
    return BlockedScan(axis, s, len(gaps), zmax > 1e-6, zmax)
