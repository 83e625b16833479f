"""Deterministic density-matrix dynamics: plain Lindblad, feedback-corrected
master equation with lossy detection and dark counts, the same with a
periodic sigma_z error-correction round, and the reduced two-level model.

Density matrices are vectorized row-major, vec(A X B) = kron(A, B^T) vec(X).
The fixed-step RK4 update of a linear equation is the matrix polynomial
sum_{k<=4} (h L)^k / k!, which is what :func:`rk4_step_matrix` returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qlin
from .protocols import NoiseModel, SensorCode

VARIANTS = ("plain_lindblad", "corrected", "corrected_with_ec", "reduced_effective")
STEP_BOUND = 0.005
TRACE_DRIFT_TOL = 1e-10
HERMITICITY_TOL = 1e-8


class IntegrationError(ArithmeticError):
    """The density matrix lost trace, hermiticity or finiteness."""


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, jumps, gamma: float) -> np.ndarray:
    """-i[H, rho] + gamma sum (2 J rho J^dag - J^dag J rho - rho J^dag J)."""
    out = -1j * (h @ rho - rho @ h)
    for j in jumps:
        jd = qlin.dagger(j)
        jj = jd @ j
        out += gamma * (2 * j @ rho @ jd - jj @ rho - rho @ jj)
    return out


def _channel_terms(code: SensorCode, noise: NoiseModel):
    """(Kraus-like operator, rate) pairs for the jump part of the corrected
    equation.  Photon channels split into corrected (1 - alpha) and lost
    (alpha) parts; parity channels are always caught and corrected."""
    gam = code.gamma
    terms = []
    for jump in code.jumps:
        c = code.corrections[jump.label]
        if jump.detection == "parity":
            terms.append((c @ jump.op, 2 * gam))
            continue
        if noise.loss_alpha < 1:
            terms.append((c @ jump.op, 2 * gam * (1 - noise.loss_alpha)))
        if noise.loss_alpha > 0:
            terms.append((jump.op, 2 * gam * noise.loss_alpha))
    return terms


def corrected_rhs(rho: np.ndarray, code: SensorCode, noise: NoiseModel, g: float) -> np.ndarray:
    """-i(H_nh rho - rho H_nh^dag) + 2 gamma [(1-alpha) C J rho J^dag C^dag
    + alpha J rho J^dag] + kappa (C rho C^dag - rho) per photon channel."""
    h_nh = code.nonhermitian(g)
    out = -1j * (h_nh @ rho - rho @ qlin.dagger(h_nh))
    for k, rate in _channel_terms(code, noise):
        out += rate * k @ rho @ qlin.dagger(k)
    if noise.dark_rate > 0:
        for jump in code.jumps:
            if jump.detection == "photon":
                c = code.corrections[jump.label]
                out += noise.dark_rate * (c @ rho @ qlin.dagger(c) - rho)
    return out


def _left(a):
    return np.kron(a, np.eye(a.shape[0]))


def _right(b):
    return np.kron(np.eye(b.shape[0]), b.T)


def sandwich(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Superoperator of X -> A X B (B defaults to A^dag)."""
    b = qlin.dagger(a) if b is None else b
    return np.kron(a, b.T)


def lindblad_superop(h: np.ndarray, jumps, gamma: float) -> np.ndarray:
    sup = -1j * (_left(h) - _right(h))
    for j in jumps:
        jj = qlin.dagger(j) @ j
        sup += gamma * (2 * sandwich(j) - _left(jj) - _right(jj))
    return sup


def corrected_superop(code: SensorCode, noise: NoiseModel, g: float) -> np.ndarray:
    h_nh = code.nonhermitian(g)
    sup = -1j * (_left(h_nh) - _right(qlin.dagger(h_nh)))
    for k, rate in _channel_terms(code, noise):
        sup += rate * sandwich(k)
    if noise.dark_rate > 0:
        eye = np.eye(code.dim ** 2)
        for jump in code.jumps:
            if jump.detection == "photon":
                sup += noise.dark_rate * (sandwich(code.corrections[jump.label]) - eye)
    return sup


def ec_superop(code: SensorCode) -> np.ndarray:
    """One sigma_z error-correction round: rho -> P rho P + Z1 Q rho Q Z1 with
    Q the projector onto the wrong subspace and P = 1 - Q."""
    q = code.wrong_projector()
    p = np.eye(code.dim) - q
    z = qlin.pauli_on(code.n_qubits, 1, "z")
    return sandwich(p) + sandwich(z @ q)


def zeno_superop(code: SensorCode) -> np.ndarray:
    """Non-selective projective readout of wrong-vs-rest: P rho P + Q rho Q."""
    q = code.wrong_projector()
    return sandwich(np.eye(code.dim) - q) + sandwich(q)


def reduced_superop(g_eff: float, gamma: float, alpha: float, kappa: float) -> np.ndarray:
    """-i g [Z, rho] + (gamma alpha + kappa/2)(Z rho Z - rho) on the code qubit."""
    h = g_eff * qlin.SZ
    lam = gamma * alpha + kappa / 2
    return -1j * (_left(h) - _right(h)) + lam * (sandwich(qlin.SZ) - np.eye(4))


def reduced_effective_solution(g: float, gamma: float, alpha: float, kappa: float, t):
    """(1 + cos(2 g t) exp(-2 (gamma alpha + kappa/2) t)) / 2."""
    if alpha < 0 or kappa < 0:
        raise ValueError("alpha and kappa must be non-negative")
    t = np.asarray(t, dtype=float)
    return 0.5 * (1 + np.cos(2 * g * t) * np.exp(-2 * (gamma * alpha + kappa / 2) * t))


def rk4_step_matrix(sup: np.ndarray, h: float) -> np.ndarray:
    a = h * sup
    term = np.eye(sup.shape[0], dtype=complex)
    out = term.copy()
    for k in range(1, 5):
        term = term @ a / k
        out = out + term
    return out


def liouvillian(code: SensorCode, noise: NoiseModel, g: float, variant: str = "corrected"):
    if variant == "plain_lindblad":
        return lindblad_superop(code.hamiltonian(g), [j.op for j in code.jumps], code.gamma)
    if variant in ("corrected", "corrected_with_ec"):
        return corrected_superop(code, noise, g)
    raise ValueError(f"no full-space Liouvillian for variant {variant!r}")


def slowest_modes(code: SensorCode, noise: NoiseModel, g: float, n: int = 4):
    """Non-stationary eigenvalues of the corrected Liouvillian closest to
    zero, sorted by decay rate."""
    w = np.linalg.eigvals(liouvillian(code, noise, g))
    w = w[np.abs(w) > 1e-9]
    return w[np.argsort(-w.real, kind="stable")][:n]


@dataclass(frozen=True, eq=False)
class MasterConfig:
    code: SensorCode
    noise: NoiseModel
    g: float
    duration: float
    dt: float = 1e-3
    variant: str = "corrected"
    tau_ec: float = 0.01
    record_every: int = 1
    readout_phase: float = 0.0
    keep_states: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not (self.dt > 0 and self.duration >= 0):
            raise ValueError("dt must be positive and duration non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        bound = STEP_BOUND / max_rate(self.code, self.noise, self.g)
        if self.dt > bound * (1 + 1e-9):
            raise ValueError(f"dt={self.dt} exceeds the stability bound {bound:.3g}")
        if self.variant == "corrected_with_ec":
            _steps_per(self.tau_ec, self.dt, "tau_ec")
        if self.code.dephasing.kind == "zeno" and self.variant != "reduced_effective":
            _steps_per(self.code.dephasing.zeno_interval, self.dt, "zeno_interval")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def max_rate(code: SensorCode, noise: NoiseModel, g: float) -> float:
    rates = [code.gamma, abs(g), noise.dark_rate, 1e-300]
    if code.dephasing.kind == "energy_gap":
        rates.append(code.dephasing.gap)
    return max(rates)


def _steps_per(interval: float, dt: float, name: str) -> int:
    k = int(round(interval / dt))
    if k < 1 or abs(k * dt - interval) > 1e-9 * max(interval, 1.0):
        raise ValueError(f"{name}={interval} must be a positive multiple of dt={dt}")
    return k


@dataclass
class MasterResult:
    times: np.ndarray
    p: np.ndarray
    coherence: np.ndarray
    states: list = field(default_factory=list)
    max_trace_drift: float = 0.0


def _readout(code: SensorCode, phase: float):
    return code.readout_state(phase)


def integrate(cfg: MasterConfig, rho0: np.ndarray | None = None) -> MasterResult:
    code = cfg.code
    if cfg.variant == "reduced_effective":
        return _integrate_reduced(cfg)
    dim = code.dim
    psi0 = _readout(code, cfg.readout_phase)
    rho = np.outer(psi0, psi0.conj()) if rho0 is None else np.array(rho0, dtype=complex)
    step = rk4_step_matrix(liouvillian(code, cfg.noise, cfg.g, cfg.variant), cfg.dt)
    periodic = []
    if cfg.variant == "corrected_with_ec":
        periodic.append((_steps_per(cfg.tau_ec, cfg.dt, "tau_ec"), ec_superop(code)))
    if code.dephasing.kind == "zeno":
        periodic.append((_steps_per(code.dephasing.zeno_interval, cfg.dt, "zeno_interval"),
                         zeno_superop(code)))
    o_plus, o_minus = code.code_states
    return _run(cfg, rho.reshape(-1), step, periodic, dim, psi0, o_plus, o_minus)


def _run(cfg, vec, step, periodic, dim, psi0, o_plus, o_minus) -> MasterResult:
    n = cfg.n_steps
    times, ps, coh, states = [], [], [], []
    drift_max = 0.0

    def record(k, v):
        rho = v.reshape(dim, dim)
        times.append(k * cfg.dt)
        ps.append(np.vdot(psi0, rho @ psi0).real)
        coh.append(np.vdot(o_plus, rho @ o_minus))
        if cfg.keep_states:
            states.append(rho.copy())

    record(0, vec)
    diag = np.arange(dim) * (dim + 1)
    for k in range(1, n + 1):
        vec = step @ vec
        for every, sup in periodic:
            if k % every == 0:
                vec = sup @ vec
        tr = vec[diag].sum()
        drift = abs(tr - 1)
        drift_max = max(drift_max, drift)
        if not np.isfinite(drift) or drift > TRACE_DRIFT_TOL:
            raise IntegrationError(f"master: trace drift {drift:.2e} at step {k} (t={k * cfg.dt:.4g}); "
                                   "reduce dt")
        vec = vec / tr
        if k % cfg.record_every == 0 or k == n:
            rho = vec.reshape(dim, dim)
            herm = np.max(np.abs(rho - rho.conj().T))
            if herm > HERMITICITY_TOL:
                raise IntegrationError(f"master: hermiticity drift {herm:.2e} at step {k}")
            record(k, vec)
    return MasterResult(np.array(times), np.array(ps), np.array(coh), states, drift_max)


def code_gap(code: SensorCode) -> float:
    """Half the signal eigenvalue gap on the code states per unit g."""
    s = code.signal(1.0) - code.signal(0.0)
    a, b = code.code_states
    return 0.5 * (np.vdot(a, s @ a) - np.vdot(b, s @ b)).real


def _integrate_reduced(cfg: MasterConfig) -> MasterResult:
    g_eff = cfg.g * code_gap(cfg.code)
    sup = reduced_superop(g_eff, cfg.code.gamma, cfg.noise.loss_alpha, cfg.noise.dark_rate)
    psi0 = np.array([1.0, np.exp(1j * cfg.readout_phase)], dtype=complex) / np.sqrt(2)
    vec = np.outer(psi0, psi0.conj()).reshape(-1)
    step = rk4_step_matrix(sup, cfg.dt)
    return _run(cfg, vec, step, [], 2, psi0, qlin.UP, qlin.DOWN)


def leakage(code: SensorCode, rho: np.ndarray) -> float:
    """Population in the wrong subspace."""
    return float(np.trace(code.wrong_projector() @ rho).real)
