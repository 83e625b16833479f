"""Sensor codes: code states, signal, jump channels, corrections and the
dephasing-correction strategy, bundled as :class:`SensorCode`.

Jump channel convention: every channel ``J`` fires at rate
``2*gamma*<J^dag J>`` and contributes ``-i*gamma*J^dag J`` to the
non-Hermitian Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import qlin
from .qlin import DOWN, MINUS, ONE, PLUS, UP, ZERO, pauli_on, paulis, tensor

STRATEGIES = ("exact_term", "energy_gap", "zeno", "none")
DETECTION_KINDS = ("photon", "parity")


@dataclass(frozen=True)
class DephasingStrategy:
    """How the no-click (non-Hermitian) dephasing is removed.

    ``none`` is an extra kind used for uncorrected baselines and for the
    error-correction variant of the master equation.
    """

    kind: str = "exact_term"
    gap: float = 0.0
    zeno_interval: float = 0.0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown dephasing strategy {self.kind!r}")
        if self.kind == "energy_gap" and not self.gap > 0:
            raise ValueError("energy_gap strategy needs gap > 0")
        if self.kind == "zeno" and not self.zeno_interval > 0:
            raise ValueError("zeno strategy needs zeno_interval > 0")


@dataclass(frozen=True)
class NoiseModel:
    gamma: float = 1.0
    loss_alpha: float = 0.0
    dark_rate: float = 0.0
    dead_time: float = 0.0
    correction_delay: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "loss_alpha", "dark_rate", "dead_time", "correction_delay"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"NoiseModel.{name} must be finite and non-negative, got {v}")
        if self.loss_alpha > 1:
            raise ValueError("NoiseModel.loss_alpha must be <= 1")


@dataclass(frozen=True, eq=False)
class Jump:
    op: np.ndarray
    label: str
    detection: str = "photon"

    def __post_init__(self):
        if self.detection not in DETECTION_KINDS:
            raise ValueError(f"unknown detection kind {self.detection!r}")


@dataclass(frozen=True, eq=False)
class Syndrome:
    """Projective outcome of a periodic (parity) readout and the correction
    applied when it fires."""

    projector: np.ndarray
    correction: str


@dataclass(frozen=True, eq=False)
class SensorCode:
    name: str
    n_qubits: int
    code_states: tuple[np.ndarray, np.ndarray]
    signal: Callable[[float], np.ndarray]
    jumps: tuple[Jump, ...]
    corrections: dict[str, np.ndarray]
    dephasing: DephasingStrategy
    gamma: float
    g: float
    exact_term: np.ndarray | None = None
    gap_op: np.ndarray | None = None
    extra_terms: dict[str, np.ndarray] = field(default_factory=dict)
    syndromes: tuple[Syndrome, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def anti_hermitian(self) -> np.ndarray:
        """Sum of J^dag J over all jump channels."""
        return sum(qlin.dagger(j.op) @ j.op for j in self.jumps)

    def hamiltonian(self, g: float | None = None, signal_on: bool = True,
                    dephasing: bool = True) -> np.ndarray:
        g = self.g if g is None else g
        h = self.signal(g) if signal_on else np.zeros((self.dim, self.dim), complex)
        h = h + sum(self.extra_terms.values(), np.zeros((self.dim, self.dim), complex))
        if dephasing:
            if self.dephasing.kind == "exact_term" and self.exact_term is not None:
                h = h + self.exact_term
            elif self.dephasing.kind == "energy_gap":
                h = h + self.dephasing.gap * self.gap_op
        return h

    def nonhermitian(self, g: float | None = None, **kw) -> np.ndarray:
        return self.hamiltonian(g, **kw) - 1j * self.gamma * self.anti_hermitian()

    def readout_state(self, phase: float = 0.0) -> np.ndarray:
        """(|O+> + e^{i phase}|O->)/sqrt(2)."""
        a, b = self.code_states
        return (a + np.exp(1j * phase) * b) / np.sqrt(2)

    def code_projector(self) -> np.ndarray:
        return qlin.projector(*self.code_states)

    def wrong_projector(self) -> np.ndarray:
        """Projector onto the states the no-click evolution and the signal
        mix the code states into."""
        p = self.code_projector()
        mixers = [self.anti_hermitian(), self.signal(1.0)]
        images = [(np.eye(self.dim) - p) @ m @ s for m in mixers for s in self.code_states]
        basis = qlin.gram_schmidt(images)
        if not basis:
            return np.zeros((self.dim, self.dim), complex)
        return qlin.projector(*basis)

    def jump(self, label: str) -> Jump:
        for j in self.jumps:
            if j.label == label:
                return j
        raise KeyError(label)

    def validate(self, tol: float = 1e-10) -> None:
        a, b = self.code_states
        gram = np.array([[np.vdot(x, y) for y in (a, b)] for x in (a, b)])
        if np.max(np.abs(gram - np.eye(2))) > tol:
            raise ValueError(f"{self.name}: code states not orthonormal")
        for label, c in self.corrections.items():
            if not qlin.is_unitary(c, tol):
                raise ValueError(f"{self.name}: correction {label!r} not unitary")
        if not qlin.is_hermitian(self.signal(1.0)):
            raise ValueError(f"{self.name}: signal not hermitian")
        for j in self.jumps:
            if j.label not in self.corrections:
                raise ValueError(f"{self.name}: no correction for jump {j.label!r}")


def frame_correction(code_states, jump_op: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Unitary sending the normalized post-jump images J|O_k> to |O_k>.

    The orthogonal complements are matched by Gram-Schmidt over the
    computational basis, in order; for Example I this reproduces the
    hand-written correction.
    """
    images = [qlin.normalize(jump_op @ s) for s in code_states]
    overlap = abs(np.vdot(images[0], images[1]))
    if overlap > tol:
        raise ValueError(f"post-jump images not orthogonal (overlap {overlap:.2e}); "
                         "the jump is not correctable for this code")
    dim = jump_op.shape[0]
    basis = list(np.eye(dim, dtype=complex))
    comp_in = qlin.gram_schmidt(basis, against=images)
    comp_out = qlin.gram_schmidt(basis, against=code_states)
    c = sum(np.outer(o, np.conj(i)) for o, i in zip(code_states, images))
    c = c + sum(np.outer(o, np.conj(i)) for o, i in zip(comp_out, comp_in))
    return c


def exact_dephasing_term(code_states, anti_hermitian: np.ndarray, gamma: float) -> np.ndarray:
    """Hermitian term T with (T - i*gamma*A)|O_k> proportional to |O_k>.

    With A|O_k> = a_k|O_k> + |w_k>, T = i*gamma*sum_k (|w_k><O_k| - |O_k><w_k|).
    Requires <O_j|A|O_k> = 0 for j != k.
    """
    p = qlin.projector(*code_states)
    off = abs(np.vdot(code_states[0], anti_hermitian @ code_states[1]))
    if off > 1e-9:
        raise ValueError("code states are mixed directly by J^dag J; no exact term exists")
    t = np.zeros_like(anti_hermitian, dtype=complex)
    for s in code_states:
        w = anti_hermitian @ s - p @ (anti_hermitian @ s)
        t += 1j * gamma * (np.outer(w, np.conj(s)) - np.outer(s, np.conj(w)))
    return t


def _gap_operator(code: SensorCode) -> np.ndarray:
    return code.code_projector() - code.wrong_projector()


def _finish(code: SensorCode, strategy: DephasingStrategy, exact_term=None) -> SensorCode:
    if exact_term is None:
        exact_term = exact_dephasing_term(code.code_states, code.anti_hermitian(), code.gamma)
    object.__setattr__(code, "exact_term", exact_term)
    object.__setattr__(code, "dephasing", strategy)
    object.__setattr__(code, "gap_op", _gap_operator(code))
    code.validate()
    return code


def _linear_signal(op: np.ndarray) -> Callable[[float], np.ndarray]:
    def signal(g: float) -> np.ndarray:
        return g * op
    return signal


def example_i_correction() -> np.ndarray:
    """C = |+0><down 0| + |-1><down 1| + |-0><up 0| + |+1><up 1|."""
    o = np.outer
    c = np.conj
    return (o(tensor(PLUS, ZERO), c(tensor(DOWN, ZERO)))
            + o(tensor(MINUS, ONE), c(tensor(DOWN, ONE)))
            + o(tensor(MINUS, ZERO), c(tensor(UP, ZERO)))
            + o(tensor(PLUS, ONE), c(tensor(UP, ONE))))


def example_i_gate_sequence(y_sign: float = 1.0) -> np.ndarray:
    """exp(-i pi/4 Y1) exp(-i pi/4 Z2) exp(i pi/4 X1 Z2) exp(-i pi/4 X1).

    ``y_sign = -1`` evaluates it with Y -> -Y, the sigma_y convention under
    which the sequence reproduces :func:`example_i_correction` up to a
    global phase (same flip as in the Example I dephasing term).
    """
    q = np.pi / 4
    e = qlin.expm
    return (e(-1j * q * y_sign * paulis(2, "y1")) @ e(-1j * q * paulis(2, "z2"))
            @ e(1j * q * paulis(2, "x1 z2")) @ e(-1j * q * paulis(2, "x1")))


def build_example_i(g: float, gamma: float, strategy: DephasingStrategy | None = None) -> SensorCode:
    """Sensing qubit 1 (decaying) plus a good qubit 2; signal g*sigma_x^1."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    strategy = strategy or DephasingStrategy()
    code = SensorCode(
        name="example_i",
        n_qubits=2,
        code_states=(tensor(PLUS, ZERO), tensor(MINUS, ONE)),
        signal=_linear_signal(pauli_on(2, 1, "x")),
        jumps=(Jump(pauli_on(2, 1, "-"), "q1"),),
        corrections={"q1": example_i_correction()},
        dephasing=strategy,
        gamma=gamma,
        g=g,
    )
    # sign chosen so that the no-click blocks are [[-i gamma, g +- i gamma/2], ...]
    return _finish(code, strategy, exact_term=-(gamma / 2) * paulis(2, "y1 z2"))


def _bell(sign: int) -> np.ndarray:
    return (tensor(UP, UP) + sign * tensor(DOWN, DOWN)) / np.sqrt(2)


def build_example_ii(g: float, gamma: float, strategy: DephasingStrategy | None = None) -> SensorCode:
    """All three qubits decay; ancillas 2,3 hold |Psi+->, their decays are
    caught by a parity readout and the which-qubit readout inside the odd
    sector."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    strategy = strategy or DephasingStrategy()
    n = 3
    states = (tensor(PLUS, _bell(+1)), tensor(MINUS, _bell(-1)))
    jumps = (Jump(pauli_on(n, 1, "-"), "q1"),
             Jump(pauli_on(n, 2, "-"), "anc2", "parity"),
             Jump(pauli_on(n, 3, "-"), "anc3", "parity"))
    corrections = {j.label: frame_correction(states, j.op) for j in jumps}
    eye = np.eye(2**n)
    odd = (eye - paulis(n, "z2 z3")) / 2
    syndromes = (Syndrome(odd @ (eye - paulis(n, "z2")) / 2, "anc2"),
                 Syndrome(odd @ (eye + paulis(n, "z2")) / 2, "anc3"))
    printed = -gamma * (paulis(n, "z1 z2") + 0.5 * eye) @ paulis(n, "y1 x2 x3")
    code = SensorCode(
        name="example_ii",
        n_qubits=n,
        code_states=states,
        signal=_linear_signal(pauli_on(n, 1, "x")),
        jumps=jumps,
        corrections=corrections,
        dephasing=strategy,
        gamma=gamma,
        g=g,
        syndromes=syndromes,
        notes=("q1 correction inferred by frame mapping",),
    )
    return _finish(code, strategy, exact_term=printed)


def xy_states(phase: float) -> tuple[np.ndarray, np.ndarray]:
    e = np.exp(1j * phase)
    return (tensor((UP + e * DOWN) / np.sqrt(2), ZERO),
            tensor((UP - e * DOWN) / np.sqrt(2), ONE))


def build_xy_code(theta: float, g: float, gamma: float,
                  strategy: DephasingStrategy | None = None) -> SensorCode:
    """Signal g*(cos(theta) X + sin(theta) Y) on qubit 1."""
    strategy = strategy or DephasingStrategy()
    states = xy_states(theta)
    op = np.cos(theta) * pauli_on(2, 1, "x") + np.sin(theta) * pauli_on(2, 1, "y")
    jump = Jump(pauli_on(2, 1, "-"), "q1")
    code = SensorCode(
        name="xy",
        n_qubits=2,
        code_states=states,
        signal=_linear_signal(op),
        jumps=(jump,),
        corrections={"q1": frame_correction(states, jump.op)},
        dephasing=strategy,
        gamma=gamma,
        g=g,
    )
    return _finish(code, strategy)


def build_general_signal_code(theta: float, phi: float, g: float, gamma: float,
                              gap: float) -> SensorCode:
    """Signal g*(sin t cos p X + sin t sin p Y + cos t Z); the Z part and the
    dephasing are pushed out by an energy gap."""
    if abs(np.sin(theta)) < 1e-9:
        raise ValueError("pure sigma_z signal (sin(theta) = 0) cannot be sensed with photodetection")
    strategy = DephasingStrategy("energy_gap", gap=gap)
    states = xy_states(phi)
    op = (np.sin(theta) * np.cos(phi) * pauli_on(2, 1, "x")
          + np.sin(theta) * np.sin(phi) * pauli_on(2, 1, "y")
          + np.cos(theta) * pauli_on(2, 1, "z"))
    jump = Jump(pauli_on(2, 1, "-"), "q1")
    code = SensorCode(
        name="general",
        n_qubits=2,
        code_states=states,
        signal=_linear_signal(op),
        jumps=(jump,),
        corrections={"q1": frame_correction(states, jump.op)},
        dephasing=strategy,
        gamma=gamma,
        g=g,
    )
    return _finish(code, strategy)


def homodyne_axis(b: float) -> np.ndarray:
    """Unit Bloch vector of sigma_theta = (-b Z + X/2)/sqrt(b^2 + 1/4)."""
    v = np.array([0.5, 0.0, -b])
    return v / np.linalg.norm(v)


def homodyne_blocked_axis(b: float) -> np.ndarray:
    """Unit Bloch vector of Z/2 + b X, the direction homodyne detection blocks."""
    v = np.array([b, 0.0, 0.5])
    return v / np.linalg.norm(v)


def build_homodyne_z(b: float, g: float, gamma: float, gap: float = 50.0) -> SensorCode:
    """Sigma_z sensing with the homodyne-shifted jump sigma_- + b.

    The unraveling with J = sigma_- + b shifts the Hamiltonian by
    -gamma*b*Y (our sign convention); a compensation +gamma*b*Y cancels it.
    The blocked part of the signal and the dephasing are gapped out.
    """
    if not np.isfinite(b):
        raise ValueError("b must be finite")
    n = 2
    axis = homodyne_axis(b)
    s_theta = axis[0] * qlin.SX + axis[2] * qlin.SZ
    w, v = np.linalg.eigh(s_theta)
    up_t, down_t = v[:, 1], v[:, 0]  # eigenvalues +1, -1
    states = (tensor(up_t, ONE), tensor(down_t, ZERO))
    jump = Jump(pauli_on(n, 1, "-") + b * np.eye(2**n), "homodyne")
    y1 = pauli_on(n, 1, "y")
    strategy = DephasingStrategy("energy_gap", gap=gap)
    code = SensorCode(
        name="homodyne_z",
        n_qubits=n,
        code_states=states,
        signal=_linear_signal(pauli_on(n, 1, "z")),
        jumps=(jump,),
        corrections={"homodyne": frame_correction(states, jump.op)},
        dephasing=strategy,
        gamma=gamma,
        g=g,
        extra_terms={"unraveling_shift": -gamma * b * y1, "compensation": gamma * b * y1},
    )
    return _finish(code, strategy)


def build_interferometer_code(g1: float, g2: float, gamma: float) -> SensorCode:
    """Two sensing qubits monitored through (s1 +- s2)/sqrt(2) plus a good
    qubit 3.  ``signal(g)`` is (g2 + g) Z1 + g2 Z2, so g is the sensed
    difference g1 - g2."""
    n = 3
    states = (tensor(UP, DOWN, ONE), tensor(DOWN, UP, ZERO))
    s1, s2 = pauli_on(n, 1, "-"), pauli_on(n, 2, "-")
    jumps = (Jump((s1 + s2) / np.sqrt(2), "sum"), Jump((s1 - s2) / np.sqrt(2), "diff"))
    z1, z2 = pauli_on(n, 1, "z"), pauli_on(n, 2, "z")

    def signal(g: float) -> np.ndarray:
        return (g2 + g) * z1 + g2 * z2

    strategy = DephasingStrategy()
    code = SensorCode(
        name="interferometer",
        n_qubits=n,
        code_states=states,
        signal=signal,
        jumps=jumps,
        corrections={j.label: frame_correction(states, j.op) for j in jumps},
        dephasing=strategy,
        gamma=gamma,
        g=g1 - g2,
    )
    return _finish(code, strategy)


def build(name: str, **params) -> SensorCode:
    """Look a builder up by its CLI name."""
    builders = {
        "example_i": build_example_i,
        "example_ii": build_example_ii,
        "xy": build_xy_code,
        "general": build_general_signal_code,
        "homodyne_z": build_homodyne_z,
        "interferometer": build_interferometer_code,
    }
    if name not in builders:
        raise ValueError(f"unknown code {name!r}; choose from {sorted(builders)}")
    return builders[name](**params)


CODE_NAMES = ("example_i", "example_ii", "xy", "general", "homodyne_z", "interferometer")
