import numpy as np
import pytest
from hypothesis import given, strategies as st

from jumpsense import master, protocols, qlin
from jumpsense.protocols import DephasingStrategy, NoiseModel
from jumpsense.qlin import DOWN, MINUS, ONE, PLUS, UP, ZERO, paulis, tensor

G, GAMMA = 0.2, 1.0


def eigen_residual(h, psi):
    lam = np.vdot(psi, h @ psi)
    return np.linalg.norm(h @ psi - lam * psi), lam


@pytest.fixture(scope="module")
def ex1():
    return protocols.build_example_i(G, GAMMA)


@pytest.fixture(scope="module")
def ex2():
    return protocols.build_example_ii(G, GAMMA)


def test_example_i_correction_maps_decayed_state(ex1):
    c = ex1.corrections["q1"]
    np.testing.assert_allclose(c @ tensor(DOWN, ZERO), tensor(PLUS, ZERO), atol=1e-15)


def test_gate_sequence_as_printed_is_not_c():
    c = protocols.example_i_correction()
    seq = protocols.example_i_gate_sequence()
    phase = np.vdot(seq.ravel(), c.ravel())
    phase /= abs(phase)
    assert np.max(np.abs(seq * phase - c)) > 0.1


def test_gate_sequence_with_flipped_y_equals_c():
    c = protocols.example_i_correction()
    seq = protocols.example_i_gate_sequence(y_sign=-1.0)
    phase = np.vdot(seq.ravel(), c.ravel())
    phase /= abs(phase)
    np.testing.assert_allclose(seq * phase, c, atol=1e-9)


def test_example_i_eigenstates_and_eigenvalues(ex1):
    h = ex1.nonhermitian()
    lams = []
    for psi in ex1.code_states:
        res, lam = eigen_residual(h, psi)
        assert res < 1e-9
        lams.append(lam)
    np.testing.assert_allclose(lams, [G - 0.5j * GAMMA, -G - 0.5j * GAMMA], atol=1e-12)


def test_printed_positive_sign_term_fails_eigencheck(ex1):
    h = ex1.nonhermitian(dephasing=False) + GAMMA / 2 * paulis(2, "y1 z2")
    res, _ = eigen_residual(h, ex1.code_states[0])
    assert res > 0.1


def test_example_i_no_click_blocks(ex1):
    # sigma_z basis of qubit 1 with the good qubit fixed to 0 or 1
    h = ex1.nonhermitian()
    for q2, sign in ((ZERO, 1), (ONE, -1)):
        basis = (tensor(UP, q2), tensor(DOWN, q2))
        block = np.array([[np.vdot(x, h @ y) for y in basis] for x in basis])
        expect = np.array([[-1j * GAMMA, G + sign * 0.5j * GAMMA],
                           [G - sign * 0.5j * GAMMA, 0]])
        np.testing.assert_allclose(block, expect, atol=1e-12)


def test_example_ii_parity(ex2):
    zz = paulis(3, "z2 z3")
    psi = ex2.code_states[0]
    assert qlin.expectation(psi, zz).real == pytest.approx(1)
    after = qlin.normalize(qlin.pauli_on(3, 2, "-") @ psi)
    assert qlin.expectation(after, zz).real == pytest.approx(-1)


@pytest.mark.parametrize("label", ["q1", "anc2", "anc3"])
def test_example_ii_corrections_restore_phase(ex2, label):
    phi = 0.37
    a, b = ex2.code_states
    psi = (np.exp(-1j * phi) * a + np.exp(1j * phi) * b) / np.sqrt(2)
    out = qlin.normalize(ex2.corrections[label] @ ex2.jump(label).op @ psi)
    assert abs(np.vdot(psi, out)) == pytest.approx(1, abs=1e-9)


def test_example_ii_eigenstates(ex2):
    h = ex2.nonhermitian()
    lams = []
    for psi in ex2.code_states:
        res, lam = eigen_residual(h, psi)
        assert res < 1e-9
        lams.append(lam)
    np.testing.assert_allclose(lams, [G - 1.5j * GAMMA, -G - 1.5j * GAMMA], atol=1e-12)


def test_example_ii_syndromes_split_odd_sector(ex2):
    total = sum(s.projector for s in ex2.syndromes)
    odd = (np.eye(8) - paulis(3, "z2 z3")) / 2
    np.testing.assert_allclose(total, odd, atol=1e-15)


def test_xy_theta_zero_is_example_i(ex1):
    xy = protocols.build_xy_code(0.0, G, GAMMA)
    for a, b in zip(xy.code_states, ex1.code_states):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(xy.corrections["q1"], ex1.corrections["q1"], atol=1e-12)
    np.testing.assert_allclose(xy.nonhermitian(), ex1.nonhermitian(), atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.4, np.pi / 2, 2.5])
def test_xy_code_states_signal_eigenstates(theta):
    code = protocols.build_xy_code(theta, G, GAMMA)
    s = code.signal(G)
    lams = []
    for psi in code.code_states:
        res, lam = eigen_residual(s, psi)
        assert res < 1e-12
        lams.append(lam.real)
    np.testing.assert_allclose(lams, [G, -G], atol=1e-12)


def test_xy_quarter_turn_senses_sigma_y():
    code = protocols.build_xy_code(np.pi / 2, G, GAMMA)
    y1 = qlin.pauli_on(2, 1, "y")
    vals = [qlin.expectation(psi, y1).real for psi in code.code_states]
    np.testing.assert_allclose(vals, [1, -1], atol=1e-12)


def test_general_code_reduces_to_xy():
    gen = protocols.build_general_signal_code(np.pi / 2, 0.0, G, GAMMA, 50.0)
    xy = protocols.build_xy_code(0.0, G, GAMMA)
    np.testing.assert_allclose(gen.signal(G), xy.signal(G), atol=1e-15)
    for a, b in zip(gen.code_states, xy.code_states):
        np.testing.assert_allclose(a, b, atol=1e-12)
    assert gen.dephasing.kind == "energy_gap"


def test_general_code_rejects_pure_z():
    with pytest.raises(ValueError):
        protocols.build_general_signal_code(0.0, 0.0, G, GAMMA, 50.0)


def test_general_code_frequency():
    theta = 1.0
    code = protocols.build_general_signal_code(theta, 0.3, G, GAMMA, 50.0)
    modes = master.slowest_modes(code, NoiseModel(gamma=GAMMA), G, 4)
    freq = max(abs(m.imag) for m in modes if abs(m.real) < 1e-3)
    assert freq == pytest.approx(2 * G * np.sin(theta), rel=0.05)


def test_homodyne_b_zero_reduces():
    code = protocols.build_homodyne_z(0.0, G, GAMMA)
    np.testing.assert_allclose(code.jumps[0].op, qlin.pauli_on(2, 1, "-"))
    np.testing.assert_allclose(protocols.homodyne_axis(0.0), [1, 0, 0])


@pytest.mark.parametrize("b", [0.3, 1.0, -2.0])
def test_homodyne_sigma_z_sensable(b):
    code = protocols.build_homodyne_z(b, G, GAMMA)
    z1 = qlin.pauli_on(2, 1, "z")
    gap = qlin.expectation(code.code_states[0], z1) - qlin.expectation(code.code_states[1], z1)
    assert abs(gap) > 1e-3


@given(st.floats(-5, 5, allow_nan=False))
def test_homodyne_decomposition_identity(b):
    z, x = qlin.SZ, qlin.SX
    rhs = (0.5 * (z / 2 + b * x) - b * (-b * z + x / 2)) / (b * b + 0.25)
    np.testing.assert_allclose(rhs, z, atol=1e-12)


def test_homodyne_extra_terms_cancel():
    code = protocols.build_homodyne_z(1.0, G, GAMMA)
    total = sum(code.extra_terms.values())
    np.testing.assert_allclose(total, 0, atol=1e-15)


def test_interferometer_equal_excitation():
    code = protocols.build_interferometer_code(0.3, 0.2, GAMMA)
    for psi in code.code_states:
        vals = [qlin.expectation(psi, qlin.dagger(j.op) @ j.op).real for j in code.jumps]
        np.testing.assert_allclose(vals, [0.5, 0.5], atol=1e-12)


def test_interferometer_degenerate_when_equal():
    code = protocols.build_interferometer_code(0.2, 0.2, GAMMA)
    s = code.signal(code.g)
    vals = [qlin.expectation(psi, s).real for psi in code.code_states]
    assert vals[0] == pytest.approx(vals[1])


def test_interferometer_frequency():
    code = protocols.build_interferometer_code(0.3, 0.2, GAMMA)
    cfg = master.MasterConfig(code, NoiseModel(gamma=GAMMA), code.g, 40.0, dt=0.005,
                              record_every=10)
    res = master.integrate(cfg)
    k = np.argmin(res.p[: int(2 * np.pi / 0.2 / 0.05)])
    # first minimum of (1 + cos(w t))/2 at w t = pi
    assert np.pi / res.times[k] == pytest.approx(2 * 0.1, rel=0.02)


ALL_CODES = [
    lambda: protocols.build_example_i(G, GAMMA),
    lambda: protocols.build_example_ii(G, GAMMA),
    lambda: protocols.build_xy_code(0.7, G, GAMMA),
    lambda: protocols.build_general_signal_code(1.1, 0.4, G, GAMMA, 50.0),
    lambda: protocols.build_homodyne_z(1.0, G, GAMMA),
    lambda: protocols.build_interferometer_code(0.3, 0.2, GAMMA),
]


@pytest.mark.parametrize("make", ALL_CODES)
def test_every_code_valid(make):
    code = make()
    code.validate()
    assert qlin.is_hermitian(code.hamiltonian())


@pytest.mark.parametrize("make", [ALL_CODES[0], ALL_CODES[1], ALL_CODES[2], ALL_CODES[5]])
def test_exact_term_codes_are_eigenstates(make):
    code = make()
    assert code.dephasing.kind == "exact_term"
    h = code.nonhermitian()
    for psi in code.code_states:
        assert eigen_residual(h, psi)[0] < 1e-9


@given(st.floats(0, 2 * np.pi))
def test_jump_and_correction_preserve_relative_phase(phi):
    code = protocols.build_example_i(G, GAMMA)
    a, b = code.code_states
    psi = (np.exp(-1j * phi) * a + np.exp(1j * phi) * b) / np.sqrt(2)
    out = qlin.normalize(code.corrections["q1"] @ code.jumps[0].op @ psi)
    assert 1 - abs(np.vdot(psi, out)) ** 2 < 1e-12


@given(st.floats(0, np.pi), st.floats(0.01, 3))
def test_frame_correction_unitary(theta, gamma):
    code = protocols.build_xy_code(theta, G, gamma)
    assert qlin.is_unitary(code.corrections["q1"])


def test_wrong_subspace_example_i(ex1):
    expect = qlin.projector(tensor(MINUS, ZERO), tensor(PLUS, ONE))
    np.testing.assert_allclose(ex1.wrong_projector(), expect, atol=1e-12)
    gap = paulis(2, "x1 z2")
    np.testing.assert_allclose(ex1.gap_op, ex1.code_projector() - expect, atol=1e-12)
    # on the four-dimensional space the gap operator is sigma_x^1 sigma_z^2
    np.testing.assert_allclose(ex1.gap_op, gap, atol=1e-12)


def test_readout_state(ex1):
    np.testing.assert_allclose(ex1.readout_state(0.0),
                               (tensor(PLUS, ZERO) + tensor(MINUS, ONE)) / np.sqrt(2))


@pytest.mark.parametrize("kw", [dict(kind="bogus"), dict(kind="energy_gap"),
                                dict(kind="zeno", zeno_interval=0.0)])
def test_strategy_validation(kw):
    with pytest.raises(ValueError):
        DephasingStrategy(**kw)


@pytest.mark.parametrize("kw", [dict(gamma=-1), dict(loss_alpha=1.5), dict(dark_rate=np.inf)])
def test_noise_validation(kw):
    with pytest.raises(ValueError):
        NoiseModel(**kw)


def test_build_by_name():
    code = protocols.build("example_i", g=G, gamma=GAMMA)
    assert code.name == "example_i"
    with pytest.raises(ValueError):
        protocols.build("nope")


def test_up_is_excited():
    np.testing.assert_allclose(qlin.SZ @ UP, UP)
