import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from hyperising import exact
from hyperising.exact import PureState
from hyperising.model import ModelParams, build_hamiltonian

from helpers import PAULIS, X, Z, brute_hamiltonian, embed, expm_h


def test_sparse_and_dense_hamiltonians_agree(deformed7):
    terms = build_hamiltonian(deformed7)
    np.testing.assert_allclose(exact.sparse_hamiltonian(terms).toarray(), exact.dense_hamiltonian(terms), atol=1e-13)


def test_basis_state_convention():
    psi = PureState.basis([0, 1, 1])
    # site 0 is the most significant bit; bit 1 is spin down
    assert np.argmax(np.abs(psi.amplitudes)) == 0b011
    np.testing.assert_allclose(exact.magnetization_profile(psi), [1, -1, -1])


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_magnetization_matches_kron_operators(axis, rng):
    N = 4
    v = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    psi = PureState(v, N)
    expect = [np.real(np.vdot(psi.amplitudes, embed({i: PAULIS[axis]}, N) @ psi.amplitudes)) for i in range(N)]
    np.testing.assert_allclose(exact.magnetization_profile(psi, axis), expect, atol=1e-12)


def test_free_spin_precession():
    # J = m = 0 and no deformation: each spin precesses about x with angle h t
    h = 1.3
    terms = build_hamiltonian(ModelParams(J=0.0, h=h, N=3))
    times = np.linspace(0, 4, 9)
    states = exact.evolve_exact_times(PureState.all_up(3), terms, times)
    for t, s in zip(times, states):
        np.testing.assert_allclose(exact.magnetization_profile(s), np.cos(h * t), atol=1e-12)


@pytest.mark.parametrize("N", [5, 11])
def test_evolution_matches_matrix_exponential(N):
    p = ModelParams(J=2.0, h=1.05, N=N, l_max=3.0)
    terms = build_hamiltonian(p)
    psi = PureState.basis([0, 1] * (N // 2) + [0] * (N % 2))
    out = exact.evolve_exact(psi, terms, 0.7)
    ref = scipy.linalg.expm(-0.7j * brute_hamiltonian(2.0, 1.05, 0.0, N, 3.0)) @ psi.amplitudes
    np.testing.assert_allclose(out.amplitudes, ref, atol=1e-9)


def test_ground_state_against_full_spectrum():
    p = ModelParams(J=1.5, h=0.8, N=6, l_max=2.0, m=0.1)
    E, psi = exact.ground_state(build_hamiltonian(p))
    H = brute_hamiltonian(1.5, 0.8, 0.1, 6, 2.0)
    assert E == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-10)
    assert np.real(np.vdot(psi.amplitudes, H @ psi.amplitudes)) == pytest.approx(E, abs=1e-10)


def test_ground_state_lanczos_path():
    p = ModelParams(J=4.0, h=3.0, N=11, l_max=3.0, m=0.25)
    terms = build_hamiltonian(p)
    E, psi = exact.ground_state(terms)
    assert E == pytest.approx(exact.energy(psi, terms), abs=1e-9)
    assert E == pytest.approx(np.linalg.eigvalsh(exact.dense_hamiltonian(terms))[0], abs=1e-9)


def test_paramagnet_ground_state():
    _, psi = exact.ground_state(build_hamiltonian(ModelParams(J=0.0, h=1.0, N=4)))
    np.testing.assert_allclose(exact.magnetization_profile(psi, "x"), -1.0, atol=1e-10)
    assert exact.entanglement_entropy(psi, 2) == pytest.approx(0.0, abs=1e-10)


def test_ghz_entropy_is_log2():
    v = np.zeros(16)
    v[0] = v[-1] = 1.0
    psi = PureState(v, 4)
    for cut in (1, 2, 3):
        assert exact.entanglement_entropy(psi, cut) == pytest.approx(np.log(2))


def test_entropy_from_schmidt_and_density_matrix_agree(rng):
    N = 5
    psi = PureState(rng.normal(size=32) + 1j * rng.normal(size=32), N)
    rho = exact.reduced_density_matrix(psi, [0, 1])
    assert exact.von_neumann_entropy(rho) == pytest.approx(exact.entanglement_entropy(psi, 2), abs=1e-10)


def test_thermofield_double_purifies_thermal_state():
    terms = build_hamiltonian(ModelParams(J=1.0, h=0.7, N=3, l_max=1.0))
    beta = 0.8
    tfd = exact.thermofield_double(terms, beta)
    rho_A = exact.reduced_density_matrix(tfd, [0, 1, 2])
    H = exact.dense_hamiltonian(terms)
    ref = scipy.linalg.expm(-beta * H)
    ref /= np.trace(ref)
    np.testing.assert_allclose(rho_A, ref, atol=1e-10)
    np.testing.assert_allclose(exact.thermal_density_matrix(terms, beta), ref, atol=1e-10)


def test_infinite_temperature_tfd_is_maximally_entangled():
    terms = build_hamiltonian(ModelParams(J=1.0, h=0.7, N=3))
    tfd = exact.thermofield_double(terms, 0.0)
    assert exact.entanglement_entropy(tfd, 3) == pytest.approx(3 * np.log(2))


def test_zz_correlations_of_product_state():
    psi = PureState.product([[1, 0], [np.cos(0.3), np.sin(0.3)], [0, 1]])
    z = exact.magnetization_profile(psi)
    np.testing.assert_allclose(exact.zz_correlations(psi), np.outer(z, z) + np.diag(1 - z**2), atol=1e-12)


def _brute_otoc(H, w, v, t, N, w_op="z", v_op="z"):
    U = expm_h(H, t)
    W = U.conj().T @ embed({w: PAULIS[w_op]}, N) @ U
    V = embed({v: PAULIS[v_op]}, N)
    return np.real(np.trace(W @ V @ W @ V)) / 2**N


@pytest.mark.parametrize("ops", [("z", "z"), ("x", "x")])
def test_infinite_temperature_otoc_against_trace_formula(ops):
    N = 4
    p = ModelParams(J=2.0, h=1.05, N=N, l_max=1.5)
    H = brute_hamiltonian(2.0, 1.05, 0.0, N, 1.5)
    terms = build_hamiltonian(p)
    for t in (0.0, 0.6, 1.7):
        for v in range(N):
            got = exact.otoc_exact_infT(terms, 1, v, t, *ops)
            assert got == pytest.approx(_brute_otoc(H, 1, v, t, N, *ops), abs=1e-10)


def test_otoc_profile_matches_pointwise(deformed7):
    terms = build_hamiltonian(deformed7)
    times = np.array([0.0, 0.5, 1.25])
    prof = exact.otoc_exact_infT_profile(terms, 3, times, "z", "x")
    for k, t in enumerate(times):
        for v in range(7):
            assert prof[v, k] == pytest.approx(exact.otoc_exact_infT(terms, 3, v, t, "z", "x"), abs=1e-10)


def test_otoc_profile_with_trotter_step(deformed7):
    from hyperising.mps.gates import layer_unitary, trotter_layer

    terms = build_hamiltonian(deformed7)
    step = layer_unitary(trotter_layer(terms, 0.1), 7)
    times = np.array([0.0, 0.3, 1.0])
    prof = exact.otoc_exact_infT_profile(terms, 3, times, step=step, dt=0.1)
    for k, t in enumerate(times):
        U = np.linalg.matrix_power(step, round(t / 0.1))
        assert prof[5, k] == pytest.approx(exact.otoc_exact_infT(terms, 3, 5, t, U=U), abs=1e-10)


def test_otoc_at_time_zero():
    terms = build_hamiltonian(ModelParams(J=1.0, h=1.0, N=5, l_max=2.0))
    prof = exact.otoc_exact_infT_profile(terms, 2, [0.0], "z", "z")
    np.testing.assert_allclose(prof[:, 0], 1.0, atol=1e-12)
    # anticommuting operators on the same site
    assert exact.otoc_exact_infT(terms, 2, 2, 0.0, "z", "x") == pytest.approx(-1.0)


def test_eigenstate_otoc_of_commuting_operators():
    terms = build_hamiltonian(ModelParams(J=1.0, h=1.0, N=4))
    _, psi = exact.ground_state(terms)
    assert exact.otoc_exact_eig(terms, psi, 1, 3, 0.0) == pytest.approx(1.0)
    val = exact.otoc_exact_eig_complex(terms, psi, 1, 3, 0.8)
    H = exact.dense_hamiltonian(terms)
    U = expm_h(H, 0.8)
    W = U.conj().T @ embed({1: Z}, 4) @ U
    V = embed({3: Z}, 4)
    a = psi.amplitudes
    assert val == pytest.approx(np.vdot(a, W @ V @ W @ V @ a), abs=1e-10)


def test_double_commutator():
    assert exact.double_commutator(1.0) == 0.0
    assert exact.double_commutator(-1.0) == 4.0


def test_dimension_limits():
    terms = build_hamiltonian(ModelParams(J=1.0, h=1.0, N=exact.DENSE_LIMIT + 1))
    with pytest.raises(exact.DimensionLimitError):
        exact.evolve_exact(PureState.all_up(terms.N), terms, 0.1)
    with pytest.raises(exact.DimensionLimitError):
        exact.local_operator("z", 0, exact.DENSE_MATRIX_LIMIT + 1)


@given(st.integers(1, 5), st.integers(0, 4), st.sampled_from(["x", "y", "z"]))
def test_apply_local_matches_kron(N, site, op):
    site = site % N
    vec = np.arange(2**N, dtype=complex) + 1j
    np.testing.assert_allclose(exact.apply_local(vec, op, site, N), embed({site: PAULIS[op]}, N) @ vec)


def test_apply_two_site_matches_kron(rng):
    N = 4
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    vec = rng.normal(size=16) + 0j
    full = np.kron(np.kron(np.eye(2), G), np.eye(2))
    np.testing.assert_allclose(exact.apply_two_site(vec, G, 1, 2, N), full @ vec, atol=1e-12)


def test_state_normalization_and_size_checks():
    psi = PureState([3.0, 4.0], 1)
    assert psi.norm() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        PureState([1.0, 0.0, 0.0], 1)
    with pytest.raises(ValueError):
        PureState([0.0, 0.0], 1)


def test_x_operator_helper_is_pauli():
    np.testing.assert_allclose(exact.local_operator("x", 0, 1), X)
