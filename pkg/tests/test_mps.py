import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperising import exact
from hyperising.exact import PureState
from hyperising.model import ModelParams, build_hamiltonian
from hyperising.mps import gates
from hyperising.mps.mps import MatrixProductState, TruncationPolicy, svd_truncate
from hyperising.mps.tebd import TruncationWarning, magnetization_trajectory, tebd_evolve

from helpers import Z, brute_hamiltonian, embed, expm_h


def _random_mps_dense(rng, N):
    v = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    return v / np.linalg.norm(v)


@given(st.integers(2, 40), st.integers(2, 40), st.floats(1e-14, 1e-1), st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_svd_truncation_respects_policy(m, n, cutoff, chi, seed):
    mat = np.random.default_rng(seed).normal(size=(m, n))
    U, S, Vh, w, cap = svd_truncate(mat, TruncationPolicy(cutoff, chi))
    s_all = np.linalg.svd(mat, compute_uv=False)
    ref_w = np.sum(s_all[S.size:] ** 2) / np.sum(s_all**2)
    assert w == pytest.approx(ref_w, abs=1e-12)
    assert S.size <= chi
    if not cap:
        assert w <= cutoff
    # approximation error equals the discarded weight
    err = np.linalg.norm(mat - (U * S) @ Vh) ** 2 / np.sum(s_all**2)
    assert err == pytest.approx(ref_w, abs=1e-10)


def test_svd_of_zero_matrix():
    U, S, Vh, w, cap = svd_truncate(np.zeros((3, 3)), TruncationPolicy())
    assert S.size == 1 and w == 0.0 and not cap


def test_dense_roundtrip_and_canonical_forms(rng):
    N = 6
    v = _random_mps_dense(rng, N)
    psi = MatrixProductState.from_dense(v, N)
    np.testing.assert_allclose(psi.to_dense(), v, atol=1e-12)
    for c in (0, 3, 5, 2):
        psi.canonicalize(c)
        np.testing.assert_allclose(psi.to_dense(), v, atol=1e-12)
        assert psi.norm() == pytest.approx(1.0)
    # left-canonical tensors left of the center are isometries
    psi.canonicalize(4)
    for t in psi.tensors[:4]:
        m = t.reshape(-1, t.shape[2])
        np.testing.assert_allclose(m.conj().T @ m, np.eye(t.shape[2]), atol=1e-12)


def test_measurements_match_dense_state(rng):
    N = 6
    v = _random_mps_dense(rng, N)
    psi = MatrixProductState.from_dense(v, N)
    ref = PureState(v, N)
    for axis in ("x", "y", "z"):
        got = np.real(psi.local_expectations(exact.PAULI[axis]))
        np.testing.assert_allclose(got, exact.magnetization_profile(ref, axis), atol=1e-12)
    np.testing.assert_allclose(psi.two_point_zz(), exact.zz_correlations(ref), atol=1e-12)
    for b in range(N - 1):
        assert psi.entanglement_entropy(b) == pytest.approx(exact.entanglement_entropy(ref, b + 1), abs=1e-10)
    assert psi.half_chain_entropy() == pytest.approx(exact.entanglement_entropy(ref, N // 2), abs=1e-10)
    assert psi.probability_of(0, 2) == pytest.approx((1 + exact.magnetization_profile(ref)[2]) / 2)


def test_product_state_constructors():
    psi = MatrixProductState.basis([0, 1, 0])
    np.testing.assert_allclose(psi.to_dense(), PureState.basis([0, 1, 0]).amplitudes)
    assert psi.bond_dimensions == [1, 1]
    with pytest.raises(ValueError):
        MatrixProductState([np.ones((1, 2, 2)), np.ones((3, 2, 1))])


@given(st.integers(2, 7), st.floats(0, 4))
def test_bond_hamiltonians_sum_to_full_hamiltonian(N, l_max):
    terms = build_hamiltonian(ModelParams(J=1.7, h=0.9, N=N, l_max=l_max, m=0.4))
    total = np.zeros((2**N, 2**N), dtype=complex)
    for b, hb in enumerate(gates.bond_hamiltonians(terms)):
        total += np.kron(np.kron(np.eye(2**b), hb), np.eye(2 ** (N - b - 2)))
    np.testing.assert_allclose(total, brute_hamiltonian(1.7, 0.9, 0.4, N, l_max), atol=1e-12)


@pytest.mark.parametrize("order,expected", [(1, 4.0), (2, 8.0)])
def test_single_step_error_order(order, expected):
    # local error of one step is O(dt^2) for Lie-Trotter and O(dt^3) for Strang
    terms = build_hamiltonian(ModelParams(J=2.0, h=1.05, N=5, l_max=3.0, m=0.25))
    H = exact.dense_hamiltonian(terms)
    errs = []
    for dt in (0.02, 0.01):
        step = gates.layer_unitary(gates.trotter_layer(terms, dt, order=order), 5)
        errs.append(np.linalg.norm(step - expm_h(H, dt), 2))
    assert errs[0] / errs[1] == pytest.approx(expected, rel=0.1)


@pytest.mark.parametrize("ordering", gates.ORDERINGS)
def test_layer_dagger_inverts_step(ordering):
    terms = build_hamiltonian(ModelParams(J=1.0, h=0.6, N=5, l_max=2.0))
    layer = gates.trotter_layer(terms, 0.3, ordering)
    U = gates.layer_unitary(layer, 5)
    Ud = gates.layer_unitary(layer.dagger(), 5)
    np.testing.assert_allclose(Ud @ U, np.eye(32), atol=1e-12)


def test_unknown_ordering_rejected():
    terms = build_hamiltonian(ModelParams(J=1.0, h=0.6, N=3))
    with pytest.raises(ValueError):
        gates.trotter_layer(terms, 0.1, "zigzag")
    with pytest.raises(ValueError):
        gates.trotter_layer(terms, 0.1, order=3)


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("ordering", gates.ORDERINGS)
def test_tebd_matches_matched_dense_trotter(order, ordering):
    p = ModelParams(J=2.0, h=1.05, N=6, l_max=3.0, m=0.25)
    terms = build_hamiltonian(p)
    n = 25
    psi = tebd_evolve(MatrixProductState.all_up(6), terms, 0.04, n, TruncationPolicy(0.0, 64), ordering, order)
    U = gates.trotter_unitary(terms, 0.04, n, ordering, order)
    ref = U @ PureState.all_up(6).amplitudes
    np.testing.assert_allclose(psi.to_dense(), ref, atol=1e-10)


def test_magnetization_trajectory_sampling():
    p = ModelParams(J=2.0, h=1.05, N=5, l_max=1.0)
    times, vals = magnetization_trajectory(MatrixProductState.all_up(5), build_hamiltonian(p), 0.05, 20, 5)
    np.testing.assert_allclose(times, [0, 0.25, 0.5, 0.75, 1.0])
    assert vals.shape == (5, 5)
    np.testing.assert_allclose(vals[0], 1.0)


def test_truncation_warning_when_bond_capped():
    p = ModelParams(J=2.0, h=1.05, N=8, l_max=0.0)
    with pytest.warns(TruncationWarning):
        psi = tebd_evolve(MatrixProductState.all_up(8), build_hamiltonian(p), 0.1, 20, TruncationPolicy(1e-14, 2))
    assert max(psi.bond_dimensions) <= 2
    assert psi.log.total > 0
    assert len(psi.step_discarded) == 20


def test_tebd_rejects_bad_input():
    terms = build_hamiltonian(ModelParams(J=1.0, h=1.0, N=4))
    with pytest.raises(ValueError):
        tebd_evolve(MatrixProductState.all_up(4), terms, -0.1, 1)
    with pytest.raises(ValueError):
        tebd_evolve(MatrixProductState.all_up(3), terms, 0.1, 1)


def test_tebd_preserves_norm_without_truncation():
    terms = build_hamiltonian(ModelParams(J=2.0, h=1.0, N=7, l_max=2.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        psi = tebd_evolve(MatrixProductState.all_up(7), terms, 0.05, 30, TruncationPolicy(0.0, 128))
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)


def test_z_operator_helper():
    np.testing.assert_allclose(embed({0: Z}, 1), exact.PAULI["z"])
