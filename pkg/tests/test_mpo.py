import numpy as np
import pytest

from hyperising import exact
from hyperising.model import ModelParams, build_hamiltonian
from hyperising.mps.gates import trotter_unitary
from hyperising.mps.mpo import (
    MatrixProductOperator,
    conjugation_superoperator,
    heisenberg_evolve_mpo,
    otoc_mpo_infT,
    otoc_profile,
    trace_network,
)
from hyperising.mps.mps import TruncationPolicy

from helpers import PAULIS, embed


def test_dense_roundtrip(rng):
    N = 4
    A = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    np.testing.assert_allclose(MatrixProductOperator.from_dense(A, N).to_dense(), A, atol=1e-12)


def test_local_operator_and_norm():
    W = MatrixProductOperator.local("z", 2, 5)
    np.testing.assert_allclose(W.to_dense(), embed({2: PAULIS["z"]}, 5))
    # Frobenius norm of a Pauli string on N sites is sqrt(2^N)
    assert W.frobenius_norm() == pytest.approx(np.sqrt(32))


def test_conjugation_superoperator(rng):
    for shape in ((2, 2), (4, 4)):
        A = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        B = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        O = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        S = conjugation_superoperator(A, B)
        if shape == (2, 2):
            vec = O.reshape(-1)
            out = (S @ vec).reshape(2, 2)
        else:
            # doubled ordering (out1, in1, out2, in2)
            vec = O.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(-1)
            out = (S @ vec).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
        np.testing.assert_allclose(out, A @ O @ B, atol=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_heisenberg_evolution_matches_dense(order):
    p = ModelParams(J=2.0, h=1.05, N=6, l_max=3.0, m=0.25)
    terms = build_hamiltonian(p)
    n, dt = 20, 0.05
    W = MatrixProductOperator.local("z", 2, 6)
    Wt = heisenberg_evolve_mpo(W, terms, dt, n, TruncationPolicy(0.0, 256), order=order)
    U = trotter_unitary(terms, dt, n, order=order)
    ref = U.conj().T @ embed({2: PAULIS["z"]}, 6) @ U
    rel = np.linalg.norm(Wt.to_dense() - ref) / np.linalg.norm(ref)
    assert rel < 1e-10


def test_truncation_error_bounded_by_discarded_weight():
    # each split perturbs the unit-norm operator by at most sqrt(w), and the
    # remaining gates are norm preserving, so errors add up to sum sqrt(w)
    p = ModelParams(J=2.0, h=1.05, N=7, l_max=3.0, m=0.25)
    terms = build_hamiltonian(p)
    W = MatrixProductOperator.local("z", 3, 7)
    Wt = heisenberg_evolve_mpo(W, terms, 0.05, 40, TruncationPolicy(1e-8, 256))
    U = trotter_unitary(terms, 0.05, 40)
    ref = U.conj().T @ embed({3: PAULIS["z"]}, 7) @ U
    rel = np.linalg.norm(Wt.to_dense() / Wt.frobenius_norm() - ref / np.linalg.norm(ref))
    bound = np.sum(np.sqrt(Wt.log.discarded))
    assert Wt.log.total > 0
    assert rel <= bound


def test_trace_network_directions_and_dense(rng):
    N = 3
    ops = [MatrixProductOperator.from_dense(rng.normal(size=(8, 8)), N) for _ in range(4)]
    dense = [o.to_dense() for o in ops]
    ref = np.trace(dense[0] @ dense[1] @ dense[2] @ dense[3]) / 8
    assert trace_network(ops, "left") == pytest.approx(ref, abs=1e-10)
    assert trace_network(ops, "right") == pytest.approx(ref, abs=1e-10)


def test_otoc_profile_against_exact():
    p = ModelParams(J=2.0, h=1.05, N=6, l_max=3.0)
    terms = build_hamiltonian(p)
    dt, n = 0.05, 30
    W = MatrixProductOperator.local("x", 2, 6)
    Wt = heisenberg_evolve_mpo(W, terms, dt, n, TruncationPolicy(0.0, 256))
    U = trotter_unitary(terms, dt, n)
    for v_op in ("x", "z"):
        prof = otoc_profile(Wt, v_op)
        ref = [exact.otoc_exact_infT(terms, 2, v, dt * n, "x", v_op, U=U) for v in range(6)]
        np.testing.assert_allclose(prof, ref, atol=1e-8)
        V = MatrixProductOperator.local(v_op, 4, 6)
        assert otoc_mpo_infT(Wt, V) == pytest.approx(ref[4], abs=1e-8)


def test_zero_steps_is_identity_map():
    terms = build_hamiltonian(ModelParams(J=1.0, h=1.0, N=3))
    W = MatrixProductOperator.local("z", 1, 3)
    np.testing.assert_allclose(heisenberg_evolve_mpo(W, terms, 0.1, 0).to_dense(), W.to_dense())


def test_invalid_tensor_shape():
    with pytest.raises(ValueError):
        MatrixProductOperator([np.ones((1, 2, 3, 1))])
