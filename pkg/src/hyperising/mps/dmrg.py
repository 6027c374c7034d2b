"""Two-site DMRG for nearest-neighbour Ising-type Hamiltonians."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..exact import PAULI
from ..model import HamiltonianTerms
from .mpo import MatrixProductOperator
from .mps import MatrixProductState, TruncationPolicy, svd_truncate

logger = logging.getLogger(__name__)

# effective problems at most this large are diagonalized densely
DENSE_EIG_LIMIT = 512


class ConvergenceWarning(RuntimeWarning):
    """DMRG sweep budget exhausted before the energy settled."""


def hamiltonian_mpo(terms: HamiltonianTerms) -> MatrixProductOperator:
    """Bond-dimension-3 MPO of ``sum c_b Z_b Z_{b+1} + sum (x_i X_i + z_i Z_i)``.

    Lower-triangular convention: the state index runs (done, Z pending, start),
    so the left boundary picks row 2 and the right boundary column 0.
    """
    if not terms.nearest_neighbour:
        raise ValueError("MPO construction needs nearest-neighbour bonds")
    N = terms.N
    I, X, Z = PAULI["i"], PAULI["x"], PAULI["z"]
    bc = terms.bond_coefficients()
    xc, zc = terms.x_coefficients(), terms.z_coefficients()
    tensors = []
    for i in range(N):
        W = np.zeros((3, 2, 2, 3), dtype=complex)
        W[0, :, :, 0] = I
        W[1, :, :, 0] = Z
        W[2, :, :, 0] = xc[i] * X + zc[i] * Z + (terms.constant / N) * I
        if i < N - 1:
            W[2, :, :, 1] = bc[i] * Z
        W[2, :, :, 2] = I
        tensors.append(W)
    tensors[0] = tensors[0][2:3]
    tensors[-1] = tensors[-1][..., 0:1]
    return MatrixProductOperator(tensors)


def mpo_expectation(state: MatrixProductState, H: MatrixProductOperator) -> float:
    """``<psi|H|psi> / <psi|psi>``."""
    env = np.ones((1, 1, 1), dtype=complex)
    for A, W in zip(state.tensors, H.tensors):
        env = np.einsum("awb,asc,wstv,btd->cvd", env, A.conj(), W, A, optimize=True)
    norm = state.norm() ** 2
    return float(np.real(env.reshape(-1)[0]) / norm)


@dataclass
class DMRGResult:
    energy: float
    state: MatrixProductState
    energies: list[float] = field(default_factory=list)
    converged: bool = True
    sweeps: int = 0
    monotone: bool = True

    @property
    def max_bond(self) -> int:
        return max(self.state.bond_dimensions, default=1)


def _left_env(L, A, W):
    # L (a: bra, w: mpo, b: ket)
    return np.einsum("awb,asc,wstv,btd->cvd", L, A.conj(), W, A, optimize=True)


def _right_env(R, B, W):
    return np.einsum("cvd,asc,wstv,btd->awb", R, B.conj(), W, B, optimize=True)


def _effective_matvec(L, W1, W2, R, shape):
    def matvec(x):
        x = x.reshape(shape)
        # x legs (b, t1, t2, d)
        y = np.einsum("awb,btud->awtud", L, x, optimize=True)
        y = np.einsum("awtud,wstv->avsud", y, W1, optimize=True)
        y = np.einsum("avsud,vruz->asrzd", y, W2, optimize=True)
        y = np.einsum("asrzd,czd->asrc", y, R, optimize=True)
        return y.reshape(-1)

    return matvec


def _effective_dense(L, W1, W2, R):
    H = np.einsum("awb,wstv,vruz,czd->asrcbtud", L, W1, W2, R, optimize=True)
    dim = int(np.prod(H.shape[:4]))
    H = H.reshape(dim, dim)
    return 0.5 * (H + H.conj().T)


def _lowest_eigenpair(L, W1, W2, R, shape, v0, tol):
    dim = int(np.prod(shape))
    if dim <= DENSE_EIG_LIMIT:
        w, v = np.linalg.eigh(_effective_dense(L, W1, W2, R))
        return float(w[0]), v[:, 0]
    matvec = _effective_matvec(L, W1, W2, R, shape)
    op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    w, v = spla.eigsh(op, k=1, which="SA", v0=v0, tol=tol, ncv=min(dim, 20))
    return float(w[0]), v[:, 0]


def dmrg(
    terms: HamiltonianTerms,
    policy: TruncationPolicy | None = None,
    sweeps: int = 50,
    seed: int = 0,
    initial: MatrixProductState | None = None,
    energy_tol: float = 1e-10,
    min_sweeps: int = 2,
    eig_tol: float = 1e-13,
) -> DMRGResult:
    """Ground state by two-site DMRG.

    Parameters
    ----------
    policy : TruncationPolicy
        Defaults to cutoff 1e-12 and ``chi_max = 64``.
    sweeps : int
        Budget of full (left-right-left) sweeps. The run stops early once the
        energy changes by less than ``energy_tol`` between sweeps.
    seed : int
        Seed of the random product start when ``initial`` is not given.

    Returns
    -------
    DMRGResult
        ``energies`` holds the energy after every sweep; ``converged`` is
        False (with a :class:`ConvergenceWarning`) when the budget ran out.
    """
    N = terms.N
    if N < 2:
        raise ValueError("DMRG needs N >= 2")
    policy = policy or TruncationPolicy(1e-12, 64)
    H = hamiltonian_mpo(terms)
    Ws = H.tensors
    psi = (initial.copy() if initial is not None else MatrixProductState.random_product(N, seed))
    psi.canonicalize(0)
    psi.normalize()

    R = [None] * (N + 1)
    R[N] = np.ones((1, 1, 1), dtype=complex)
    for i in range(N - 1, 0, -1):
        R[i] = _right_env(R[i + 1], psi.tensors[i], Ws[i])
    L = [None] * (N + 1)
    L[0] = np.ones((1, 1, 1), dtype=complex)

    energies: list[float] = []
    converged = False
    E = np.inf

    def update(i, move):
        A, B = psi.tensors[i], psi.tensors[i + 1]
        theta = np.tensordot(A, B, axes=(2, 0))
        shape = theta.shape
        e, vec = _lowest_eigenpair(L[i], Ws[i], Ws[i + 1], R[i + 2], shape, theta.reshape(-1), eig_tol)
        chi_l, _, _, chi_r = shape
        U, S, Vh, w, cap = svd_truncate(vec.reshape(chi_l * 2, 2 * chi_r), policy)
        S = S / np.linalg.norm(S)
        if move == "right":
            psi.tensors[i] = U.reshape(chi_l, 2, -1)
            psi.tensors[i + 1] = (S[:, None] * Vh).reshape(-1, 2, chi_r)
            psi.center = i + 1
            L[i + 1] = _left_env(L[i], psi.tensors[i], Ws[i])
        else:
            psi.tensors[i] = (U * S[None, :]).reshape(chi_l, 2, -1)
            psi.tensors[i + 1] = Vh.reshape(-1, 2, chi_r)
            psi.center = i
            R[i + 1] = _right_env(R[i + 2], psi.tensors[i + 1], Ws[i + 1])
        psi.log.record(w, cap)
        return e

    n_done = 0
    for sweep in range(sweeps):
        for i in range(N - 1):
            e = update(i, "right")
        for i in range(N - 2, -1, -1):
            e = update(i, "left")
        n_done = sweep + 1
        energies.append(e + 0.0)
        logger.debug("sweep %d: E = %.14f, chi = %d", n_done, e, max(psi.bond_dimensions))
        if n_done >= min_sweeps and abs(E - e) < energy_tol:
            converged = True
            E = e
            break
        E = e

    monotone = all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(energies, energies[1:]))
    if not converged:
        warnings.warn(
            f"DMRG not converged after {n_done} sweeps "
            f"(last change {abs(energies[-1] - energies[-2]) if len(energies) > 1 else np.inf:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    psi.canonicalize(0)
    return DMRGResult(mpo_expectation(psi, H), psi, energies, converged, n_done, monotone)
