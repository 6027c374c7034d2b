"""Dense state-vector engine for small chains.

This is the oracle every tensor-network and protocol path is checked
against. Basis convention: computational index ``k`` has site 0 as its most
significant bit, and bit value 0 is spin up (``Z = +1``).

Matrices are materialized up to ``DENSE_MATRIX_LIMIT`` sites; vector-only
operations (Krylov evolution, sparse ground states) run up to
``DENSE_LIMIT`` sites.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import HamiltonianTerms

DENSE_LIMIT = 14
DENSE_MATRIX_LIMIT = 12
SPECTRAL_LIMIT = 10
# full diagonalization below this size, Lanczos above
DENSE_EIGH_LIMIT = 9

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionLimitError(ValueError):
    """Raised when a dense operation is requested beyond the configured size."""


def _check_limit(N: int, limit: int, what: str) -> None:
    if N > limit:
        raise DimensionLimitError(f"{what} supports N <= {limit}, got N = {N}; use the MPS engine")


@dataclass
class PureState:
    """Normalized amplitude vector on ``N`` qubits."""

    amplitudes: np.ndarray
    N: int

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.N:
            raise ValueError(f"expected {2 ** self.N} amplitudes, got {self.amplitudes.size}")
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > 1e-12:
            if nrm == 0:
                raise ValueError("zero state vector")
            self.amplitudes = self.amplitudes / nrm

    @classmethod
    def product(cls, local_states) -> PureState:
        """Tensor product of single-site 2-vectors (site 0 first)."""
        vec = np.ones(1, dtype=complex)
        for s in local_states:
            s = np.asarray(s, dtype=complex)
            vec = np.kron(vec, s / np.linalg.norm(s))
        return cls(vec, len(local_states))

    @classmethod
    def basis(cls, bits) -> PureState:
        """Computational basis state; ``bits[i] == 0`` is spin up at site ``i``."""
        N = len(bits)
        k = 0
        for b in bits:
            k = 2 * k + int(b)
        vec = np.zeros(2**N, dtype=complex)
        vec[k] = 1.0
        return cls(vec, N)

    @classmethod
    def all_up(cls, N: int) -> PureState:
        return cls.basis([0] * N)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> PureState:
        return PureState(self.amplitudes.copy(), self.N)


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


# ---------------------------------------------------------------------------
# operator assembly


@lru_cache(maxsize=None)
def _z_signs(N: int) -> np.ndarray:
    """``signs[i, k]`` is the Z eigenvalue of site ``i`` in basis state ``k``."""
    k = np.arange(2**N)
    bits = (k[None, :] >> (N - 1 - np.arange(N))[:, None]) & 1
    signs = 1 - 2 * bits
    signs.setflags(write=False)
    return signs


def diagonal_part(terms: HamiltonianTerms) -> np.ndarray:
    """Diagonal of the ZZ and Z terms in the computational basis."""
    N = terms.N
    s = _z_signs(N)
    diag = np.full(2**N, terms.constant, dtype=float)
    for i, j, c in terms.bond_terms:
        diag += c * s[i] * s[j]
    for i, c in terms.z_terms:
        diag += c * s[i]
    return diag


def sparse_hamiltonian(terms: HamiltonianTerms, limit: int = DENSE_LIMIT) -> sp.csr_matrix:
    N = terms.N
    _check_limit(N, limit, "sparse_hamiltonian")
    dim = 2**N
    k = np.arange(dim)
    H = sp.diags(diagonal_part(terms), format="csr")
    rows, cols, vals = [], [], []
    for i, c in terms.x_terms:
        if c == 0.0:
            continue
        rows.append(k)
        cols.append(k ^ (1 << (N - 1 - i)))
        vals.append(np.full(dim, c))
    if rows:
        off = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )
        H = H + off
    return H.tocsr()


def dense_hamiltonian(terms: HamiltonianTerms, limit: int = DENSE_MATRIX_LIMIT) -> np.ndarray:
    """Hermitian ``2^N x 2^N`` matrix of the Hamiltonian."""
    _check_limit(terms.N, limit, "dense_hamiltonian")
    return sparse_hamiltonian(terms, limit=limit).toarray().astype(complex)


def local_operator(op, site: int, N: int) -> np.ndarray:
    """Dense matrix of a single-site operator (a Pauli label or a 2x2 array)."""
    _check_limit(N, DENSE_MATRIX_LIMIT, "local_operator")
    mat = PAULI[op] if isinstance(op, str) else np.asarray(op, dtype=complex)
    left = np.eye(2**site, dtype=complex)
    right = np.eye(2 ** (N - site - 1), dtype=complex)
    return np.kron(np.kron(left, mat), right)


def apply_local(vec: np.ndarray, op, site: int, N: int) -> np.ndarray:
    """Apply a single-site 2x2 operator to a state vector (or a batch of them).

    ``vec`` may have leading batch dimensions; the last axis is the
    ``2^N`` amplitude index.
    """
    mat = PAULI[op] if isinstance(op, str) else np.asarray(op, dtype=complex)
    shape = vec.shape
    v = vec.reshape(shape[:-1] + (2**site, 2, 2 ** (N - site - 1)))
    v = np.einsum("ab,...ibj->...iaj", mat, v)
    return v.reshape(shape)


def apply_two_site(vec: np.ndarray, gate: np.ndarray, i: int, j: int, N: int) -> np.ndarray:
    """Apply a 4x4 gate acting on sites ``(i, j)`` (first index = site ``i``)."""
    shape = vec.shape
    batch = shape[:-1]
    v = vec.reshape(batch + (2,) * N)
    g = np.asarray(gate, dtype=complex).reshape(2, 2, 2, 2)
    nb = len(batch)
    ai, aj = nb + i, nb + j
    v = np.tensordot(v, g, axes=([ai, aj], [2, 3]))
    # tensordot puts the new (i, j) axes last
    v = np.moveaxis(v, [-2, -1], [ai, aj])
    return np.ascontiguousarray(v).reshape(shape)


# ---------------------------------------------------------------------------
# spectra and evolution


def spectral_decomposition(terms: HamiltonianTerms) -> SpectralDecomposition:
    w, v = np.linalg.eigh(dense_hamiltonian(terms))
    return SpectralDecomposition(w, v)


def propagator(terms: HamiltonianTerms, t: float) -> np.ndarray:
    """Dense ``exp(-i H t)``."""
    spec = spectral_decomposition(terms)
    v = spec.eigenvectors
    return (v * np.exp(-1j * spec.eigenvalues * t)) @ v.conj().T


def evolve_exact(state: PureState, terms: HamiltonianTerms, t: float) -> PureState:
    """Return ``exp(-i H t) |state>``."""
    if state.N != terms.N:
        raise ValueError("state and Hamiltonian sizes differ")
    _check_limit(terms.N, DENSE_LIMIT, "evolve_exact")
    if t == 0:
        return state.copy()
    if terms.N <= SPECTRAL_LIMIT:
        spec = spectral_decomposition(terms)
        v = spec.eigenvectors
        c = v.conj().T @ state.amplitudes
        out = v @ (np.exp(-1j * spec.eigenvalues * t) * c)
    else:
        H = sparse_hamiltonian(terms)
        out = spla.expm_multiply(-1j * t * H, state.amplitudes)
    return PureState(out, state.N)


def evolve_exact_times(state: PureState, terms: HamiltonianTerms, times) -> list[PureState]:
    """Exact evolution sampled on a time grid (one diagonalization)."""
    times = np.asarray(times, dtype=float)
    if terms.N <= SPECTRAL_LIMIT:
        spec = spectral_decomposition(terms)
        v = spec.eigenvectors
        c = v.conj().T @ state.amplitudes
        return [PureState(v @ (np.exp(-1j * spec.eigenvalues * t) * c), state.N) for t in times]
    return [evolve_exact(state, terms, t) for t in times]


def ground_state(terms: HamiltonianTerms) -> tuple[float, PureState]:
    """Lowest eigenpair. Degenerate levels return an arbitrary vector in the span."""
    _check_limit(terms.N, DENSE_LIMIT, "ground_state")
    if terms.N <= DENSE_EIGH_LIMIT:
        w, v = np.linalg.eigh(dense_hamiltonian(terms))
        return float(w[0]), PureState(v[:, 0], terms.N)
    H = sparse_hamiltonian(terms)
    w, v = spla.eigsh(H, k=1, which="SA", tol=1e-13)
    return float(w[0]), PureState(v[:, 0], terms.N)


# ---------------------------------------------------------------------------
# observables


def expectation(state: PureState, op: np.ndarray) -> complex:
    a = state.amplitudes
    return complex(np.vdot(a, op @ a))


def energy(state: PureState, terms: HamiltonianTerms) -> float:
    H = sparse_hamiltonian(terms)
    return float(np.real(np.vdot(state.amplitudes, H @ state.amplitudes)))


def magnetization_profile(state: PureState, axis: str = "z") -> np.ndarray:
    """Site expectation values of ``sigma^axis``."""
    N = state.N
    a = state.amplitudes
    if axis == "z":
        p = np.abs(a) ** 2
        return _z_signs(N) @ p
    out = np.empty(N)
    for i in range(N):
        out[i] = np.real(np.vdot(a, apply_local(a, axis, i, N)))
    return out


def zz_correlations(state: PureState) -> np.ndarray:
    """Matrix of ``<Z_i Z_j>`` (ones on the diagonal)."""
    s = _z_signs(state.N)
    p = np.abs(state.amplitudes) ** 2
    return (s * p) @ s.T


def reduced_density_matrix(state: PureState, sites) -> np.ndarray:
    """Density matrix of ``sites`` (kept in increasing order)."""
    N = state.N
    keep = sorted(int(s) for s in sites)
    rest = [s for s in range(N) if s not in keep]
    psi = state.amplitudes.reshape((2,) * N).transpose(keep + rest)
    psi = psi.reshape(2 ** len(keep), -1)
    return psi @ psi.conj().T


def entanglement_entropy(state: PureState, cut: int) -> float:
    """Von Neumann entropy (natural log) of sites ``0..cut-1``."""
    N = state.N
    if not 1 <= cut <= N - 1:
        raise ValueError(f"cut must satisfy 1 <= cut <= N-1, got {cut}")
    s = np.linalg.svd(state.amplitudes.reshape(2**cut, -1), compute_uv=False)
    return von_neumann_from_schmidt(s)


def von_neumann_from_schmidt(s: np.ndarray) -> float:
    p = np.asarray(s, dtype=float) ** 2
    p = p[p > 1e-300]
    p = p / p.sum()
    return float(max(0.0, -np.sum(p * np.log(p))))


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(max(0.0, -np.sum(w * np.log(w))))


def thermofield_double(terms: HamiltonianTerms, beta: float) -> PureState:
    """Purification of ``exp(-beta H)/Z`` on two copies (copy A = sites 0..N-1)."""
    N = terms.N
    _check_limit(2 * N, DENSE_LIMIT, "thermofield_double")
    spec = spectral_decomposition(terms)
    E = spec.eigenvalues
    weights = np.exp(-0.5 * beta * (E - E[0]))
    weights /= np.linalg.norm(weights)
    v = spec.eigenvectors
    # psi[a, b] = sum_n w_n <a|n> <b|n>
    amp = (v * weights) @ v.T
    return PureState(amp.reshape(-1), 2 * N)


def thermal_density_matrix(terms: HamiltonianTerms, beta: float) -> np.ndarray:
    H = dense_hamiltonian(terms)
    E0 = np.linalg.eigvalsh(H)[0]
    rho = scipy.linalg.expm(-beta * (H - E0 * np.eye(H.shape[0])))
    return rho / np.trace(rho)


# ---------------------------------------------------------------------------
# out-of-time-ordered correlators


def heisenberg_operator(W: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``U^dagger W U``; with ``U = exp(-iHt)`` this is ``W(t)``."""
    return U.conj().T @ W @ U


def _resolve_propagator(terms, t, U):
    if U is not None:
        return np.asarray(U)
    return propagator(terms, t)


def otoc_exact_infT(
    terms: HamiltonianTerms,
    w_site: int,
    v_site: int,
    t: float,
    w_op: str = "z",
    v_op: str = "z",
    U: np.ndarray | None = None,
) -> float:
    """Infinite-temperature OTOC ``Tr(W(t) V^+ W(t) V) / Tr(W(t)^2 V^+ V)``.

    Pass ``U`` to use a specific propagator (e.g. a Trotter product) instead
    of ``exp(-iHt)``.
    """
    N = terms.N
    _check_limit(N, DENSE_MATRIX_LIMIT, "otoc_exact_infT")
    Wt = heisenberg_operator(local_operator(w_op, w_site, N), _resolve_propagator(terms, t, U))
    V = local_operator(v_op, v_site, N)
    Vd = V.conj().T
    WV = Wt @ V
    num = np.einsum("ij,ji->", Wt @ Vd, WV)
    den = np.einsum("ij,ji->", Wt @ Wt, Vd @ V)
    val = num / den
    if abs(val.imag) > 1e-9:
        raise ArithmeticError(f"OTOC has imaginary part {val.imag:.3e}")
    return float(val.real)


def otoc_exact_infT_profile(
    terms: HamiltonianTerms,
    w_site: int,
    times,
    w_op: str = "z",
    v_op: str = "z",
    step: np.ndarray | None = None,
    dt: float | None = None,
) -> np.ndarray:
    """OTOC for all V sites on a time grid, shape ``(N, len(times))``.

    With a one-step propagator ``step`` of size ``dt`` the evolution is
    ``step ** round(t / dt)`` (matched Trotterization); otherwise the exact
    propagator is used.
    """
    N = terms.N
    _check_limit(N, DENSE_MATRIX_LIMIT, "otoc_exact_infT_profile")
    times = np.asarray(times, dtype=float)
    W = local_operator(w_op, w_site, N)
    Vs = [_sparse_local(v_op, i, N) for i in range(N)]
    out = np.empty((N, times.size))
    if (step is None) != (dt is None):
        raise ValueError("step and dt must be given together")
    if step is None:
        spec = spectral_decomposition(terms)
        vecs = spec.eigenvectors
        Wn = vecs.conj().T @ W @ vecs
    else:
        counts = np.rint(times / dt).astype(int)
        if np.any(np.diff(counts) < 0):
            raise ValueError("times must be ascending")
        Wt, n_done, powers = W, 0, {}
    for k, t in enumerate(times):
        if step is None:
            ph = np.exp(1j * spec.eigenvalues * t)
            Wt = vecs @ (ph[:, None] * Wn * ph.conj()[None, :]) @ vecs.conj().T
        else:
            # W(t) advanced from the previous sample: S^dagger W S with S = step^gap
            gap = int(counts[k]) - n_done
            if gap:
                if gap not in powers:
                    powers[gap] = np.linalg.matrix_power(step, gap)
                Wt = heisenberg_operator(Wt, powers[gap])
                n_done = int(counts[k])
        WT = Wt.T
        trWW = np.einsum("ij,ji->", Wt, Wt)
        for i, V in enumerate(Vs):
            Vd = V.conj().T.tocsr()
            num = np.sum(np.asarray(Vd.T @ WT).T * np.asarray(V.T @ WT))
            den = trWW if _is_unitary_pauli(v_op) else np.sum(np.asarray((Vd @ V).T.multiply(Wt @ Wt)))
            out[i, k] = (num / den).real
    return out


def _is_unitary_pauli(op) -> bool:
    return isinstance(op, str) and op in ("x", "y", "z")


def _sparse_local(op, site: int, N: int) -> sp.csr_matrix:
    mat = PAULI[op] if isinstance(op, str) else np.asarray(op, dtype=complex)
    return sp.kron(sp.kron(sp.identity(2**site, format="csr"), sp.csr_matrix(mat)),
                   sp.identity(2 ** (N - site - 1), format="csr"), format="csr")


def otoc_exact_eig(
    terms: HamiltonianTerms,
    state: PureState,
    w_site: int,
    v_site: int,
    t: float,
    w_op: str = "z",
    v_op: str = "z",
    U: np.ndarray | None = None,
) -> float:
    """State-resolved OTOC ``<psi|W(t) V^+ W(t) V|psi> / <psi|W(t)^2 V^+ V|psi>``.

    Returns the real part; for a generic state the numerator is complex.
    """
    val = otoc_exact_eig_complex(terms, state, w_site, v_site, t, w_op, v_op, U)
    return float(val.real)


def otoc_exact_eig_complex(terms, state, w_site, v_site, t, w_op="z", v_op="z", U=None) -> complex:
    N = terms.N
    _check_limit(N, DENSE_MATRIX_LIMIT, "otoc_exact_eig")
    Wt = heisenberg_operator(local_operator(w_op, w_site, N), _resolve_propagator(terms, t, U))
    V = local_operator(v_op, v_site, N)
    Vd = V.conj().T
    a = state.amplitudes
    num = np.vdot(a, Wt @ (Vd @ (Wt @ (V @ a))))
    den = np.vdot(a, Wt @ (Wt @ (Vd @ (V @ a))))
    return complex(num / den)


def double_commutator(F: float) -> float:
    """``C = 2 (1 - Re F)``."""
    return 2.0 * (1.0 - float(np.real(F)))
