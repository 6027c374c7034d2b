"""Matrix product states with a movable orthogonality center.

Tensors are stored as ``(chi_left, d, chi_right)``. The physical dimension
``d`` is 2 for spin states; the operator engine reuses this class with
``d = 4`` for vectorized operators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TruncationPolicy:
    """Singular-value truncation rule.

    ``cutoff`` bounds the discarded weight ``sum(s_discarded^2) / sum(s^2)``
    at every split; ``chi_max`` caps the kept bond dimension.
    """

    cutoff: float = 1e-12
    chi_max: int = 256

    def __post_init__(self) -> None:
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")


@dataclass
class TruncationLog:
    """Accumulated discarded weight and bond saturation events."""

    discarded: list[float] = field(default_factory=list)
    saturated: int = 0

    @property
    def total(self) -> float:
        return float(sum(self.discarded))

    @property
    def max(self) -> float:
        return float(max(self.discarded, default=0.0))

    def record(self, w: float, hit_cap: bool) -> None:
        self.discarded.append(max(float(w), 0.0))
        self.saturated += int(hit_cap)


def svd_truncate(mat: np.ndarray, policy: TruncationPolicy | None):
    """SVD of ``mat`` keeping the leading singular values allowed by ``policy``.

    Returns ``(U, S, Vh, discarded_weight, hit_cap)``; the discarded weight
    is relative to the squared Frobenius norm of ``mat``.
    """
    try:
        U, S, Vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        U, S, Vh = _svd_fallback(mat)
    norm2 = float(np.sum(S**2))
    if norm2 == 0.0:
        return U[:, :1], S[:1], Vh[:1], 0.0, False
    keep = S.size
    hit_cap = False
    if policy is not None:
        # tail[k] = weight discarded when keeping k values
        tail = np.concatenate([np.cumsum((S**2)[::-1])[::-1], [0.0]]) / norm2
        keep = int(np.argmax(tail <= policy.cutoff))
        keep = max(keep, 1)
        if keep > policy.chi_max:
            keep = policy.chi_max
            hit_cap = True
        discarded = float(tail[keep])
    else:
        discarded = 0.0
    return U[:, :keep], S[:keep], Vh[:keep], discarded, hit_cap


def _svd_fallback(mat):
    import scipy.linalg

    return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


class MatrixProductState:
    """Finite open-boundary MPS.

    Parameters
    ----------
    tensors : list of ndarray
        Site tensors of shape ``(chi_l, d, chi_r)``; outer bonds have size 1.
    center : int or None
        Orthogonality center if the tensors are known to be in mixed
        canonical form around it, else ``None``.
    """

    def __init__(self, tensors, center: int | None = None):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("outer bond dimensions must be 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"bond mismatch {a.shape} -> {b.shape}")
        self.center = center
        self.log = TruncationLog()

    # -- constructors -------------------------------------------------------

    @classmethod
    def product(cls, local_states) -> MatrixProductState:
        tensors = []
        for s in local_states:
            s = np.asarray(s, dtype=complex)
            tensors.append((s / np.linalg.norm(s)).reshape(1, -1, 1))
        return cls(tensors, center=0)

    @classmethod
    def basis(cls, bits) -> MatrixProductState:
        up, down = np.array([1, 0]), np.array([0, 1])
        return cls.product([down if b else up for b in bits])

    @classmethod
    def all_up(cls, N: int) -> MatrixProductState:
        return cls.basis([0] * N)

    @classmethod
    def random_product(cls, N: int, seed: int = 0, d: int = 2) -> MatrixProductState:
        rng = np.random.default_rng(seed)
        vecs = rng.normal(size=(N, d)) + 1j * rng.normal(size=(N, d))
        return cls.product(list(vecs))

    @classmethod
    def from_dense(cls, vec: np.ndarray, N: int, d: int = 2, policy: TruncationPolicy | None = None):
        """Exact (or truncated) decomposition of a dense vector."""
        rest = np.asarray(vec, dtype=complex).reshape(1, -1)
        tensors = []
        chi = 1
        for _ in range(N - 1):
            rest = rest.reshape(chi * d, -1)
            U, S, Vh, _, _ = svd_truncate(rest, policy)
            tensors.append(U.reshape(chi, d, -1))
            chi = S.size
            rest = S[:, None] * Vh
        tensors.append(rest.reshape(chi, d, 1))
        return cls(tensors, center=N - 1)

    # -- basic properties ---------------------------------------------------

    @property
    def N(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> MatrixProductState:
        out = MatrixProductState([t.copy() for t in self.tensors], self.center)
        out.log = TruncationLog(list(self.log.discarded), self.log.saturated)
        return out

    def to_dense(self) -> np.ndarray:
        vec = self.tensors[0]
        for t in self.tensors[1:]:
            vec = np.tensordot(vec, t, axes=(vec.ndim - 1, 0))
        return vec.reshape(-1)

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = np.einsum("ab,asc,bsd->cd", env, t.conj(), t, optimize=True)
        return float(np.sqrt(abs(env[0, 0])))

    def normalize(self) -> MatrixProductState:
        if self.center is None:
            self.canonicalize(0)
        self.tensors[self.center] /= np.linalg.norm(self.tensors[self.center])
        return self

    # -- gauge moves ----------------------------------------------------------

    def _shift_right(self, i: int) -> None:
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        Q, R = np.linalg.qr(t.reshape(chi_l * d, chi_r))
        self.tensors[i] = Q.reshape(chi_l, d, -1)
        self.tensors[i + 1] = np.tensordot(R, self.tensors[i + 1], axes=(1, 0))

    def _shift_left(self, i: int) -> None:
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        Q, R = np.linalg.qr(t.reshape(chi_l, d * chi_r).T)
        self.tensors[i] = Q.T.reshape(-1, d, chi_r)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], R.T, axes=(2, 0))

    def canonicalize(self, center: int) -> MatrixProductState:
        """Bring the state to mixed canonical form around ``center``."""
        if self.center is None:
            for i in range(center):
                self._shift_right(i)
            for i in range(self.N - 1, center, -1):
                self._shift_left(i)
        else:
            for i in range(self.center, center):
                self._shift_right(i)
            for i in range(self.center, center, -1):
                self._shift_left(i)
        self.center = center
        return self

    # -- local updates ----------------------------------------------------------

    def apply_one_site(self, op: np.ndarray, i: int) -> None:
        self.tensors[i] = np.einsum("st,atb->asb", op, self.tensors[i])

    def apply_two_site(
        self,
        gate: np.ndarray,
        i: int,
        policy: TruncationPolicy | None,
        move: str = "right",
    ) -> float:
        """Apply a ``d^2 x d^2`` gate on sites ``(i, i+1)`` and re-split.

        The orthogonality center ends on ``i+1`` (``move="right"``) or ``i``
        (``move="left"``). Returns the discarded weight of the split.
        """
        if self.center is None or self.center not in (i, i + 1):
            self.canonicalize(i)
        d = self.d
        A, B = self.tensors[i], self.tensors[i + 1]
        chi_l, chi_r = A.shape[0], B.shape[2]
        theta = np.tensordot(A, B, axes=(2, 0))  # (a, s1, s2, b)
        g = gate.reshape(d, d, d, d)
        theta = np.einsum("stuv,auvb->astb", g, theta, optimize=True)
        U, S, Vh, w, cap = svd_truncate(theta.reshape(chi_l * d, d * chi_r), policy)
        if move == "right":
            self.tensors[i] = U.reshape(chi_l, d, -1)
            self.tensors[i + 1] = (S[:, None] * Vh).reshape(-1, d, chi_r)
            self.center = i + 1
        else:
            self.tensors[i] = (U * S[None, :]).reshape(chi_l, d, -1)
            self.tensors[i + 1] = Vh.reshape(-1, d, chi_r)
            self.center = i
        self.log.record(w, cap)
        return w

    # -- measurements -------------------------------------------------------------

    def schmidt_values(self, bond: int) -> np.ndarray:
        """Singular values across the cut between sites ``bond`` and ``bond+1``."""
        self.canonicalize(bond)
        t = self.tensors[bond]
        chi_l, d, chi_r = t.shape
        s = np.linalg.svd(t.reshape(chi_l * d, chi_r), compute_uv=False)
        return s / np.linalg.norm(s)

    def entanglement_entropy(self, bond: int) -> float:
        p = self.schmidt_values(bond) ** 2
        p = p[p > 1e-300]
        return float(max(0.0, -np.sum(p * np.log(p))))

    def half_chain_entropy(self) -> float:
        """Entropy of the cut after site ``N//2 - 1`` (sites ``0..N//2-1`` vs rest)."""
        return self.entanglement_entropy(self.N // 2 - 1)

    def _site_rdm(self, i: int) -> np.ndarray:
        self.canonicalize(i)
        t = self.tensors[i]
        rho = np.einsum("asb,atb->st", t, t.conj())
        return rho / np.trace(rho)

    def expectation_one_site(self, op: np.ndarray, i: int) -> complex:
        return complex(np.trace(self._site_rdm(i) @ op))

    def local_expectations(self, op: np.ndarray) -> np.ndarray:
        """``<op_i>`` for every site, with a single left-to-right sweep."""
        self.canonicalize(0)
        out = np.empty(self.N, dtype=complex)
        for i in range(self.N):
            if i > 0:
                self.canonicalize(i)
            t = self.tensors[i]
            rho = np.einsum("asb,atb->st", t, t.conj())
            out[i] = np.trace(rho @ op) / np.trace(rho)
        return out

    def probability_of(self, outcome: int, i: int) -> float:
        return float(np.real(self._site_rdm(i)[outcome, outcome]))

    def two_point_zz(self) -> np.ndarray:
        """Matrix of ``<Z_i Z_j>`` for d = 2 states."""
        Z = np.diag([1.0, -1.0]).astype(complex)
        I = np.eye(2, dtype=complex)
        N = self.N
        out = np.eye(N)
        for i in range(N):
            self.canonicalize(i)
            ti = self.tensors[i]
            env = np.einsum("asb,st,atc->bc", ti.conj(), Z, ti, optimize=True)
            tensors = self.tensors
            for j in range(i + 1, N):
                tj = tensors[j]
                val = np.einsum("bc,bsd,st,ctd->", env, tj.conj(), Z, tj, optimize=True)
                out[i, j] = out[j, i] = float(np.real(val))
                env = np.einsum("bc,bsd,st,cte->de", env, tj.conj(), I, tj, optimize=True)
        return out
