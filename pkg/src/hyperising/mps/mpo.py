"""Matrix product operators, Heisenberg-picture evolution and OTOC trace networks.

An MPO tensor has legs ``(chi_left, out, in, chi_right)``. For evolution the
operator is treated as an MPS over the doubled index ``p = 2*out + in`` so
truncation is optimal in the Frobenius norm and the MPS gauge machinery is
reused unchanged.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..exact import PAULI
from ..model import HamiltonianTerms
from .gates import TrotterGateLayer, trotter_layer
from .mps import MatrixProductState, TruncationPolicy
from .tebd import TruncationWarning


class MatrixProductOperator:
    def __init__(self, tensors, center: int | None = None):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        for t in tensors:
            if t.ndim != 4 or t.shape[1] != t.shape[2]:
                raise ValueError(f"MPO tensors must be (chi, d, d, chi), got {t.shape}")
        d = tensors[0].shape[1]
        self._d = d
        self.vec = MatrixProductState(
            [t.reshape(t.shape[0], d * d, t.shape[3]) for t in tensors], center=center
        )

    @classmethod
    def _from_vec(cls, vec: MatrixProductState, d: int = 2) -> MatrixProductOperator:
        out = cls.__new__(cls)
        out._d = d
        out.vec = vec
        return out

    @classmethod
    def product(cls, local_ops) -> MatrixProductOperator:
        """Tensor product of single-site matrices."""
        return cls([np.asarray(o, dtype=complex).reshape(1, *np.shape(o), 1) for o in local_ops])

    @classmethod
    def identity(cls, N: int) -> MatrixProductOperator:
        return cls.product([PAULI["i"]] * N)

    @classmethod
    def local(cls, op, site: int, N: int) -> MatrixProductOperator:
        """Single-site operator (Pauli label or 2x2 array) padded by identities."""
        mat = PAULI[op] if isinstance(op, str) else op
        return cls.product([mat if i == site else PAULI["i"] for i in range(N)])

    @classmethod
    def from_dense(cls, op: np.ndarray, N: int, policy: TruncationPolicy | None = None):
        d = 2
        # reorder (s_0..s_{N-1}, t_0..t_{N-1}) -> (s_0 t_0, s_1 t_1, ...)
        t = np.asarray(op, dtype=complex).reshape((d,) * (2 * N))
        perm = [k for i in range(N) for k in (i, N + i)]
        vec = t.transpose(perm).reshape(-1)
        return cls._from_vec(MatrixProductState.from_dense(vec, N, d=d * d, policy=policy), d)

    @property
    def N(self) -> int:
        return self.vec.N

    @property
    def tensors(self) -> list[np.ndarray]:
        d = self._d
        return [t.reshape(t.shape[0], d, d, t.shape[2]) for t in self.vec.tensors]

    @property
    def bond_dimensions(self) -> list[int]:
        return self.vec.bond_dimensions

    @property
    def log(self):
        return self.vec.log

    def copy(self) -> MatrixProductOperator:
        return MatrixProductOperator._from_vec(self.vec.copy(), self._d)

    def to_dense(self) -> np.ndarray:
        N, d = self.N, self._d
        t = self.vec.to_dense().reshape((d,) * (2 * N))
        perm = list(range(0, 2 * N, 2)) + list(range(1, 2 * N, 2))
        return t.transpose(perm).reshape(d**N, d**N)

    def frobenius_norm(self) -> float:
        return self.vec.norm()


# ---------------------------------------------------------------------------
# Heisenberg evolution


def conjugation_superoperator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of ``O -> A O B`` on the doubled site index.

    ``4 x 4`` for one-site ``A, B`` and ``16 x 16`` for two-site ones, with the
    doubled index ordered ``(out_1, in_1, out_2, in_2)``.
    """
    if A.shape == (2, 2):
        # S[(s t), (u v)] = A[s, u] B[v, t]
        return np.einsum("su,vt->stuv", A, B).reshape(4, 4)
    A4 = A.reshape(2, 2, 2, 2)  # (s1, s2, u1, u2)
    B4 = B.reshape(2, 2, 2, 2)  # (v1, v2, t1, t2)
    return np.einsum("SXUY,VWTZ->STXZUVYW", A4, B4).reshape(16, 16)


def heisenberg_layer(layer: TrotterGateLayer):
    """Superoperator gates for ``W -> U^dagger W U`` with ``U`` the step of ``layer``.

    ``U = g_K ... g_1`` so the conjugation by ``g_K`` (the last gate applied to a
    state) is the innermost and is applied to the operator first.
    """
    for g in reversed(layer.gates):
        yield g.sites, conjugation_superoperator(g.matrix.conj().T, g.matrix)


def apply_heisenberg_layer(op: MatrixProductOperator, layer: TrotterGateLayer, policy) -> float:
    vec = op.vec
    if vec.center is None:
        vec.canonicalize(0)
    gates = list(heisenberg_layer(layer))
    discarded = 0.0
    for k, (sites, sup) in enumerate(gates):
        if len(sites) == 1:
            vec.apply_one_site(sup, sites[0])
            continue
        i = sites[0]
        nxt = next((s[0] for s, _ in gates[k + 1 :] if len(s) == 2), None)
        move = "left" if nxt is not None and nxt < i else "right"
        discarded += vec.apply_two_site(sup, i, policy, move=move)
    return discarded


def heisenberg_evolve_mpo(
    W: MatrixProductOperator,
    terms: HamiltonianTerms,
    dt: float,
    n_steps: int,
    policy: TruncationPolicy | None = None,
    ordering: str = "even-odd",
    order: int = 1,
    observer=None,
) -> MatrixProductOperator:
    """Return the MPO of ``U^dagger W U`` with ``U`` the ``n_steps`` Trotter product.

    ``observer(step, W_t)`` is called after each step, if given.
    """
    policy = policy or TruncationPolicy()
    out = W.copy()
    out.step_discarded = []
    if n_steps == 0:
        return out
    layer = trotter_layer(terms, dt, ordering=ordering, order=order)
    for step in range(1, int(n_steps) + 1):
        out.step_discarded.append(apply_heisenberg_layer(out, layer, policy))
        if observer is not None:
            observer(step, out)
    if out.log.saturated:
        warnings.warn(
            f"operator bond dimension reached chi_max={policy.chi_max} "
            f"{out.log.saturated} times; total discarded weight {out.log.total:.3e}",
            TruncationWarning,
            stacklevel=2,
        )
    return out


# ---------------------------------------------------------------------------
# trace networks


def _transfer(env, w1, x1, w2, x2):
    """Advance ``env[a, b]`` by one site of ``Tr(W1 X1 W2 X2) / 2``.

    ``w*`` are MPO tensors ``(chi, out, in, chi)``; ``x*`` are MPO tensors of
    the inserted operators (bond dimension may exceed 1).
    """
    # env legs: (a: w1, p: x1, b: w2, q: x2)
    return 0.5 * np.einsum(
        "apbq,astc,ptuk,burd,qrse->ckde", env, w1, x1, w2, x2, optimize=True
    )


def trace_network(ops, direction: str = "left") -> complex:
    """Normalized trace ``Tr(O_1 O_2 O_3 O_4) / 2^N`` of four MPOs.

    Contracted site by site from the left or from the right; the two
    directions agree to rounding, which tests use as a cyclicity check.
    """
    w1, x1, w2, x2 = (o.tensors for o in ops)
    N = len(w1)
    env = np.ones((1, 1, 1, 1), dtype=complex)
    if direction == "left":
        for k in range(N):
            env = _transfer(env, w1[k], x1[k], w2[k], x2[k])
        return complex(env.reshape(-1)[0])
    if direction == "right":
        env_r = np.ones((1, 1, 1, 1), dtype=complex)
        for k in range(N - 1, -1, -1):
            env_r = 0.5 * np.einsum(
                "astc,ptuk,burd,qrse,ckde->apbq", w1[k], x1[k], w2[k], x2[k], env_r, optimize=True
            )
        return complex(env_r.reshape(-1)[0])
    raise ValueError("direction must be 'left' or 'right'")


def otoc_mpo_infT(
    W_t: MatrixProductOperator,
    V: MatrixProductOperator,
    normalizer: bool = True,
    tol: float = 1e-9,
) -> float:
    """``Tr(W V^+ W V) / Tr(W^2 V^+ V)`` from the four-MPO trace network.

    The denominator equals one for unitary Hermitian ``W`` and unitary ``V``;
    a deviation larger than ``tol`` (e.g. from truncation) is reported with a
    warning and divided out.
    """
    Vd = MatrixProductOperator([np.conj(np.swapaxes(t, 1, 2)) for t in V.tensors])
    num = trace_network([W_t, Vd, W_t, V])
    if not normalizer:
        return float(num.real)
    VdV = _mpo_product(Vd, V)
    den = trace_network([W_t, MatrixProductOperator.identity(W_t.N), W_t, VdV])
    if abs(den - 1.0) > tol:
        warnings.warn(f"OTOC normalizer deviates from 1 by {abs(den - 1):.2e}", RuntimeWarning, stacklevel=2)
    return float((num / den).real)


def _mpo_product(A: MatrixProductOperator, B: MatrixProductOperator) -> MatrixProductOperator:
    """Exact MPO of ``A @ B`` (bond dimensions multiply)."""
    tens = []
    for a, b in zip(A.tensors, B.tensors):
        t = np.einsum("astb,ctud->acsubd", a, b)
        s = t.shape
        tens.append(t.reshape(s[0] * s[1], s[2], s[3], s[4] * s[5]))
    return MatrixProductOperator(tens)


def _identity_transfer(env, w):
    # Tr over physical legs of W W with identities inserted, /2
    return 0.5 * np.einsum("ab,astc,btsd->cd", env, w, w, optimize=True)


def otoc_profile(W_t: MatrixProductOperator, v_op: str = "z", sites=None) -> np.ndarray:
    """OTOC against single-site ``V = v_op`` at every site, from shared environments."""
    tens = W_t.tensors
    N = len(tens)
    sites = range(N) if sites is None else sites
    V = PAULI[v_op]
    Vd = V.conj().T
    VdV = Vd @ V
    left = [np.ones((1, 1), dtype=complex)]
    for k in range(N):
        left.append(_identity_transfer(left[-1], tens[k]))
    right = [np.ones((1, 1), dtype=complex)]
    for k in range(N - 1, -1, -1):
        right.append(0.5 * np.einsum("astc,btsd,cd->ab", tens[k], tens[k], right[-1], optimize=True))
    right = right[::-1]  # right[k] covers sites k..N-1; right[N] is trivial
    out = []
    for i in sites:
        w = tens[i]
        num = 0.5 * np.einsum(
            "ab,astc,tu,burd,rs,cd->", left[i], w, Vd, w, V, right[i + 1], optimize=True
        )
        den = 0.5 * np.einsum(
            "ab,astc,btrd,rs,cd->", left[i], w, w, VdV, right[i + 1], optimize=True
        )
        out.append((num / den).real)
    return np.array(out)
