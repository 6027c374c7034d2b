"""Trotter gate layers shared by the TEBD, MPO and dense matched-Trotter paths.

Each nearest-neighbour bond carries the local Hamiltonian

    h_b = c_b Z_b Z_{b+1} + sum_{s in {b, b+1}} (x_s X_s + z_s Z_s) / deg(s)

where ``deg(s)`` is the number of bonds touching site ``s``; summing ``h_b``
over bonds reproduces the full Hamiltonian. A first-order step applies
``exp(-i h_b dt)`` for every bond in the chosen ordering. N = 1 chains have
no bonds and use a single one-site gate instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..exact import PAULI, apply_local, apply_two_site
from ..model import HamiltonianTerms

ORDERINGS = ("even-odd", "sequential")


@dataclass(frozen=True)
class Gate:
    sites: tuple[int, ...]
    matrix: np.ndarray

    @property
    def is_two_site(self) -> bool:
        return len(self.sites) == 2


@dataclass(frozen=True)
class TrotterGateLayer:
    """Gates of one Trotter step, in application order (first gate acts first)."""

    gates: tuple[Gate, ...]
    dt: float
    ordering: str
    order: int = 1

    def dagger(self) -> TrotterGateLayer:
        """Layer implementing the inverse step."""
        inv = tuple(Gate(g.sites, g.matrix.conj().T) for g in reversed(self.gates))
        return TrotterGateLayer(inv, -self.dt, self.ordering, self.order)


def bond_hamiltonians(terms: HamiltonianTerms) -> list[np.ndarray]:
    """4x4 local Hamiltonians ``h_b`` for ``b = 0..N-2``."""
    if not terms.nearest_neighbour:
        raise ValueError("Trotter gates need nearest-neighbour bonds")
    N = terms.N
    bc = terms.bond_coefficients()
    xc = terms.x_coefficients()
    zc = terms.z_coefficients()
    deg = [int(s > 0) + int(s < N - 1) for s in range(N)]
    I, X, Z = PAULI["i"], PAULI["x"], PAULI["z"]
    out = []
    for b in range(N - 1):
        hl = (xc[b] * X + zc[b] * Z) / deg[b]
        hr = (xc[b + 1] * X + zc[b + 1] * Z) / deg[b + 1]
        out.append(bc[b] * np.kron(Z, Z) + np.kron(hl, I) + np.kron(I, hr))
    return out


def site_hamiltonian(terms: HamiltonianTerms, site: int) -> np.ndarray:
    return terms.x_coefficients()[site] * PAULI["x"] + terms.z_coefficients()[site] * PAULI["z"]


def _bond_order(N: int, ordering: str) -> list[list[int]]:
    bonds = list(range(N - 1))
    if ordering == "sequential":
        return [bonds]
    if ordering == "even-odd":
        # gates inside a parity group are disjoint and commute; the odd group is
        # listed right-to-left so a sweep never has to walk back across the chain
        return [bonds[0::2], bonds[1::2][::-1]]
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def trotter_layer(
    terms: HamiltonianTerms, dt: float, ordering: str = "even-odd", order: int = 1
) -> TrotterGateLayer:
    """Gates for one Trotter step of size ``dt``.

    ``order=2`` is the symmetric (Strang) composition of the first-order
    sequence: half steps forward, then the same half steps reversed.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    N = terms.N
    if N == 1:
        u = scipy.linalg.expm(-1j * dt * site_hamiltonian(terms, 0))
        return TrotterGateLayer((Gate((0,), u),), dt, ordering, order)
    hb = bond_hamiltonians(terms)
    groups = _bond_order(N, ordering)
    if order == 1:
        gates = [Gate((b, b + 1), scipy.linalg.expm(-1j * dt * hb[b])) for grp in groups for b in grp]
    else:
        half = [Gate((b, b + 1), scipy.linalg.expm(-0.5j * dt * hb[b])) for grp in groups for b in grp]
        gates = half + half[::-1]
    return TrotterGateLayer(tuple(gates), dt, ordering, order)


def apply_layer_dense(vec: np.ndarray, layer: TrotterGateLayer, N: int) -> np.ndarray:
    for g in layer.gates:
        if g.is_two_site:
            vec = apply_two_site(vec, g.matrix, g.sites[0], g.sites[1], N)
        else:
            vec = apply_local(vec, g.matrix, g.sites[0], N)
    return vec


def layer_unitary(layer: TrotterGateLayer, N: int) -> np.ndarray:
    """Dense matrix of one step; column ``k`` is the step applied to ``|k>``."""
    eye = np.eye(2**N, dtype=complex)
    # rows of `eye` are basis vectors; apply to each as a batch, then transpose
    return apply_layer_dense(eye, layer, N).T


def trotter_unitary(
    terms: HamiltonianTerms, dt: float, n_steps: int, ordering: str = "even-odd", order: int = 1
) -> np.ndarray:
    """Dense ``n_steps``-fold Trotter product, the matched oracle for TEBD/MPO runs."""
    step = layer_unitary(trotter_layer(terms, dt, ordering, order), terms.N)
    return np.linalg.matrix_power(step, int(n_steps))
