"""Deformed transverse-field Ising chain.

The Hamiltonian on ``N`` sites is

    H = -(J/4) sum_i (cosh l_i + cosh l_{i+1})/2 Z_i Z_{i+1}
        + (h/2) sum_i cosh l_i X_i
        + (m/2) sum_i cosh l_i Z_i

with the linear deformation profile ``l_i = -l_max + 2 i l_max / (N - 1)``.
Sites are 0-based everywhere in the API; report writers convert to 1-based
labels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the deformed chain."""

    J: float
    h: float
    N: int
    l_max: float = 0.0
    m: float = 0.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if self.l_max < 0:
            raise ValueError(f"l_max must be non-negative, got {self.l_max!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def center(self) -> int:
        """0-based index of the central site (left of center for even N)."""
        return (self.N - 1) // 2

    def scaled(self, c: float) -> ModelParams:
        return ModelParams(J=c * self.J, h=c * self.h, m=c * self.m, N=self.N, l_max=self.l_max)

    def replace(self, **changes) -> ModelParams:
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)


def deformation_factors(N: int, l_max: float) -> np.ndarray:
    """Return the site deformation profile ``l_i``.

    >>> deformation_factors(5, 2.0)
    array([-2., -1.,  0.,  1.,  2.])
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if l_max < 0:
        raise ValueError(f"l_max must be >= 0, got {l_max}")
    if N == 1:
        return np.zeros(1)
    i = np.arange(N, dtype=float)
    values = -l_max + i * (2.0 * l_max / (N - 1))
    # force exact antisymmetry so mirror images agree bitwise
    return 0.5 * (values - values[::-1])


@dataclass(frozen=True)
class HamiltonianTerms:
    """Explicit weighted Pauli terms of a spin-1/2 chain Hamiltonian.

    ``bond_terms`` hold ``(i, j, c)`` for ``c Z_i Z_j``; ``x_terms`` and
    ``z_terms`` hold ``(i, c)`` for ``c X_i`` and ``c Z_i``. Bonds are not
    restricted to nearest neighbours (the Rydberg mapping produces all pairs),
    but the tensor-network engines require ``j == i + 1``.
    """

    N: int
    bond_terms: tuple[tuple[int, int, float], ...] = ()
    x_terms: tuple[tuple[int, float], ...] = ()
    z_terms: tuple[tuple[int, float], ...] = ()
    constant: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def nearest_neighbour(self) -> bool:
        return all(j == i + 1 for i, j, _ in self.bond_terms)

    def bond_coefficients(self) -> np.ndarray:
        """Nearest-neighbour ZZ weights as an ``N - 1`` array."""
        out = np.zeros(max(self.N - 1, 0))
        for i, j, c in self.bond_terms:
            if j != i + 1:
                raise ValueError("bond_coefficients() requires nearest-neighbour bonds")
            out[i] += c
        return out

    def x_coefficients(self) -> np.ndarray:
        out = np.zeros(self.N)
        for i, c in self.x_terms:
            out[i] += c
        return out

    def z_coefficients(self) -> np.ndarray:
        out = np.zeros(self.N)
        for i, c in self.z_terms:
            out[i] += c
        return out

    def norm_bound(self) -> float:
        """Sum of absolute coefficients; an upper bound on the operator norm."""
        return (
            abs(self.constant)
            + sum(abs(c) for *_, c in self.bond_terms)
            + sum(abs(c) for _, c in self.x_terms)
            + sum(abs(c) for _, c in self.z_terms)
        )

    def reflected(self) -> HamiltonianTerms:
        """Terms after the site relabelling ``i -> N - 1 - i``."""
        n = self.N - 1
        bonds = sorted((min(n - i, n - j), max(n - i, n - j), c) for i, j, c in self.bond_terms)
        return HamiltonianTerms(
            N=self.N,
            bond_terms=tuple(bonds),
            x_terms=tuple(sorted((n - i, c) for i, c in self.x_terms)),
            z_terms=tuple(sorted((n - i, c) for i, c in self.z_terms)),
            constant=self.constant,
            meta=dict(self.meta),
        )

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "constant": self.constant,
            "bond_terms": [[i, j, c] for i, j, c in self.bond_terms],
            "x_terms": [[i, c] for i, c in self.x_terms],
            "z_terms": [[i, c] for i, c in self.z_terms],
            "meta": self.meta,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> HamiltonianTerms:
        return cls(
            N=int(d["N"]),
            bond_terms=tuple((int(i), int(j), float(c)) for i, j, c in d.get("bond_terms", [])),
            x_terms=tuple((int(i), float(c)) for i, c in d.get("x_terms", [])),
            z_terms=tuple((int(i), float(c)) for i, c in d.get("z_terms", [])),
            constant=float(d.get("constant", 0.0)),
            meta=dict(d.get("meta", {})),
        )


def build_hamiltonian(params: ModelParams) -> HamiltonianTerms:
    """Assemble the deformed Ising Hamiltonian as local Pauli terms."""
    N = params.N
    ch = np.cosh(deformation_factors(N, params.l_max))
    bonds = tuple(
        (i, i + 1, float(-params.J / 4.0 * (ch[i] + ch[i + 1]) / 2.0)) for i in range(N - 1)
    )
    xs = tuple((i, float(params.h / 2.0 * ch[i])) for i in range(N))
    zs = tuple((i, float(params.m / 2.0 * ch[i])) for i in range(N))
    meta = {"J": params.J, "h": params.h, "m": params.m, "l_max": params.l_max, "N": N}
    return HamiltonianTerms(N=N, bond_terms=bonds, x_terms=xs, z_terms=zs, meta=meta)
