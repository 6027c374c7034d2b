"""Mapping of the deformed chain onto a one-dimensional Rydberg array.

Atoms sit on a line with spacings ``d_i = (A / eta_i)^(1/6)``, where
``eta_i = J cosh(l_i)``, so that the van der Waals coupling ``C6 / d_i^6``
reproduces the site-dependent Ising coupling up to the scale ``A``. The
Rydberg Hamiltonian (zero laser phase)

    H = sum_j Omega_j / 2 X_j - sum_j Delta_j n_j + sum_{j<k} V_jk n_j n_k,

uses ``n = (1 - Z) / 2``, the projector onto the Rydberg state ``|r>``, which
is the ``Z = -1`` (bit 1) basis state. Units: micrometres and angular MHz
(rad/us); times are in microseconds.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exact import DENSE_LIMIT, DimensionLimitError, PureState, evolve_exact_times, magnetization_profile
from .model import HamiltonianTerms, deformation_factors

C6 = 2 * np.pi * 862690.0
LITERAL_A = 2 * np.pi * 512.0
TARGET_MAX_SPACING = 17.72
BOND_MODES = ("left", "average")


class PulseSynthesisWarning(UserWarning):
    """The single pulse expression is used for both Omega and Delta."""


@dataclass(frozen=True)
class RydbergGeometry:
    """Atom positions along the chain (micrometres, ``r_0 = 0``)."""

    positions: np.ndarray
    A: float
    J: float = 1.0
    l_max: float = 0.0
    bond: str = "left"

    def __post_init__(self) -> None:
        r = np.asarray(self.positions, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise ValueError("need at least two positions")
        if r[0] != 0.0:
            raise ValueError("first atom must sit at the origin")
        if np.any(np.diff(r) <= 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", r)

    @property
    def N(self) -> int:
        return self.positions.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.positions)

    @property
    def length(self) -> float:
        return float(self.positions[-1])

    @property
    def spacing_ratio(self) -> float:
        d = self.spacings
        return float(d.max() / d.min())

    def distance(self, j: int, k: int) -> float:
        return float(abs(self.positions[j] - self.positions[k]))

    def interactions(self, c6: float = C6) -> np.ndarray:
        """Symmetric matrix of ``V_jk = C6 / |r_j - r_k|^6`` (zero diagonal)."""
        r = self.positions
        dist = np.abs(r[:, None] - r[None, :])
        V = np.zeros_like(dist)
        off = ~np.eye(self.N, dtype=bool)
        V[off] = c6 / dist[off] ** 6
        return V

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "spacings": self.spacings.tolist(),
            "A": self.A,
            "J": self.J,
            "l_max": self.l_max,
            "bond": self.bond,
        }


def bond_eta(N: int, l_max: float, J: float = 1.0, bond: str = "left") -> np.ndarray:
    """Coupling scale ``eta`` attached to each of the ``N - 1`` gaps.

    ``bond="left"`` follows the placement recursion and uses the left site of
    each gap; ``bond="average"`` uses the mean cosh of both ends, which makes
    the spacings mirror-symmetric.
    """
    ch = np.cosh(deformation_factors(N, l_max))
    if bond == "left":
        return J * ch[:-1]
    if bond == "average":
        return J * 0.5 * (ch[:-1] + ch[1:])
    raise ValueError(f"bond must be one of {BOND_MODES}, got {bond!r}")


def calibrated_A(N: int, l_max: float, J: float = 1.0, target: float = TARGET_MAX_SPACING,
                 bond: str = "left") -> float:
    """Scale constant making the largest spacing equal ``target``.

    This is ``target^6 * min(eta)``; for odd ``N`` with left-site bonds the
    central site is a gap's left end, so it reduces to ``target^6 * J``.
    """
    return float(target**6 * bond_eta(N, l_max, J, bond).min())


def place_atoms(N: int, l_max: float, A: float | None = None, J: float = 1.0,
                target: float = TARGET_MAX_SPACING, bond: str = "left") -> RydbergGeometry:
    """Positions from the recursion ``r_{i+1} = r_i + (A / eta_i)^(1/6)``.

    Parameters
    ----------
    A : float, optional
        Scale constant. ``None`` selects calibration against ``target`` (see
        :func:`calibrated_A`); pass :data:`LITERAL_A` for the bare constant.
    J : float
        Ising coupling; only its magnitude sets ``eta``.
    """
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    J = abs(J)
    if J == 0:
        raise ValueError("J must be nonzero")
    if A is None:
        A = calibrated_A(N, l_max, J, target, bond)
    if A <= 0:
        raise ValueError(f"A must be positive, got {A}")
    gaps = (A / bond_eta(N, l_max, J, bond)) ** (1.0 / 6.0)
    positions = np.concatenate([[0.0], np.cumsum(gaps)])
    return RydbergGeometry(positions, float(A), J, float(l_max), bond)


@dataclass
class RydbergParams:
    """Per-site drive of the array; ``phi`` must vanish for the X mapping."""

    omega: np.ndarray
    delta: np.ndarray
    phi: np.ndarray | None = None
    c6: float = C6
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if self.omega.shape != self.delta.shape:
            raise ValueError("omega and delta must have the same length")
        if self.phi is None:
            self.phi = np.zeros_like(self.omega)
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))

    @property
    def N(self) -> int:
        return self.omega.size

    @classmethod
    def uniform(cls, N: int, omega: float, delta: float = 0.0, c6: float = C6) -> RydbergParams:
        return cls(np.full(N, float(omega)), np.full(N, float(delta)), c6=c6)

    def global_mode(self) -> RydbergParams:
        """Site-uniform drive with the mean Omega and Delta."""
        n = self.N
        return RydbergParams(np.full(n, self.omega.mean()), np.full(n, self.delta.mean()),
                             np.zeros(n), self.c6, {**self.meta, "global": True})


def synthesize_pulses(geometry: RydbergGeometry, scale: float = 10.0, c6: float = C6,
                      global_pulse: bool = False) -> RydbergParams:
    """Drive from the single rule ``Omega_j = Delta_j = c6 * scale / d_j^6``.

    ``d_j`` is the gap to the right of atom ``j``; the last atom reuses the
    final gap. The rule gives one value for both parameters, which is applied
    literally and flagged with a :class:`PulseSynthesisWarning`.
    """
    warnings.warn("one expression sets both Omega and Delta; values are identical per site",
                  PulseSynthesisWarning, stacklevel=2)
    d = geometry.spacings
    d = np.concatenate([d, d[-1:]])
    value = c6 * scale / d**6
    params = RydbergParams(value.copy(), value.copy(), c6=c6, meta={"scale": scale})
    return params.global_mode() if global_pulse else params


def _check_drive(geometry: RydbergGeometry, params: RydbergParams) -> None:
    if params.N != geometry.N:
        raise ValueError(f"drive has {params.N} sites, geometry has {geometry.N}")
    if np.any(params.phi != 0):
        raise ValueError("the Pauli mapping requires zero laser phase")


def rydberg_hamiltonian(geometry: RydbergGeometry, params: RydbergParams) -> HamiltonianTerms:
    """Pauli-form terms of the Rydberg Hamiltonian, all interacting pairs.

    Expanding ``n = (1 - Z)/2``: ``-Delta n = -Delta/2 + (Delta/2) Z`` and
    ``V n_j n_k = V/4 (1 - Z_j - Z_k + Z_j Z_k)``.
    """
    _check_drive(geometry, params)
    N = geometry.N
    V = geometry.interactions(params.c6)
    z = 0.5 * params.delta.copy()
    const = -0.5 * params.delta.sum()
    bonds = []
    for j in range(N):
        for k in range(j + 1, N):
            v = V[j, k]
            bonds.append((j, k, float(v / 4)))
            z[j] -= v / 4
            z[k] -= v / 4
            const += v / 4
    xs = tuple((j, float(params.omega[j] / 2)) for j in range(N))
    zs = tuple((j, float(z[j])) for j in range(N))
    return HamiltonianTerms(N=N, bond_terms=tuple(bonds), x_terms=xs, z_terms=zs,
                            constant=float(const), meta={"kind": "rydberg"})


def number_operator_hamiltonian(geometry: RydbergGeometry, params: RydbergParams) -> np.ndarray:
    """Dense matrix assembled directly from occupation numbers.

    Independent of the Pauli expansion: the diagonal is evaluated on every
    basis configuration ``n in {0,1}^N`` and the drive couples configurations
    differing in one occupation.
    """
    _check_drive(geometry, params)
    N = geometry.N
    if N > 12:
        raise DimensionLimitError(f"dense assembly supports N <= 12, got {N}")
    dim = 2**N
    idx = np.arange(dim)
    occ = (idx[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1
    V = geometry.interactions(params.c6)
    diag = -occ @ params.delta + 0.5 * np.einsum("aj,jk,ak->a", occ, V, occ)
    H = np.diag(diag.astype(complex))
    for j in range(N):
        flip = idx ^ (1 << (N - 1 - j))
        H[flip, idx] += params.omega[j] / 2
    return H


def rydberg_density_evolution(geometry: RydbergGeometry, params: RydbergParams, times,
                              initial: PureState | None = None) -> np.ndarray:
    """Rydberg densities ``<n_j(t)>`` as a ``(N, len(times))`` array.

    The default initial state has every atom in ``|g>``.
    """
    N = geometry.N
    if N > DENSE_LIMIT:
        raise DimensionLimitError(f"density evolution supports N <= {DENSE_LIMIT}, got {N}")
    terms = rydberg_hamiltonian(geometry, params)
    psi0 = initial if initial is not None else PureState.all_up(N)
    states = evolve_exact_times(psi0, terms, np.asarray(times, dtype=float))
    return np.stack([(1.0 - magnetization_profile(s, "z")) / 2.0 for s in states], axis=1)


def first_peak_times(densities: np.ndarray, times) -> np.ndarray:
    """Time of the first local maximum of each site's density (NaN if none)."""
    times = np.asarray(times, dtype=float)
    out = np.full(densities.shape[0], np.nan)
    for j, row in enumerate(densities):
        for k in range(1, row.size - 1):
            if row[k] > row[k - 1] and row[k] >= row[k + 1]:
                out[j] = times[k]
                break
    return out


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_geometry_csv(geometry: RydbergGeometry, path) -> None:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "position_um"])
    for i, r in enumerate(geometry.positions):
        w.writerow([i, repr(float(r))])
    _atomic_write(path, buf.getvalue())


def pulse_program(geometry: RydbergGeometry, params: RydbergParams, duration: float) -> dict:
    """Analog program: register positions plus per-site or global drive."""
    is_global = bool(np.allclose(params.omega, params.omega[0]) and np.allclose(params.delta, params.delta[0]))
    drive = (
        {"omega": float(params.omega[0]), "delta": float(params.delta[0]), "phi": 0.0}
        if is_global
        else {"omega": params.omega.tolist(), "delta": params.delta.tolist(), "phi": params.phi.tolist()}
    )
    return {
        "units": {"length": "um", "frequency": "rad/us", "time": "us"},
        "register": geometry.positions.tolist(),
        "c6": params.c6,
        "global": is_global,
        "drive": drive,
        "duration": float(duration),
    }


def write_pulse_json(geometry: RydbergGeometry, params: RydbergParams, duration: float, path) -> None:
    _atomic_write(path, json.dumps(pulse_program(geometry, params, duration), indent=2) + "\n")
