"""First-order Trotter circuits: compilation, resource counts, noisy emulation and ZNE.

Rotation conventions: ``rz(phi) = exp(-i phi Z / 2)``, ``rx(phi) = exp(-i phi X / 2)``.
A bond term ``c Z_i Z_j dt`` becomes ``cx(i, j) rz_j(2 c dt) cx(i, j)``, so every
entangling block costs two CNOTs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .exact import PAULI, PureState, apply_local, apply_two_site, DimensionLimitError
from .model import ModelParams, build_hamiltonian

TWO_QUBIT = frozenset({"cx"})
NOISY_LIMIT = 14

_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _rz(phi):
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def _rx(phi):
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


@dataclass(frozen=True)
class CircuitGate:
    name: str
    sites: tuple[int, ...]
    angle: float = 0.0

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT

    def matrix(self) -> np.ndarray:
        if self.name == "cx":
            return _CX
        if self.name == "rz":
            return _rz(self.angle)
        if self.name == "rx":
            return _rx(self.angle)
        if self.name in ("x", "y", "z"):
            return PAULI[self.name]
        raise ValueError(f"unknown gate {self.name!r}")

    def inverse(self) -> CircuitGate:
        if self.name in ("rz", "rx"):
            return CircuitGate(self.name, self.sites, -self.angle)
        return self  # cx and Paulis are self-inverse

    def to_dict(self) -> dict:
        return {"name": self.name, "sites": list(self.sites), "angle": self.angle}


@dataclass
class GateSequence:
    N: int
    gates: list[CircuitGate]
    dt: float
    n_steps: int
    ordering: str = "even-odd"
    meta: dict = field(default_factory=dict)

    def two_qubit_count(self) -> int:
        return sum(g.is_two_qubit for g in self.gates)

    def depth(self) -> int:
        """ASAP-scheduled depth: each gate starts after the last gate on any of its qubits."""
        level = [0] * self.N
        for g in self.gates:
            t = 1 + max(level[s] for s in g.sites)
            for s in g.sites:
                level[s] = t
        return max(level, default=0)

    def inverse(self) -> GateSequence:
        return GateSequence(self.N, [g.inverse() for g in reversed(self.gates)], -self.dt,
                            self.n_steps, self.ordering, dict(self.meta))

    def __add__(self, other: GateSequence) -> GateSequence:
        if other.N != self.N:
            raise ValueError("sequences act on different chain lengths")
        return GateSequence(self.N, self.gates + other.gates, self.dt, self.n_steps,
                            self.ordering, dict(self.meta))

    def to_dict(self) -> dict:
        return {"N": self.N, "dt": self.dt, "n_steps": self.n_steps, "ordering": self.ordering,
                "meta": self.meta, "gates": [g.to_dict() for g in self.gates]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> GateSequence:
        gates = [CircuitGate(g["name"], tuple(g["sites"]), float(g["angle"])) for g in d["gates"]]
        return cls(int(d["N"]), gates, float(d["dt"]), int(d["n_steps"]), d["ordering"], d.get("meta", {}))


@dataclass(frozen=True)
class ResourceCount:
    two_qubit: int
    depth: int
    per_step_two_qubit: int


def resources(seq: GateSequence) -> ResourceCount:
    per = seq.two_qubit_count() // seq.n_steps if seq.n_steps else 0
    return ResourceCount(seq.two_qubit_count(), seq.depth(), per)


def _zz_block(i, j, angle):
    return [CircuitGate("cx", (i, j)), CircuitGate("rz", (j,), angle), CircuitGate("cx", (i, j))]


def trotter_step_gates(params: ModelParams, dt: float, ordering: str = "even-odd") -> list[CircuitGate]:
    """One first-order step: ZZ blocks (even bonds then odd, or in chain order), then fields.

    The longitudinal ``rz`` layer is emitted even when ``m = 0`` so the circuit
    layout does not depend on parameter values.
    """
    terms = build_hamiltonian(params)
    N = params.N
    bc, xc, zc = terms.bond_coefficients(), terms.x_coefficients(), terms.z_coefficients()
    if ordering == "even-odd":
        bonds = list(range(0, N - 1, 2)) + list(range(1, N - 1, 2))
    elif ordering == "sequential":
        bonds = list(range(N - 1))
    else:
        raise ValueError("ordering must be 'even-odd' or 'sequential'")
    gates: list[CircuitGate] = []
    if ordering == "even-odd":
        # layer-wise emission: all first CNOTs of a parity group, then the rz, then the second CNOTs
        for parity in (0, 1):
            grp = [b for b in bonds if b % 2 == parity]
            gates += [CircuitGate("cx", (b, b + 1)) for b in grp]
            gates += [CircuitGate("rz", (b + 1,), 2 * bc[b] * dt) for b in grp]
            gates += [CircuitGate("cx", (b, b + 1)) for b in grp]
    else:
        for b in bonds:
            gates += _zz_block(b, b + 1, 2 * bc[b] * dt)
    gates += [CircuitGate("rz", (i,), 2 * zc[i] * dt) for i in range(N)]
    gates += [CircuitGate("rx", (i,), 2 * xc[i] * dt) for i in range(N)]
    return gates


def compile_trotter(params: ModelParams, dt: float, n: int, ordering: str = "even-odd") -> GateSequence:
    """``n`` first-order Trotter steps of size ``dt`` as a gate list."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    step = trotter_step_gates(params, dt, ordering)
    return GateSequence(params.N, step * int(n), float(dt), int(n), ordering,
                        {"J": params.J, "h": params.h, "m": params.m, "l_max": params.l_max})


def compile_direct_otoc(params: ModelParams, dt: float, n: int, w_site: int | None = None,
                        v_site: int = 0, w_op: str = "z", v_op: str = "z",
                        ordering: str = "even-odd") -> GateSequence:
    """Circuit for ``W(t) V W(t) V |psi>`` with ``W(t) = U^dagger W U``.

    Four Trotter evolutions of ``n`` steps, hence ``8 n (N-1)`` CNOTs. The OTOC
    is the overlap of the output with the input state.
    """
    w_site = params.center if w_site is None else int(w_site)
    U = compile_trotter(params, dt, n, ordering)
    Ud = U.inverse()
    N = params.N
    V = GateSequence(N, [CircuitGate(v_op, (v_site,))], dt, 0, ordering)
    W = GateSequence(N, [CircuitGate(w_op, (w_site,))], dt, 0, ordering)
    seq = V + U + W + Ud + V + U + W + Ud
    seq.n_steps = int(n)
    seq.dt = float(dt)
    seq.meta = dict(U.meta, w_site=w_site, v_site=v_site, kind="direct-otoc")
    return seq


def direct_otoc_two_qubit_count(N: int, n: int) -> int:
    return 8 * n * (N - 1)


def fold_noise(seq: GateSequence, scale: int) -> GateSequence:
    """Replace every two-qubit gate ``U`` by ``U (U^dagger U)^((scale-1)/2)``."""
    scale = int(scale)
    if scale < 1 or scale % 2 == 0:
        raise ValueError("fold scale must be a positive odd integer")
    out = []
    for g in seq.gates:
        if g.is_two_qubit:
            out.append(g)
            for _ in range((scale - 1) // 2):
                out += [g.inverse(), g]
        else:
            out.append(g)
    return GateSequence(seq.N, out, seq.dt, seq.n_steps, seq.ordering, dict(seq.meta, fold=scale))


# ---------------------------------------------------------------------------
# simulation


def _apply_gate(vec, g: CircuitGate, N: int):
    if len(g.sites) == 2:
        return apply_two_site(vec, g.matrix(), g.sites[0], g.sites[1], N)
    return apply_local(vec, g.matrix(), g.sites[0], N)


def sequence_unitary(seq: GateSequence) -> np.ndarray:
    eye = np.eye(2**seq.N, dtype=complex)
    out = eye
    for g in seq.gates:
        out = _apply_gate(out, g, seq.N)
    return out.T


@dataclass(frozen=True)
class NoiseSpec:
    """Two-qubit depolarizing noise after every CNOT.

    With probability ``p`` one of the 15 non-identity two-qubit Paulis, drawn
    uniformly, is applied.
    """

    p: float
    scale: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.scale < 1 or self.scale % 2 == 0:
            raise ValueError("scale must be a positive odd integer")


@dataclass
class TrajectoryResult:
    """Batch of pure-state trajectories; mixed-state averages over rows."""

    states: np.ndarray  # (n_traj, 2^N)
    N: int

    def magnetization(self, axis: str = "z") -> np.ndarray:
        from .exact import _z_signs

        if axis == "z":
            p = np.abs(self.states) ** 2
            return (p @ _z_signs(self.N).T).mean(axis=0)
        out = np.empty(self.N)
        for i in range(self.N):
            out[i] = np.real(np.sum(self.states.conj() * apply_local(self.states, axis, i, self.N), axis=1)).mean()
        return out

    def per_trajectory_z(self, site: int) -> np.ndarray:
        from .exact import _z_signs

        return (np.abs(self.states) ** 2) @ _z_signs(self.N)[site]


_PAULI_LIST = [PAULI[k] for k in "ixyz"]


def simulate_sequence(seq: GateSequence, initial: PureState | None = None,
                      noise: NoiseSpec | None = None, trajectories: int = 1000,
                      seed=None):
    """Run ``seq`` on ``initial`` (all up by default).

    Without noise the exact output ``PureState`` is returned. With noise the
    sequence is first folded to ``noise.scale`` and a :class:`TrajectoryResult`
    of ``trajectories`` stochastic Pauli trajectories is returned.
    """
    N = seq.N
    psi = initial if initial is not None else PureState.all_up(N)
    if noise is None:
        vec = psi.amplitudes.copy()
        for g in seq.gates:
            vec = _apply_gate(vec, g, N)
        return PureState(vec, N)
    if N > NOISY_LIMIT:
        raise DimensionLimitError(f"noisy simulation supports N <= {NOISY_LIMIT}")
    rng = np.random.default_rng(seed)
    folded = fold_noise(seq, noise.scale)
    T = int(trajectories)
    batch = np.tile(psi.amplitudes, (T, 1))
    for g in folded.gates:
        batch = _apply_gate(batch, g, N)
        if g.is_two_qubit and noise.p > 0:
            hit = np.flatnonzero(rng.random(T) < noise.p)
            if hit.size:
                kinds = rng.integers(1, 16, size=hit.size)
                for k in np.unique(kinds):
                    rows = hit[kinds == k]
                    a, b = divmod(int(k), 4)
                    sub = batch[rows]
                    if a:
                        sub = apply_local(sub, _PAULI_LIST[a], g.sites[0], N)
                    if b:
                        sub = apply_local(sub, _PAULI_LIST[b], g.sites[1], N)
                    batch[rows] = sub
    return TrajectoryResult(batch, N)


# ---------------------------------------------------------------------------
# zero-noise extrapolation


@dataclass
class ZNEResult:
    estimate: float
    slope: float
    residuals: dict
    values: dict
    errors: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "value", "error"])
            for s in sorted(self.values):
                w.writerow([s, repr(float(self.values[s])), repr(float(self.errors.get(s, float("nan"))))])
            w.writerow([0, repr(self.estimate), ""])


def zne_extrapolate(values: dict, errors: dict | None = None) -> ZNEResult:
    """Least-squares line through ``{scale: value}`` evaluated at scale 0."""
    if len(values) < 2:
        raise ValueError("need at least two noise scales")
    s = np.array(sorted(values), dtype=float)
    v = np.array([values[k] for k in sorted(values)], dtype=float)
    slope, icpt = np.polyfit(s, v, 1)
    res = {k: float(values[k] - (slope * k + icpt)) for k in sorted(values)}
    return ZNEResult(float(icpt), float(slope), res, dict(values), dict(errors or {}))


def zne_run(params: ModelParams, dt: float, n: int, site: int, p: float,
            scales=(1, 3, 5), trajectories: int = 1000, seed: int = 0,
            ordering: str = "even-odd") -> tuple[ZNEResult, float]:
    """Noisy ``<Z_site>`` at each fold scale, extrapolated; returns ``(result, noiseless)``.

    Scale ``k`` uses the independent stream ``SeedSequence(seed).spawn`` entry ``k``.
    """
    seq = compile_trotter(params, dt, n, ordering)
    ideal = simulate_sequence(seq)
    from .exact import magnetization_profile

    noiseless = float(magnetization_profile(ideal, "z")[site])
    streams = np.random.SeedSequence(seed).spawn(len(scales))
    vals, errs = {}, {}
    for sc, ss in zip(scales, streams):
        tr = simulate_sequence(seq, noise=NoiseSpec(p, int(sc)), trajectories=trajectories,
                               seed=np.random.default_rng(ss))
        z = tr.per_trajectory_z(site)
        vals[int(sc)] = float(z.mean())
        errs[int(sc)] = float(z.std(ddof=1) / np.sqrt(z.size))
    return zne_extrapolate(vals, errs), noiseless
