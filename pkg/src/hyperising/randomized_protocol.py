"""Randomized-measurement emulation of OTOC protocols.

Global protocol: Haar-random ``2^N`` states ``u|0>``; the ensemble average of
``<W(t)> <V^dagger W(t) V>`` is proportional to ``Tr[W(t) V^dagger W(t) V]``.
Local protocol: random product states from single-qubit CUE unitaries; the
zeroth-order modified OTOC is the normalized correlation

    O_0(t) = mean_r(<W(t)>_r <V^dagger W(t) V>_r) / mean_r(<W(t)>_r^2).

Seeds: every random draw comes from ``SeedSequence(master, spawn_key=key)``
with ``key = (STREAM, rep, ...)`` so each repetition is reproducible on its
own and results do not depend on the order in which repetitions run.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .exact import PAULI, PureState, apply_local
from .model import ModelParams, build_hamiltonian

STREAM_UNITARY = 0
STREAM_SHOTS = 1
GLOBAL_LIMIT = 10


# ---------------------------------------------------------------------------
# random unitaries and seeds


def rng_for(master: int, *key: int) -> np.random.Generator:
    """Generator for the stream ``key`` under ``master``."""
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key)))


def sample_cue(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``n x n`` unitary: QR of a complex Ginibre matrix with phase-fixed ``R`` diagonal."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def sample_cue_2x2(rng: np.random.Generator) -> np.ndarray:
    return sample_cue(2, rng)


@dataclass
class UnitaryEnsemble:
    """Reproducible set of random unitaries.

    ``kind="local"`` holds ``N`` single-site unitaries per repetition;
    ``kind="global"`` one ``2^N`` unitary per repetition.
    """

    master_seed: int
    n_reps: int
    N: int
    kind: str = "local"

    def __post_init__(self):
        if self.kind not in ("local", "global"):
            raise ValueError("kind must be 'local' or 'global'")
        if self.kind == "global" and self.N > GLOBAL_LIMIT:
            raise exact.DimensionLimitError(f"global unitaries supported for N <= {GLOBAL_LIMIT}")

    def local_unitaries(self, rep: int) -> list[np.ndarray]:
        return [sample_cue_2x2(rng_for(self.master_seed, STREAM_UNITARY, rep, i)) for i in range(self.N)]

    def global_unitary(self, rep: int) -> np.ndarray:
        return sample_cue(2**self.N, rng_for(self.master_seed, STREAM_UNITARY, rep, self.N))

    def state(self, rep: int) -> np.ndarray:
        """``u |0...0>`` for repetition ``rep``."""
        if self.kind == "global":
            return self.global_unitary(rep)[:, 0].copy()
        vec = np.array([1.0 + 0j])
        for u in self.local_unitaries(rep):
            vec = np.kron(vec, u[:, 0])
        return vec

    def states(self) -> np.ndarray:
        return np.array([self.state(r) for r in range(self.n_reps)])


# ---------------------------------------------------------------------------
# measurement emulation


def z_probabilities(states: np.ndarray, site: int, N: int) -> np.ndarray:
    """Probability of outcome 0 (spin up) on ``site`` for each row of ``states``."""
    mask = exact._z_signs(N)[site] > 0
    return np.sum(np.abs(np.atleast_2d(states)[:, mask]) ** 2, axis=1)


def measure_shots(state, site: int, shots: int | None, rng: np.random.Generator | None = None,
                  N: int | None = None):
    """Estimate ``<sigma^z_site> = p_0 - p_1`` from ``shots`` projective measurements.

    ``state`` may be a :class:`PureState`, a vector or a batch of vectors
    (rows). ``shots=None`` returns the exact value.
    """
    if isinstance(state, PureState):
        N, vec = state.N, state.amplitudes
    else:
        vec = np.asarray(state)
        N = N if N is not None else int(round(math.log2(vec.shape[-1])))
    p0 = np.clip(z_probabilities(vec, site, N), 0.0, 1.0)
    if shots is None:
        est = 2 * p0 - 1
    else:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        rng = rng if rng is not None else np.random.default_rng()
        k = rng.binomial(int(shots), p0)
        est = (2.0 * k - shots) / shots
    return float(est[0]) if np.ndim(vec) == 1 else est


def shot_noise_scan(state, site: int, shots_list, n_trials: int = 2000, master_seed: int = 0,
                    N: int | None = None) -> dict[int, float]:
    """Empirical standard error of the shot estimate of ``<sigma^z_site>``.

    Each shot budget gets ``n_trials`` independent estimates from stream
    ``(STREAM_SHOTS, budget)``; the sample standard deviation is returned per
    budget. For ``p_0`` the ideal value is ``2 sqrt(p_0 (1 - p_0) / shots)``.
    """
    if isinstance(state, PureState):
        N, vec = state.N, state.amplitudes
    else:
        vec = np.asarray(state).reshape(-1)
    batch = np.broadcast_to(vec, (int(n_trials), vec.size))
    out = {}
    for s in shots_list:
        est = measure_shots(batch, site, int(s), rng_for(master_seed, STREAM_SHOTS, int(s)), N=N)
        out[int(s)] = float(np.std(est, ddof=1))
    return out


# ---------------------------------------------------------------------------
# statistics


def jackknife(samples, statistic=None):
    """Leave-one-out jackknife ``(estimate, standard_error)``.

    ``samples`` has repetitions along axis 0; ``statistic`` maps such an
    array to a number (default: the mean).
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("jackknife needs at least 2 samples")
    stat = statistic or (lambda a: float(np.mean(a, axis=0)))
    full = stat(x)
    loo = np.array([stat(np.delete(x, i, axis=0)) for i in range(n)])
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return full, se


def jackknife_error(samples, statistic=None) -> float:
    return jackknife(samples, statistic)[1]


def ratio_of_means(pairs) -> float:
    """``mean(x) / mean(y)`` for an ``(n, 2)`` array of ``(x, y)`` rows."""
    pairs = np.asarray(pairs)
    return float(np.mean(pairs[:, 0]) / np.mean(pairs[:, 1]))


def _ratio_jackknife(x, y):
    """Closed-form leave-one-out jackknife of ``sum(x) / sum(y)``."""
    n = x.size
    sx, sy = x.sum(), y.sum()
    loo = (sx - x) / (sy - y)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(sx / sy), se


# ---------------------------------------------------------------------------
# evolution backends


class _Evolver:
    """Advances a batch of states along a time grid, exactly or by the Trotter circuit."""

    def __init__(self, params: ModelParams, backend: str, dt: float):
        self.params = params
        self.terms = build_hamiltonian(params)
        self.backend = backend
        self.dt = dt
        if backend == "circuit":
            from .trotter_circuit import compile_trotter, sequence_unitary

            self.step = sequence_unitary(compile_trotter(params, dt, 1))
        elif backend == "exact":
            self.spec = exact.spectral_decomposition(self.terms)
        else:
            raise ValueError("backend must be 'circuit' or 'exact'")

    def n_steps(self, t: float) -> int:
        n = int(round(t / self.dt))
        if not math.isclose(n * self.dt, t, abs_tol=1e-9):
            raise ValueError(f"t={t} is not a multiple of the Trotter step {self.dt}")
        return n

    def propagator(self, t: float) -> np.ndarray:
        if self.backend == "circuit":
            return np.linalg.matrix_power(self.step, self.n_steps(t))
        w, v = self.spec.eigenvalues, self.spec.eigenvectors
        return (v * np.exp(-1j * w * t)[None, :]) @ v.conj().T


@dataclass
class ModifiedOtocEstimate:
    t: float
    value: float
    error: float
    correlation: float = math.nan
    defined: bool = True


@dataclass
class ProtocolRun:
    """Record of a randomized-measurement experiment."""

    protocol: str
    params: dict
    master_seed: int
    n_reps: int
    shots: int | None
    w_site: int
    v_site: int
    backend: str
    dt: float
    estimates: list = field(default_factory=list)
    W: np.ndarray | None = None  # (n_times, n_reps)
    VWV: np.ndarray | None = None
    reference: list | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.estimates])

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.error for e in self.estimates])

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "params": self.params,
            "master_seed": self.master_seed,
            "seed_scheme": "SeedSequence(master, spawn_key=(stream, rep, ...)); "
                           "stream 0 = unitaries (rep, site), stream 1 = shots (rep, t_index, which)",
            "n_reps": self.n_reps,
            "shots": self.shots,
            "w_site": self.w_site,
            "v_site": self.v_site,
            "backend": self.backend,
            "dt": self.dt,
            "estimates": [
                {"t": e.t, "value": _num(e.value), "error": _num(e.error),
                 "correlation": _num(e.correlation), "defined": e.defined}
                for e in self.estimates
            ],
            "reference": None if self.reference is None else [float(r) for r in self.reference],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_scatter_csv(self, path) -> None:
        """``t, rep, W, VWV`` rows for correlation plots."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "rep", "W", "VWV"])
            for k, e in enumerate(self.estimates):
                for r in range(self.n_reps):
                    w.writerow([repr(e.t), r, repr(float(self.W[k, r])), repr(float(self.VWV[k, r]))])


def _num(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _measure_streams(ensemble, states_w, states_v, site, shots, k, N):
    """Shot estimates for both circuits; stream ``(rep, k, 0/1)`` per repetition."""
    if shots is None:
        return measure_shots(states_w, site, None, N=N), measure_shots(states_v, site, None, N=N)
    W = np.empty(len(states_w))
    V = np.empty(len(states_v))
    for r in range(len(states_w)):
        W[r] = measure_shots(states_w[r], site, shots, rng_for(ensemble.master_seed, STREAM_SHOTS, r, k, 0), N=N)
        V[r] = measure_shots(states_v[r], site, shots, rng_for(ensemble.master_seed, STREAM_SHOTS, r, k, 1), N=N)
    return W, V


def _run(protocol, params, times, ensemble, shots, w_site, v_site, w_op, v_op, backend, dt):
    N = params.N
    if w_op != "z":
        raise ValueError("only sigma^z measurements of W are emulated")
    ev = _Evolver(params, backend, dt)
    psi0 = ensemble.states()  # (R, D)
    psiV = apply_local(psi0, PAULI[v_op], v_site, N)
    Ws, Vs = [], []
    for k, t in enumerate(times):
        U = ev.propagator(float(t))
        a = psi0 @ U.T
        b = psiV @ U.T
        w, v = _measure_streams(ensemble, a, b, w_site, shots, k, N)
        Ws.append(w)
        Vs.append(v)
    return np.array(Ws), np.array(Vs)


def global_protocol_otoc(
    params: ModelParams,
    times,
    n_reps: int = 1000,
    shots: int | None = None,
    w_site: int | None = None,
    v_site: int = 0,
    w_op: str = "z",
    v_op: str = "z",
    master_seed: int = 0,
    backend: str = "exact",
    dt: float = 0.5,
    estimator: str = "ratio",
) -> ProtocolRun:
    """Global-protocol estimate of the normalized trace ``Tr[W(t) V W(t) V] / 2^N``.

    For Haar states ``E[<A><B>] = (Tr A Tr B + Tr AB) / (D (D + 1))``. With
    traceless ``W`` the ``estimator="ratio"`` form
    ``mean(<W><VWV>) / mean(<W>^2)`` cancels the ``D (D + 1)`` factor
    (``Tr W^2 = D``); ``estimator="trace"`` multiplies the mean product by
    ``D + 1`` instead. Errors are jackknife over repetitions.
    """
    w_site = params.center if w_site is None else int(w_site)
    ens = UnitaryEnsemble(master_seed, n_reps, params.N, "global")
    times = [float(t) for t in times]
    W, VWV = _run("global", params, times, ens, shots, w_site, v_site, w_op, v_op, backend, dt)
    D = 2**params.N
    run = ProtocolRun("global", _params_dict(params), master_seed, n_reps, shots, w_site, v_site,
                      backend, dt, W=W, VWV=VWV)
    for k, t in enumerate(times):
        x, y = W[k] * VWV[k], W[k] ** 2
        if estimator == "ratio":
            val, se = _ratio_jackknife(x, y)
        elif estimator == "trace":
            val, se = jackknife((D + 1) * x)
        else:
            raise ValueError("estimator must be 'ratio' or 'trace'")
        run.estimates.append(ModifiedOtocEstimate(t, val, se, _corr(W[k], VWV[k])))
    return run


def local_protocol_O0(
    params: ModelParams,
    times,
    n_reps: int = 180,
    shots: int | None = 200,
    w_site: int | None = None,
    v_site: int | None = None,
    w_op: str = "z",
    v_op: str = "z",
    master_seed: int = 0,
    backend: str = "circuit",
    dt: float = 0.5,
    order: int = 0,
    tol: float = 1e-12,
    debias: bool = True,
) -> ProtocolRun:
    """Zeroth-order modified OTOC from random product states.

    Steps per repetition: per-site CUE unitaries on ``|0...0>``; evolution
    (Trotter circuit with step ``dt`` or exact); shot-emulated ``<W>``; the
    same with ``V`` inserted after state preparation. A time whose
    denominator ``mean(<W>^2)`` is below ``tol`` is reported undefined.

    With ``debias`` each squared shot estimate ``w^2`` in the denominator is
    replaced by ``(n w^2 - 1) / (n - 1)``, its unbiased value for ``n``
    shots; the numerator pairs independent shot records and needs no
    correction. ``debias=False`` uses the raw squares.
    """
    if order != 0:
        raise NotImplementedError("only the zeroth-order modified OTOC is implemented")
    w_site = params.center if w_site is None else int(w_site)
    v_site = (w_site - 1) if v_site is None else int(v_site)
    ens = UnitaryEnsemble(master_seed, n_reps, params.N, "local")
    times = [float(t) for t in times]
    W, VWV = _run("local", params, times, ens, shots, w_site, v_site, w_op, v_op, backend, dt)
    run = ProtocolRun("local", _params_dict(params), master_seed, n_reps, shots, w_site, v_site,
                      backend, dt, W=W, VWV=VWV)
    for k, t in enumerate(times):
        x, y = W[k] * VWV[k], W[k] ** 2
        if debias and shots is not None and shots > 1:
            y = (shots * y - 1.0) / (shots - 1.0)
        if abs(y.mean()) < tol:
            run.estimates.append(ModifiedOtocEstimate(t, math.nan, math.nan, math.nan, False))
            continue
        val, se = _ratio_jackknife(x, y)
        run.estimates.append(ModifiedOtocEstimate(t, val, se, _corr(W[k], VWV[k])))
    return run


def _corr(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.std() == 0 or b.std() == 0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])


def _params_dict(p: ModelParams) -> dict:
    return {"J": p.J, "h": p.h, "m": p.m, "l_max": p.l_max, "N": p.N}


# ---------------------------------------------------------------------------
# exact references


def _partial_trace_keep(op: np.ndarray, keep, N: int) -> np.ndarray:
    keep = list(keep)
    rest = [s for s in range(N) if s not in keep]
    t = op.reshape((2,) * (2 * N)).transpose(keep + rest + [N + s for s in keep] + [N + s for s in rest])
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    return np.trace(t.reshape(dk, dr, dk, dr), axis1=1, axis2=3)


def local_twirl_average(A: np.ndarray, B: np.ndarray, N: int) -> float:
    """``E_u[<A><B>]`` over product states ``(u_1 ... u_N)|0>`` with Haar ``u_i``.

    Uses ``E[rho (x) rho] = (I + SWAP) / 6`` per site, i.e.
    ``6^-N sum_S Tr_S[Tr_{not S}(A) Tr_{not S}(B)]`` over site subsets ``S``.
    """
    total = 0.0
    for r in range(N + 1):
        for S in itertools.combinations(range(N), r):
            a = _partial_trace_keep(A, S, N)
            b = _partial_trace_keep(B, S, N)
            total += np.real(np.trace(a @ b))
    return float(total / 6.0**N)


def haar_average(A: np.ndarray, B: np.ndarray) -> float:
    """``E_u[<A><B>]`` over Haar-random pure states."""
    D = A.shape[0]
    return float(np.real(np.trace(A) * np.trace(B) + np.trace(A @ B)) / (D * (D + 1)))


def exact_O0(params: ModelParams, times, w_site=None, v_site=None, w_op="z", v_op="z",
             backend: str = "exact", dt: float = 0.5) -> np.ndarray:
    """Infinite-statistics ``O_0(t)`` from the local twirl identity."""
    N = params.N
    w_site = params.center if w_site is None else int(w_site)
    v_site = (w_site - 1) if v_site is None else int(v_site)
    ev = _Evolver(params, backend, dt)
    Wop = exact.local_operator(w_op, w_site, N)
    Vop = exact.local_operator(v_op, v_site, N)
    out = []
    for t in times:
        U = ev.propagator(float(t))
        Wt = U.conj().T @ Wop @ U
        B = Vop.conj().T @ Wt @ Vop
        out.append(local_twirl_average(Wt, B, N) / local_twirl_average(Wt, Wt, N))
    return np.array(out)


def exact_trace_otoc(params: ModelParams, times, w_site=None, v_site=0, w_op="z", v_op="z",
                     backend: str = "exact", dt: float = 0.5) -> np.ndarray:
    """``Tr[W(t) V^dagger W(t) V] / 2^N`` with the chosen evolution backend."""
    N = params.N
    w_site = params.center if w_site is None else int(w_site)
    ev = _Evolver(params, backend, dt)
    Wop = exact.local_operator(w_op, w_site, N)
    Vop = exact.local_operator(v_op, v_site, N)
    out = []
    for t in times:
        U = ev.propagator(float(t))
        Wt = U.conj().T @ Wop @ U
        out.append(np.real(np.trace(Wt @ Vop.conj().T @ Wt @ Vop)) / 2**N)
    return np.array(out)
