"""Light-cone extraction and regime classification for OTOC grids.

Grids are site x time arrays of the infinite-temperature OTOC with ``W`` at a
fixed site and ``V`` swept over the chain. Site labels in reports are 1-based.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize

from .model import ModelParams, build_hamiltonian

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.20, 0.25, 0.30)
MODELS = ("linear", "power-law", "logarithmic")


class InsufficientPointsError(ValueError):
    """Too few reached light-cone points to fit the candidate models."""


# ---------------------------------------------------------------------------
# grids


@dataclass
class OtocGrid:
    """OTOC values ``values[site, k]`` at ``times[k]``.

    ``sites`` holds 1-based labels; ``metadata`` carries the model parameters
    and operator choice of the run.
    """

    values: np.ndarray
    times: np.ndarray
    sites: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            if np.max(np.abs(values.imag), initial=0.0) > 1e-9:
                raise ValueError("OTOC grid values must be real")
            values = values.real
        self.values = np.asarray(values, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.times.size:
            raise ValueError("values must have shape (n_sites, n_times)")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly ascending")
        if self.sites is None:
            self.sites = np.arange(1, self.values.shape[0] + 1)
        self.sites = np.asarray(self.sites, dtype=int)
        if self.times.size and self.times[0] == 0.0:
            dev = np.max(np.abs(self.values[:, 0] - 1.0))
            if dev > 1e-6:
                raise ValueError(f"OTOC at t=0 deviates from 1 by {dev:.2e}")

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    @property
    def center_label(self) -> float:
        """1-based label of the ``W`` site (defaults to the chain center)."""
        if "w_site" in self.metadata:
            return float(self.metadata["w_site"]) + 1.0
        return (self.n_sites + 1) / 2


def compute_otoc_grid(
    params: ModelParams,
    w_op: str = "z",
    v_op: str = "z",
    w_site: int | None = None,
    dt: float = 0.05,
    t_max: float = 10.0,
    sample_dt: float = 0.25,
    engine: str = "mpo",
    policy=None,
    ordering: str = "even-odd",
    order: int = 1,
) -> OtocGrid:
    """OTOC grid from the MPO engine (``engine="mpo"``) or dense matrices (``"exact"``).

    Both engines use the same Trotter step, so the two grids agree to
    truncation error.
    """
    from .mps.mps import TruncationPolicy

    terms = build_hamiltonian(params)
    N = params.N
    w_site = params.center if w_site is None else int(w_site)
    every = int(round(sample_dt / dt))
    n_steps = int(round(t_max / dt))
    if every < 1 or not math.isclose(every * dt, sample_dt, rel_tol=1e-9):
        raise ValueError("sample_dt must be a multiple of dt")
    times = dt * np.arange(0, n_steps + 1, every)
    meta = {
        "J": params.J, "h": params.h, "m": params.m, "l_max": params.l_max, "N": N,
        "w_op": w_op, "v_op": v_op, "w_site": w_site, "dt": dt, "engine": engine,
        "ordering": ordering, "order": order,
    }
    if engine == "mpo":
        from .mps.mpo import MatrixProductOperator, heisenberg_evolve_mpo, otoc_profile

        policy = policy or TruncationPolicy(cutoff=1e-12, chi_max=64)
        meta.update(cutoff=policy.cutoff, chi_max=policy.chi_max)
        W = MatrixProductOperator.local(w_op, w_site, N)
        cols = [otoc_profile(W, v_op)]

        def observe(step, W_t):
            if step % every == 0:
                cols.append(otoc_profile(W_t, v_op))

        W_t = heisenberg_evolve_mpo(W, terms, dt, n_steps, policy, ordering, order, observer=observe)
        meta["discarded_weight"] = W_t.log.total
        meta["max_bond"] = max(W_t.bond_dimensions, default=1)
        values = np.array(cols).T
    elif engine == "exact":
        from .exact import otoc_exact_infT_profile
        from .mps.gates import layer_unitary, trotter_layer

        step = layer_unitary(trotter_layer(terms, dt, ordering, order), N)
        values = otoc_exact_infT_profile(terms, w_site, times, w_op, v_op, step=step, dt=dt)
    else:
        raise ValueError("engine must be 'mpo' or 'exact'")
    return OtocGrid(values, times, np.arange(1, N + 1), meta)


# ---------------------------------------------------------------------------
# light cone


@dataclass(frozen=True)
class LightconePoint:
    """First-crossing time at one site; ``t_star`` is NaN when unreached."""

    site: int
    t_star: float
    epsilons: tuple[float, ...]
    uncertainty: float
    reached: bool

    def to_dict(self) -> dict:
        return asdict(self)


def first_crossing(times, values, epsilon: float) -> float:
    """Earliest ``t`` with ``|1 - O(t)| >= epsilon``, linear in ``t`` between samples.

    Returns NaN when the threshold is never crossed.
    """
    dev = np.abs(1.0 - np.asarray(values, dtype=float))
    hit = np.flatnonzero(dev >= epsilon)
    if hit.size == 0:
        return math.nan
    k = int(hit[0])
    if k == 0:
        return float(times[0])
    d0, d1 = dev[k - 1], dev[k]
    frac = (epsilon - d0) / (d1 - d0)
    return float(times[k - 1] + frac * (times[k] - times[k - 1]))


def extract_lightcone(grid: OtocGrid, epsilons=DEFAULT_EPSILONS) -> list[LightconePoint]:
    """Per-site first-crossing times averaged over ``epsilons``.

    The uncertainty is the spread (population standard deviation) of the
    per-epsilon crossing times. A site crossing none of the thresholds is
    marked unreached; if only some thresholds are crossed, the average runs
    over those.
    """
    eps = tuple(sorted(float(e) for e in epsilons))
    if not eps or any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    out = []
    for label, row in zip(grid.sites, grid.values):
        ts = np.array([first_crossing(grid.times, row, e) for e in eps])
        ok = ts[~np.isnan(ts)]
        if ok.size == 0:
            out.append(LightconePoint(int(label), math.nan, eps, math.nan, False))
        else:
            out.append(LightconePoint(int(label), float(ok.mean()), eps, float(ok.std()), True))
    return out


# ---------------------------------------------------------------------------
# fits


@dataclass
class FitResult:
    model: str
    params: dict
    rss: float
    aicc: float
    n: int

    def predict(self, d):
        d = np.asarray(d, dtype=float)
        p = self.params
        if self.model == "linear":
            return p["v"] * d + p["B"]
        if self.model == "power-law":
            return p["a"] * d ** p["p"] + p["B"]
        if self.model == "logarithmic":
            return p["a"] * np.log(d) + p["B"]
        if self.model == "log-slope1":
            return np.log(d) + p["B"]
        raise ValueError(self.model)


@dataclass
class RegimeReport:
    classification: str
    fits: dict
    slope1_log_fit: FitResult | None
    n_sites: int
    n_unreached: int
    points: list = field(default_factory=list)
    center: float = 0.0

    def aicc_margin(self, better: str, worse: str) -> float:
        """``AICc(worse) - AICc(better)``; positive when ``better`` is preferred."""
        return self.fits[worse].aicc - self.fits[better].aicc

    def to_dict(self) -> dict:
        def fit(f):
            return None if f is None else asdict(f)

        return {
            "classification": self.classification,
            "fits": {k: fit(v) for k, v in self.fits.items()},
            "slope1_log_fit": fit(self.slope1_log_fit),
            "n_sites": self.n_sites,
            "n_unreached": self.n_unreached,
            "center": self.center,
            "points": [p.to_dict() for p in self.points],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(_jsonable(self.to_dict()), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def aicc(rss: float, n: int, k: int, scale: float = 1.0, known_variance: bool = False) -> float:
    """Small-sample corrected Akaike criterion for least squares.

    With ``known_variance`` the residuals are already divided by their
    standard errors and ``rss`` is the chi-square; ``k`` counts the fitted
    coefficients. Otherwise the noise variance is estimated from the
    residuals, counted as one extra parameter, and the RSS is floored at
    ``n * (1e-12 * scale)**2`` so exact fits stay finite.
    """
    if not known_variance:
        k += 1
    if n - k - 1 <= 0:
        return math.inf
    penalty = 2 * k + 2 * k * (k + 1) / (n - k - 1)
    if known_variance:
        return rss + penalty
    rss = max(rss, n * (1e-12 * scale) ** 2)
    return n * math.log(rss / n) + penalty


def _linear_fit(x, t, w=None):
    A = np.column_stack([x, np.ones_like(x)])
    if w is None:
        coef, *_ = np.linalg.lstsq(A, t, rcond=None)
        return coef, float(np.sum((A @ coef - t) ** 2))
    coef, *_ = np.linalg.lstsq(A * w[:, None], t * w, rcond=None)
    return coef, float(np.sum(((A @ coef - t) * w) ** 2))


P_BOUNDS = (1e-3, 20.0)


def _power_fit(d, t, w=None):
    """Profile least squares over the exponent; (a, B) are linear for fixed p."""
    logd = np.log(d)

    def rss(logp):
        return _linear_fit(np.exp(np.exp(logp) * logd), t, w)[1]

    grid = np.linspace(np.log(P_BOUNDS[0]), np.log(P_BOUNDS[1]), 241)
    vals = np.array([rss(g) for g in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = scipy.optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-13})
    logp = res.x if res.fun <= vals[k] else grid[k]
    p = float(np.exp(logp))
    (a, B), r = _linear_fit(d**p, t, w)
    return {"a": float(a), "p": p, "B": float(B)}, r


def fit_models(d, t, sigma=None) -> dict[str, FitResult]:
    """Least-squares fits of ``t(d)`` for the three candidate models.

    With ``sigma`` the fits are weighted by ``1/sigma`` and scored with the
    known-variance criterion; without it the variance is estimated.
    """
    d = np.asarray(d, dtype=float)
    t = np.asarray(t, dtype=float)
    n = d.size
    known = sigma is not None
    w = None if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    scale = max(float(np.max(np.abs(t))), 1.0)

    def score(r, k):
        return aicc(r, n, k, scale, known_variance=known)

    (v, B), r_lin = _linear_fit(d, t, w)
    pw, r_pow = _power_fit(d, t, w)
    (a, Bl), r_log = _linear_fit(np.log(d), t, w)
    return {
        "linear": FitResult("linear", {"v": float(v), "B": float(B)}, r_lin, score(r_lin, 2), n),
        "power-law": FitResult("power-law", pw, r_pow, score(r_pow, 3), n),
        "logarithmic": FitResult("logarithmic", {"a": float(a), "B": float(Bl)}, r_log,
                                 score(r_log, 2), n),
    }


# fewest parameters first; linear before logarithmic at equal count
SIMPLICITY = ("linear", "logarithmic", "power-law")


def _select(fits: dict[str, FitResult], tie_tol: float) -> str:
    best = min(f.aicc for f in fits.values())
    for name in SIMPLICITY:
        if fits[name].aicc <= best + tie_tol:
            return name
    raise AssertionError("unreachable")


def fit_lightcone(
    points,
    center: float | None = None,
    side: str = "both",
    d_min: int = 3,
    resolution: float | None = None,
    tie_tol: float = 2.0,
    min_points: int = 4,
    confined_fraction: float = 0.5,
    strict: bool = True,
) -> RegimeReport:
    """Classify the light cone traced by ``points``.

    Parameters
    ----------
    points : sequence of LightconePoint
    center : float, optional
        1-based label of the ``W`` site; defaults to the middle of the labels.
    side : {"both", "left", "right"}
        Which sites enter the fits.
    d_min : int
        Smallest distance ``|site - center|`` used in the fits. Sites next to
        ``W`` are reached during the initial perturbative growth of the
        commutator rather than by a propagating front.
    resolution : float, optional
        Time-grid spacing of the source grid. Each point then gets the
        standard error ``sqrt(u**2 + resolution**2 / 12)`` (``u`` the
        multi-epsilon spread) and the fits are weighted by it. Without it
        the fits are unweighted with estimated variance.
    tie_tol : float
        Models within ``tie_tol`` of the best criterion value count as tied;
        the tie goes to the model with fewer parameters (linear first).
    confined_fraction : float
        The run is classified confined when at least this fraction of all
        sites is unreached.
    strict : bool
        With too few usable points, raise :class:`InsufficientPointsError`
        (default) or return an ``"undetermined"`` report.
    """
    points = list(points)
    labels = np.array([p.site for p in points], dtype=float)
    if center is None:
        center = (labels.min() + labels.max()) / 2
    n_unreached = sum(not p.reached for p in points)
    sel = [p for p in points if p.reached and abs(p.site - center) >= max(d_min, 1)]
    if side == "left":
        sel = [p for p in sel if p.site < center]
    elif side == "right":
        sel = [p for p in sel if p.site > center]
    elif side != "both":
        raise ValueError("side must be 'both', 'left' or 'right'")
    n_left = sum(p.site < center for p in sel)
    n_right = sum(p.site > center for p in sel)
    confined = n_unreached >= confined_fraction * len(points)
    if max(n_left, n_right) < min_points:
        if not confined and strict:
            raise InsufficientPointsError(
                f"need >= {min_points} reached points on one side of the center, "
                f"got {n_left} left and {n_right} right"
            )
        nan_fits = {m: FitResult(m, {}, math.nan, math.inf, len(sel)) for m in MODELS}
        label = "confined" if confined else "undetermined"
        return RegimeReport(label, nan_fits, None, len(points), n_unreached, points, center)
    d = np.abs(np.array([p.site for p in sel], dtype=float) - center)
    t = np.array([p.t_star for p in sel])
    sigma = None
    if resolution is not None:
        u = np.nan_to_num(np.array([p.uncertainty for p in sel]))
        sigma = np.sqrt(u**2 + resolution**2 / 12.0)
    fits = fit_models(d, t, sigma)
    B1 = float(np.mean(t - np.log(d)))
    r1 = float(np.sum((np.log(d) + B1 - t) ** 2))
    slope1 = FitResult("log-slope1", {"a": 1.0, "B": B1}, r1,
                       aicc(r1, d.size, 1, max(float(np.max(np.abs(t))), 1.0)), d.size)
    label = "confined" if confined else _select(fits, tie_tol)
    return RegimeReport(label, fits, slope1, len(points), n_unreached, points, center)


def classify_grid(grid: OtocGrid, epsilons=DEFAULT_EPSILONS, **kw) -> RegimeReport:
    """Light-cone extraction and classification with the grid's center and time step."""
    kw.setdefault("center", grid.center_label)
    if grid.times.size > 1:
        kw.setdefault("resolution", float(np.median(np.diff(grid.times))))
    return fit_lightcone(extract_lightcone(grid, epsilons), **kw)


def regime_scan(l_max_list, base: ModelParams, epsilons=DEFAULT_EPSILONS, fit_kw=None, **grid_kw):
    """Classify the light cone for each ``l_max``; returns ``{l_max: RegimeReport}``.

    Points are independent, so callers may parallelize by splitting the list.
    """
    out = {}
    for lm in l_max_list:
        grid = compute_otoc_grid(base.replace(l_max=float(lm)), **grid_kw)
        out[float(lm)] = classify_grid(grid, epsilons, **(fit_kw or {}))
        logger.info("l_max=%g -> %s", lm, out[float(lm)].classification)
    return out


# ---------------------------------------------------------------------------
# averages and equilibrium


def site_averaged_otoc(grid: OtocGrid):
    """``(times, mean over sites of O)``."""
    return grid.times.copy(), grid.values.mean(axis=0)


def loglog_slope(times, values, t_min: float, t_max: float | None = None):
    """Slope and intercept of ``log|values|`` against ``log t`` on ``[t_min, t_max]``."""
    times = np.asarray(times, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    mask = (times >= t_min) & (times > 0) & (values > 0)
    if t_max is not None:
        mask &= times <= t_max
    if mask.sum() < 2:
        raise InsufficientPointsError("need two positive samples in the window")
    slope, icpt = np.polyfit(np.log(times[mask]), np.log(values[mask]), 1)
    return float(slope), float(icpt)


@dataclass
class EquilibriumPoint:
    J: float
    entropy: float
    susceptibility: float
    energy: float
    converged: bool = True


def magnetization_susceptibility(zz: np.ndarray, z: np.ndarray) -> float:
    """``(<M^2> - <M>^2) / N`` with ``M = sum_i Z_i``, from ``<Z_i Z_j>`` and ``<Z_i>``."""
    N = z.size
    return float((np.sum(zz) - np.sum(z) ** 2) / N)


def equilibrium_scan(
    J_list,
    params: ModelParams,
    method: str = "auto",
    policy=None,
    sweeps: int = 50,
    seed: int = 0,
) -> list[EquilibriumPoint]:
    """Ground-state half-chain entropy and susceptibility for each ``J``.

    ``method="exact"`` diagonalizes densely; ``"dmrg"`` uses two-site DMRG;
    ``"auto"`` picks exact for ``N <= 12``.
    """
    from . import exact

    if method == "auto":
        method = "exact" if params.N <= 12 else "dmrg"
    out = []
    for J in J_list:
        p = params.replace(J=float(J))
        terms = build_hamiltonian(p)
        if method == "exact":
            E, psi = exact.ground_state(terms)
            S = exact.entanglement_entropy(psi, p.N // 2)
            z = exact.magnetization_profile(psi, "z")
            zz = exact.zz_correlations(psi)
            out.append(EquilibriumPoint(float(J), S, magnetization_susceptibility(zz, z), E))
        elif method == "dmrg":
            from .mps.dmrg import dmrg
            from .mps.mps import TruncationPolicy

            res = dmrg(terms, policy or TruncationPolicy(1e-12, 64), sweeps=sweeps, seed=seed)
            psi = res.state
            z = np.real(psi.local_expectations(np.diag([1.0, -1.0])))
            zz = psi.two_point_zz()
            out.append(EquilibriumPoint(float(J), psi.half_chain_entropy(),
                                        magnetization_susceptibility(zz, z), res.energy, res.converged))
        else:
            raise ValueError("method must be 'auto', 'exact' or 'dmrg'")
    return out


def interior_peaks(values) -> list[int]:
    """Indices of strict local maxima that are not at either end."""
    v = np.asarray(values, dtype=float)
    return [i for i in range(1, v.size - 1) if v[i] > v[i - 1] and v[i] > v[i + 1]]


def peak_location(J_list, values) -> float:
    return float(np.asarray(J_list, dtype=float)[int(np.argmax(values))])


def entropy_curve(params: ModelParams, dt: float = 0.05, t_max: float = 10.0, sample_dt: float = 0.25,
                  policy=None, initial=None):
    """Half-chain entropy along a TEBD quench from ``initial`` (all up by default)."""
    from .mps.mps import MatrixProductState, TruncationPolicy
    from .mps.tebd import tebd_evolve

    terms = build_hamiltonian(params)
    psi = initial if initial is not None else MatrixProductState.all_up(params.N)
    every = int(round(sample_dt / dt))
    times, S = [0.0], [psi.copy().half_chain_entropy()]

    def observe(step, state):
        if step % every == 0:
            times.append(step * dt)
            S.append(state.half_chain_entropy())

    tebd_evolve(psi, terms, dt, int(round(t_max / dt)), policy or TruncationPolicy(1e-10, 128),
                observer=observe)
    return np.array(times), np.array(S)


# ---------------------------------------------------------------------------
# I/O


def write_grid_csv(grid: OtocGrid, path) -> None:
    """Long format: one ``site,t,value`` row per sample, 1-based sites."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "t", "value"])
        for label, row in zip(grid.sites, grid.values):
            for t, v in zip(grid.times, row):
                w.writerow([int(label), repr(float(t)), repr(float(v))])


def read_grid_csv(path, metadata=None) -> OtocGrid:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    sites = sorted({int(r["site"]) for r in rows})
    times = sorted({float(r["t"]) for r in rows})
    si = {s: k for k, s in enumerate(sites)}
    ti = {t: k for k, t in enumerate(times)}
    values = np.full((len(sites), len(times)), np.nan)
    for r in rows:
        values[si[int(r["site"])], ti[float(r["t"])]] = float(r["value"])
    if np.isnan(values).any():
        raise ValueError("grid CSV is missing samples")
    return OtocGrid(values, np.array(times), np.array(sites), dict(metadata or {}))


def write_points_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "t_star", "uncertainty", "reached"])
        for p in points:
            w.writerow([p.site, "" if not p.reached else repr(p.t_star),
                        "" if not p.reached else repr(p.uncertainty), int(p.reached)])


def read_points_csv(path, epsilons=DEFAULT_EPSILONS) -> list[LightconePoint]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            reached = bool(int(r["reached"]))
            t = float(r["t_star"]) if reached else math.nan
            u = float(r["uncertainty"]) if reached else math.nan
            out.append(LightconePoint(int(r["site"]), t, tuple(epsilons), u, reached))
    return out


def grid_svg(grid: OtocGrid, points=None, report: RegimeReport | None = None,
             cell: float = 8.0) -> str:
    """SVG heatmap of ``O(site, t)`` (time up, sites across) with light-cone dots.

    The logarithmic guide ``t = log|x - c| + B`` is overlaid when a report
    with a slope-1 fit is given.
    """
    ns, nt = grid.values.shape
    W, H = ns * cell, nt * cell
    lo, hi = float(grid.values.min()), float(grid.values.max())
    span = hi - lo or 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.1f} {H:.1f}">']
    for i in range(ns):
        for k in range(nt):
            u = (grid.values[i, k] - lo) / span
            r, g, b = int(255 * u), int(255 * (1 - abs(2 * u - 1))), int(255 * (1 - u))
            parts.append(f'<rect x="{i * cell:.1f}" y="{H - (k + 1) * cell:.1f}" width="{cell:.1f}" '
                         f'height="{cell:.1f}" fill="rgb({r},{g},{b})"/>')
    t0, t1 = float(grid.times[0]), float(grid.times[-1])

    def ty(t):
        return H - (t - t0) / ((t1 - t0) or 1.0) * (H - cell) - cell / 2

    def sx(label):
        return (label - grid.sites[0] + 0.5) * cell

    for p in points or []:
        if p.reached:
            parts.append(f'<circle cx="{sx(p.site):.1f}" cy="{ty(p.t_star):.1f}" r="{cell / 3:.1f}" fill="red"/>')
    if report is not None and report.slope1_log_fit is not None:
        B = report.slope1_log_fit.params["B"]
        xs = np.linspace(grid.sites[0], grid.sites[-1], 4 * ns)
        xs = xs[np.abs(xs - report.center) >= 1]
        for sign in (-1, 1):
            seg = xs[np.sign(xs - report.center) == sign]
            ts = np.log(np.abs(seg - report.center)) + B
            ok = (ts >= t0) & (ts <= t1)
            if ok.sum() > 1:
                pts = " ".join(f"{sx(x):.1f},{ty(t):.1f}" for x, t in zip(seg[ok], ts[ok]))
                parts.append(f'<polyline points="{pts}" fill="none" stroke="purple" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts)
