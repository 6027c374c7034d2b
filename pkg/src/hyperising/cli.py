"""Command-line runner: configuration, orchestration and run manifests.

Every run resolves a flat ``key = value`` configuration (defaults, then an
optional preset, then a config file, then command-line flags), writes its
artifacts atomically into one output directory and finishes with
``manifest.json`` listing a SHA-256 digest for every artifact.

Exit codes: 0 success, 2 configuration error, 3 engine capability error,
4 comparison failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .exact import DENSE_LIMIT, DENSE_MATRIX_LIMIT, DimensionLimitError
from .model import ModelParams

logger = logging.getLogger("hyperising")

KINDS = ("ground-state", "evolve", "otoc", "lightcone", "randomized", "trotter-zne", "rydberg")
ENV_OUTPUT_ROOT = "HYPERISING_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_COMPARE = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors: dict[str, str]):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


class EngineCapabilityError(RuntimeError):
    pass


class IncompatibleRunsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration schema


def _parse_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _optional(conv):
    def parse(s):
        if isinstance(s, str) and s.strip().lower() in ("", "none", "null"):
            return None
        return conv(s)

    return parse


def _list_of(conv):
    def parse(s):
        if isinstance(s, (list, tuple)):
            return [conv(x) for x in s]
        return [conv(x) for x in str(s).split(",") if x.strip()]

    return parse


@dataclass(frozen=True)
class Field:
    parse: object
    default: object
    help: str
    choices: tuple | None = None


SCHEMA: dict[str, Field] = {
    "N": Field(int, 9, "number of sites"),
    "J": Field(float, 2.0, "Ising coupling"),
    "h": Field(float, 1.05, "transverse field"),
    "m": Field(float, 0.0, "longitudinal field"),
    "l_max": Field(float, 0.0, "deformation extent"),
    "engine": Field(str, "exact", "exact (dense) or mps (tensor network)", ("exact", "mps")),
    "dt": Field(float, 0.05, "Trotter step"),
    "order": Field(int, 2, "Trotter order for tensor-network and dense-Trotter runs", (1, 2)),
    "ordering": Field(str, "even-odd", "bond ordering inside a Trotter step", ("even-odd", "sequential")),
    "t_max": Field(float, 2.0, "final time"),
    "sample_dt": Field(float, 0.25, "output sampling interval"),
    "n_steps": Field(_optional(int), None, "circuit Trotter steps (trotter-zne)"),
    "chi": Field(int, 64, "maximum bond dimension"),
    "cutoff": Field(float, 1e-12, "relative discarded-weight cutoff"),
    "sweeps": Field(int, 50, "DMRG sweep budget"),
    "J_list": Field(_optional(_list_of(float)), None, "ground-state scan over J (comma list)"),
    "workers": Field(int, 1, "processes for independent scan points"),
    "w_op": Field(str, "z", "operator W", ("x", "y", "z")),
    "v_op": Field(str, "z", "operator V", ("x", "y", "z")),
    "w_site": Field(_optional(int), None, "0-based W site (default: center)"),
    "v_site": Field(_optional(int), None, "0-based V site"),
    "epsilons": Field(_list_of(float), [0.20, 0.25, 0.30], "light-cone thresholds"),
    "d_min": Field(int, 3, "smallest source distance entering light-cone fits"),
    "grid": Field(_optional(str), None, "existing OTOC grid CSV for lightcone"),
    "svg": Field(_parse_bool, True, "emit SVG heatmaps"),
    "protocol": Field(str, "local", "randomized protocol", ("local", "global")),
    "backend": Field(str, "circuit", "evolution inside the protocol", ("circuit", "exact")),
    "n_reps": Field(int, 180, "random unitaries N_R"),
    "shots": Field(int, 200, "shots per unitary (0: exact probabilities)"),
    "p": Field(float, 0.01, "depolarizing probability per two-qubit gate"),
    "scales": Field(_list_of(int), [1, 3, 5], "noise fold scales"),
    "trajectories": Field(int, 1000, "noise trajectories per scale"),
    "site": Field(_optional(int), None, "0-based observed site (default: center)"),
    "A": Field(_optional(float), None, "Rydberg scale constant (default: calibrated)"),
    "target_spacing": Field(float, 17.72, "calibrated maximum spacing in micrometres"),
    "bond": Field(str, "left", "gap coupling convention", ("left", "average")),
    "pulse_scale": Field(float, 10.0, "pulse synthesis factor"),
    "global_pulse": Field(_parse_bool, False, "site-uniform drive"),
    "density": Field(_parse_bool, True, "simulate Rydberg densities (small N)"),
    "seed": Field(int, 0, "master seed"),
    "out": Field(_optional(str), None, "output directory"),
}

PRESETS: dict[str, dict] = {
    "fig-otoc-lmax0": {"N": 37, "J": 6.0, "h": 3.05, "m": 0.25, "l_max": 0.0, "engine": "mps",
                       "t_max": 10.0, "order": 1},
    "fig-otoc-lmax3": {"N": 37, "J": 6.0, "h": 3.05, "m": 0.25, "l_max": 3.0, "engine": "mps",
                       "t_max": 10.0, "order": 1},
    "fig-otoc-lmax5": {"N": 37, "J": 6.0, "h": 3.05, "m": 0.25, "l_max": 5.0, "engine": "mps",
                       "t_max": 10.0, "order": 1},
    "fig-otoc-small": {"N": 7, "J": 2.0, "h": 1.05, "l_max": 3.0, "t_max": 3.5},
    "fig-trotter-exact": {"N": 9, "J": 2.0, "h": 1.05, "l_max": 3.0, "dt": 0.01, "t_max": 2.0},
    "fig-local-protocol": {"N": 7, "J": -0.5, "h": -0.525, "l_max": 3.0, "protocol": "local",
                           "n_reps": 180, "shots": 200, "dt": 0.5, "t_max": 3.5, "sample_dt": 0.5,
                           "w_site": 3, "v_site": 2},
    "fig-global-protocol": {"N": 3, "J": -0.5, "h": -0.525, "l_max": 3.0, "protocol": "global",
                            "backend": "exact", "n_reps": 2000, "shots": 0, "t_max": 3.0,
                            "sample_dt": 0.5, "v_site": 0},
    "fig-zne": {"N": 7, "J": 2.0, "h": 1.05, "l_max": 3.0, "dt": 0.2, "n_steps": 3, "p": 0.01,
                "sample_dt": 0.2},
    "fig-rydberg": {"N": 13, "J": 1.0, "l_max": 3.0, "t_max": 3.0, "dt": 0.01, "sample_dt": 0.01,
                    "density": False},
    "fig-equilibrium": {"N": 37, "h": 3.0, "m": 0.25, "l_max": 3.0, "engine": "mps", "chi": 10,
                        "J_list": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]},
}


@dataclass
class RunConfig:
    kind: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(J=v["J"], h=v["h"], N=v["N"], l_max=v["l_max"], m=v["m"])

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.values}

    def to_text(self, include_out: bool = True) -> str:
        lines = [f"kind = {self.kind}"]
        for k in SCHEMA:
            if k == "out" and not include_out:
                continue
            v = self.values[k]
            if isinstance(v, list):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k != "out"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def parse_config_text(text: str) -> dict:
    """Raw ``key = value`` pairs of a config file; ``#`` starts a comment."""
    out, errors = {}, {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {n}"] = f"expected 'key = value', got {line!r}"
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        if k != "kind" and k != "preset" and k not in SCHEMA:
            errors[k] = f"unknown key (line {n})"
            continue
        out[k] = v
    if errors:
        raise ConfigError(errors)
    return out


def resolve_config(kind: str, overrides: dict | None = None, preset: str | None = None,
                   text: str | None = None) -> RunConfig:
    """Merge defaults, preset, config text and overrides; validate every field."""
    values = {k: f.default for k, f in SCHEMA.items()}
    layers = []
    file_vals = parse_config_text(text) if text else {}
    preset = file_vals.pop("preset", None) if preset is None else preset
    file_kind = file_vals.pop("kind", None)
    if file_kind is not None and file_kind != kind:
        raise ConfigError({"kind": f"config file is for {file_kind!r}, command is {kind!r}"})
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError({"preset": f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"})
        layers.append(PRESETS[preset])
    layers.append(file_vals)
    layers.append(overrides or {})
    errors = {}
    for layer in layers:
        for k, raw in layer.items():
            if k not in SCHEMA:
                errors[k] = "unknown key"
                continue
            f = SCHEMA[k]
            try:
                v = f.parse(raw) if isinstance(raw, str) or f.parse in (int, float) else raw
            except (TypeError, ValueError) as exc:
                errors[k] = f"cannot parse {raw!r}: {exc}"
                continue
            values[k] = v
    if kind == "lightcone" and values.get("grid") and "grid" not in errors:
        explicit = set(file_vals) | set(overrides or {})
        for k, v in _grid_meta(values["grid"]).items():
            if k in GRID_META_KEYS and k not in explicit:
                values[k] = v
    for k, f in SCHEMA.items():
        if k not in errors and f.choices is not None and values[k] not in f.choices:
            errors[k] = f"must be one of {list(f.choices)}, got {values[k]!r}"
    if kind not in KINDS:
        errors["kind"] = f"must be one of {list(KINDS)}"
    _validate(values, errors)
    if errors:
        raise ConfigError(errors)
    return RunConfig(kind, values)


# model keys a lightcone run takes from the otoc_meta.json next to its grid
GRID_META_KEYS = ("N", "J", "h", "m", "l_max", "w_op", "v_op", "w_site", "dt", "order", "ordering")


def _grid_meta(grid) -> dict:
    path = Path(grid).with_name("otoc_meta.json")
    if not path.is_file():
        return {}
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError):
        return {}


def _validate(v: dict, errors: dict) -> None:
    def need(cond, key, msg):
        if key not in errors and not cond:
            errors[key] = msg

    need(isinstance(v["N"], int) and v["N"] >= 2, "N", "must be an integer >= 2")
    need(v["l_max"] >= 0, "l_max", "must be non-negative")
    need(v["d_min"] >= 1, "d_min", "must be >= 1")
    for key in ("dt", "t_max", "sample_dt", "cutoff", "target_spacing", "pulse_scale"):
        need(isinstance(v[key], float) and v[key] > 0, key, "must be positive")
    for key in ("chi", "sweeps", "n_reps", "trajectories", "workers"):
        need(isinstance(v[key], int) and v[key] >= 1, key, "must be a positive integer")
    need(v["shots"] >= 0, "shots", "must be >= 0")
    need(0 <= v["p"] < 1, "p", "must lie in [0, 1)")
    need(all(isinstance(s, int) and s >= 1 and s % 2 == 1 for s in v["scales"]) and len(v["scales"]) >= 2,
         "scales", "need at least two odd positive scales")
    need(len(v["epsilons"]) >= 1 and all(0 < e < 1 for e in v["epsilons"]), "epsilons", "values in (0, 1)")
    need(v["n_steps"] is None or v["n_steps"] >= 1, "n_steps", "must be >= 1")
    need(v["A"] is None or v["A"] > 0, "A", "must be positive")
    if isinstance(v["N"], int):
        for key in ("w_site", "v_site", "site"):
            need(v[key] is None or 0 <= v[key] < v["N"], key, f"must lie in [0, {v['N'] - 1}]")
    if "sample_dt" not in errors and "dt" not in errors:
        r = v["sample_dt"] / v["dt"]
        need(abs(r - round(r)) < 1e-9 and round(r) >= 1, "sample_dt", "must be a multiple of dt")


# ---------------------------------------------------------------------------
# output handling


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class OutputDir:
    """Single-writer output directory with atomic artifact writes."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[dict] = []

    def _target(self, name: str) -> Path:
        if os.path.basename(name) != name or name in ("", ".", "..", "manifest.json"):
            raise ValueError(f"artifact name {name!r} must be a plain file name")
        return self.root / name

    def via(self, name: str, writer, keys=()) -> Path:
        """Call ``writer(tmp_path)`` and move the result into place."""
        target = self._target(name)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.")
        os.close(fd)
        try:
            writer(tmp)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.artifacts.append({"path": name, "sha256": _sha256(target), "keys": list(keys)})
        return target

    def text(self, name: str, text: str, keys=()) -> Path:
        def w(p):
            with open(p, "w", newline="") as fh:
                fh.write(text)

        return self.via(name, w, keys)

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def table(self, name: str, header, rows, keys=()) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
        return self.text(name, buf.getvalue(), keys)

    def manifest(self, config: RunConfig, started: float, finished: float) -> Path:
        obj = {
            "format": "hyperising-manifest",
            "version": 1,
            "code_version": __version__,
            "kind": config.kind,
            "config": config.to_dict(),
            "config_digest": config.digest(),
            "started": started,
            "finished": finished,
            "elapsed_s": finished - started,
            "artifacts": self.artifacts,
        }
        target = self.root / "manifest.json"
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".manifest.")
        with os.fdopen(fd, "w") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
        os.replace(tmp, target)
        return target


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return x


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def verify_manifest(path) -> dict[str, bool]:
    """Recompute every artifact digest; ``{path: matches}``."""
    path = Path(path)
    root = path.parent
    m = json.loads(path.read_text())
    return {a["path"]: (root / a["path"]).is_file() and _sha256(root / a["path"]) == a["sha256"]
            for a in m["artifacts"]}


# ---------------------------------------------------------------------------
# experiments


def _check_capability(cfg: RunConfig) -> None:
    N, kind, eng = cfg.N, cfg.kind, cfg.engine
    from .randomized_protocol import GLOBAL_LIMIT
    from .trotter_circuit import NOISY_LIMIT

    limits = []
    if eng == "exact" and kind in ("ground-state", "evolve"):
        limits.append((DENSE_LIMIT, "exact engine"))
    if eng == "exact" and kind in ("otoc", "lightcone") and cfg.grid is None:
        limits.append((DENSE_MATRIX_LIMIT, "exact OTOC engine"))
    if kind == "randomized":
        limits.append((GLOBAL_LIMIT if cfg.protocol == "global" else DENSE_LIMIT, f"{cfg.protocol} protocol"))
    if kind == "trotter-zne":
        limits.append((NOISY_LIMIT, "noisy circuit simulator"))
    if kind == "rydberg" and cfg.density:
        limits.append((DENSE_LIMIT, "Rydberg density evolution"))
    for lim, what in limits:
        if N > lim:
            raise EngineCapabilityError(f"{what} supports N <= {lim}, got N = {N}")


def _policy(cfg: RunConfig):
    from .mps.mps import TruncationPolicy

    return TruncationPolicy(cfg.cutoff, cfg.chi)


def _sample_times(cfg: RunConfig) -> np.ndarray:
    every = int(round(cfg.sample_dt / cfg.dt))
    n = int(round(cfg.t_max / cfg.dt))
    return cfg.dt * np.arange(0, n + 1, every)


def _ground_point(args):
    cfg_values, J = args
    from .otoc_analysis import equilibrium_scan

    cfg = RunConfig("ground-state", cfg_values)
    method = "exact" if cfg.engine == "exact" else "dmrg"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return equilibrium_scan([J], cfg.params, method, _policy(cfg), cfg.sweeps, cfg.seed)[0]


def run_ground_state(cfg: RunConfig, out: OutputDir) -> dict:
    from . import exact
    from .model import build_hamiltonian

    if cfg.J_list:
        jobs = [(cfg.values, J) for J in cfg.J_list]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as ex:
                pts = list(ex.map(_ground_point, jobs))
        else:
            pts = [_ground_point(j) for j in jobs]
        out.table("equilibrium.csv", ["J", "entropy", "susceptibility", "energy", "converged"],
                  [(p.J, p.entropy, p.susceptibility, p.energy, p.converged) for p in pts], keys=["J"])
        from .otoc_analysis import interior_peaks

        peaks = interior_peaks([p.entropy for p in pts])
        summary = {"peak_J": [cfg.J_list[i] for i in peaks], "n_points": len(pts)}
        out.json("ground_state.json", summary)
        return summary
    terms = build_hamiltonian(cfg.params)
    if cfg.engine == "exact":
        E, psi = exact.ground_state(terms)
        z = exact.magnetization_profile(psi, "z")
        S = exact.entanglement_entropy(psi, cfg.N // 2)
        converged = True
    else:
        from .mps.dmrg import dmrg

        res = dmrg(terms, _policy(cfg), sweeps=cfg.sweeps, seed=cfg.seed)
        E, psi, converged = res.energy, res.state, res.converged
        z = np.real(psi.local_expectations(np.diag([1.0, -1.0])))
        S = psi.half_chain_entropy()
    out.table("profile.csv", ["site", "value"], [(i + 1, v) for i, v in enumerate(z)], keys=["site"])
    summary = {"energy": E, "half_chain_entropy": S, "converged": converged}
    out.json("ground_state.json", summary)
    return summary


def run_evolve(cfg: RunConfig, out: OutputDir) -> dict:
    from .model import build_hamiltonian

    terms = build_hamiltonian(cfg.params)
    times = _sample_times(cfg)
    if cfg.engine == "exact":
        from .exact import PureState, evolve_exact_times, magnetization_profile

        states = evolve_exact_times(PureState.all_up(cfg.N), terms, times)
        values = np.array([magnetization_profile(s, "z") for s in states])
        extra = {}
    else:
        from .mps.mps import MatrixProductState
        from .mps.tebd import magnetization_trajectory

        every = int(round(cfg.sample_dt / cfg.dt))
        times, values = magnetization_trajectory(
            MatrixProductState.all_up(cfg.N), terms, cfg.dt, int(round(cfg.t_max / cfg.dt)),
            every, _policy(cfg), cfg.ordering, cfg.order)
        extra = {}
    rows = [(i + 1, t, values[k, i]) for i in range(cfg.N) for k, t in enumerate(times)]
    out.table("magnetization.csv", ["site", "t", "value"], rows, keys=["site", "t"])
    summary = {"n_times": len(times), **extra}
    out.json("evolve.json", summary)
    return summary


def _compute_grid(cfg: RunConfig):
    from .otoc_analysis import compute_otoc_grid

    return compute_otoc_grid(cfg.params, cfg.w_op, cfg.v_op, cfg.w_site, cfg.dt, cfg.t_max,
                             cfg.sample_dt, "mpo" if cfg.engine == "mps" else "exact",
                             _policy(cfg), cfg.ordering, cfg.order)


def _emit_grid(grid, out: OutputDir) -> None:
    from .otoc_analysis import write_grid_csv

    out.via("otoc_grid.csv", lambda p: write_grid_csv(grid, p), keys=["site", "t"])
    out.json("otoc_meta.json", grid.metadata)


def run_otoc(cfg: RunConfig, out: OutputDir) -> dict:
    from .otoc_analysis import grid_svg

    grid = _compute_grid(cfg)
    _emit_grid(grid, out)
    if cfg.svg:
        out.text("otoc.svg", grid_svg(grid))
    return {"shape": list(grid.values.shape), "t0_max_deviation": float(np.max(np.abs(grid.values[:, 0] - 1)))}


def run_lightcone(cfg: RunConfig, out: OutputDir) -> dict:
    from .otoc_analysis import classify_grid, extract_lightcone, grid_svg, read_grid_csv, write_points_csv

    if cfg.grid is not None:
        gpath = Path(cfg.grid)
        if not gpath.is_file():
            raise ConfigError({"grid": f"no such file {cfg.grid!r}"})
        meta_path = gpath.with_name("otoc_meta.json")
        meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
        grid = read_grid_csv(gpath, meta)
        if grid.n_sites != cfg.N:
            raise ConfigError({"N": f"grid has {grid.n_sites} sites, config says N = {cfg.N}"})
    else:
        grid = _compute_grid(cfg)
        _emit_grid(grid, out)
    eps = tuple(cfg.epsilons)
    report = classify_grid(grid, eps, d_min=cfg.d_min, strict=False)
    points = extract_lightcone(grid, eps)
    out.via("lightcone_points.csv", lambda p: write_points_csv(points, p), keys=["site"])
    out.text("regime_report.json", report.to_json(indent=2) + "\n")
    if cfg.svg:
        out.text("lightcone.svg", grid_svg(grid, points, report))
    return {"classification": report.classification}


def run_randomized(cfg: RunConfig, out: OutputDir) -> dict:
    from .randomized_protocol import exact_O0, exact_trace_otoc, global_protocol_otoc, local_protocol_O0

    times = _sample_times(cfg)
    shots = cfg.shots or None
    p = cfg.params
    if cfg.protocol == "global":
        v_site = 0 if cfg.v_site is None else cfg.v_site
        run = global_protocol_otoc(p, times, cfg.n_reps, shots, cfg.w_site, v_site, cfg.w_op, cfg.v_op,
                                   cfg.seed, cfg.backend, cfg.dt)
        ref = exact_trace_otoc(p, times, cfg.w_site, v_site, cfg.w_op, cfg.v_op)
    else:
        run = local_protocol_O0(p, times, cfg.n_reps, shots, cfg.w_site, cfg.v_site, cfg.w_op, cfg.v_op,
                                cfg.seed, cfg.backend, cfg.dt)
        ref = exact_O0(p, times, run.w_site, run.v_site, cfg.w_op, cfg.v_op)
    run.reference = list(ref)
    out.table("protocol.csv", ["t", "value", "error", "correlation", "reference"],
              [(e.t, e.value, e.error, e.correlation, r) for e, r in zip(run.estimates, ref)], keys=["t"])
    out.via("scatter.csv", run.write_scatter_csv, keys=["t", "rep"])
    out.text("protocol.json", run.to_json(indent=2) + "\n")
    z = [(e.value - r) / e.error for e, r in zip(run.estimates, ref) if e.defined and e.error > 0]
    return {"max_abs_z": max((abs(x) for x in z), default=0.0)}


def run_trotter_zne(cfg: RunConfig, out: OutputDir) -> dict:
    from .trotter_circuit import compile_trotter, resources, zne_run

    n = cfg.n_steps or max(1, int(round(cfg.t_max / cfg.dt)))
    site = cfg.params.center if cfg.site is None else cfg.site
    res, noiseless = zne_run(cfg.params, cfg.dt, n, site, cfg.p, tuple(cfg.scales),
                             cfg.trajectories, cfg.seed, cfg.ordering)
    out.via("zne.csv", res.write_csv, keys=["scale"])
    rc = resources(compile_trotter(cfg.params, cfg.dt, n, cfg.ordering))
    summary = {
        "estimate": res.estimate, "slope": res.slope, "noiseless": noiseless,
        "unmitigated": res.values[min(res.values)],
        "two_qubit_gates": rc.two_qubit, "depth": rc.depth, "n_steps": n, "site": site,
    }
    out.json("zne.json", summary)
    return summary


def run_rydberg(cfg: RunConfig, out: OutputDir) -> dict:
    from . import rydberg_map as rm

    geom = rm.place_atoms(cfg.N, cfg.l_max, cfg.A, cfg.J, cfg.target_spacing, cfg.bond)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rm.PulseSynthesisWarning)
        drive = rm.synthesize_pulses(geom, cfg.pulse_scale, global_pulse=cfg.global_pulse)
    out.via("geometry.csv", lambda p: rm.write_geometry_csv(geom, p), keys=["index"])
    out.via("pulse.json", lambda p: rm.write_pulse_json(geom, drive, cfg.t_max, p))
    summary = {"length_um": geom.length, "max_spacing": float(geom.spacings.max()),
               "min_spacing": float(geom.spacings.min()), "spacing_ratio": geom.spacing_ratio, "A": geom.A,
               "pulse_rule": "omega = delta = c6 * pulse_scale / d^6 (one expression for both)"}
    if cfg.density:
        times = np.arange(0, int(round(cfg.t_max / cfg.sample_dt)) + 1) * cfg.sample_dt
        dens = rm.rydberg_density_evolution(geom, drive, times)
        out.table("density.csv", ["site", "t", "value"],
                  [(j + 1, t, dens[j, k]) for j in range(geom.N) for k, t in enumerate(times)],
                  keys=["site", "t"])
        summary["first_peak_times"] = [_finite(x) for x in rm.first_peak_times(dens, times)]
    out.json("rydberg.json", summary)
    return summary


RUNNERS = {
    "ground-state": run_ground_state,
    "evolve": run_evolve,
    "otoc": run_otoc,
    "lightcone": run_lightcone,
    "randomized": run_randomized,
    "trotter-zne": run_trotter_zne,
    "rydberg": run_rydberg,
}


def default_output_dir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))
    return root / f"{cfg.kind}-{cfg.digest()[:12]}"


def run(cfg: RunConfig) -> Path:
    """Execute one experiment; returns the manifest path (written last)."""
    _check_capability(cfg)
    out = OutputDir(cfg.out if cfg.out is not None else default_output_dir(cfg))
    started = time.time()
    out.text("config.txt", cfg.to_text(include_out=False))
    try:
        summary = RUNNERS[cfg.kind](cfg, out)
    except DimensionLimitError as exc:
        raise EngineCapabilityError(str(exc)) from exc
    logger.info("%s finished: %s", cfg.kind, summary)
    return out.manifest(cfg, started, time.time())


# ---------------------------------------------------------------------------
# comparison


def _manifest_path(p) -> Path:
    p = Path(p)
    return p / "manifest.json" if p.is_dir() else p


def _read_table(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def compare(manifest_a, manifest_b, tolerance: float = 1e-6) -> dict:
    """Per-observable max-abs and RMS deviations between two runs.

    Tables listed with key columns in both manifests are aligned on those
    keys; every other numeric column is an observable. Raises
    :class:`IncompatibleRunsError` for different kinds, sizes or grids.
    """
    pa, pb = _manifest_path(manifest_a), _manifest_path(manifest_b)
    ma, mb = json.loads(pa.read_text()), json.loads(pb.read_text())
    if ma["kind"] != mb["kind"]:
        raise IncompatibleRunsError(f"kinds differ: {ma['kind']} vs {mb['kind']}")
    if ma["config"]["N"] != mb["config"]["N"]:
        raise IncompatibleRunsError(f"N differs: {ma['config']['N']} vs {mb['config']['N']}")
    arts_b = {a["path"]: a for a in mb["artifacts"]}
    observables = {}
    for a in ma["artifacts"]:
        b = arts_b.get(a["path"])
        if not a["keys"] or b is None or b["keys"] != a["keys"]:
            continue
        ra, rb = _read_table(pa.parent / a["path"]), _read_table(pb.parent / b["path"])
        keys = a["keys"]
        ia = {tuple(r[k] for k in keys): r for r in ra}
        ib = {tuple(r[k] for k in keys): r for r in rb}
        if _normalize_keys(ia) != _normalize_keys(ib):
            raise IncompatibleRunsError(f"{a['path']}: key sets differ")
        ib = {_norm_key(k): v for k, v in ib.items()}
        cols = [c for c in (ra[0].keys() if ra else []) if c not in keys]
        for c in cols:
            da, db = [], []
            for k, r in ia.items():
                x, y = _num(r.get(c)), _num(ib[_norm_key(k)].get(c))
                if x is None or y is None:
                    continue
                da.append(x)
                db.append(y)
            if not da:
                continue
            diff = np.abs(np.array(da) - np.array(db))
            observables[f"{a['path']}:{c}"] = {
                "max_abs": float(diff.max()),
                "rms": float(np.sqrt(np.mean(diff**2))),
                "n": len(da),
                "pass": bool(diff.max() <= tolerance),
            }
    return {
        "a": str(pa), "b": str(pb), "kind": ma["kind"], "tolerance": tolerance,
        "observables": observables,
        "pass": all(o["pass"] for o in observables.values()),
    }


def _num(s):
    try:
        x = float(s)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def _norm_key(k):
    out = []
    for x in k:
        try:
            out.append(round(float(x), 9))
        except ValueError:
            out.append(x)
    return tuple(out)


def _normalize_keys(d):
    return {_norm_key(k) for k in d}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperising", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--preset", help=f"parameter preset ({', '.join(sorted(PRESETS))})")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
        sp.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        for key, f in SCHEMA.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=f"opt_{key}", default=None, metavar="V",
                            help=f"{f.help} (default: {f.default})")
    cp = sub.add_parser("compare", help="compare two runs")
    cp.add_argument("a", help="manifest.json or run directory")
    cp.add_argument("b", help="manifest.json or run directory")
    cp.add_argument("--tolerance", type=float, default=1e-6)
    cp.add_argument("--out", help="write the report JSON here")
    vp = sub.add_parser("verify", help="check artifact digests of a run")
    vp.add_argument("manifest", help="manifest.json or run directory")
    sub.add_parser("presets", help="list parameter presets")
    return parser


def _overrides(ns) -> dict:
    ov = {}
    for item in ns.set:
        if "=" not in item:
            raise ConfigError({"--set": f"expected KEY=VALUE, got {item!r}"})
        k, v = item.split("=", 1)
        ov[k.strip()] = v.strip()
    for key in SCHEMA:
        v = getattr(ns, f"opt_{key}")
        if v is not None:
            ov[key] = v
    return ov


def _read_config_file(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError({"--config": str(exc)}) from exc


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if ns.command == "presets":
            for name, vals in sorted(PRESETS.items()):
                print(f"{name}: " + ", ".join(f"{k}={v}" for k, v in vals.items()))
            return EXIT_OK
        if ns.command == "verify":
            res = verify_manifest(_manifest_path(ns.manifest))
            for path, ok in res.items():
                print(f"{'ok' if ok else 'MISMATCH'} {path}")
            return EXIT_OK if all(res.values()) else EXIT_COMPARE
        if ns.command == "compare":
            try:
                report = compare(ns.a, ns.b, ns.tolerance)
            except IncompatibleRunsError as exc:
                print(json.dumps({"error": "incompatible", "detail": str(exc)}))
                return EXIT_COMPARE
            text = json.dumps(report, indent=2)
            if ns.out:
                Path(ns.out).write_text(text + "\n")
            print(text)
            return EXIT_OK if report["pass"] else EXIT_COMPARE
        text = _read_config_file(ns.config) if ns.config else None
        cfg = resolve_config(ns.command, _overrides(ns), ns.preset, text)
        if ns.print_config:
            sys.stdout.write(cfg.to_text())
            return EXIT_OK
        print(run(cfg))
        return EXIT_OK
    except ConfigError as exc:
        for k, v in exc.errors.items():
            print(f"config error: {k}: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineCapabilityError as exc:
        print(f"engine capability error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
