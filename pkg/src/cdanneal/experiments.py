"""Seeded experiment recipes and their JSON/CSV emission.

Each recipe expands an :class:`ExperimentConfig` into independent sweep
points. Point ``i`` (and restart ``r``) draws its SPSA stream from the seed
entropy ``[seed, i, r]``, so results do not depend on execution order or on
the number of worker threads.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import ansatz, model, spsa
from .model import AnnealSpec, SingularCoefficientError
from .statevec import PauliString, Statevector, dense_pauli, ghz_fidelity, plus_state, rotate_amplitudes

log = logging.getLogger(__name__)

FORMAT_VERSION = "cdanneal-result/1"

EXPERIMENTS = (
    "size-sweep",
    "j-sweep",
    "coeff-dump",
    "density-dump",
    "qaoa-compare",
    "trotter-scaling",
)

# per-recipe overrides of the ExperimentConfig field defaults
RECIPE_DEFAULTS: dict[str, dict[str, Any]] = {
    "size-sweep": {"qubits": list(range(2, 11))},
    "j-sweep": {"j": [-1.0, -0.6, -0.1]},
    "coeff-dump": {},
    "density-dump": {},
    "qaoa-compare": {"qubits": [4, 6, 8, 10]},
    "trotter-scaling": {"qubits": [3]},
}

_CD_KEYS = {"spsa_a", "spsa_c", "spsa_A", "iterations", "restarts", "shots", "seed"}
_COMMON_KEYS = {"experiment", "qubits", "j", "h0", "h_z", "dt", "total_time"}
USED_KEYS: dict[str, set[str]] = {
    "size-sweep": _COMMON_KEYS | _CD_KEYS,
    "j-sweep": _COMMON_KEYS | _CD_KEYS,
    "coeff-dump": _COMMON_KEYS | _CD_KEYS,
    "density-dump": _COMMON_KEYS | _CD_KEYS,
    "qaoa-compare": _COMMON_KEYS | _CD_KEYS | {"qaoa_spsa_a", "qaoa_spsa_c", "p", "t_prime"},
    "trotter-scaling": _COMMON_KEYS | {"trotter_dts", "trotter_ref_dt"},
}

_LIST_FIELDS = {"qubits": int, "j": float, "p": int, "trotter_dts": float}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class ExperimentAborted(RuntimeError):
    """A sweep point failed; ``result`` holds the records completed before it."""

    def __init__(self, message: str, result: "ExperimentResult"):
        super().__init__(message)
        self.result = result


@dataclass
class ExperimentConfig:
    experiment: str
    qubits: list[int] = field(default_factory=lambda: [5])
    j: list[float] = field(default_factory=lambda: [-1.0])
    h0: float = -1.0
    h_z: float = 0.0
    dt: float = 0.2
    total_time: float = 1.0
    iterations: int = 100
    spsa_a: float = 0.15
    spsa_c: float = 0.1
    spsa_A: float | None = None
    qaoa_spsa_a: float = 0.05
    qaoa_spsa_c: float = 0.05
    p: list[int] = field(default_factory=lambda: [1, 2])
    t_prime: float = 1.0
    shots: int = 0
    restarts: int = 1
    seed: int = 0
    trotter_dts: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    trotter_ref_dt: float = 0.001

    @classmethod
    def defaults(cls, experiment: str) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        return cls(experiment=experiment, **RECIPE_DEFAULTS[experiment])

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def updated(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Return a copy with ``overrides`` applied; unknown keys raise ConfigError."""
        known = set(self.keys())
        values = {}
        for key, raw in overrides.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            if key == "experiment":
                if raw != self.experiment:
                    raise ConfigError(key, f"config is for {raw!r}, not {self.experiment!r}")
                continue
            values[key] = _coerce(key, raw)
        return dataclasses.replace(self, **values)

    def unused_keys(self, keys) -> list[str]:
        return sorted(set(keys) - USED_KEYS[self.experiment])

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def spec(self, n_qubits: int, J: float, dt: float | None = None) -> AnnealSpec:
        return AnnealSpec(n_qubits, J=J, h0=self.h0, h_z=self.h_z, T=self.total_time, dt=self.dt if dt is None else dt)

    def spsa_config(self, seed, qaoa: bool = False) -> spsa.SpsaConfig:
        a, c = (self.qaoa_spsa_a, self.qaoa_spsa_c) if qaoa else (self.spsa_a, self.spsa_c)
        return spsa.SpsaConfig(a=a, c=c, n_iterations=self.iterations, A=self.spsa_A, seed=seed)

    def validate(self) -> None:
        """Check every field against the invariants of the modules it feeds."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if not self.qubits:
            raise ConfigError("qubits", "at least one system size is required")
        max_n = {"trotter-scaling": 4, "density-dump": 10}.get(self.experiment, 20)
        for n in self.qubits:
            if not 2 <= n <= max_n:
                raise ConfigError("qubits", f"{n} outside [2, {max_n}] for {self.experiment}")
        if not self.j:
            raise ConfigError("j", "at least one coupling is required")
        for key in ("h0", "h_z", "total_time", "dt", "t_prime", "trotter_ref_dt", "spsa_a", "spsa_c"):
            if not math.isfinite(getattr(self, key)):
                raise ConfigError(key, "must be finite")
        for key, value in (("spsa_a", self.spsa_a), ("spsa_c", self.spsa_c),
                           ("qaoa_spsa_a", self.qaoa_spsa_a), ("qaoa_spsa_c", self.qaoa_spsa_c),
                           ("t_prime", self.t_prime), ("total_time", self.total_time), ("dt", self.dt)):
            if not value > 0:
                raise ConfigError(key, f"must be > 0, got {value}")
        if self.spsa_A is not None and self.spsa_A < 0:
            raise ConfigError("spsa_A", f"must be >= 0, got {self.spsa_A}")
        if self.iterations < 0:
            raise ConfigError("iterations", f"must be >= 0, got {self.iterations}")
        if self.shots < 0:
            raise ConfigError("shots", f"must be >= 0, got {self.shots}")
        if self.restarts < 1:
            raise ConfigError("restarts", f"must be >= 1, got {self.restarts}")
        if not self.p or any(p < 1 for p in self.p):
            raise ConfigError("p", f"QAOA depths must be >= 1, got {self.p}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")

        dts = {"dt": [self.dt]}
        if self.experiment == "trotter-scaling":
            dts = {"trotter_dts": list(self.trotter_dts), "trotter_ref_dt": [self.trotter_ref_dt]}
            if len(self.trotter_dts) < 2:
                raise ConfigError("trotter_dts", "need at least two step sizes to fit an exponent")
        for key, values in dts.items():
            for dt in values:
                try:
                    self.spec(self.qubits[0], self.j[0], dt=dt)
                except ValueError as exc:
                    raise ConfigError(key, str(exc)) from None
        for n in self.qubits:
            for J in self.j:
                spec = self.spec(n, J)
                try:
                    model.analytic_cd_schedule(spec)
                except SingularCoefficientError as exc:
                    raise ConfigError("j" if J == 0 else "h0", str(exc)) from None


def _coerce(key: str, raw: Any) -> Any:
    try:
        if key in _LIST_FIELDS:
            kind = _LIST_FIELDS[key]
            items = raw if isinstance(raw, (list, tuple)) else [raw]
            return [_scalar(kind, x) for x in items]
        if key == "spsa_A":
            return None if raw is None else float(raw)
        kind = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[key]
        return _scalar({"int": int, "float": float, "str": str}[kind], raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"bad value {raw!r}: {exc}") from None


def _scalar(kind, x):
    if kind is int:
        if isinstance(x, bool) or (isinstance(x, float) and not x.is_integer()):
            raise ValueError("expected an integer")
        return int(x)
    if kind is float and isinstance(x, bool):
        raise ValueError("expected a number")
    return kind(x)


@dataclass
class ExperimentResult:
    experiment: str
    config: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    timings: list[dict[str, Any]] = field(default_factory=list)
    complete: bool = True
    format_version: str = FORMAT_VERSION

    def payload(self) -> dict[str, Any]:
        """Deterministic part of the result (no wall times)."""
        return {
            "format_version": self.format_version,
            "experiment": self.experiment,
            "complete": self.complete,
            "config": self.config,
            "summary": self.summary,
            "records": self.records,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.payload()), indent=2) + "\n"

    def to_csv(self) -> str:
        columns: list[str] = []
        for rec in self.records:
            columns.extend(k for k in rec if k not in columns)
        lines = [",".join(columns)]
        for rec in self.records:
            lines.append(",".join(_csv_cell(rec.get(c)) for c in columns))
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(_csv_cell(v) for v in value)
    text = str(value)
    return f'"{text}"' if ("," in text or '"' in text) else text


def write_result(result: ExperimentResult, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``<experiment>.json``, ``<experiment>.csv``, timings and matrix CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.experiment
    paths = [out / f"{stem}.json", out / f"{stem}.csv", out / f"{stem}.timings.json"]
    paths[0].write_text(result.to_json())
    paths[1].write_text(result.to_csv())
    paths[2].write_text(json.dumps(result.timings, indent=2) + "\n")
    for name, mat in result.matrices.items():
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in np.asarray(mat):
                writer.writerow([_fmt(x) for x in row])
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# sweep machinery
# ---------------------------------------------------------------------------

PointFn = Callable[[], list[dict[str, Any]]]


def _run_points(cfg: ExperimentConfig, points: list[PointFn], threads: int | None) -> ExperimentResult:
    result = ExperimentResult(cfg.experiment, cfg.to_dict())

    def timed(i: int, fn: PointFn):
        t0 = time.perf_counter()
        records = fn()
        return records, time.perf_counter() - t0

    workers = max(1, min(threads or os.cpu_count() or 1, len(points)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(timed, i, fn) for i, fn in enumerate(points)]
        for i, fut in enumerate(futures):
            try:
                records, wall = fut.result()
            except Exception as exc:
                for rest in futures[i + 1:]:
                    rest.cancel()
                result.complete = False
                raise ExperimentAborted(f"{cfg.experiment} point {i} failed: {exc}", result) from exc
            result.records.extend(records)
            result.timings.append({"point": i, "wall_time_s": wall})
            log.info("%s point %d/%d done in %.2fs", cfg.experiment, i + 1, len(points), wall)
    return result


def _best_of_restarts(run: Callable[[Any], tuple[Any, spsa.SpsaTrace]], cfg: ExperimentConfig, point: int):
    runs = [run([cfg.seed, point, r]) for r in range(cfg.restarts)]
    best = min(range(len(runs)), key=lambda r: runs[r][1].value)
    params, trace = runs[best]
    return params, trace, [1.0 - t.value for _, t in runs]


def _opt_record(base: dict, method: str, fidelity: float, params, trace: spsa.SpsaTrace | None,
                restart_fidelities=None) -> dict[str, Any]:
    rec = {**base, "method": method, "fidelity": float(fidelity), "params": [float(x) for x in params]}
    summary = trace.summary() if trace is not None else {}
    rec["initial_cost"] = summary.get("initial_value")
    rec["best_cost"] = summary.get("best_value")
    rec["last_cost"] = summary.get("last_value")
    rec["best_iteration"] = summary.get("best_iteration")
    rec["n_evaluations"] = summary.get("n_evaluations")
    rec["restart_fidelities"] = None if restart_fidelities is None else [float(f) for f in restart_fidelities]
    return rec


def _cd_arms(cfg: ExperimentConfig, spec: AnnealSpec, point: int, include_none: bool) -> tuple[list[dict], ansatz.CdParams]:
    base = {"n_qubits": spec.n_qubits, "J": spec.J}
    records = []
    if include_none:
        zero = ansatz.CdParams.zeros(spec)
        records.append(_opt_record(base, "none", 1 - ansatz.cd_cost(zero, spec), zero.schedule(), None))
    analytic = ansatz.CdParams.analytic(spec)
    records.append(_opt_record(base, "analytic", 1 - ansatz.cd_cost(analytic, spec), analytic.schedule(), None))
    params, trace, fids = _best_of_restarts(
        lambda seed: ansatz.cd_optimize(spec, cfg.spsa_config(seed), shots=cfg.shots), cfg, point
    )
    records.append(_opt_record(base, "optimized", 1 - trace.value, params.schedule(), trace, fids))
    return records, params


def _grid(cfg: ExperimentConfig) -> list[tuple[int, float]]:
    return [(n, J) for n in cfg.qubits for J in cfg.j]


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

def run_size_sweep(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """No-CD, analytic-CD and SPSA-optimized CD fidelities for every system size."""
    points = [
        (lambda i=i, n=n, J=J: _cd_arms(cfg, cfg.spec(n, J), i, include_none=True)[0])
        for i, (n, J) in enumerate(_grid(cfg))
    ]
    return _run_points(cfg, points, threads)


def run_j_sweep(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    points = [
        (lambda i=i, n=n, J=J: _cd_arms(cfg, cfg.spec(n, J), i, include_none=False)[0])
        for i, (n, J) in enumerate(_grid(cfg))
    ]
    return _run_points(cfg, points, threads)


def run_coeff_dump(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Analytic and optimized per-step CD coefficients on the Trotter grid."""

    def point(i: int, n: int, J: float) -> list[dict]:
        spec = cfg.spec(n, J)
        analytic = model.analytic_cd_schedule(spec)
        params, trace, _ = _best_of_restarts(
            lambda seed: ansatz.cd_optimize(spec, cfg.spsa_config(seed), shots=cfg.shots), cfg, i
        )
        optimized = params.schedule()
        fid_analytic = 1 - ansatz.cd_cost(ansatz.CdParams(analytic[:-1]), spec)
        return [
            {
                "n_qubits": n,
                "J": J,
                "step": j,
                "t": float(t),
                "theta_cd_analytic": float(a),
                "theta_cd_optimized": float(o),
                "fidelity_analytic": fid_analytic,
                "fidelity_optimized": 1 - trace.value,
            }
            for j, (t, a, o) in enumerate(zip(spec.times, analytic, optimized), start=1)
        ]

    points = [(lambda i=i, n=n, J=J: point(i, n, J)) for i, (n, J) in enumerate(_grid(cfg))]
    result = _run_points(cfg, points, threads)
    for n, J in _grid(cfg):
        rows = [r for r in result.records if r["n_qubits"] == n and r["J"] == J]
        result.summary[f"n{n}_j{J:g}"] = {
            "peak_abs_analytic": max(abs(r["theta_cd_analytic"]) for r in rows),
            "peak_abs_optimized": max(abs(r["theta_cd_optimized"]) for r in rows),
        }
    return result


def run_density_dump(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Final-state density matrices for analytic and optimized CD."""
    matrices: dict[str, np.ndarray] = {}

    def point(i: int, n: int, J: float) -> list[dict]:
        spec = cfg.spec(n, J)
        records, _ = _cd_arms(cfg, spec, i, include_none=False)
        for rec in records:
            state = model.evolve(spec, rec["params"])
            rho = state.density_matrix()
            name = f"density_n{n}_j{J:g}_{rec['method']}"
            matrices[f"{name}_real"] = rho.real
            matrices[f"{name}_imag"] = rho.imag
            rec["trace"] = float(np.trace(rho).real)
            rec["matrix_files"] = [f"{name}_real.csv", f"{name}_imag.csv"]
        return records

    points = [(lambda i=i, n=n, J=J: point(i, n, J)) for i, (n, J) in enumerate(_grid(cfg))]
    result = _run_points(cfg, points, threads)
    result.matrices = {k: matrices[k] for k in sorted(matrices)}
    return result


def run_qaoa_compare(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Optimized CD against QAOA of each depth at equal total time."""

    def point(i: int, n: int, J: float, arm: str) -> list[dict]:
        spec = cfg.spec(n, J)
        base = {"n_qubits": n, "J": J}
        if arm == "optimal-cd":
            params, trace, fids = _best_of_restarts(
                lambda seed: ansatz.cd_optimize(spec, cfg.spsa_config(seed), shots=cfg.shots), cfg, i
            )
            return [_opt_record(base, arm, 1 - trace.value, params.schedule(), trace, fids)]
        p = int(arm.removeprefix("qaoa-p"))
        params, trace, fids = _best_of_restarts(
            lambda seed: ansatz.qaoa_optimize(spec, p, cfg.t_prime, cfg.spsa_config(seed, qaoa=True), shots=cfg.shots),
            cfg, i,
        )
        return [_opt_record(base, arm, 1 - trace.value, params.to_vector(), trace, fids)]

    arms = ["optimal-cd"] + [f"qaoa-p{p}" for p in cfg.p]
    tasks = [(n, J, arm) for n, J in _grid(cfg) for arm in arms]
    points = [(lambda i=i, t=t: point(i, *t)) for i, t in enumerate(tasks)]
    result = _run_points(cfg, points, threads)
    table = {}
    for n, J in _grid(cfg):
        row = {r["method"]: r["fidelity"] for r in result.records if r["n_qubits"] == n and r["J"] == J}
        table[f"n{n}_j{J:g}"] = [row[a] for a in arms]
    result.summary = {"columns": arms, "table": table}
    return result


def _dense_hamiltonian(spec: AnnealSpec, t: float) -> np.ndarray:
    n = spec.n_qubits
    lam = model.lambda_of(t, spec.T)
    cd = model.theta_cd_analytic(t, spec)
    H = sum((1 - lam) * spec.h0 * dense_pauli(PauliString(n, {k: "X"})) for k in range(n))
    for a, b in spec.bonds:
        H = H + lam * spec.J * dense_pauli(PauliString(n, ((a, "Z"), (b, "Z"))))
        H = H + cd * dense_pauli(PauliString(n, ((a, "Z"), (b, "Y"))))
        H = H + cd * dense_pauli(PauliString(n, ((a, "Y"), (b, "Z"))))
    return H


def splitting_error(spec: AnnealSpec, t: float, dt: float) -> float:
    """One-step product-formula error at frozen time ``t`` from |+>^N.

    Compares a single Trotter step of length ``dt`` against the exact
    propagator of the instantaneous Hamiltonian (dense, small N only).
    """
    step = AnnealSpec(spec.n_qubits, J=spec.J, h0=spec.h0, h_z=spec.h_z, T=dt, dt=dt, periodic=spec.periodic)
    lam = model.lambda_of(t, spec.T)
    angles = model.StepAngles(1, (1 - lam) * spec.h0, lam * spec.J, model.theta_cd_analytic(t, spec))
    amps = plus_state(spec.n_qubits).amplitudes
    for p, theta in model._step_gates(step, angles):
        amps = rotate_amplitudes(amps, p, theta)
    evals, evecs = np.linalg.eigh(_dense_hamiltonian(spec, t))
    exact = evecs @ (np.exp(-1j * evals * dt) * (evecs.conj().T @ plus_state(spec.n_qubits).amplitudes))
    return float(np.linalg.norm(amps - exact))


def fit_exponent(dts, errors) -> float:
    """Slope of log(error) against log(dt) by least squares."""
    slope, _ = np.polyfit(np.log(np.asarray(dts, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


def run_trotter_scaling(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Final-state distance to a fine-step reference as the Trotter step shrinks."""

    def point(n: int, J: float) -> list[dict]:
        ref_spec = cfg.spec(n, J, dt=cfg.trotter_ref_dt)
        ref = model.evolve(ref_spec, model.analytic_cd_schedule(ref_spec)).amplitudes
        records = []
        for dt in [*cfg.trotter_dts, cfg.trotter_ref_dt]:
            spec = cfg.spec(n, J, dt=dt)
            psi = model.evolve(spec, model.analytic_cd_schedule(spec)).amplitudes
            records.append({
                "n_qubits": n,
                "J": J,
                "dt": dt,
                "n_steps": spec.n_steps,
                "error": float(np.linalg.norm(psi - ref)),
                "splitting_error": splitting_error(spec, 0.5 * cfg.total_time, dt),
                "fidelity": ghz_fidelity(Statevector(n, psi)),
            })
        return records

    points = [(lambda n=n, J=J: point(n, J)) for n, J in _grid(cfg)]
    result = _run_points(cfg, points, threads)
    fits = {}
    for n, J in _grid(cfg):
        rows = [r for r in result.records if r["n_qubits"] == n and r["J"] == J and r["dt"] in cfg.trotter_dts]
        fits[f"n{n}_j{J:g}"] = {
            "error_exponent": fit_exponent([r["dt"] for r in rows], [r["error"] for r in rows]),
            "splitting_exponent": fit_exponent([r["dt"] for r in rows], [r["splitting_error"] for r in rows]),
        }
    result.summary = {"reference_dt": cfg.trotter_ref_dt, "fits": fits}
    return result


RECIPES: dict[str, Callable[..., ExperimentResult]] = {
    "size-sweep": run_size_sweep,
    "j-sweep": run_j_sweep,
    "coeff-dump": run_coeff_dump,
    "density-dump": run_density_dump,
    "qaoa-compare": run_qaoa_compare,
    "trotter-scaling": run_trotter_scaling,
}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    cfg.validate()
    return RECIPES[cfg.experiment](cfg, threads=threads)
