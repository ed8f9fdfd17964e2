"""Variational circuits: CD-coefficient optimization and the bounded-time QAOA baseline."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import spsa
from .model import AnnealSpec, analytic_cd_schedule, evolve
from .statevec import (
    PauliString,
    Statevector,
    ghz_fidelity,
    plus_state,
    rotate_amplitudes,
    sampled_ghz_fidelity,
)

__all__ = [
    "CdParams",
    "QaoaParams",
    "cd_cost",
    "cd_optimize",
    "qaoa_state",
    "qaoa_cost",
    "project_qaoa",
    "qaoa_optimize",
]


@dataclass(frozen=True)
class CdParams:
    """Per-step CD coefficients for steps 1..n-1; step n is pinned to zero."""

    free_thetas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "free_thetas", np.asarray(self.free_thetas, dtype=float).ravel())

    @property
    def n_steps(self) -> int:
        return self.free_thetas.size + 1

    def schedule(self) -> np.ndarray:
        return np.append(self.free_thetas, 0.0)

    @classmethod
    def analytic(cls, spec: AnnealSpec) -> "CdParams":
        return cls(analytic_cd_schedule(spec)[:-1])

    @classmethod
    def zeros(cls, spec: AnnealSpec) -> "CdParams":
        return cls(np.zeros(spec.n_steps - 1))


@dataclass(frozen=True)
class QaoaParams:
    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float).ravel()
        b = np.asarray(self.betas, dtype=float).ravel()
        if g.size != b.size or g.size < 1:
            raise ValueError(f"need p >= 1 gammas and betas of equal length, got {g.size} and {b.size}")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def p(self) -> int:
        return self.gammas.size

    @property
    def total_time(self) -> float:
        return float(self.gammas.sum() + self.betas.sum())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])

    @classmethod
    def from_vector(cls, vec: Sequence[float] | np.ndarray) -> "QaoaParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size % 2:
            raise ValueError(f"QAOA vector must have even length, got {vec.size}")
        p = vec.size // 2
        return cls(vec[:p], vec[p:])

    @classmethod
    def uniform(cls, p: int, T_prime: float) -> "QaoaParams":
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        if not T_prime > 0:
            raise ValueError(f"T_prime must be > 0, got {T_prime}")
        return cls(np.full(p, T_prime / (2 * p)), np.full(p, T_prime / (2 * p)))


def _fidelity(state: Statevector, shots: int, rng: np.random.Generator | None) -> float:
    if shots > 0:
        if rng is None:
            raise ValueError("sampled fidelity needs an rng")
        return sampled_ghz_fidelity(state, shots, rng)
    return ghz_fidelity(state)


def cd_cost(
    params: CdParams,
    spec: AnnealSpec,
    shots: int = 0,
    rng: np.random.Generator | None = None,
) -> float:
    """1 - GHZ fidelity of the digitized annealer with the given CD coefficients."""
    if params.n_steps != spec.n_steps:
        raise ValueError(f"CdParams cover {params.n_steps} steps, spec has {spec.n_steps}")
    return 1.0 - _fidelity(evolve(spec, params.schedule()), shots, rng)


def cd_optimize(
    spec: AnnealSpec,
    cfg: spsa.SpsaConfig,
    shots: int = 0,
) -> tuple[CdParams, spsa.SpsaTrace]:
    """Refine the analytic CD coefficients with SPSA.

    Only steps 1..n-1 are optimized, so the endpoint stays pinned without a
    projection. With ``shots > 0`` the SPSA objective is sampled while
    iterates are still ranked by the exact cost.
    """
    theta0 = CdParams.analytic(spec).free_thetas
    exact = lambda th: cd_cost(CdParams(th), spec)  # noqa: E731
    if shots > 0:
        noise = np.random.default_rng(np.random.SeedSequence(_entropy(cfg.seed) + [0x5307]))
        objective = lambda th: cd_cost(CdParams(th), spec, shots, noise)  # noqa: E731
    else:
        objective = exact
    trace = spsa.minimize(objective, theta0, cfg, score=exact)
    return CdParams(trace.theta), trace


def _entropy(seed: int | Sequence[int]) -> list[int]:
    return [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]


def _qaoa_generators(spec: AnnealSpec) -> tuple[list[PauliString], list[PauliString]]:
    n = spec.n_qubits
    zz = [PauliString(n, ((a, "Z"), (b, "Z"))) for a, b in spec.bonds]
    xs = [PauliString(n, {k: "X"}) for k in range(n)]
    return zz, xs


def qaoa_state(params: QaoaParams, spec: AnnealSpec, bond_order: Sequence[int] | None = None) -> Statevector:
    """Alternate problem and mixer layers on |+>^N, layer 1 first.

    ``bond_order`` permutes the ZZ factors inside each problem layer; they
    commute, so it only exists for checking that claim.
    """
    zz, xs = _qaoa_generators(spec)
    if bond_order is not None:
        zz = [zz[i] for i in bond_order]
    amps = plus_state(spec.n_qubits).amplitudes
    for gamma, beta in zip(params.gammas, params.betas):
        for p in zz:
            amps = rotate_amplitudes(amps, p, gamma * spec.J)
        for p in xs:
            amps = rotate_amplitudes(amps, p, beta * spec.h0)
    return Statevector(spec.n_qubits, amps)


def qaoa_cost(
    params: QaoaParams,
    spec: AnnealSpec,
    shots: int = 0,
    rng: np.random.Generator | None = None,
) -> float:
    return 1.0 - _fidelity(qaoa_state(params, spec), shots, rng)


def project_qaoa(vec: Sequence[float] | np.ndarray, T_prime: float) -> np.ndarray:
    """Map a raw SPSA iterate onto nonnegative durations summing to ``T_prime``.

    An all-zero vector cannot be rescaled and is reset to the uniform split;
    so is one whose sum is too small for the rescale factor to stay finite.
    """
    v = np.abs(np.asarray(vec, dtype=float))
    total = v.sum()
    with np.errstate(over="ignore", divide="ignore"):
        scale = T_prime / total if total > 0 else np.inf
    if not np.isfinite(scale):
        return QaoaParams.uniform(v.size // 2, T_prime).to_vector()
    return v * scale


def qaoa_optimize(
    spec: AnnealSpec,
    p: int,
    T_prime: float,
    cfg: spsa.SpsaConfig,
    shots: int = 0,
) -> tuple[QaoaParams, spsa.SpsaTrace]:
    theta0 = QaoaParams.uniform(p, T_prime).to_vector()
    exact = lambda v: qaoa_cost(QaoaParams.from_vector(v), spec)  # noqa: E731
    if shots > 0:
        noise = np.random.default_rng(np.random.SeedSequence(_entropy(cfg.seed) + [0x9A0A]))
        objective = lambda v: qaoa_cost(QaoaParams.from_vector(v), spec, shots, noise)  # noqa: E731
    else:
        objective = exact
    trace = spsa.minimize(objective, theta0, cfg, project=lambda v: project_qaoa(v, T_prime), score=exact)
    return QaoaParams.from_vector(trace.theta), trace
