"""First-order SPSA with power-law gain sequences.

    a_k = a / (k + 1 + A)**0.602,    c_k = c / (k + 1)**0.101

The gradient estimate uses one Rademacher perturbation per iteration and
exactly two objective evaluations. Each accepted iterate is additionally
scored (by ``score`` if given, else by the objective itself); the best-scored
iterate is returned alongside the last one.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "ALPHA",
    "GAMMA",
    "SpsaConfig",
    "SpsaRecord",
    "SpsaTrace",
    "OptimizationAborted",
    "gains",
    "estimate_gradient",
    "minimize",
]

ALPHA = 0.602
GAMMA = 0.101

Objective = Callable[[np.ndarray], float]
Projection = Callable[[np.ndarray], np.ndarray]


class OptimizationAborted(RuntimeError):
    """The objective returned a non-finite value; ``theta`` is the offending point."""

    def __init__(self, message: str, theta: np.ndarray):
        super().__init__(message)
        self.theta = np.array(theta, dtype=float)


@dataclass(frozen=True)
class SpsaConfig:
    a: float = 0.15
    c: float = 0.1
    n_iterations: int = 100
    A: float | None = None  # None -> 0.01 * n_iterations
    seed: int | Sequence[int] = 0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"SPSA gain a must be > 0, got {self.a}")
        if not self.c > 0:
            raise ValueError(f"SPSA perturbation c must be > 0, got {self.c}")
        if self.n_iterations < 0:
            raise ValueError(f"n_iterations must be >= 0, got {self.n_iterations}")
        if self.A is not None and self.A < 0:
            raise ValueError(f"stability offset A must be >= 0, got {self.A}")

    @property
    def stability(self) -> float:
        return 0.01 * self.n_iterations if self.A is None else float(self.A)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class SpsaRecord:
    k: int
    theta: np.ndarray
    value: float
    a_k: float
    c_k: float


@dataclass
class SpsaTrace:
    records: list[SpsaRecord] = field(default_factory=list)
    best_index: int = 0
    n_evaluations: int = 0  # gradient-estimate calls only
    n_score_evaluations: int = 0

    @property
    def best(self) -> SpsaRecord:
        return self.records[self.best_index]

    @property
    def last(self) -> SpsaRecord:
        return self.records[-1]

    @property
    def theta(self) -> np.ndarray:
        return self.best.theta

    @property
    def value(self) -> float:
        return self.best.value

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    def summary(self) -> dict:
        return {
            "initial_value": self.records[0].value,
            "best_value": self.best.value,
            "best_iteration": self.best.k,
            "last_value": self.last.value,
            "n_evaluations": self.n_evaluations,
            "n_score_evaluations": self.n_score_evaluations,
        }

    def to_dict(self) -> dict:
        out = self.summary()
        out["records"] = [
            {**asdict(r), "theta": [float(x) for x in r.theta]} for r in self.records
        ]
        return out


def gains(k: int, cfg: SpsaConfig) -> tuple[float, float]:
    a_k = cfg.a / (k + 1 + cfg.stability) ** ALPHA
    c_k = cfg.c / (k + 1) ** GAMMA
    return a_k, c_k


def _evaluate(objective: Objective, theta: np.ndarray) -> float:
    y = float(objective(theta))
    if not math.isfinite(y):
        raise OptimizationAborted(f"objective returned {y} at theta={theta.tolist()}", theta)
    return y


def estimate_gradient(
    objective: Objective,
    theta: np.ndarray,
    k: int,
    cfg: SpsaConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    _, c_k = gains(k, cfg)
    delta = 2.0 * rng.integers(0, 2, size=theta.shape) - 1.0
    y_plus = _evaluate(objective, theta + c_k * delta)
    y_minus = _evaluate(objective, theta - c_k * delta)
    return (y_plus - y_minus) / (2.0 * c_k * delta)


def minimize(
    objective: Objective,
    theta0: Sequence[float] | np.ndarray,
    cfg: SpsaConfig,
    project: Projection | None = None,
    score: Objective | None = None,
) -> SpsaTrace:
    """Run ``cfg.n_iterations`` SPSA updates starting from ``theta0``.

    ``project`` is applied after every update (never to ``theta0``).
    ``score`` ranks iterates for the best-iterate return and defaults to the
    objective; pass a noiseless variant when the objective is sampled.
    """
    theta = np.array(theta0, dtype=float)
    if theta.ndim != 1 or not np.all(np.isfinite(theta)):
        raise ValueError(f"theta0 must be a finite 1-D vector, got {theta0!r}")
    score = objective if score is None else score
    rng = cfg.rng()

    trace = SpsaTrace()

    def record(k: int, th: np.ndarray) -> None:
        a_k, c_k = gains(k, cfg)
        value = _evaluate(score, th)
        trace.n_score_evaluations += 1
        trace.records.append(SpsaRecord(k, th.copy(), value, a_k, c_k))
        if value < trace.records[trace.best_index].value:
            trace.best_index = len(trace.records) - 1

    record(0, theta)
    for k in range(cfg.n_iterations):
        a_k, _ = gains(k, cfg)
        grad = estimate_gradient(objective, theta, k, cfg, rng)
        trace.n_evaluations += 2
        theta = theta - a_k * grad
        if project is not None:
            theta = np.asarray(project(theta), dtype=float)
        record(k + 1, theta)
    return trace
