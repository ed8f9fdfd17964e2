"""Digitized annealing of the periodic nearest-neighbour Ising chain with first-order CD driving.

The annealing Hamiltonian is

    H0(t) = (1 - lam(t)) * h0 * sum_k X_k + lam(t) * J * sum_k Z_k Z_{k+1}

and the first-order counterdiabatic term is

    Hcd(t) = theta_cd(t) * sum_k (Z_k Y_{k+1} + Y_k Z_{k+1}),
    theta_cd(t) = 2 * lam'(t) * alpha1(lam(t)) * J * h0.

Each Trotter step j = 1..n applies, qubit by qubit, the X rotation, the ZZ
rotation on bond (k, k+1) and the two CD rotations on the same bond, with all
coefficients sampled at t_j = j * dt.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from .statevec import PauliString, Statevector, plus_state, rotate_amplitudes

__all__ = [
    "AnnealSpec",
    "StepAngles",
    "SingularCoefficientError",
    "lambda_of",
    "lambda_dot",
    "alpha1",
    "theta_cd_analytic",
    "analytic_cd_schedule",
    "step_angles",
    "build_circuit",
    "trotter_states",
    "evolve",
]

_TIME_SLACK = 1e-12


class SingularCoefficientError(ArithmeticError):
    """alpha1 is undefined: (1 - lam)^2 h0^2 + J^2 lam^2 vanishes."""


@dataclass(frozen=True)
class AnnealSpec:
    n_qubits: int
    J: float = -1.0
    h0: float = -1.0
    h_z: float = 0.0
    T: float = 1.0
    dt: float = 0.2
    periodic: bool = True

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError(f"n_qubits must be >= 2, got {self.n_qubits}")
        if not self.T > 0:
            raise ValueError(f"total time T must be > 0, got {self.T}")
        if not self.dt > 0:
            raise ValueError(f"Trotter interval dt must be > 0, got {self.dt}")
        ratio = self.T / self.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"T/dt must be a positive integer, got T={self.T}, dt={self.dt} (ratio {ratio!r})")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        """Sampling instants t_j = j*T/n, j = 1..n (t_n == T exactly)."""
        n = self.n_steps
        return np.array([self.T * j / n for j in range(1, n + 1)])

    @property
    def bonds(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        if self.periodic:
            return [(k, (k + 1) % n) for k in range(n)]
        return [(k, k + 1) for k in range(n - 1)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepAngles:
    """Coefficients of one Trotter step before multiplication by dt."""

    step_index: int
    theta_x: float
    theta_zz: float
    theta_cd: float


def _check_time(t: float, T: float) -> None:
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    if not -_TIME_SLACK <= t <= T + _TIME_SLACK:
        raise ValueError(f"t={t} outside [0, T={T}]")


def lambda_of(t: float, T: float) -> float:
    """Annealing schedule sin^2[(pi/2) sin^2(pi t / 2T)], rising from 0 to 1."""
    _check_time(t, T)
    return math.sin(0.5 * math.pi * math.sin(0.5 * math.pi * t / T) ** 2) ** 2


def lambda_dot(t: float, T: float) -> float:
    """Time derivative of :func:`lambda_of`."""
    _check_time(t, T)
    if t <= 0 or t >= T:
        # exact zeros; the trig form leaves ~1e-16 residue at t = T
        return 0.0
    b = 0.5 * math.pi * t / T
    a = 0.5 * math.pi * math.sin(b) ** 2
    return math.pi**2 / (4 * T) * math.sin(2 * a) * math.sin(2 * b)


def alpha1(lam: float, J: float, h0: float) -> float:
    """First-order gauge-potential coefficient minimizing the action Tr[G^2].

    Equals -1 / (16 [(1 - lam)^2 h0^2 + J^2 lam^2]).
    """
    denom = (1 - lam) ** 2 * h0**2 + J**2 * lam**2
    if denom == 0:
        raise SingularCoefficientError(f"alpha1 singular at lam={lam}, J={J}, h0={h0}")
    return -1.0 / (16.0 * denom)


def theta_cd_analytic(t: float, spec: AnnealSpec) -> float:
    lam_dot = lambda_dot(t, spec.T)
    return 2.0 * lam_dot * alpha1(lambda_of(t, spec.T), spec.J, spec.h0) * spec.J * spec.h0


def analytic_cd_schedule(spec: AnnealSpec) -> np.ndarray:
    """theta_cd sampled on the Trotter grid t_j, j = 1..n."""
    return np.array([theta_cd_analytic(t, spec) for t in spec.times])


def _as_schedule(spec: AnnealSpec, cd_schedule: Sequence[float] | np.ndarray) -> np.ndarray:
    sched = np.asarray(cd_schedule, dtype=float)
    if sched.shape != (spec.n_steps,):
        raise ValueError(f"cd_schedule must have length {spec.n_steps}, got shape {sched.shape}")
    return sched


def step_angles(spec: AnnealSpec, cd_schedule: Sequence[float] | np.ndarray) -> list[StepAngles]:
    sched = _as_schedule(spec, cd_schedule)
    out = []
    for j, (t, cd) in enumerate(zip(spec.times, sched), start=1):
        lam = lambda_of(t, spec.T)
        out.append(StepAngles(j, (1 - lam) * spec.h0, lam * spec.J, float(cd)))
    return out


@functools.lru_cache(maxsize=256)
def _step_layout(n: int, bonds: tuple[tuple[int, int], ...]) -> tuple[tuple[PauliString, str], ...]:
    bond_of = dict(bonds)
    layout = []
    for k in range(n):
        layout.append((PauliString(n, {k: "X"}), "x"))
        if k in bond_of:
            k1 = bond_of[k]
            # on a two-site ring (0,1) and (1,0) are distinct terms of the sum
            layout.append((PauliString(n, ((k, "Z"), (k1, "Z"))), "zz"))
            layout.append((PauliString(n, ((k, "Z"), (k1, "Y"))), "cd"))
            layout.append((PauliString(n, ((k, "Y"), (k1, "Z"))), "cd"))
    return tuple(layout)


def _step_gates(spec: AnnealSpec, angles: StepAngles) -> list[tuple[PauliString, float]]:
    coeff = {"x": angles.theta_x, "zz": angles.theta_zz, "cd": angles.theta_cd}
    layout = _step_layout(spec.n_qubits, tuple(spec.bonds))
    return [(p, coeff[kind] * spec.dt) for p, kind in layout]


def build_circuit(spec: AnnealSpec, cd_schedule: Sequence[float] | np.ndarray) -> list[tuple[PauliString, float]]:
    """Ordered gate list ``[(pauli, angle), ...]``, first entry applied first."""
    gates = []
    for angles in step_angles(spec, cd_schedule):
        gates.extend(_step_gates(spec, angles))
    return gates


def trotter_states(spec: AnnealSpec, cd_schedule: Sequence[float] | np.ndarray) -> Iterator[Statevector]:
    """Yield the state after each complete Trotter step, starting from |+>^N."""
    amps = plus_state(spec.n_qubits).amplitudes
    for angles in step_angles(spec, cd_schedule):
        for p, theta in _step_gates(spec, angles):
            amps = rotate_amplitudes(amps, p, theta)
        yield Statevector(spec.n_qubits, amps)


def evolve(spec: AnnealSpec, cd_schedule: Sequence[float] | np.ndarray) -> Statevector:
    state = None
    for state in trotter_states(spec, cd_schedule):
        pass
    return state
