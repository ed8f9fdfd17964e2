"""Pure-state simulation of small qubit registers driven by Pauli-string rotations.

Qubit ``k`` is bit ``k`` of the basis index (qubit 0 is the least significant
bit). Every gate in the protocol is of the form ``exp(-i*theta*P)`` for a
Pauli string ``P``; since ``P**2 == I`` this is applied exactly as
``cos(theta)*psi - i*sin(theta)*P psi`` without building any matrix.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PauliString",
    "Statevector",
    "plus_state",
    "basis_state",
    "ghz_state",
    "apply_pauli_rotation",
    "overlap_fidelity",
    "ghz_fidelity",
    "sampled_ghz_fidelity",
    "pauli_expectation",
    "sample_counts",
    "dense_pauli",
    "dense_oracle_unitary",
    "MAX_DENSE_QUBITS",
]

MAX_DENSE_QUBITS = 6

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli letters; identity on unlisted qubits.

    ``letters`` may be given as a mapping ``{qubit: "X" | "Y" | "Z"}``; it is
    stored as a sorted tuple of pairs so the string is hashable.
    """

    n_qubits: int
    letters: tuple[tuple[int, str], ...]

    def __init__(self, n_qubits: int, letters: Mapping[int, str] | tuple[tuple[int, str], ...]):
        items = letters.items() if isinstance(letters, Mapping) else letters
        norm = tuple(sorted((int(q), str(l).upper()) for q, l in items))
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
        if not norm:
            raise ValueError("a Pauli string needs at least one non-identity letter")
        for q, l in norm:
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit index {q} out of range for {n_qubits} qubits")
            if l not in ("X", "Y", "Z"):
                raise ValueError(f"unknown Pauli letter {l!r} on qubit {q}")
        object.__setattr__(self, "n_qubits", int(n_qubits))
        object.__setattr__(self, "letters", norm)

    @property
    def x_mask(self) -> int:
        """Bits flipped by the string (X and Y letters)."""
        return sum(1 << q for q, l in self.letters if l in "XY")

    @property
    def z_mask(self) -> int:
        """Bits contributing a sign (Z and Y letters)."""
        return sum(1 << q for q, l in self.letters if l in "ZY")

    @property
    def label(self) -> str:
        return "".join(f"{l}{q}" for q, l in self.letters)

    def __str__(self) -> str:
        return self.label


@functools.lru_cache(maxsize=4096)
def _pauli_action(n_qubits: int, x_mask: int, z_mask: int) -> tuple[np.ndarray, np.ndarray]:
    # (P psi)[i] = phase[i] * psi[perm[i]], using Y = i X Z on every Y qubit.
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    perm = idx ^ x_mask
    parity = (np.bitwise_count(perm & z_mask) & 1).astype(np.int64)
    n_y = bin(x_mask & z_mask).count("1")
    phase = (1j**n_y) * (1 - 2 * parity).astype(complex)
    perm.setflags(write=False)
    phase.setflags(write=False)
    return perm, phase


def _apply_pauli(amps: np.ndarray, p: PauliString) -> np.ndarray:
    perm, phase = _pauli_action(p.n_qubits, p.x_mask, p.z_mask)
    return phase * amps[perm]


@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())


def plus_state(n_qubits: int) -> Statevector:
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    dim = 1 << n_qubits
    return Statevector(n_qubits, np.full(dim, 2.0 ** (-n_qubits / 2), dtype=complex))


def basis_state(n_qubits: int, index: int) -> Statevector:
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    if not 0 <= index < (1 << n_qubits):
        raise ValueError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[index] = 1.0
    return Statevector(n_qubits, amps)


def ghz_state(n_qubits: int) -> Statevector:
    """(|0...0> + |1...1>)/sqrt(2)."""
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return Statevector(n_qubits, amps)


def _check_sizes(a: int, b: int, what: str) -> None:
    if a != b:
        raise ValueError(f"qubit-count mismatch: {what} ({a} vs {b})")


def rotate_amplitudes(amps: np.ndarray, p: PauliString, theta: float) -> np.ndarray:
    """Raw kernel of :func:`apply_pauli_rotation` on an amplitude array."""
    return math.cos(theta) * amps - (1j * math.sin(theta)) * _apply_pauli(amps, p)


def apply_pauli_rotation(state: Statevector, p: PauliString, theta: float) -> Statevector:
    """Return ``exp(-i*theta*p) |state>``. The input state is left untouched."""
    _check_sizes(state.n_qubits, p.n_qubits, "state vs Pauli string")
    return Statevector(state.n_qubits, rotate_amplitudes(state.amplitudes, p, theta))


def overlap_fidelity(a: Statevector, b: Statevector) -> float:
    _check_sizes(a.n_qubits, b.n_qubits, "overlap operands")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def ghz_fidelity(state: Statevector) -> float:
    amps = state.amplitudes
    return float(abs(amps[0] + amps[-1]) ** 2 / 2)


def sampled_ghz_fidelity(state: Statevector, shots: int, rng: np.random.Generator) -> float:
    """GHZ fidelity with the populations of |0..0> and |1..1> estimated from shots.

    The coherence term ``Re(conj(a_0) a_1)`` is kept exact; only the
    diagonal part carries multinomial noise.
    """
    counts = sample_counts(state, shots, rng)
    a0, a1 = state.amplitudes[0], state.amplitudes[-1]
    diag = (counts.get(0, 0) + counts.get(state.dim - 1, 0)) / shots
    return float(diag / 2 + (np.conj(a0) * a1).real)


def pauli_expectation(state: Statevector, p: PauliString) -> float:
    _check_sizes(state.n_qubits, p.n_qubits, "state vs Pauli string")
    return float(np.vdot(state.amplitudes, _apply_pauli(state.amplitudes, p)).real)


def sample_counts(state: Statevector, shots: int, rng: np.random.Generator) -> dict[int, int]:
    """Multinomial measurement record in the computational basis, zero counts omitted."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = state.probabilities()
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    return {int(i): int(counts[i]) for i in np.flatnonzero(counts)}


def dense_pauli(p: PauliString) -> np.ndarray:
    """Dense matrix of ``p`` built from explicit Kronecker products.

    Qubit 0 is the rightmost factor so that it maps to the lowest index bit.
    """
    if p.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense construction refused above {MAX_DENSE_QUBITS} qubits")
    letters = dict(p.letters)
    out = np.eye(1, dtype=complex)
    for q in reversed(range(p.n_qubits)):
        out = np.kron(out, _PAULI_MATRICES[letters.get(q, "I")])
    return out


def dense_oracle_unitary(p: PauliString, theta: float) -> np.ndarray:
    mat = dense_pauli(p)
    return math.cos(theta) * np.eye(mat.shape[0], dtype=complex) - 1j * math.sin(theta) * mat
