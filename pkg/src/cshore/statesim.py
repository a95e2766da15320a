"""Dense statevector simulation for the benchmark states.

Amplitude index ``i`` is big-endian: qubit 0 (the leftmost Pauli letter) is
the most significant bit. Outcomes are returned as integers in the same
convention, so ``parity(y & support_mask)`` gives the sign of a covered term.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .pauli import PauliString, as_pauli, measurement_basis, parity

DEFAULT_MAX_QUBITS = 16
DENSE_EIGH_MAX_QUBITS = 12

_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
# rotation into the computational basis per measured letter; for Y the
# circuit applies S^dagger first, then Had
_ROTATION = {1: _HAD, 2: _HAD @ _SDG, 3: np.eye(2, dtype=complex)}


class SimulationError(ValueError):
    pass


def max_qubits() -> int:
    return int(os.environ.get("CSHORE_MAX_QUBITS", DEFAULT_MAX_QUBITS))


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; accepts an int or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class QuantumState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.shape[0] != 2 ** self.n:
            raise SimulationError(f"expected {2 ** self.n} amplitudes, got {amp.shape[0]}")
        norm = np.vdot(amp, amp).real
        if abs(norm - 1.0) > 1e-10:
            raise SimulationError(f"state not normalized (norm^2={norm})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def basis_state(cls, bits: str) -> "QuantumState":
        n = len(bits)
        amp = np.zeros(2 ** n, dtype=complex)
        amp[int(bits, 2)] = 1.0
        return cls(n, amp)

    @classmethod
    def from_vector(cls, vec) -> "QuantumState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        n = int(round(np.log2(vec.shape[0])))
        return cls(n, vec / np.linalg.norm(vec))

    def fidelity(self, other: "QuantumState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True)
class AnsatzSpec:
    """Layered RY/RZ + nearest-neighbour CZ circuit with seeded angles."""

    n: int
    depth: int = 1
    seed: int = 0
    entangler_pattern: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.depth < 0:
            raise SimulationError("depth must be non-negative")
        if self.entangler_pattern is None:
            object.__setattr__(self, "entangler_pattern", tuple((j, j + 1) for j in range(self.n - 1)))
        for a, b in self.entangler_pattern:
            if not (0 <= a < self.n and 0 <= b < self.n and abs(a - b) == 1):
                raise SimulationError(f"entangler pair {(a, b)} is not an adjacent qubit pair")

    def to_dict(self) -> dict:
        return {"n": self.n, "depth": self.depth, "seed": self.seed,
                "entangler_pattern": [list(p) for p in self.entangler_pattern]}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzSpec":
        pat = d.get("entangler_pattern")
        return cls(int(d["n"]), int(d.get("depth", 1)), int(d.get("seed", 0)),
                   None if pat is None else tuple(tuple(p) for p in pat))


def _apply_1q(psi: np.ndarray, gate: np.ndarray, q: int) -> np.ndarray:
    psi = np.tensordot(gate, psi, axes=([1], [q]))
    return np.moveaxis(psi, 0, q)


def random_ansatz_state(spec: AnsatzSpec) -> QuantumState:
    n = spec.n
    rng = make_rng(spec.seed)
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for _ in range(spec.depth):
        angles = rng.uniform(0.0, 2 * np.pi, size=(n, 2))
        for q in range(n):
            ty, tz = angles[q]
            ry = np.array([[np.cos(ty / 2), -np.sin(ty / 2)],
                           [np.sin(ty / 2), np.cos(ty / 2)]], dtype=complex)
            rz = np.diag([np.exp(-0.5j * tz), np.exp(0.5j * tz)])
            psi = _apply_1q(psi, rz @ ry, q)
        for a, b in spec.entangler_pattern:
            idx = [slice(None)] * n
            idx[a] = 1
            idx[b] = 1
            psi[tuple(idx)] *= -1
    return QuantumState(n, psi.reshape(-1))


# -- Pauli action -------------------------------------------------------------

def _pauli_action(n: int, p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """(flip index, phase) such that (P psi)[i ^ x] = phase[i] * psi[i]."""
    idx = np.arange(2 ** n, dtype=np.uint64)
    ny = bin(p.x & p.z).count("1")
    signs = 1 - 2 * parity(idx & np.uint64(p.z)).astype(float)
    phase = (1j) ** ny * signs
    return idx ^ np.uint64(p.x), phase


def pauli_expectation(state: QuantumState, p: PauliString | str) -> float:
    p = as_pauli(p)
    if p.n != state.n:
        raise SimulationError(f"Pauli {p} does not match {state.n}-qubit state")
    psi = state.amplitudes
    flip, phase = _pauli_action(state.n, p)
    # <psi|P|psi> = sum_i conj(psi[i ^ x]) * phase[i] * psi[i]
    val = np.sum(np.conj(psi[flip.astype(np.intp)]) * phase * psi)
    return float(val.real)


def hamiltonian_matrix(h) -> sp.csr_matrix:
    n = h.n
    dim = 2 ** n
    rows = np.arange(dim)
    mat = sp.identity(dim, dtype=complex, format="csr") * h.identity_offset
    for coeff, p in h.terms:
        flip, phase = _pauli_action(n, p)
        mat = mat + sp.csr_matrix((coeff * phase, (flip.astype(np.intp), rows)), shape=(dim, dim))
    return mat.tocsr()


def ground_state(h, cap: int | None = None) -> tuple[QuantumState, float]:
    cap = max_qubits() if cap is None else cap
    if h.n > cap:
        raise SimulationError(f"{h.n} qubits exceeds the dense simulation cap of {cap}")
    mat = hamiltonian_matrix(h)
    if h.n <= DENSE_EIGH_MAX_QUBITS:
        vals, vecs = np.linalg.eigh(mat.toarray())
        energy, vec = vals[0], vecs[:, 0]
    else:
        vals, vecs = spla.eigsh(mat, k=1, which="SA", tol=1e-12)
        energy, vec = vals[0], vecs[:, 0]
    # fix the global phase so the largest amplitude is real positive
    k = int(np.argmax(np.abs(vec)))
    vec = vec * np.exp(-1j * np.angle(vec[k]))
    return QuantumState(h.n, vec / np.linalg.norm(vec)), float(energy)


# -- measurement ---------------------------------------------------------------

def rotate_to_basis(state: QuantumState, basis) -> np.ndarray:
    codes = basis if isinstance(basis, (tuple, list, np.ndarray)) else measurement_basis(basis).codes
    if len(codes) != state.n:
        raise SimulationError(f"basis length {len(codes)} does not match {state.n} qubits")
    psi = state.amplitudes.reshape((2,) * state.n)
    for q, c in enumerate(codes):
        c = int(c)
        if c == 0:
            raise SimulationError("measurement basis contains an identity letter")
        if c != 3:
            psi = _apply_1q(psi, _ROTATION[c], q)
    return psi.reshape(-1)


def outcome_distribution(state: QuantumState, basis) -> np.ndarray:
    """Exact Born probabilities over outcome integers for ``basis``."""
    probs = np.abs(rotate_to_basis(state, basis)) ** 2
    return probs / probs.sum()


def sample(state: QuantumState, basis, rng: np.random.Generator, shots: int | None = None):
    """Draw one outcome (bit tuple) or, with ``shots``, an array of outcome integers."""
    probs = outcome_distribution(state, basis)
    if shots is None:
        y = int(rng.choice(probs.shape[0], p=probs))
        return tuple((y >> (state.n - 1 - j)) & 1 for j in range(state.n))
    return rng.choice(probs.shape[0], size=shots, p=probs)


@dataclass
class OutcomeSampler:
    """Caches rotated-state probabilities per basis for repeated sampling."""

    state: QuantumState
    max_cache: int = 4096
    _cache: dict = field(default_factory=dict, repr=False)

    def probabilities(self, codes) -> np.ndarray:
        key = bytes(np.asarray(codes, dtype=np.uint8))
        probs = self._cache.get(key)
        if probs is None:
            probs = outcome_distribution(self.state, tuple(int(c) for c in codes))
            if len(self._cache) < self.max_cache:
                self._cache[key] = probs
        return probs

    def histogram(self, codes, shots: int, rng: np.random.Generator) -> np.ndarray:
        """Outcome counts for ``shots`` i.i.d. measurements in one basis."""
        return rng.multinomial(shots, self.probabilities(codes))
