"""Pauli strings, measurement bases and outcome bookkeeping.

A Pauli string on ``n`` qubits is stored as two integer bit masks (``x`` and
``z``) so that the covering test is a handful of word operations. Bit
``n - 1 - j`` of a mask belongs to qubit ``j`` (0-based), i.e. the mask read
as a binary number lists the qubits left to right, the same order as the
text form and as the big-endian statevector index.

Letter codes used throughout the package: I=0, X=1, Y=2, Z=3.
"""
from __future__ import annotations

from functools import total_ordering
from typing import Iterable, Sequence

import numpy as np

LETTERS = "IXYZ"
CODE = {c: i for i, c in enumerate(LETTERS)}
# x/z bit of each letter code
_XBIT = (0, 1, 1, 0)
_ZBIT = (0, 0, 1, 1)


class PauliError(ValueError):
    """Malformed Pauli string, basis or outcome."""


@total_ordering
class PauliString:
    """Immutable n-qubit word over {I, X, Y, Z}.

    Ordering is lexicographic with I < X < Y < Z.
    """

    __slots__ = ("_letters", "_x", "_z")

    def __init__(self, letters: str | Sequence[str]):
        if not isinstance(letters, str):
            letters = "".join(letters)
        letters = letters.strip().upper()
        if not letters:
            raise PauliError("empty Pauli string")
        bad = set(letters) - set(LETTERS)
        if bad:
            raise PauliError(f"invalid Pauli letters {sorted(bad)} in {letters!r}")
        x = z = 0
        for c in letters:
            k = CODE[c]
            x = (x << 1) | _XBIT[k]
            z = (z << 1) | _ZBIT[k]
        object.__setattr__(self, "_letters", letters)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_z", z)

    def __setattr__(self, name, value):
        raise AttributeError("PauliString is immutable")

    @classmethod
    def from_codes(cls, codes: Iterable[int]) -> "PauliString":
        return cls("".join(LETTERS[int(c)] for c in codes))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @property
    def n(self) -> int:
        return len(self._letters)

    @property
    def letters(self) -> str:
        return self._letters

    @property
    def x(self) -> int:
        return self._x

    @property
    def z(self) -> int:
        return self._z

    @property
    def support_mask(self) -> int:
        return self._x | self._z

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(CODE[c] for c in self._letters)

    def support(self) -> tuple[int, ...]:
        """0-based indices of the non-identity letters."""
        return tuple(j for j, c in enumerate(self._letters) if c != "I")

    def weight(self) -> int:
        return sum(c != "I" for c in self._letters)

    def is_identity(self) -> bool:
        return self.support_mask == 0

    def is_basis(self) -> bool:
        return "I" not in self._letters

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, j: int) -> str:
        return self._letters[j]

    def __str__(self) -> str:
        return self._letters

    def __repr__(self) -> str:
        return f"PauliString({self._letters!r})"

    def __eq__(self, other) -> bool:
        if isinstance(other, PauliString):
            return self._letters == other._letters
        return NotImplemented

    def __lt__(self, other: "PauliString") -> bool:
        # "IXYZ" is already in ASCII order
        return self._letters < other._letters

    def __hash__(self) -> int:
        return hash(self._letters)


def as_pauli(p) -> PauliString:
    """Accept a PauliString, a letter string, or a row of integer codes."""
    if isinstance(p, PauliString):
        return p
    if isinstance(p, np.ndarray) and p.dtype.kind in "iu":
        return PauliString.from_codes(p)
    return PauliString(p)


def measurement_basis(p: PauliString | str) -> PauliString:
    """Validate that ``p`` is a full-weight basis (letters in X, Y, Z only)."""
    p = as_pauli(p)
    if not p.is_basis():
        raise PauliError(f"measurement basis {p} contains identity letters")
    return p


def covers(target: PauliString | str, basis: PauliString | str) -> bool:
    """True when every non-identity letter of ``target`` matches ``basis``."""
    target, basis = as_pauli(target), as_pauli(basis)
    if target.n != basis.n:
        raise PauliError(f"length mismatch: {target.n} vs {basis.n}")
    s = target.support_mask
    return ((target.x ^ basis.x) | (target.z ^ basis.z)) & s == 0


def weight(p: PauliString | str) -> int:
    return as_pauli(p).weight()


def support(p: PauliString | str) -> tuple[int, ...]:
    return as_pauli(p).support()


def eigenvalue_product(y: Sequence[int], subset: Iterable[int]) -> int:
    """Product of (-1)**y_j over ``subset``; +1 for the empty set.

    Qubits are numbered 1..n here (qubit 1 is the leftmost letter / first bit),
    unlike ``support()`` which returns 0-based positions.
    """
    n = len(y)
    sign = 1
    for j in subset:
        if not 1 <= j <= n:
            raise PauliError(f"qubit index {j} out of range 1..{n}")
        if y[j - 1]:
            sign = -sign
    return sign


def outcome_to_int(bits: Sequence[int]) -> int:
    """Pack an outcome tuple (qubit 0 first) into its big-endian integer index."""
    v = 0
    for b in bits:
        if b not in (0, 1):
            raise PauliError(f"outcome bits must be 0/1, got {b!r}")
        v = (v << 1) | int(b)
    return v


def int_to_outcome(v: int, n: int) -> tuple[int, ...]:
    return tuple((v >> (n - 1 - j)) & 1 for j in range(n))


# -- array helpers ----------------------------------------------------------
# Collections of strings are handled as (k, n) uint8 code arrays; masks are
# uint64 so n is limited to 64 on these paths.

def codes_array(paulis: Iterable[PauliString | str]) -> np.ndarray:
    rows = [as_pauli(p).codes for p in paulis]
    if not rows:
        return np.zeros((0, 0), dtype=np.uint8)
    return np.asarray(rows, dtype=np.uint8)


def codes_to_masks(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(k, n) letter codes -> (x, z) uint64 masks of length k."""
    codes = np.asarray(codes, dtype=np.uint8)
    n = codes.shape[1]
    if n > 64:
        raise PauliError("vectorized masks support at most 64 qubits")
    xbits = ((codes == 1) | (codes == 2)).astype(np.uint64)
    zbits = ((codes == 2) | (codes == 3)).astype(np.uint64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    x = (xbits << shifts).sum(axis=1, dtype=np.uint64)
    z = (zbits << shifts).sum(axis=1, dtype=np.uint64)
    return x, z


def codes_to_strings(codes: np.ndarray) -> list[str]:
    table = np.array(list(LETTERS))
    return ["".join(row) for row in table[np.asarray(codes, dtype=np.intp)]]


def covers_matrix(target_codes: np.ndarray, basis_codes: np.ndarray) -> np.ndarray:
    """Boolean (num_bases, num_targets) covering matrix."""
    tx, tz = codes_to_masks(target_codes)
    bx, bz = codes_to_masks(basis_codes)
    s = tx | tz
    diff = (bx[:, None] ^ tx[None, :]) | (bz[:, None] ^ tz[None, :])
    return (diff & s[None, :]) == 0


def parity(v: np.ndarray) -> np.ndarray:
    """Parity of the set bits of each entry (0 or 1)."""
    return (np.bitwise_count(np.asarray(v, dtype=np.uint64)) & 1).astype(np.int8)
