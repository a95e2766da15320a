"""Pauli-decomposed Hamiltonians: file I/O, validation and summaries.

Two on-disk formats are supported:

* text: one ``PAULI coefficient`` pair per line, ``#`` starts a comment;
* json: ``{"n": 4, "identity_offset": 0.0, "terms": [{"pauli": "XXYY", "coeff": 0.5}]}``.

The JSON writer stores coefficients with ``repr`` precision so a save/load
cycle is bit-exact.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pauli import PauliError, PauliString, codes_array, as_pauli


class HamiltonianError(ValueError):
    """Invalid Hamiltonian file or term list."""


@dataclass(frozen=True)
class Hamiltonian:
    n: int
    terms: tuple[tuple[float, PauliString], ...]
    identity_offset: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise HamiltonianError("qubit count must be positive")
        seen = set()
        for coeff, p in self.terms:
            if p.n != self.n:
                raise HamiltonianError(f"term {p} has length {p.n}, expected {self.n}")
            if p.is_identity():
                raise HamiltonianError("identity term must go into identity_offset")
            if not math.isfinite(coeff):
                raise HamiltonianError(f"non-finite coefficient for {p}")
            if p in seen:
                raise HamiltonianError(f"duplicate term {p}")
            seen.add(p)
        if not math.isfinite(self.identity_offset):
            raise HamiltonianError("non-finite identity offset")

    @classmethod
    def from_terms(cls, terms, identity_offset: float = 0.0, n: int | None = None) -> "Hamiltonian":
        """Build from ``(coeff, pauli)`` or ``(pauli, coeff)`` pairs; identity terms are folded in."""
        clean = []
        offset = float(identity_offset)
        for a, b in terms:
            coeff, p = (a, b) if not isinstance(a, (str, PauliString)) else (b, a)
            p = as_pauli(p)
            if p.is_identity():
                offset += float(coeff)
            else:
                clean.append((float(coeff), p))
        if n is None:
            lengths = {p.n for _, p in clean}
            if not lengths:
                raise HamiltonianError("cannot infer qubit count from an identity-only term list")
            n = lengths.pop()
        return cls(n, tuple(clean), offset)

    @property
    def L(self) -> int:
        return len(self.terms)

    @property
    def paulis(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def target_codes(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, self.n), dtype=np.uint8)
        return codes_array(self.paulis)

    def scaled(self, c: float) -> "Hamiltonian":
        return Hamiltonian(self.n, tuple((c * a, p) for a, p in self.terms), c * self.identity_offset)

    def pruned(self, tol: float) -> "Hamiltonian":
        return Hamiltonian(self.n, tuple(t for t in self.terms if abs(t[0]) >= tol), self.identity_offset)


@dataclass
class HamiltonianSummary:
    L: int
    weight_histogram: dict[int, int] = field(default_factory=dict)
    one_norm: float = 0.0
    max_weight: int = 0

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "weight_histogram": {str(k): v for k, v in sorted(self.weight_histogram.items())},
            "one_norm": self.one_norm,
            "max_weight": self.max_weight,
        }


def summarize(h: Hamiltonian) -> HamiltonianSummary:
    weights = [p.weight() for _, p in h.terms]
    hist = dict(sorted(Counter(weights).items()))
    return HamiltonianSummary(
        L=h.L,
        weight_histogram=hist,
        one_norm=float(sum(abs(c) for c, _ in h.terms)),
        max_weight=max(weights, default=0),
    )


def ascii_histogram(summary: HamiltonianSummary, width: int = 40) -> str:
    if not summary.weight_histogram:
        return "(no non-identity terms)"
    top = max(summary.weight_histogram.values())
    lines = []
    for w, count in summary.weight_histogram.items():
        bar = "#" * max(1, round(width * count / top))
        lines.append(f"wt {w:>2} | {bar} {count}")
    return "\n".join(lines)


# -- parsing ----------------------------------------------------------------

def _guess_format(path: Path) -> str:
    return "json" if path.suffix.lower() == ".json" else "text"


def parse_text(text: str) -> Hamiltonian:
    acc: dict[PauliString, float] = {}
    n = None
    offset = 0.0
    seen_identity = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise HamiltonianError(f"line {lineno}: expected 'PAULI coefficient', got {raw!r}")
        try:
            p = PauliString(parts[0])
            coeff = float(parts[1])
        except (PauliError, ValueError) as exc:
            raise HamiltonianError(f"line {lineno}: {exc}") from None
        if not math.isfinite(coeff):
            raise HamiltonianError(f"line {lineno}: non-finite coefficient {parts[1]!r}")
        if n is None:
            n = p.n
        elif p.n != n:
            raise HamiltonianError(f"line {lineno}: length {p.n} differs from {n}")
        if p.is_identity():
            if seen_identity:
                raise HamiltonianError(f"line {lineno}: duplicate identity term")
            seen_identity = True
            offset = coeff
            continue
        if p in acc:
            raise HamiltonianError(f"line {lineno}: duplicate term {p}")
        acc[p] = coeff
    if n is None:
        raise HamiltonianError("no terms found")
    return Hamiltonian(n, tuple((c, p) for p, c in acc.items()), offset)


def parse_json(text: str) -> Hamiltonian:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HamiltonianError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "terms" not in doc:
        raise HamiltonianError("JSON Hamiltonian needs a 'terms' list")
    lines = []
    for i, t in enumerate(doc["terms"]):
        try:
            lines.append(f"{t['pauli']} {float(t['coeff'])!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise HamiltonianError(f"term {i}: {exc}") from None
    offset = float(doc.get("identity_offset", 0.0))
    if lines:
        h = parse_text("\n".join(lines))
    else:
        if "n" not in doc:
            raise HamiltonianError("empty term list needs an explicit 'n'")
        h = Hamiltonian(int(doc["n"]), (), 0.0)
    if "n" in doc and int(doc["n"]) != h.n:
        raise HamiltonianError(f"declared n={doc['n']} but terms have length {h.n}")
    if offset and h.identity_offset:
        raise HamiltonianError("identity given both as a term and as identity_offset")
    return Hamiltonian(h.n, h.terms, h.identity_offset + offset)


def load(path, format: str | None = None) -> Hamiltonian:
    path = Path(path)
    fmt = format or _guess_format(path)
    text = path.read_text()
    if fmt == "json":
        return parse_json(text)
    if fmt == "text":
        return parse_text(text)
    raise HamiltonianError(f"unknown format {fmt!r}")


def to_json(h: Hamiltonian) -> str:
    doc = {
        "n": h.n,
        "identity_offset": h.identity_offset,
        "terms": [{"pauli": str(p), "coeff": c} for c, p in h.terms],
    }
    return json.dumps(doc, indent=1)


def to_text(h: Hamiltonian) -> str:
    lines = []
    if h.identity_offset:
        lines.append(f"{'I' * h.n} {h.identity_offset!r}")
    lines += [f"{p} {c!r}" for c, p in h.terms]
    return "\n".join(lines) + "\n"


def save(h: Hamiltonian, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or _guess_format(path)
    path.write_text(to_json(h) if fmt == "json" else to_text(h))


def exact_expectation(h: Hamiltonian, state) -> float:
    """Exact <psi|H|psi> summed term by term (identity offset included)."""
    # local import keeps statesim optional for pure I/O users
    from .statesim import pauli_expectation

    if state.n != h.n:
        raise HamiltonianError(f"state has {state.n} qubits, Hamiltonian has {h.n}")
    total = h.identity_offset
    for coeff, p in h.terms:
        total += coeff * pauli_expectation(state, p)
    return float(total)
