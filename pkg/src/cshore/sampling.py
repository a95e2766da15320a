"""Query distributions over full-weight measurement bases.

All samplers hand out bases as ``(size, n)`` uint8 arrays of letter codes
(X=1, Y=2, Z=3). Distributions that can evaluate coverage probabilities
also expose the prefix-conditional coverage used by the derandomizer.
"""
from __future__ import annotations

import json
import math
from itertools import product

import numpy as np

from .pauli import PauliString, as_pauli, codes_array

BASIS_LETTERS = (1, 2, 3)


class QueryDistribution:
    """Common sampler contract.

    Subclasses set ``can_evaluate_pmf`` / ``can_evaluate_coverage`` and
    implement the matching methods.
    """

    can_evaluate_pmf = False
    can_evaluate_coverage = False
    name = "query"

    n: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def pmf(self, basis) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form pmf")

    def coverage(self, target_codes: np.ndarray) -> np.ndarray:
        """Coverage probability of each row of ``target_codes``."""
        raise NotImplementedError(f"{type(self).__name__} cannot evaluate coverage")

    def coverage_probability(self, target) -> float:
        return float(self.coverage(np.asarray([as_pauli(target).codes], dtype=np.uint8))[0])

    # derandomizer hooks: a cursor is an opaque handle for a basis prefix
    def root_cursor(self):
        raise NotImplementedError

    def step_cursor(self, cursor, k: int, letter: int):
        """Cursor after fixing qubit ``k`` to ``letter``; None if impossible."""
        raise NotImplementedError

    def candidate_letters(self, cursor, k: int) -> tuple[int, ...]:
        return BASIS_LETTERS

    def suffix_coverage(self, cursor, k: int, target_codes: np.ndarray) -> np.ndarray:
        """Pr[targets' letters on qubits k..n-1 are covered | prefix at ``cursor``]."""
        raise NotImplementedError


def sample_basis(q: QueryDistribution, rng: np.random.Generator) -> PauliString:
    return PauliString.from_codes(q.sample(rng, 1)[0])


# -- product distributions -------------------------------------------------------

class ProductDistribution(QueryDistribution):
    """Independent per-qubit letter probabilities, columns ordered X, Y, Z."""

    can_evaluate_pmf = True
    can_evaluate_coverage = True

    def __init__(self, marginals, name: str = "product"):
        m = np.array(marginals, dtype=float)
        if m.ndim != 2 or m.shape[1] != 3:
            raise ValueError("marginals must have shape (n, 3)")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each marginal must be a probability triple")
        m.setflags(write=False)
        self.marginals = m
        self.n = m.shape[0]
        self.name = name
        # prepend the identity column (always matched) for coverage lookups
        self._table = np.hstack([np.ones((self.n, 1)), m])
        self._cum = np.cumsum(m, axis=1)

    def __repr__(self):
        return f"ProductDistribution(n={self.n}, name={self.name!r})"

    def sample(self, rng, size):
        u = rng.random((size, self.n))
        codes = 1 + (u[:, :, None] >= self._cum[None, :, :2]).sum(axis=2)
        return codes.astype(np.uint8)

    def pmf(self, basis) -> float:
        codes = as_pauli(basis).codes if not isinstance(basis, (tuple, np.ndarray)) else basis
        if len(codes) != self.n or 0 in tuple(codes):
            return 0.0
        return float(np.prod(self.marginals[np.arange(self.n), np.asarray(codes, dtype=np.intp) - 1]))

    def coverage(self, target_codes):
        t = np.asarray(target_codes, dtype=np.intp)
        return self._table[np.arange(self.n)[None, :], t].prod(axis=1)

    def root_cursor(self):
        return 0

    def step_cursor(self, cursor, k, letter):
        return cursor

    def suffix_coverage(self, cursor, k, target_codes):
        t = np.asarray(target_codes, dtype=np.intp)
        if k >= self.n:
            return np.ones(t.shape[0])
        cols = np.arange(k, self.n)
        return self._table[cols[None, :], t[:, k:]].prod(axis=1)

    def to_dict(self) -> dict:
        return {"name": self.name, "marginals": self.marginals.tolist()}

    @classmethod
    def from_dict(cls, d) -> "ProductDistribution":
        return cls(d["marginals"], d.get("name", "product"))

    def to_csv(self) -> str:
        rows = ["qubit,X,Y,Z"] + [f"{j},{x!r},{y!r},{z!r}" for j, (x, y, z) in enumerate(self.marginals)]
        return "\n".join(rows) + "\n"


def cs_distribution(n: int) -> ProductDistribution:
    if n < 1:
        raise ValueError("n must be positive")
    return ProductDistribution(np.full((n, 3), 1.0 / 3.0), name="CS")


def diagonal_cost(h, q: QueryDistribution) -> float:
    """Sum of alpha_j^2 / xi(Q_j) -- one-shot variance under the maximally mixed state.

    Returns ``math.inf`` when some term has zero coverage.
    """
    if h.L == 0:
        return 0.0
    xi = q.coverage(h.target_codes())
    a2 = h.coeffs ** 2
    if np.any((xi <= 0) & (a2 > 0)):
        return math.inf
    mask = a2 > 0
    return float(np.sum(a2[mask] / xi[mask]))


def _lbcs_cost_and_grad(beta, tcodes, a2):
    table = np.hstack([np.ones((beta.shape[0], 1)), beta])
    n = beta.shape[0]
    factors = table[np.arange(n)[None, :], tcodes]  # (L, n)
    xi = factors.prod(axis=1)
    cost = float(np.sum(a2 / xi))
    # d cost / d beta_i(P) = -sum_{j: Q_ji = P} a2_j / xi_j / beta_i(P)
    grad = np.zeros_like(beta)
    w = a2 / xi
    for i in range(n):
        for p in BASIS_LETTERS:
            sel = tcodes[:, i] == p
            if np.any(sel):
                grad[i, p - 1] = -w[sel].sum() / beta[i, p - 1]
    return cost, grad


def lbcs_optimize(h, max_iter: int = 10_000, tol: float = 1e-10) -> ProductDistribution:
    """Minimize the diagonal cost over product distributions.

    Exponentiated-gradient (mirror descent) steps on every qubit simplex at
    once, with a backtracking step size. Letters never used on a qubit get
    no gradient signal, so their mass is pushed out by the normalisation.
    """
    if h.L == 0:
        raise ValueError("LBCS needs at least one non-identity term")
    tcodes = h.target_codes().astype(np.intp)
    a2 = h.coeffs ** 2
    keep = a2 > 0
    tcodes, a2 = tcodes[keep], a2[keep]
    n = h.n
    beta = np.full((n, 3), 1.0 / 3.0)
    if len(a2) == 0:
        return ProductDistribution(beta, name="LBCS")
    cost, grad = _lbcs_cost_and_grad(beta, tcodes, a2)
    step = 1.0 / max(1.0, np.abs(grad).max())
    for _ in range(max_iter):
        while True:
            logits = np.log(beta) - step * grad
            logits -= logits.max(axis=1, keepdims=True)
            trial = np.exp(logits)
            trial /= trial.sum(axis=1, keepdims=True)
            trial = np.maximum(trial, 1e-300)
            new_cost, new_grad = _lbcs_cost_and_grad(trial, tcodes, a2)
            if new_cost <= cost:
                break
            step *= 0.5
            if step < 1e-20:
                new_cost = cost
                break
        if step < 1e-20:
            break
        improvement = cost - new_cost
        beta, cost, grad = trial, new_cost, new_grad
        step *= 2.0
        if improvement < tol:
            break
    beta = _snap_simplex(beta)
    return ProductDistribution(beta, name="LBCS")


def _snap_simplex(beta, floor: float = 1e-15):
    beta = np.where(beta < floor, 0.0, beta)
    return beta / beta.sum(axis=1, keepdims=True)


# -- adaptive Pauli shadows ----------------------------------------------------------

def aps_marginal(c) -> np.ndarray:
    """argmin of sum_P c_P / beta_P on the simplex: beta_P proportional to sqrt(c_P)."""
    c = np.asarray(c, dtype=float)
    r = np.sqrt(np.maximum(c, 0.0))
    s = r.sum()
    if s == 0:
        return np.full(3, 1.0 / 3.0)
    return r / s


class APSSampler(QueryDistribution):
    """Adaptive Pauli shadows: marginals re-optimized qubit by qubit per sample."""

    name = "APS"

    def __init__(self, h):
        if h.L == 0:
            raise ValueError("APS needs at least one non-identity term")
        self.n = h.n
        self._tcodes = h.target_codes().astype(np.intp)
        self._a2 = h.coeffs ** 2

    def sample_one(self, rng) -> np.ndarray:
        n = self.n
        order = rng.permutation(n)
        basis = np.zeros(n, dtype=np.uint8)
        compatible = np.ones(len(self._a2), dtype=bool)
        for j in order:
            col = self._tcodes[:, j]
            active = compatible & (col != 0)
            c = [self._a2[active & (col == p)].sum() for p in BASIS_LETTERS]
            beta = aps_marginal(c)
            letter = 1 + int(np.searchsorted(np.cumsum(beta), rng.random(), side="right"))
            letter = min(letter, 3)
            basis[j] = letter
            compatible &= (col == 0) | (col == letter)
        return basis

    def sample(self, rng, size, chunk: int = 4096):
        out = np.empty((size, self.n), dtype=np.uint8)
        for start in range(0, size, chunk):
            out[start:start + chunk] = self._sample_block(rng, min(chunk, size - start))
        return out

    def _sample_block(self, rng, size):
        # same rule as sample_one, one step of every sample's qubit order at a time
        n = self.n
        orders = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
        u = rng.random((size, n))
        out = np.zeros((size, n), dtype=np.uint8)
        compatible = np.ones((size, len(self._a2)), dtype=bool)
        rows = np.arange(size)
        for t in range(n):
            j = orders[:, t]
            col = self._tcodes[:, j].T  # (size, L)
            c = np.stack([(compatible & (col == p)) @ self._a2 for p in BASIS_LETTERS], axis=1)
            r = np.sqrt(c)
            tot = r.sum(axis=1, keepdims=True)
            beta = np.where(tot > 0, r / np.where(tot > 0, tot, 1.0), 1.0 / 3.0)
            letter = 1 + (u[:, t:t + 1] >= np.cumsum(beta, axis=1)[:, :2]).sum(axis=1)
            out[rows, j] = letter
            compatible &= (col == 0) | (col == letter[:, None])
        return out


def aps_sample(h, rng) -> PauliString:
    return PauliString.from_codes(APSSampler(h).sample_one(rng))


# -- brute-force helpers (small n) -----------------------------------------------------

def all_bases(n: int) -> np.ndarray:
    return np.array(list(product(BASIS_LETTERS, repeat=n)), dtype=np.uint8)


def enumerate_pmf(q: QueryDistribution) -> tuple[np.ndarray, np.ndarray]:
    bases = all_bases(q.n)
    return bases, np.array([q.pmf(tuple(int(c) for c in b)) for b in bases])


def load_distribution(path) -> ProductDistribution:
    with open(path) as fh:
        return ProductDistribution.from_dict(json.load(fh))


__all__ = [
    "QueryDistribution", "ProductDistribution", "APSSampler", "cs_distribution",
    "lbcs_optimize", "diagonal_cost", "aps_marginal", "aps_sample", "sample_basis",
    "all_bases", "enumerate_pmf", "codes_array",
]
