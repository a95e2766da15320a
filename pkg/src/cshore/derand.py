"""Greedy derandomization of a query distribution.

Letters are fixed one qubit at a time, each time picking the letter that
minimizes the conditional expectation of the confidence bound

    CONF = sum_j prod_s (1 - eta * [Q_j covered by B_s]),  eta = 1 - exp(-eps^2 / 2)

given everything fixed so far, with the remaining letters and bases drawn
from the distribution being derandomized.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pauli import LETTERS, PauliString, codes_array, covers_matrix, as_pauli
from .sampling import QueryDistribution


TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DerandConfig:
    M: int
    epsilon: float = 0.1
    budget_free: bool = False

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("measurement budget must be non-negative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def eta(self) -> float:
        return 1.0 - math.exp(-self.epsilon ** 2 / 2.0)

    def to_dict(self) -> dict:
        return {"M": self.M, "epsilon": self.epsilon, "eta": self.eta,
                "budget_free": self.budget_free, "tie_break": "X<Y<Z"}


def _as_codes(paulis) -> np.ndarray:
    if isinstance(paulis, np.ndarray):
        return paulis.astype(np.uint8)
    return codes_array(paulis)


def hit_counts(targets, bases) -> np.ndarray:
    t = _as_codes(targets)
    b = _as_codes(bases)
    if b.shape[0] == 0:
        return np.zeros(t.shape[0], dtype=np.int64)
    return covers_matrix(t, b).sum(axis=0)


def confidence_bound(targets, bases, epsilon: float) -> float:
    """sum_j exp(-eps^2/2 * hits_j)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    h = hit_counts(targets, bases)
    return float(np.exp(-(epsilon ** 2) / 2.0 * h).sum())


def confidence_bound_product(targets, bases, epsilon: float) -> float:
    """Same quantity via prod_s (1 - eta * hit)."""
    eta = 1.0 - math.exp(-epsilon ** 2 / 2.0)
    t = _as_codes(targets)
    b = _as_codes(bases)
    if b.shape[0] == 0:
        return float(t.shape[0])
    cov = covers_matrix(t, b)
    return float(np.prod(1.0 - eta * cov, axis=0).sum())


class DerandState:
    """Committed bases plus the partially assigned current basis."""

    def __init__(self, targets, q: QueryDistribution, cfg: DerandConfig):
        self.tcodes = _as_codes(targets).astype(np.intp)
        self.q = q
        self.cfg = cfg
        self.n = q.n
        self.L = self.tcodes.shape[0]
        self.committed: list[np.ndarray] = []
        # first factor: prod over committed bases of (1 - eta * covered)
        self.running = np.ones(self.L)
        self.xi = q.coverage(self.tcodes)
        self._future = None
        self._suffix: dict = {}
        self.reset_partial()

    @property
    def m(self) -> int:
        """1-based index of the basis currently being assigned."""
        return len(self.committed) + 1

    def reset_partial(self):
        self.partial: list[int] = []
        self.cursor = self.q.root_cursor()
        self.alive = np.ones(self.L, dtype=bool)

    def future_factor(self) -> np.ndarray:
        m = self.m
        if self._future is None or self._future[0] != m:
            if self.cfg.budget_free:
                f = np.ones(self.L)
            else:
                f = (1.0 - self.cfg.eta * self.xi) ** max(self.cfg.M - m, 0)
            self._future = (m, f)
        return self._future[1]

    def candidates(self) -> tuple[int, ...]:
        return self.q.candidate_letters(self.cursor, len(self.partial))

    def suffix(self, cursor, k: int) -> np.ndarray:
        key = (cursor, k)
        if key not in self._suffix:
            self._suffix[key] = self.q.suffix_coverage(cursor, k, self.tcodes)
        return self._suffix[key]

    def expected_conf(self) -> float:
        """E[CONF | committed bases and current partial basis]."""
        k = len(self.partial)
        cond = self.suffix(self.cursor, k)
        current = 1.0 - self.cfg.eta * self.alive * cond
        return float(np.sum(self.running * current * self.future_factor()))

    def conditional_cost(self, letter: int) -> float:
        k = len(self.partial)
        nxt = self.q.step_cursor(self.cursor, k, letter)
        if nxt is None:
            return math.inf
        alive = self.alive & ((self.tcodes[:, k] == 0) | (self.tcodes[:, k] == letter))
        cond = self.suffix(nxt, k + 1)
        current = 1.0 - self.cfg.eta * alive * cond
        return float(np.sum(self.running * current * self.future_factor()))

    def candidate_costs(self) -> tuple[tuple[int, ...], np.ndarray]:
        """Conditional cost of every available letter, in X, Y, Z order."""
        k = len(self.partial)
        letters = self.candidates()
        col = self.tcodes[:, k]
        weight = self.running * self.future_factor()
        costs = np.empty(len(letters))
        for i, c in enumerate(letters):
            alive = self.alive & ((col == 0) | (col == c))
            cond = self.suffix(self.q.step_cursor(self.cursor, k, c), k + 1)
            costs[i] = weight @ (1.0 - self.cfg.eta * (alive * cond))
        return letters, costs

    def assign(self, letter: int):
        k = len(self.partial)
        nxt = self.q.step_cursor(self.cursor, k, letter)
        if nxt is None:
            raise ValueError(f"letter {LETTERS[letter]} not available at qubit {k}")
        self.alive &= (self.tcodes[:, k] == 0) | (self.tcodes[:, k] == letter)
        self.partial.append(letter)
        self.cursor = nxt
        if len(self.partial) == self.n:
            self.committed.append(np.array(self.partial, dtype=np.uint8))
            self.running *= 1.0 - self.cfg.eta * self.alive
            self.reset_partial()

    def recompute_running(self) -> np.ndarray:
        out = np.ones(self.L)
        for b in self.committed:
            cov = covers_matrix(self.tcodes.astype(np.uint8), b[None, :])[0]
            out *= 1.0 - self.cfg.eta * cov
        return out


def conditional_cost(state: DerandState, letter, q=None, cfg=None) -> float:
    """Cost of fixing the next qubit of the current basis to ``letter``."""
    if isinstance(letter, str):
        letter = LETTERS.index(letter)
    return state.conditional_cost(letter)


def derandomize_codes(targets, q: QueryDistribution, cfg: DerandConfig, state: DerandState | None = None) -> np.ndarray:
    state = state or DerandState(targets, q, cfg)
    zero = np.nonzero(state.xi <= 0)[0]
    if len(zero):
        names = [PauliString.from_codes(state.tcodes[j]).letters for j in zero[:10]]
        more = "" if len(zero) <= 10 else f" (+{len(zero) - 10} more)"
        warnings.warn(f"{len(zero)} target(s) have zero coverage and cannot be hit: {names}{more}",
                      RuntimeWarning, stacklevel=2)
    out = np.empty((cfg.M, q.n), dtype=np.uint8)
    for m in range(cfg.M):
        for _ in range(q.n):
            best, best_cost = None, math.inf
            # candidates come back in X, Y, Z order; costs within TIE_RTOL of
            # the best so far count as ties and keep the earlier letter
            letters, costs = state.candidate_costs()
            for c, cost in zip(letters, costs):
                if best is None or cost < best_cost - TIE_RTOL * abs(best_cost):
                    best, best_cost = c, cost
            state.assign(best)
        out[m] = state.committed[-1]
    return out


def derandomize(targets, q: QueryDistribution, cfg: DerandConfig) -> list[PauliString]:
    codes = derandomize_codes(targets, q, cfg)
    return [PauliString.from_codes(row) for row in codes]
