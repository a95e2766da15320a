"""Per-target tallies and the MC / weighted-MC / Bayesian estimators.

Every estimator here only needs, per target, the number of covering shots
with eigenvalue +1 (``m0``) and -1 (``m1``) plus the total shot count. The
weighted MC estimate sum_s 1{covered} mu_s / (M xi) equals (m0 - m1) / (M xi)
because xi is fixed per target, so no per-record data is retained.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString, as_pauli, codes_array, codes_to_masks, parity

KINDS = ("MC", "WMC", "Bayesian")


class EstimatorError(ValueError):
    pass


@dataclass
class TallySet:
    m0: np.ndarray
    m1: np.ndarray
    shots: int = 0

    @classmethod
    def zeros(cls, L: int) -> "TallySet":
        return cls(np.zeros(L, dtype=np.int64), np.zeros(L, dtype=np.int64), 0)

    @property
    def hits(self) -> np.ndarray:
        return self.m0 + self.m1

    def copy(self) -> "TallySet":
        return TallySet(self.m0.copy(), self.m1.copy(), self.shots)

    def merge(self, other: "TallySet") -> "TallySet":
        if self.m0.shape != other.m0.shape:
            raise EstimatorError("cannot merge tallies over different target sets")
        return TallySet(self.m0 + other.m0, self.m1 + other.m1, self.shots + other.shots)

    def __eq__(self, other) -> bool:
        return (isinstance(other, TallySet) and self.shots == other.shots
                and np.array_equal(self.m0, other.m0) and np.array_equal(self.m1, other.m1))


class TallyAccumulator:
    """Streaming ingestion of (basis, outcome) data for a fixed target list."""

    def __init__(self, targets):
        tcodes = targets if isinstance(targets, np.ndarray) else codes_array(targets)
        self.tcodes = np.asarray(tcodes, dtype=np.uint8)
        self.n = self.tcodes.shape[1]
        tx, tz = codes_to_masks(self.tcodes)
        self._tx, self._tz = tx, tz
        self.support = tx | tz
        self.tally = TallySet.zeros(self.tcodes.shape[0])

    def _covered(self, basis_codes: np.ndarray) -> np.ndarray:
        bx, bz = codes_to_masks(basis_codes[None, :])
        diff = (self._tx ^ bx[0]) | (self._tz ^ bz[0])
        return (diff & self.support) == 0

    def add_histogram(self, basis_codes, counts: np.ndarray):
        """Add all shots of one basis given outcome counts indexed by outcome integer."""
        basis_codes = np.asarray(basis_codes, dtype=np.uint8)
        if basis_codes.shape[0] != self.n:
            raise EstimatorError(f"basis length {basis_codes.shape[0]} does not match {self.n} qubits")
        counts = np.asarray(counts)
        if counts.shape[0] != 2 ** self.n:
            raise EstimatorError("outcome histogram has the wrong length")
        total = int(counts.sum())
        self.tally.shots += total
        cov = np.nonzero(self._covered(basis_codes))[0]
        if len(cov) == 0 or total == 0:
            return
        ys = np.nonzero(counts)[0].astype(np.uint64)
        c = counts[ys.astype(np.intp)]
        # odd parity of y on supp(Q) means eigenvalue -1
        odd = parity(ys[:, None] & self.support[cov][None, :])
        neg = (c[:, None] * odd).sum(axis=0)
        self.tally.m1[cov] += neg
        self.tally.m0[cov] += total - neg

    def add_record(self, basis, outcome):
        basis = as_pauli(basis)
        if len(outcome) != basis.n:
            raise EstimatorError(f"outcome length {len(outcome)} does not match basis {basis}")
        y = 0
        for b in outcome:
            y = (y << 1) | int(b)
        counts = np.zeros(2 ** self.n, dtype=np.int64)
        counts[y] = 1
        self.add_histogram(np.asarray(basis.codes, dtype=np.uint8), counts)


def ingest(records, targets) -> TallySet:
    """Tally a list of (basis, outcome bits) records."""
    acc = TallyAccumulator(targets)
    for basis, outcome in records:
        acc.add_record(basis, outcome)
    return acc.tally


def mc_estimate(t: TallySet, gamma: float = 0.0) -> np.ndarray:
    """(m0 - m1) / (m0 + m1 + 2 gamma); zero where that denominator vanishes."""
    if gamma < 0:
        raise EstimatorError("smoothing parameter must be non-negative")
    num = (t.m0 - t.m1).astype(float)
    den = (t.m0 + t.m1).astype(float) + 2.0 * gamma
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def wmc_estimate(t: TallySet, xi) -> np.ndarray:
    """Weighted MC with coverage probabilities ``xi`` from the sampling distribution."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != t.m0.shape:
        raise EstimatorError("coverage vector does not match the tally")
    if t.shots == 0:
        return np.zeros_like(xi)
    bad = (xi <= 0) & (t.hits > 0)
    if np.any(bad):
        raise EstimatorError("record covers a target the distribution gives zero coverage")
    num = (t.m0 - t.m1).astype(float)
    out = np.zeros_like(num)
    np.divide(num, t.shots * xi, out=out, where=xi > 0)
    return out


def bayes_estimate(t: TallySet) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of each target under a uniform Dirichlet prior."""
    m0 = t.m0.astype(float)
    m1 = t.m1.astype(float)
    h = m0 + m1
    mean = (m0 - m1) / (h + 2.0)
    var = 4.0 * (m0 + 1.0) * (m1 + 1.0) / ((h + 2.0) * (h + 3.0))
    return mean, var


@dataclass
class EstimatorConfig:
    kind: str = "Bayesian"
    gamma: float = 0.0
    prior: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        aliases = {"mc": "MC", "wmc": "WMC", "bayes": "Bayesian", "bayesian": "Bayesian"}
        self.kind = aliases.get(str(self.kind).lower(), self.kind)
        if self.kind not in KINDS:
            raise EstimatorError(f"unknown estimator {self.kind!r}")
        if self.gamma < 0:
            raise EstimatorError("gamma must be non-negative")
        if tuple(self.prior) != (1.0, 1.0):
            raise EstimatorError("only the uniform prior a=(1,1) is supported")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "prior": list(self.prior)}


@dataclass
class EnergyEstimate:
    value: float
    per_target: np.ndarray
    variance_proxy: np.ndarray | None = None
    shots: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self, h=None) -> dict:
        d = {"energy": self.value, "shots": self.shots, "config": self.config,
             "per_target": self.per_target.tolist()}
        if h is not None:
            d["targets"] = [str(p) for p in h.paulis]
        if self.variance_proxy is not None:
            d["variance"] = self.variance_proxy.tolist()
        return d

    def to_json(self, h=None) -> str:
        return json.dumps(self.to_dict(h), indent=1)


def energy(h, omega) -> float:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (h.L,):
        raise EstimatorError(f"expected {h.L} per-target values, got shape {omega.shape}")
    return float(h.identity_offset + np.dot(h.coeffs, omega)) if h.L else float(h.identity_offset)


def estimate(h, t: TallySet, cfg: EstimatorConfig, xi=None) -> EnergyEstimate:
    var = None
    if cfg.kind == "MC":
        omega = mc_estimate(t, cfg.gamma)
    elif cfg.kind == "WMC":
        if xi is None:
            raise EstimatorError("weighted MC needs coverage probabilities from the query distribution")
        omega = wmc_estimate(t, xi)
    else:
        omega, var = bayes_estimate(t)
    return EnergyEstimate(energy(h, omega), omega, var, t.shots, cfg.to_dict())
