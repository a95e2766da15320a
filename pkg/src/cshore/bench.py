"""Benchmark harness: method x estimator runs, RMSE curves and resource scores.

A run has three timed phases per repeat, mirroring the measurement protocol:
basis generation (pre-processing, together with one-off setup such as LBCS
or diagram optimization), simulated shots, and estimation (post-processing).
Every repeat draws from its own Philox stream keyed by (master seed, method,
repeat), so reports are reproducible up to the wall-clock fields.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import hamiltonian as hio
from .ddiagram import build as dd_build, dd_diagonal_cost, optimize_weights
from .derand import DerandConfig, confidence_bound, derandomize_codes
from .estimators import EstimatorConfig, TallyAccumulator, estimate
from .sampling import APSSampler, ProductDistribution, cs_distribution, diagonal_cost, lbcs_optimize
from .statesim import AnsatzSpec, OutcomeSampler, QuantumState, ground_state, make_rng, random_ansatz_state

log = logging.getLogger(__name__)

ALL_METHODS = ("CS", "LBCS", "DD", "DerandCS", "DerandLBCS", "DerandDD", "APS")
DEFAULT_METHODS = ALL_METHODS[:6]
# methods whose bases carry no usable query distribution for weighted MC
NO_WMC = {"DerandCS", "DerandLBCS", "DerandDD", "APS"}

REGIMES = {"A": (1.0, 1.0), "B": (1.0, 1.5e2), "C": (1.0, 2e4), "D": (1.0, 2.5e6)}
DEFAULT_SHOT_DELAY = 5e-4
DEFAULT_CUTOFF = 5e-3


class ConfigError(ValueError):
    pass


class ReportIOError(OSError):
    pass


# -- metrics ------------------------------------------------------------------------

def rmse(estimates, truth: float) -> float:
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise ValueError("rmse of an empty estimate list")
    return float(np.sqrt(np.mean((e - truth) ** 2)))


def shots_to_cutoff(checkpoints, curve, cutoff: float) -> float | None:
    """First crossing of ``cutoff``, interpolated linearly in log(shots); None if never reached."""
    checkpoints = list(checkpoints)
    curve = list(curve)
    for i, (c, r) in enumerate(zip(checkpoints, curve)):
        if r <= cutoff:
            if i == 0:
                return float(c)
            c0, r0 = checkpoints[i - 1], curve[i - 1]
            frac = (r0 - cutoff) / (r0 - r)
            return float(math.exp(math.log(c0) + frac * (math.log(c) - math.log(c0))))
    return None


@dataclass
class ResourceModel:
    regimes: dict = field(default_factory=lambda: dict(REGIMES))
    shot_delay: float = DEFAULT_SHOT_DELAY

    def __post_init__(self):
        for name, (wc, wq) in self.regimes.items():
            if wc <= 0 or wq <= 0:
                raise ConfigError(f"regime {name}: weights must be positive")
        if self.shot_delay <= 0:
            raise ConfigError("shot_delay must be positive")

    def quantum_seconds(self, shots: float) -> float:
        return shots * self.shot_delay


def resource_score(classical_seconds: float, quantum_seconds: float, model: ResourceModel | None = None) -> dict:
    """R = w_c * classical + w_q * quantum for each regime, with natural log."""
    model = model or ResourceModel()
    if classical_seconds < 0 or quantum_seconds < 0:
        raise ValueError("runtimes must be non-negative")
    out = {}
    for name, (wc, wq) in model.regimes.items():
        r = wc * classical_seconds + wq * quantum_seconds
        out[name] = {"R": r, "logR": math.log(r) if r > 0 else -math.inf}
    return out


def shot_distribution_stats(counts) -> tuple[float, float, float]:
    """(median over all circuits, median of the top 5%, median of the bottom 5%)."""
    c = np.sort(np.asarray(list(counts), dtype=float))[::-1]
    if c.size == 0:
        raise ValueError("no circuits")
    k = math.ceil(0.05 * c.size)
    return float(np.median(c)), float(np.median(c[:k])), float(np.median(c[-k:]))


def log_checkpoints(lo: int, hi: int, per_decade: int = 4) -> list[int]:
    num = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    pts = np.unique(np.round(np.logspace(math.log10(lo), math.log10(hi), num)).astype(int))
    return [int(p) for p in pts]


# -- configuration --------------------------------------------------------------------------

@dataclass
class BenchmarkConfig:
    hamiltonian: str
    state: object = "ground"
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    checkpoints: list = field(default_factory=lambda: log_checkpoints(100, 10_000))
    repeats: int = 20
    cutoff: float = DEFAULT_CUTOFF
    epsilon: float = 0.1
    budget_free: bool = False
    seed: int = 0
    shot_delay: float = DEFAULT_SHOT_DELAY
    regimes: dict = field(default_factory=lambda: dict(REGIMES))
    hamiltonian_format: str | None = None
    workers: int = 1
    identical_seeds: bool = False

    def __post_init__(self):
        if isinstance(self.estimator, str):
            self.estimator = EstimatorConfig(self.estimator)
        elif isinstance(self.estimator, dict):
            self.estimator = EstimatorConfig(**self.estimator)
        if isinstance(self.checkpoints, dict):
            c = self.checkpoints
            self.checkpoints = log_checkpoints(int(c["min"]), int(c["max"]), int(c.get("per_decade", 4)))
        self.checkpoints = [int(c) for c in self.checkpoints]
        self.regimes = {k: tuple(map(float, v)) for k, v in self.regimes.items()}
        self.validate()

    def validate(self):
        if self.repeats < 2:
            raise ConfigError("need at least 2 repeats for an RMSE")
        if not self.checkpoints or any(c <= 0 for c in self.checkpoints):
            raise ConfigError("checkpoints must be positive shot counts")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
        if self.estimator.kind == "WMC":
            bad = [m for m in self.methods if m in NO_WMC]
            if bad:
                raise ConfigError(f"weighted MC cannot be used with {bad}: no query distribution for those bases")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        ResourceModel(self.regimes, self.shot_delay)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.to_dict()
        d["regimes"] = {k: list(v) for k, v in self.regimes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "BenchmarkConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "hamiltonian" not in d:
            raise ConfigError("config needs a 'hamiltonian' path")
        if base_dir is not None and not Path(d["hamiltonian"]).is_absolute():
            d["hamiltonian"] = str(base_dir / d["hamiltonian"])
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "BenchmarkConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)


def prepare_state(spec, h) -> QuantumState:
    if spec == "ground" or spec == {"kind": "ground"}:
        return ground_state(h)[0]
    if isinstance(spec, str) and spec.startswith("basis:"):
        bits = spec.split(":", 1)[1]
        spec = {"basis": bits}
    if isinstance(spec, dict) and "basis" in spec:
        bits = spec["basis"]
        if len(bits) != h.n or set(bits) - {"0", "1"}:
            raise ConfigError(f"basis state {bits!r} is not a {h.n}-bit string")
        return QuantumState.basis_state(bits)
    if isinstance(spec, dict) and "ansatz" in spec:
        a = dict(spec["ansatz"])
        a.setdefault("n", h.n)
        if int(a["n"]) != h.n:
            raise ConfigError("ansatz qubit count does not match the Hamiltonian")
        return random_ansatz_state(AnsatzSpec.from_dict(a))
    raise ConfigError(f"unrecognised state spec {spec!r}")


# -- per-method machinery ------------------------------------------------------------------

@dataclass
class PreparedMethod:
    name: str
    sampler: object = None
    sequence: np.ndarray | None = None
    xi: np.ndarray | None = None
    setup_seconds: float = 0.0
    extras: dict = field(default_factory=dict)


def prepare_method(name: str, h, cfg: BenchmarkConfig) -> PreparedMethod:
    t0 = time.perf_counter()
    extras: dict = {}
    base = name[len("Derand"):] if name.startswith("Derand") else name
    if base == "CS":
        q = cs_distribution(h.n)
    elif base == "LBCS":
        q = lbcs_optimize(h)
        extras["query_distribution"] = q.to_dict()
    elif base == "DD":
        dd0 = dd_build(h)
        q = optimize_weights(dd0, h)
        extras.update(nodes=q.num_nodes, edges=q.num_edges, paths=q.path_count(),
                      initial_diagonal_cost=dd_diagonal_cost(dd0, h))
    elif base == "APS":
        q = APSSampler(h)
    else:
        raise ConfigError(f"unknown method {name}")
    if q.can_evaluate_coverage:
        extras["diagonal_cost"] = diagonal_cost(h, q)
    prepared = PreparedMethod(name, sampler=q)
    if name.startswith("Derand"):
        dcfg = DerandConfig(cfg.checkpoints[-1], cfg.epsilon, cfg.budget_free)
        seq = derandomize_codes(h.target_codes(), q, dcfg)
        prepared.sequence = seq
        prepared.sampler = None
        extras["derand"] = {**dcfg.to_dict(), "final_conf": confidence_bound(h.target_codes(), seq, cfg.epsilon),
                            "prefix_reuse": True}
    elif q.can_evaluate_coverage:
        prepared.xi = q.coverage(h.target_codes())
    prepared.setup_seconds = time.perf_counter() - t0
    prepared.extras = extras
    return prepared


def _basis_keys(codes: np.ndarray) -> np.ndarray:
    weights = 4 ** np.arange(codes.shape[1] - 1, -1, -1, dtype=np.int64)
    return codes.astype(np.int64) @ weights


def run_repeat(method: PreparedMethod, h, state_sampler: OutcomeSampler, cfg: BenchmarkConfig,
               seed_seq: np.random.SeedSequence):
    rng = make_rng(seed_seq)
    acc = TallyAccumulator(h.target_codes())
    L = len(cfg.checkpoints)
    estimates = np.empty(L)
    t_pre = np.zeros(L)
    t_sim = np.zeros(L)
    t_post = np.zeros(L)
    basis_counts: dict[int, int] = {}
    prev = 0
    pre = sim = post = 0.0
    for i, c in enumerate(cfg.checkpoints):
        count = c - prev
        t0 = time.perf_counter()
        if method.sequence is not None:
            bases = method.sequence[prev:c]
        else:
            bases = method.sampler.sample(rng, count)
        keys, first, inv_counts = np.unique(_basis_keys(bases), return_index=True, return_counts=True)
        t1 = time.perf_counter()
        pre += t1 - t0
        for key, f, k in zip(keys, first, inv_counts):
            ts = time.perf_counter()
            hist = state_sampler.histogram(bases[f], int(k), rng)
            tp = time.perf_counter()
            acc.add_histogram(bases[f], hist)
            te = time.perf_counter()
            sim += tp - ts
            post += te - tp
            basis_counts[int(key)] = basis_counts.get(int(key), 0) + int(k)
        t2 = time.perf_counter()
        estimates[i] = estimate(h, acc.tally, cfg.estimator, method.xi).value
        post += time.perf_counter() - t2
        t_pre[i], t_sim[i], t_post[i] = pre, sim, post
        prev = c
    return estimates, basis_counts, t_pre, t_sim, t_post


@dataclass
class MethodResult:
    method: str
    rmse: list
    shots_to_cutoff: float | None
    unique_bases: int
    unique_bases_mean: float
    shot_stats: list
    setup_seconds: float
    pre_seconds: float
    sim_seconds: float
    post_seconds: float
    classical_seconds_to_cutoff: float | None
    predicted_quantum_seconds: float | None
    resource: dict | None
    degenerate: bool
    seeds: dict
    extras: dict = field(default_factory=dict)
    mean_estimates: list = field(default_factory=list)


@dataclass
class BenchmarkReport:
    config: dict
    n: int
    L: int
    truth: float
    summary: dict
    checkpoints: list
    methods: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config, "n": self.n, "L": self.L, "truth": self.truth,
            "summary": self.summary, "checkpoints": self.checkpoints,
            "methods": {k: asdict(v) for k, v in self.methods.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_json_default)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        methods = {k: MethodResult(**v) for k, v in d["methods"].items()}
        return cls(d["config"], d["n"], d["L"], d["truth"], d["summary"], d["checkpoints"], methods)

    def without_timings(self) -> dict:
        d = json.loads(self.to_json())
        for m in d["methods"].values():
            for key in ("setup_seconds", "pre_seconds", "sim_seconds", "post_seconds",
                        "classical_seconds_to_cutoff", "resource"):
                m.pop(key, None)
        return d


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _workers(cfg: BenchmarkConfig) -> int:
    env = os.environ.get("CSHORE_WORKERS")
    return max(1, int(env)) if env else max(1, cfg.workers)


def run(cfg: BenchmarkConfig, h=None, state: QuantumState | None = None) -> BenchmarkReport:
    cfg.validate()
    if h is None:
        h = hio.load(cfg.hamiltonian, cfg.hamiltonian_format)
    if h.L == 0:
        raise ConfigError("Hamiltonian has no non-identity terms to measure")
    if state is None:
        state = prepare_state(cfg.state, h)
    truth = hio.exact_expectation(h, state)
    model = ResourceModel(cfg.regimes, cfg.shot_delay)
    results = {}
    for name in cfg.methods:
        mid = ALL_METHODS.index(name)
        log.info("preparing %s", name)
        method = prepare_method(name, h, cfg)
        sampler = OutcomeSampler(state)
        keys = [(mid, 0 if cfg.identical_seeds else r) for r in range(cfg.repeats)]
        seqs = [np.random.SeedSequence(cfg.seed, spawn_key=k) for k in keys]

        def one(r):
            return run_repeat(method, h, sampler, cfg, seqs[r])

        workers = _workers(cfg)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                outs = list(pool.map(one, range(cfg.repeats)))
        else:
            outs = [one(r) for r in range(cfg.repeats)]
        est = np.array([o[0] for o in outs])
        curve = [rmse(est[:, i], truth) for i in range(len(cfg.checkpoints))]
        stc = shots_to_cutoff(cfg.checkpoints, curve, cfg.cutoff)
        pre = np.mean([o[2] for o in outs], axis=0)
        sim = np.mean([o[3] for o in outs], axis=0)
        post = np.mean([o[4] for o in outs], axis=0)
        classical = quantum = resource = None
        if stc is not None:
            idx = next(i for i, c in enumerate(cfg.checkpoints) if c >= stc)
            classical = method.setup_seconds + float(pre[idx] + post[idx])
            quantum = model.quantum_seconds(stc)
            resource = resource_score(classical, quantum, model)
        counts0 = outs[0][1]
        results[name] = MethodResult(
            method=name,
            rmse=curve,
            shots_to_cutoff=stc,
            unique_bases=len(counts0),
            unique_bases_mean=float(np.mean([len(o[1]) for o in outs])),
            shot_stats=list(shot_distribution_stats(counts0.values())),
            setup_seconds=method.setup_seconds,
            pre_seconds=float(pre[-1]),
            sim_seconds=float(sim[-1]),
            post_seconds=float(post[-1]),
            classical_seconds_to_cutoff=classical,
            predicted_quantum_seconds=quantum,
            resource=resource,
            degenerate=bool(np.all(est == est[0:1])),
            seeds={"master_seed": cfg.seed, "method_key": mid, "repeat_keys": [k[1] for k in keys],
                   "bit_generator": "Philox"},
            extras=method.extras,
            mean_estimates=est.mean(axis=0).tolist(),
        )
        log.info("%s: final RMSE %.3e", name, curve[-1])
    summary = hio.summarize(h).to_dict()
    return BenchmarkReport(cfg.to_dict(), h.n, h.L, truth, summary, list(cfg.checkpoints), results)


# -- output ---------------------------------------------------------------------------------

def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def rmse_csv(report: BenchmarkReport) -> str:
    rows = ["method,shots,rmse"]
    for name, m in report.methods.items():
        for c, r in zip(report.checkpoints, m.rmse):
            rows.append(f"{name},{c},{r!r}")
    return "\n".join(rows) + "\n"


def weights_csv(summary: dict) -> str:
    rows = ["weight,count"] + [f"{w},{c}" for w, c in summary["weight_histogram"].items()]
    return "\n".join(rows) + "\n"


def emit(report: BenchmarkReport, outdir) -> list[Path]:
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create {outdir}: {exc}") from exc
    written = []
    files = {
        "report.json": report.to_json(),
        "rmse.csv": rmse_csv(report),
        "weights.csv": weights_csv(report.summary),
    }
    for name, m in report.methods.items():
        lines = [f"# {name}: shots rmse"] + [f"{c} {r!r}" for c, r in zip(report.checkpoints, m.rmse)]
        files[f"rmse_{name}.dat"] = "\n".join(lines) + "\n"
        qd = m.extras.get("query_distribution")
        if qd is not None:
            files[f"query_distribution_{name}.csv"] = ProductDistribution.from_dict(qd).to_csv()
    for fname, text in files.items():
        path = outdir / fname
        _write(path, text)
        written.append(path)
    return written


def load_report(path) -> BenchmarkReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        return BenchmarkReport.from_dict(json.loads(path.read_text()))
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc


def format_table(report: BenchmarkReport) -> str:
    regimes = list(report.config.get("regimes", REGIMES))
    head = ["method", "shots@cutoff", "#unique", "shots/circuit (all,top5%,bot5%)",
            "classical[s]", "quantum[s]"] + [f"logR {r}" for r in regimes]
    lines = ["\t".join(head)]
    for name, m in report.methods.items():
        stc = "not reached" if m.shots_to_cutoff is None else f"{m.shots_to_cutoff:.3g}"
        cl = "-" if m.classical_seconds_to_cutoff is None else f"{m.classical_seconds_to_cutoff:.3g}"
        qu = "-" if m.predicted_quantum_seconds is None else f"{m.predicted_quantum_seconds:.3g}"
        stats = "(" + ", ".join(f"{s:g}" for s in m.shot_stats) + ")"
        logs = [("-" if m.resource is None else f"{m.resource[r]['logR']:.1f}") for r in regimes]
        lines.append("\t".join([name, stc, str(m.unique_bases), stats, cl, qu, *logs]))
    return "\n".join(lines)
