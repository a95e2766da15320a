"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from . import hamiltonian as hio
from .ddiagram import DecisionDiagram, DiagramError, build as dd_build, dd_diagonal_cost, optimize_weights
from .derand import DerandConfig, confidence_bound, derandomize_codes
from .estimators import EstimatorConfig, EstimatorError, TallyAccumulator, estimate
from .pauli import PauliError, PauliString, codes_array
from .sampling import ProductDistribution, cs_distribution, diagonal_cost, lbcs_optimize
from .statesim import SimulationError, make_rng, sample as sample_outcomes

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
CONFIG_ERRORS = (bench.ConfigError, hio.HamiltonianError, DiagramError, EstimatorError,
                 PauliError, SimulationError, ValueError, KeyError)


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def load_distribution_file(path):
    doc = json.loads(Path(path).read_text())
    if "edges" in doc:
        return DecisionDiagram.from_dict(doc)
    if "marginals" in doc:
        return ProductDistribution.from_dict(doc)
    raise bench.ConfigError(f"{path}: neither a product distribution nor a decision diagram")


def distribution_for(args, h):
    """Query distribution from --distribution FILE or computed from --method."""
    if getattr(args, "distribution", None):
        q = load_distribution_file(args.distribution)
        if q.n != h.n:
            raise bench.ConfigError(f"distribution acts on {q.n} qubits, Hamiltonian on {h.n}")
        return q
    method = args.method.upper()
    if method == "CS":
        return cs_distribution(h.n)
    if method == "LBCS":
        return lbcs_optimize(h)
    if method == "DD":
        return optimize_weights(dd_build(h), h)
    raise bench.ConfigError(f"unknown method {args.method!r}; use CS, LBCS or DD")


def read_bases(path) -> np.ndarray:
    rows = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    return codes_array([PauliString(r) for r in rows if r])


# -- subcommands --------------------------------------------------------------------

def cmd_ham_info(args):
    h = hio.load(args.hamiltonian, args.format)
    s = hio.summarize(h)
    print(json.dumps(s.to_dict(), indent=1))
    print(hio.ascii_histogram(s))


def cmd_dd_build(args):
    h = hio.load(args.hamiltonian, args.format)
    dd = dd_build(h)
    _write(args.out, dd.to_json())
    logging.info("diagram: %d nodes, %d edges, %d paths, diagonal cost %.6g",
                 dd.num_nodes, dd.num_edges, dd.path_count(), dd_diagonal_cost(dd, h))


def cmd_dd_optimize(args):
    h = hio.load(args.hamiltonian, args.format)
    dd = DecisionDiagram.from_dict(json.loads(Path(args.diagram).read_text())) if args.diagram else dd_build(h)
    before = dd_diagonal_cost(dd, h)
    opt = optimize_weights(dd, h, max_iter=args.max_iter)
    _write(args.out, opt.to_json())
    logging.info("diagonal cost %.6g -> %.6g", before, dd_diagonal_cost(opt, h))


def cmd_derand(args):
    h = hio.load(args.hamiltonian, args.format)
    q = distribution_for(args, h)
    cfg = DerandConfig(args.M, args.epsilon, args.budget_free)
    seq = derandomize_codes(h.target_codes(), q, cfg)
    lines = [PauliString.from_codes(row).letters for row in seq]
    _write(args.out, "\n".join(lines) + "\n")
    side = {**cfg.to_dict(), "distribution": getattr(q, "name", "query"),
            "final_conf": confidence_bound(h.target_codes(), seq, args.epsilon),
            "unique_bases": len(set(lines))}
    if args.out not in (None, "-"):
        Path(str(args.out) + ".json").write_text(json.dumps(side, indent=1) + "\n")
    else:
        sys.stderr.write(json.dumps(side) + "\n")


def cmd_sample(args):
    h = hio.load(args.hamiltonian, args.format)
    state = bench.prepare_state(_state_arg(args.state), h)
    rng = make_rng(args.seed)
    if args.bases:
        bases = read_bases(args.bases)
        if bases.shape[1] != h.n:
            raise bench.ConfigError("basis length does not match the Hamiltonian")
        if args.shots is not None:
            bases = bases[: args.shots]
    else:
        if args.shots is None:
            raise bench.ConfigError("--shots is required when bases are drawn from a distribution")
        bases = distribution_for(args, h).sample(rng, args.shots)
    keys, inverse = np.unique(bases, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    outcomes = np.empty(len(bases), dtype=np.int64)
    for i, b in enumerate(keys):
        idx = np.nonzero(inverse == i)[0]
        outcomes[idx] = sample_outcomes(state, PauliString.from_codes(b), rng, shots=len(idx))
    lines = [f"{PauliString.from_codes(b).letters} {y:0{h.n}b}" for b, y in zip(bases, outcomes)]
    _write(args.out, "\n".join(lines) + "\n")


def _state_arg(text: str):
    if text.endswith(".json"):
        return {"ansatz": json.loads(Path(text).read_text())}
    return text


def read_records(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or set(parts[1]) - {"0", "1"}:
            raise bench.ConfigError(f"{path}:{lineno}: expected 'BASIS bits', got {raw!r}")
        yield parts[0], parts[1]


def cmd_estimate(args):
    h = hio.load(args.hamiltonian, args.format)
    cfg = EstimatorConfig(args.estimator, args.gamma)
    acc = TallyAccumulator(h.target_codes())
    for basis, bits in read_records(args.records):
        acc.add_record(basis, [int(b) for b in bits])
    xi = None
    if cfg.kind == "WMC":
        if not (args.distribution or args.method):
            raise bench.ConfigError("weighted MC needs --method or --distribution for coverage probabilities")
        xi = distribution_for(args, h).coverage(h.target_codes())
    result = estimate(h, acc.tally, cfg, xi)
    _write(args.out, result.to_json(h) + "\n")


def cmd_bench_run(args):
    cfg = bench.BenchmarkConfig.load(args.config)
    if args.with_aps and "APS" not in cfg.methods:
        cfg.methods.append("APS")
    if args.seed is not None:
        cfg.seed = args.seed
    report = bench.run(cfg)
    for path in bench.emit(report, args.out):
        logging.info("wrote %s", path)
    print(bench.format_table(report))


def cmd_bench_report(args):
    print(bench.format_table(bench.load_report(args.dir)))


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cshore", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def ham_args(sp):
        sp.add_argument("hamiltonian", help="Hamiltonian file (text or .json)")
        sp.add_argument("--format", choices=["text", "json"], default=None)

    def dist_args(sp, default="CS"):
        sp.add_argument("--method", default=default, help="CS, LBCS or DD (computed from the Hamiltonian)")
        sp.add_argument("--distribution", help="JSON product distribution or decision diagram")

    ham = sub.add_parser("ham", help="Hamiltonian utilities").add_subparsers(dest="action", required=True)
    sp = ham.add_parser("info", help="print a summary and weight histogram")
    ham_args(sp)
    sp.set_defaults(func=cmd_ham_info)

    dd = sub.add_parser("dd", help="decision diagrams").add_subparsers(dest="action", required=True)
    sp = dd.add_parser("build", help="construct a diagram with uniform weights")
    ham_args(sp)
    sp.add_argument("-o", "--out", default="-")
    sp.set_defaults(func=cmd_dd_build)
    sp = dd.add_parser("optimize", help="minimise the diagonal cost over edge weights")
    ham_args(sp)
    sp.add_argument("--diagram", help="diagram JSON to start from (default: build one)")
    sp.add_argument("--max-iter", type=int, default=5000)
    sp.add_argument("-o", "--out", default="-")
    sp.set_defaults(func=cmd_dd_optimize)

    sp = sub.add_parser("derand", help="derandomized basis sequence")
    ham_args(sp)
    dist_args(sp)
    sp.add_argument("-M", type=int, required=True, help="number of bases")
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--budget-free", action="store_true", help="ignore the remaining budget in the cost")
    sp.add_argument("-o", "--out", default="-")
    sp.set_defaults(func=cmd_derand)

    sp = sub.add_parser("sample", help="simulate measurement records")
    ham_args(sp)
    dist_args(sp)
    sp.add_argument("--state", default="ground", help="ground, basis:BITS, or an ansatz JSON file")
    sp.add_argument("--bases", help="file with one basis per line (overrides --method)")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out", default="-")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("estimate", help="energy estimate from measurement records")
    ham_args(sp)
    sp.add_argument("records")
    sp.add_argument("--estimator", default="bayes", help="mc, wmc or bayes")
    sp.add_argument("--gamma", type=float, default=0.0, help="smoothing for mc")
    sp.add_argument("--method", default=None)
    sp.add_argument("--distribution")
    sp.add_argument("-o", "--out", default="-")
    sp.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bench", help="benchmark harness").add_subparsers(dest="action", required=True)
    sp = b.add_parser("run")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--with-aps", action="store_true", help="add APS to the method set")
    sp.add_argument("--seed", type=int, help="override the master seed")
    sp.set_defaults(func=cmd_bench_run)
    sp = b.add_parser("report")
    sp.add_argument("dir")
    sp.set_defaults(func=cmd_bench_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (OSError, bench.ReportIOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
