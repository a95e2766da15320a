import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cshore import bench
from cshore.bench import (
    BenchmarkConfig, ConfigError, ResourceModel, emit, load_report, resource_score, rmse,
    run, shot_distribution_stats, shots_to_cutoff,
)
from cshore.ddiagram import build, optimize_weights
from cshore.derand import DerandConfig, derandomize_codes
from cshore.hamiltonian import Hamiltonian, save, summarize

from helpers import random_hamiltonian


@pytest.fixture
def ham_file(tmp_path):
    h = Hamiltonian.from_terms([("ZI", 0.7), ("XX", 0.3), ("YY", -0.2), ("IZ", 0.5)], identity_offset=-0.4)
    path = tmp_path / "h.txt"
    save(h, path)
    return path


def test_rmse_examples():
    assert rmse([1, 3], 2) == 1.0
    assert rmse([2, 2, 2], 2) == 0
    assert rmse([2.5], 2) == 0.5
    with pytest.raises(ValueError):
        rmse([], 0)


def test_shots_to_cutoff_examples():
    s = shots_to_cutoff([1e3, 1e4], [0.01, 0.003], 0.005)
    assert 1e3 < s < 1e4
    assert math.log(s) == pytest.approx(math.log(1e3) + (0.005 / 0.007) * math.log(10))
    assert shots_to_cutoff([100, 1000], [0.004, 0.001], 0.005) == 100
    assert shots_to_cutoff([100, 1000], [0.4, 0.1], 0.005) is None


def test_resource_examples():
    m = ResourceModel()
    assert m.quantum_seconds(4.75e5) == pytest.approx(237.5)
    r = resource_score(130.0, 240.0, m)
    assert r["A"]["logR"] == pytest.approx(math.log(370))
    assert r["A"]["logR"] == pytest.approx(5.9, abs=0.05)
    assert resource_score(0.0, 1.0, m)["D"]["logR"] == pytest.approx(math.log(2.5e6))
    with pytest.raises(ConfigError):
        ResourceModel({"bad": (0.0, 1.0)})
    with pytest.raises(ValueError):
        resource_score(-1.0, 1.0)


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 10), st.floats(0, 10),
       st.floats(0.1, 10), st.floats(0.1, 10))
def test_resource_score_monotone(c, qs, dc, dq, wc, wq):
    m = ResourceModel({"r": (wc, wq)})
    base = resource_score(c, qs, m)["r"]["R"]
    assert resource_score(c + dc, qs, m)["r"]["R"] >= base
    assert resource_score(c, qs + dq, m)["r"]["R"] >= base
    assert resource_score(c, qs, ResourceModel({"r": (wc + dc, wq)}))["r"]["R"] >= base
    assert resource_score(c, qs, ResourceModel({"r": (wc, wq + dq)}))["r"]["R"] >= base


def test_shot_stats_examples():
    assert shot_distribution_stats([10, 10, 10]) == (10, 10, 10)
    _, top, bottom = shot_distribution_stats([100] + [1] * 19)
    assert top == 100 and bottom == 1
    assert shot_distribution_stats([7]) == (7, 7, 7)
    with pytest.raises(ValueError):
        shot_distribution_stats([])


def test_config_validation(ham_file):
    with pytest.raises(ConfigError):
        BenchmarkConfig(str(ham_file), repeats=1)
    with pytest.raises(ConfigError):
        BenchmarkConfig(str(ham_file), checkpoints=[100, 100])
    with pytest.raises(ConfigError):
        BenchmarkConfig(str(ham_file), methods=["XYZ"])
    with pytest.raises(ConfigError):
        BenchmarkConfig(str(ham_file), methods=["DerandDD"], estimator={"kind": "WMC"})
    with pytest.raises(ConfigError):
        BenchmarkConfig(str(ham_file), methods=["APS"], estimator={"kind": "WMC"})
    with pytest.raises(ConfigError):
        BenchmarkConfig.from_dict({"hamiltonian": str(ham_file), "colour": "red"})
    cfg = BenchmarkConfig(str(ham_file), checkpoints={"min": 100, "max": 10_000, "per_decade": 2})
    assert cfg.checkpoints == [100, 316, 1000, 3162, 10000]
    assert "APS" not in cfg.methods


def test_single_qubit_cs_convergence(tmp_path):
    path = tmp_path / "z.txt"
    save(Hamiltonian.from_terms([("Z", 0.7)]), path)
    cfg = BenchmarkConfig(str(path), methods=["CS"], repeats=50, checkpoints=[1000, 10_000, 100_000], seed=1)
    rep = run(cfg)
    assert rep.truth == pytest.approx(-0.7)
    assert rep.methods["CS"].rmse[-1] < 0.02


def test_identical_seeds_flagged_degenerate(ham_file):
    cfg = BenchmarkConfig(str(ham_file), methods=["CS"], repeats=2, checkpoints=[50, 500], identical_seeds=True)
    res = run(cfg).methods["CS"]
    assert res.degenerate
    cfg = BenchmarkConfig(str(ham_file), methods=["CS"], repeats=2, checkpoints=[50, 500])
    assert not run(cfg).methods["CS"].degenerate


def test_report_accounting_and_emit(ham_file, tmp_path):
    methods = ["CS", "LBCS", "DD", "DerandCS", "DerandLBCS", "DerandDD", "APS"]
    cfg = BenchmarkConfig(str(ham_file), methods=methods, repeats=3, checkpoints=[100, 400, 1600],
                          state={"ansatz": {"depth": 2, "seed": 4}}, epsilon=0.5)
    rep = run(cfg)
    h = Hamiltonian.from_terms([(c, p) for c, p in
                                [(0.7, "ZI"), (0.3, "XX"), (-0.2, "YY"), (0.5, "IZ")]], identity_offset=-0.4)
    for name, m in rep.methods.items():
        assert m.unique_bases <= cfg.checkpoints[-1]
        assert len(m.rmse) == len(cfg.checkpoints)
        assert m.seeds["master_seed"] == cfg.seed
    dd = optimize_weights(build(h), h)
    assert rep.methods["DD"].unique_bases <= dd.path_count()
    seq = derandomize_codes(h.target_codes(), dd, DerandConfig(1600, 0.5))
    assert rep.methods["DerandDD"].unique_bases == len({tuple(r) for r in seq})
    assert "derand" in rep.methods["DerandDD"].extras

    out = tmp_path / "out"
    emit(rep, out)
    rows = (out / "rmse.csv").read_text().strip().splitlines()
    assert len(rows) - 1 == len(methods) * len(cfg.checkpoints)
    wrows = (out / "weights.csv").read_text().strip().splitlines()[1:]
    assert {int(w): int(c) for w, c in (r.split(",") for r in wrows)} == summarize(h).weight_histogram
    back = load_report(out)
    assert back.to_dict() == json.loads(rep.to_json())
    assert (out / "rmse_CS.dat").exists() and (out / "query_distribution_LBCS.csv").exists()
    assert "method" in bench.format_table(back)


def test_shot_counts_sum_to_total(ham_file):
    h = Hamiltonian.from_terms([("ZI", 0.7), ("XX", 0.3)])
    cfg = BenchmarkConfig("unused", methods=["CS"], repeats=2, checkpoints=[10, 77])
    from cshore.statesim import OutcomeSampler, ground_state
    method = bench.prepare_method("CS", h, cfg)
    _, counts, *_ = bench.run_repeat(method, h, OutcomeSampler(ground_state(h)[0]), cfg,
                                     np.random.SeedSequence(0, spawn_key=(0, 0)))
    assert sum(counts.values()) == 77


def test_reproducible_without_timings(ham_file):
    cfg = BenchmarkConfig(str(ham_file), methods=["CS", "DerandLBCS", "DD"], repeats=3, checkpoints=[100, 1000], seed=9)
    a, b = run(cfg), run(cfg)
    assert a.without_timings() == b.without_timings()
    c = run(BenchmarkConfig(str(ham_file), methods=["CS"], repeats=3, checkpoints=[100, 1000], seed=10))
    assert c.methods["CS"].rmse != a.methods["CS"].rmse


def test_thread_workers_match_serial(ham_file, monkeypatch):
    cfg = BenchmarkConfig(str(ham_file), methods=["LBCS"], repeats=4, checkpoints=[100, 1000], seed=2)
    serial = run(cfg).without_timings()
    monkeypatch.setenv("CSHORE_WORKERS", "3")
    assert run(cfg).without_timings() == serial


def test_state_specs(ham_file):
    h = Hamiltonian.from_terms([("ZI", 1.0)])
    assert bench.prepare_state("basis:10", h).fidelity(bench.prepare_state({"basis": "10"}, h)) == 1
    with pytest.raises(ConfigError):
        bench.prepare_state("basis:1", h)
    with pytest.raises(ConfigError):
        bench.prepare_state({"ansatz": {"n": 3}}, h)
    with pytest.raises(ConfigError):
        bench.prepare_state("excited", h)


def test_emit_io_error(ham_file, tmp_path):
    cfg = BenchmarkConfig(str(ham_file), methods=["CS"], repeats=2, checkpoints=[10])
    rep = run(cfg)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(bench.ReportIOError, match="file"):
        emit(rep, blocker / "sub")


@pytest.mark.parametrize("spec,kind", [("bayes", "Bayesian"), ("mc", "MC"), ({"kind": "MC", "gamma": 1.0}, "MC")])
def test_config_estimator_forms(tmp_path, spec, kind):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"hamiltonian": "h.txt", "estimator": spec, "checkpoints": [10, 20]}))
    cfg = BenchmarkConfig.load(path)
    assert cfg.estimator.kind == kind


def test_config_string_wmc_still_rejects_derand(tmp_path):
    with pytest.raises(bench.ConfigError):
        BenchmarkConfig(hamiltonian="h.txt", estimator="wmc", methods=["DerandCS"])
