import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cshore import hamiltonian as hio
from cshore.hamiltonian import Hamiltonian, HamiltonianError
from cshore.statesim import QuantumState, random_ansatz_state, AnsatzSpec

from helpers import random_hamiltonian


def test_parse_text_folds_identity():
    h = hio.parse_text("II 2.0\nZI 0.5\n")
    assert h.n == 2 and h.identity_offset == 2.0
    assert [(c, str(p)) for c, p in h.terms] == [(0.5, "ZI")]


def test_comments_and_blank_lines():
    h = hio.parse_text("# header\n\nXX 1.0  # trailing\n")
    assert h.L == 1


@pytest.mark.parametrize("text", [
    "XX 1.0\nXX 1.0\n",
    "XX 1.0\nXXX 1.0\n",
    "XX nan\n",
    "XX inf\n",
    "XX\n",
    "XQ 1.0\n",
])
def test_parse_text_errors(text):
    with pytest.raises(HamiltonianError):
        hio.parse_text(text)


def test_parse_json():
    h = hio.parse_json(json.dumps({"n": 2, "terms": [{"pauli": "XX", "coeff": 1.5}, {"pauli": "II", "coeff": -1}]}))
    assert h.identity_offset == -1 and h.L == 1


def test_summarize_examples():
    s = hio.summarize(Hamiltonian.from_terms([("XX", 1.0), ("ZI", -2.0)]))
    assert s.weight_histogram == {1: 1, 2: 1} and s.L == 2 and s.one_norm == 3.0
    s = hio.summarize(Hamiltonian(3, ()))
    assert s.weight_histogram == {} and s.L == 0 and s.one_norm == 0
    s = hio.summarize(Hamiltonian.from_terms([("X", 1), ("Y", -1), ("Z", 1)]))
    assert s.one_norm == 3 and s.max_weight == 1


def test_exact_expectation_examples():
    plus = QuantumState.from_vector([1, 1])
    assert hio.exact_expectation(Hamiltonian.from_terms([("Z", 0.5)], identity_offset=2.0), QuantumState.basis_state("0")) == pytest.approx(2.5)
    assert hio.exact_expectation(Hamiltonian.from_terms([("Z", -1.0)]), QuantumState.basis_state("1")) == pytest.approx(1.0)
    assert hio.exact_expectation(Hamiltonian.from_terms([("X", 1.0)]), plus) == pytest.approx(1.0)


def test_exact_expectation_dimension_mismatch():
    with pytest.raises(ValueError):
        hio.exact_expectation(Hamiltonian.from_terms([("ZZ", 1.0)]), QuantumState.basis_state("0"))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.sampled_from(["text", "json"]))
def test_save_load_roundtrip(tmp_path_factory, seed, n, fmt):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(rng, n, int(rng.integers(1, 3 ** n)), offset=float(rng.normal()))
    path = tmp_path_factory.mktemp("h") / ("h.json" if fmt == "json" else "h.txt")
    hio.save(h, path, fmt)
    assert hio.load(path) == h


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_expectation_linear_in_coefficients(seed):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(rng, 3, 6, offset=0.3)
    psi = random_ansatz_state(AnsatzSpec(3, 2, seed))
    assert hio.exact_expectation(h.scaled(2.0), psi) == pytest.approx(2 * hio.exact_expectation(h, psi), abs=1e-12)


def test_identity_only_expectation_is_offset():
    h = Hamiltonian(2, (), identity_offset=-0.7)
    for seed in range(5):
        assert hio.exact_expectation(h, random_ansatz_state(AnsatzSpec(2, 2, seed))) == pytest.approx(-0.7, abs=1e-12)


def test_small_coefficients_kept_and_prune_is_explicit():
    h = hio.parse_text("XX 1e-16\nZZ 1.0\n")
    assert h.L == 2
    assert h.pruned(1e-15).L == 1


def test_ascii_histogram_lists_every_weight():
    s = hio.summarize(Hamiltonian.from_terms([("XXI", 1.0), ("ZII", 1.0), ("IZI", 1.0)]))
    text = hio.ascii_histogram(s)
    assert "1" in text and "2" in text
