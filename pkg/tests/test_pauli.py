from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cshore.pauli import (
    PauliError, PauliString, as_pauli, codes_array, covers, covers_matrix, eigenvalue_product,
    int_to_outcome, measurement_basis, outcome_to_int, support, weight,
)

paulis = st.integers(1, 6).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))
bases = st.integers(1, 6).flatmap(lambda n: st.text("XYZ", min_size=n, max_size=n))


def test_covers_examples():
    assert covers("XXI", "XXX")
    assert not covers("ZZI", "XXX")
    assert covers("III", "XYZ")


def test_covers_length_mismatch():
    with pytest.raises(PauliError):
        covers("XX", "XXX")


def test_measurement_basis_rejects_identity():
    with pytest.raises(PauliError):
        measurement_basis("XIZ")
    assert measurement_basis("XYZ").letters == "XYZ"


def test_bad_letters():
    with pytest.raises(PauliError):
        PauliString("XAZ")
    with pytest.raises(PauliError):
        PauliString("")


def test_weight_and_support():
    assert weight("XIZ") == 2
    assert weight("IIII") == 0
    assert weight("XYZ") == 3
    assert support("XIZ") == (0, 2)


def test_eigenvalue_product_examples():
    assert eigenvalue_product((0, 1, 0), {2}) == -1
    assert eigenvalue_product((1, 1, 0), set()) == 1
    assert eigenvalue_product((1, 1, 0), {1, 2}) == 1
    with pytest.raises(PauliError):
        eigenvalue_product((0, 1), {3})
    with pytest.raises(PauliError):
        eigenvalue_product((0, 1), {0})


def test_ordering_is_lexicographic_i_x_y_z():
    items = ["ZI", "IX", "XY", "II", "YZ"]
    assert [p.letters for p in sorted(PauliString(s) for s in items)] == ["II", "IX", "XY", "YZ", "ZI"]


def test_outcome_roundtrip():
    for v in range(16):
        assert outcome_to_int(int_to_outcome(v, 4)) == v
    assert int_to_outcome(1, 3) == (0, 0, 1)


@given(bases)
def test_covers_reflexive_on_bases(b):
    assert covers(b, b)


@given(paulis, st.data())
def test_covers_monotone_under_identity_replacement(q, data):
    b = data.draw(st.text("XYZ", min_size=len(q), max_size=len(q)))
    if covers(q, b):
        j = data.draw(st.integers(0, len(q) - 1))
        assert covers(q[:j] + "I" + q[j + 1:], b)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=8), st.data())
def test_eigenvalue_product_multiplicative(y, data):
    n = len(y)
    idx = list(range(1, n + 1))
    a = set(data.draw(st.lists(st.sampled_from(idx), unique=True)))
    b = set(data.draw(st.lists(st.sampled_from([i for i in idx if i not in a] or [None]), unique=True))) - {None}
    assert eigenvalue_product(y, a | b) == eigenvalue_product(y, a) * eigenvalue_product(y, b)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_uniform_cover_fraction_exact(n):
    all_b = ["".join(b) for b in product("XYZ", repeat=n)]
    for q in ("".join(t) for t in product("IXYZ", repeat=n)):
        hits = sum(covers(q, b) for b in all_b)
        assert hits == 3 ** (n - weight(q))


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.lists(st.text("IXYZ", min_size=n, max_size=n), min_size=1, max_size=6),
    st.lists(st.text("XYZ", min_size=n, max_size=n), min_size=1, max_size=6))))
def test_covers_matrix_matches_scalar(tb):
    targets, bs = tb
    m = covers_matrix(codes_array(targets), codes_array(bs))
    expect = np.array([[covers(t, b) for t in targets] for b in bs])
    assert np.array_equal(m, expect)


def test_immutable():
    p = PauliString("XY")
    with pytest.raises(AttributeError):
        p.foo = 1
    assert hash(p) == hash(PauliString("XY"))


@given(paulis)
def test_as_pauli_accepts_code_rows(s):
    p = PauliString(s)
    row = codes_array([p])[0]
    assert as_pauli(row) == p
    assert as_pauli(s) == p
    assert as_pauli(p) is p
