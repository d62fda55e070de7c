import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqdfs.dfs import highest_state, logical_basis
from mqdfs.pauli import (
    PAULI_MATRICES,
    DimensionError,
    OperatorSum,
    PauliString,
    basis_orders,
    cartesian,
    coherence_decompose,
    conjugate_by_pauli,
    from_matrix,
    hs_inner,
    ladder_patterns,
    loads,
    pauli_product,
    to_matrix,
)

letters = st.sampled_from("EXYZ")


def strings(n):
    return st.text(alphabet="EXYZ", min_size=n, max_size=n)


def kron_string(s):
    m = np.eye(1)
    for ch in s:
        m = np.kron(m, PAULI_MATRICES[ch])
    return m


def random_op(rng, n, k=6):
    terms = {}
    for _ in range(k):
        s = "".join(rng.choice(list("EXYZ"), n))
        terms[s] = complex(rng.normal(), rng.normal())
    return OperatorSum(n, terms)


def test_single_spin_products():
    assert pauli_product(PauliString("X"), PauliString("X")) == (1, PauliString("E"))
    assert pauli_product(PauliString("X"), PauliString("Y")) == (1j, PauliString("Z"))


def test_four_spin_product_matches_brute_force():
    a, b = PauliString("XYEZ"), PauliString("YYZE")
    phase, s = pauli_product(a, b)
    np.testing.assert_allclose(kron_string("XYEZ") @ kron_string("YYZE"), phase * kron_string(s.letters))
    assert s.letters == "ZEZZ" and phase == 1j


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(strings(n), strings(n))))
def test_product_matches_dense(pair):
    a, b = pair
    phase, s = pauli_product(PauliString(a), PauliString(b))
    assert phase in (1, -1, 1j, -1j)
    np.testing.assert_allclose(kron_string(a) @ kron_string(b), phase * kron_string(s.letters), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(strings(3))
def test_every_string_squares_to_identity(s):
    assert pauli_product(PauliString(s), PauliString(s)) == (1, PauliString("EEE"))


def test_length_mismatch_is_rejected():
    with pytest.raises(DimensionError):
        pauli_product(PauliString("XY"), PauliString("X"))
    with pytest.raises(DimensionError):
        hs_inner(cartesian("xx"), cartesian("x"))
    with pytest.raises(DimensionError):
        conjugate_by_pauli(cartesian("xx"), "XYZ")


def test_invalid_letters():
    with pytest.raises(ValueError):
        PauliString("XQ")


def test_conjugation_of_dq2_state():
    rho3 = logical_basis().rho[2]
    assert conjugate_by_pauli(rho3, "ZZZZ") == rho3
    assert conjugate_by_pauli(rho3, "EEEZ") == -rho3
    ident = OperatorSum.identity(4)
    for p in ("XXXY", "ZEYX", "EEEE"):
        assert conjugate_by_pauli(ident, p) == ident


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), strings(3))
def test_conjugation_matches_dense(seed, p):
    rho = random_op(np.random.default_rng(seed), 3)
    pm = kron_string(p)
    np.testing.assert_allclose(to_matrix(conjugate_by_pauli(rho, p)), pm @ to_matrix(rho) @ pm, atol=1e-12)


def test_hs_inner_matches_trace():
    rng = np.random.default_rng(3)
    a, b = random_op(rng, 3), random_op(rng, 3)
    dense = np.trace(to_matrix(a).conj().T @ to_matrix(b)) / 8
    assert abs(hs_inner(a, b) - dense) < 1e-12


def test_canonical_terms():
    op = OperatorSum(2, {"ZX": 1, "XE": 2, "YY": 1e-16})
    assert list(op.terms) == ["XE", "ZX"]
    assert OperatorSum(2, {"XX": 1}) - OperatorSum(2, {"XX": 1}) == OperatorSum.zero(2)


def test_hermiticity():
    assert cartesian("xy").is_hermitian()
    assert not OperatorSum(1, {"X": 1j}).is_hermitian()


def test_text_roundtrip():
    op = highest_state("literal") + OperatorSum(4, {"ZEEX": 0.1 - 2.5j})
    assert loads(op.dumps()) == op
    assert loads("# comment\n\n1 0 XY\n").terms == {"XY": 1}
    with pytest.raises(ValueError, match="line 1"):
        loads("1 XY\n")
    with pytest.raises(ValueError):
        loads("")


def test_matrix_roundtrip():
    op = random_op(np.random.default_rng(7), 4, 10)
    assert from_matrix(to_matrix(op)).allclose(op, 1e-13)


def test_cartesian_normalization():
    np.testing.assert_allclose(to_matrix(cartesian("x")), PAULI_MATRICES["X"] / 2)


def test_decomposition_sums_back():
    rng = np.random.default_rng(11)
    for _ in range(20):
        op = random_op(rng, 4, 8)
        for w in (None, (4, 4, 4, 1)):
            dec = coherence_decompose(op, w)
            assert dec.total().allclose(op, 1e-12)


def test_decomposition_components_are_pure():
    # dense oracle: a component of order q occupies only elements of order q
    op = random_op(np.random.default_rng(5), 3, 10)
    w = (2, 1, 3)
    orders = basis_orders(3, w)
    for q, comp in coherence_decompose(op, w).components.items():
        m = to_matrix(comp)
        assert np.all(np.abs(m[orders != q]) < 1e-12)


def test_highest_state_weighted_orders():
    dec = coherence_decompose(highest_state("literal"), (4, 4, 4, 1))
    assert dec.orders() == [-13, -11, -5, -3, 3, 5, 11, 13]


def test_flip_flop_is_zero_quantum():
    dec = coherence_decompose(cartesian("xx") + cartesian("yy"))
    assert dec.orders() == [0]


def test_ladder_patterns_cover_operator():
    op = cartesian("xy") * 4
    pats = ladder_patterns(op)
    assert set(pats) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    total = sum(pats.values(), OperatorSum.zero(2))
    assert total.allclose(op)


def test_identity_single_order():
    assert coherence_decompose(OperatorSum.identity(3)).orders() == [0]


def test_all_sixteen_two_spin_strings_orthonormal():
    ops = [OperatorSum.from_string("".join(p)) for p in itertools.product("EXYZ", repeat=2)]
    gram = np.array([[hs_inner(a, b) for b in ops] for a in ops])
    np.testing.assert_allclose(gram, np.eye(16))
