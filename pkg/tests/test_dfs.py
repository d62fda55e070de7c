import itertools

import numpy as np
import pytest

from mqdfs.dfs import (
    EN_MEMBERS,
    LogicalBasis,
    dfs_report,
    eigenoperator_check,
    error_family,
    highest_state,
    logical_basis,
    mq_coherences,
    permutation_image,
    permutation_symmetry_check,
    two_qubit_dfs_demo,
)
from mqdfs.pauli import PAULI_MATRICES, OperatorSum, cartesian, coherence_decompose, hs_inner, to_matrix


def dense_sign(rho, p):
    """Oracle: +-1 when P rho P = +-rho as matrices, else None."""
    pm = np.eye(1)
    for ch in p:
        pm = np.kron(pm, PAULI_MATRICES[ch])
    m = to_matrix(rho)
    img = pm @ m @ pm
    for s in (1, -1):
        if np.allclose(img, s * m, atol=1e-12):
            return s
    return None


@pytest.mark.parametrize("conv", ["literal", "symmetrized"])
def test_coherences_sum_to_highest_state(conv):
    total = sum(mq_coherences(conv)[1:], mq_coherences(conv)[0])
    assert not (total - highest_state(conv))


def test_literal_highest_state_coefficient():
    assert highest_state("literal").terms == {"XYYY": 0.5}


def test_symmetrized_orders_are_pure():
    qq, dq1, dq2, zq = mq_coherences("symmetrized")
    assert {abs(q) for q in coherence_decompose(qq).orders()} == {4}
    assert coherence_decompose(zq).orders() == [0]
    assert coherence_decompose(qq, (4, 4, 4, 1)).orders() == [-13, 13]
    assert coherence_decompose(dq2, (4, 4, 4, 1)).orders() == [-5, 5]


def test_literal_coherences_overlap():
    lit = mq_coherences("literal")
    assert abs(hs_inner(lit[1], lit[2])) > 0
    # coefficient dot product (3,3,-1,-1).(1,1,1,1) = 4 on terms of norm 1/16
    assert hs_inner(lit[1], lit[2]) == pytest.approx(4 / 256)


def test_basis_orthonormal_hermitian_traceless():
    b = logical_basis()
    np.testing.assert_allclose(b.gram(), np.eye(4), atol=1e-12)
    for r in b.rho:
        assert r.is_hermitian() and abs(r.trace()) == 0


def test_basis_gram_dense_oracle():
    mats = [to_matrix(r) for r in logical_basis().rho]
    gram = np.array([[np.trace(a.conj().T @ b) / 16 for b in mats] for a in mats])
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)


def test_rho3_is_dq2_up_to_normalization():
    rho3 = logical_basis("literal").rho[2]
    dq2 = mq_coherences("literal")[2]
    assert rho3.allclose(dq2 / dq2.norm())


def test_family_sizes():
    en, em = error_family("En"), error_family("Em")
    assert len(en.members) == 8 and "XXXY" in {p.letters for p in en.members}
    assert len(em.members) == 144 == len({p.letters for p in em.members})
    with pytest.raises(ValueError):
        error_family("Ex")


def test_em_template_counts():
    em = [p.letters for p in error_family("Em").members]
    by_weight = {}
    for s in em:
        k = sum(ch != "E" for ch in s)
        by_weight[k] = by_weight.get(k, 0) + 1
    assert by_weight == {1: 9, 2: 54, 3: 81}  # 9 + 27 + 27 + 81 grouped by support size


def test_eigen_sweep_matches_dense_oracle():
    for rho in logical_basis().rho:
        for p in EN_MEMBERS:
            s = eigenoperator_check(rho, p)
            assert s in (1, -1)
            assert s == dense_sign(rho, p)


def test_xxxy_error_leaves_dq2_state_unchanged():
    assert eigenoperator_check(logical_basis().rho[2], "XXXY") == 1
    assert eigenoperator_check(logical_basis("symmetrized").rho[2], "XXXY") == 1


def test_identity_and_zzzz():
    for rho in logical_basis().rho:
        assert eigenoperator_check(rho, "EEEE") == 1
        assert eigenoperator_check(rho, "ZZZZ") == 1


def test_non_eigen_member():
    assert eigenoperator_check(logical_basis().rho[0], "XEEE") is None


def test_permutation_symmetry():
    assert all(permutation_symmetry_check(p) == "symmetric" for p in EN_MEMBERS)
    assert all(permutation_symmetry_check(p) == "asymmetric" for p in error_family("Em").members)
    assert permutation_symmetry_check("XYXE") == "asymmetric"


def test_permutation_image_brute_force():
    op = cartesian("xyyy")
    assert permutation_image(op, (1, 0, 2, 3)) == cartesian("yxyy")
    # a symmetric operator is fixed by every proton permutation
    sym = highest_state("symmetrized")
    for perm in itertools.permutations(range(3)):
        assert permutation_image(sym, perm + (3,)) == sym


def test_two_qubit_demo():
    demo = two_qubit_dfs_demo()
    assert all(c.passed for c in demo["checks"])
    p0, p1 = demo["projectors"]
    ref = np.zeros((4, 4))
    ref[1:3, 1:3] = 0.5
    np.testing.assert_array_equal(to_matrix(p0).real, ref)
    assert demo["decomposition"].orders() == [0]
    assert demo["notes"]


def test_report_counts():
    r = dfs_report()
    assert r.passed
    text = r.to_text()
    assert sum(1 for ln in text.splitlines() if ln.startswith("CHECK eigen ") and " PASS " in ln) == 32
    assert sum(1 for ln in text.splitlines() if ln.startswith("CHECK em_asymmetric") and " PASS" in ln) == 144
    assert len(r.eigen_signs) == 32
    off = r.orthogonality - np.diag(np.diag(r.orthogonality))
    assert np.max(np.abs(off)) < 1e-12
    assert "NOTE" in text


def test_report_is_deterministic():
    assert dfs_report().to_text() == dfs_report().to_text()


def test_corrupted_basis_fails():
    b = logical_basis()
    bad = list(b.rho)
    bad[2] = bad[2] + OperatorSum(4, {"XEEE": 0.3})
    r = dfs_report(LogicalBasis(tuple(bad)), ("En",), include_demo=False)
    assert not r.passed
