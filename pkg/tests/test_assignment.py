import numpy as np
import pytest

from fovplan.assignment import (
    AssignmentMatrix,
    CostMatrices,
    assign,
    cost_matrices,
    loss,
    lsa_assign,
    wta_assign,
)
from fovplan.selftest import enumerate_lsa


def cm(D_p, D_T=None):
    D_p = np.asarray(D_p, dtype=float)
    return CostMatrices(D_p, np.zeros_like(D_p) if D_T is None else np.asarray(D_T, dtype=float))


def test_cost_matrices_identical_rows_are_zero():
    rng = np.random.default_rng(0)
    e = rng.uniform(-1, 1, size=(2, 13))
    s = np.vstack([e, rng.uniform(-1, 1, size=(1, 13))])
    out = cost_matrices(e, s)
    assert out.D_p[0, 0] == 0.0 and out.D_T[0, 0] == 0.0
    assert out.D_p[1, 1] == 0.0 and out.D_T[1, 1] == 0.0


def test_cost_matrices_unit_offset():
    e = np.zeros((1, 13))
    s = np.ones((1, 13))
    out = cost_matrices(e, s)
    assert out.D_p[0, 0] == pytest.approx(1.0)  # mean of twelve ones
    assert out.D_T[0, 0] == pytest.approx(1.0)


def test_cost_matrices_swap_transposes():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, size=(3, 13))
    b = rng.uniform(-1, 1, size=(3, 13))
    ab = cost_matrices(a, b)
    ba = cost_matrices(b, a)
    np.testing.assert_allclose(ab.D_p, ba.D_p.T)
    np.testing.assert_allclose(ab.D_T, ba.D_T.T)


def test_cost_matrices_empty_expert_raises():
    with pytest.raises(ValueError):
        cost_matrices(np.zeros((0, 13)), np.zeros((3, 13)))


def test_cost_matrices_rejects_more_experts_than_students():
    with pytest.raises(ValueError):
        cm(np.zeros((3, 2)))


def test_lsa_spec_example():
    A = lsa_assign(cm([[1.0, 2, 3], [2, 1, 4]]))
    np.testing.assert_array_equal(A.A, [[1, 0, 0], [0, 1, 0]])
    assert np.sum(A.A * [[1, 2, 3], [2, 1, 4]]) == 2.0


def test_lsa_single_row_equals_binary_wtar():
    D = np.array([[3.0, 1.0, 2.0]])
    A = lsa_assign(cm(D))
    B = wta_assign(cm(D), "WTAr", 0.0)
    np.testing.assert_array_equal(A.A, B.A)


def test_lsa_diagonal_dominant_is_identity():
    D = 1.0 - np.eye(4)
    A = lsa_assign(cm(D))
    np.testing.assert_array_equal(A.A, np.eye(4))


def test_lsa_matches_enumeration_and_structure():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n_s = int(rng.integers(1, 7))
        n_e = int(rng.integers(1, n_s + 1))
        D = rng.uniform(0, 5, size=(n_e, n_s))
        A = lsa_assign(cm(D))
        _, ref_cols = enumerate_lsa(D)
        np.testing.assert_array_equal(np.argmax(A.A, axis=1), ref_cols)
        np.testing.assert_array_equal(A.A.sum(axis=1), np.ones(n_e))
        col_sums = A.A.sum(axis=0)
        assert np.sum(col_sums == 1.0) == n_e
        assert np.sum(col_sums == 0.0) == n_s - n_e


def test_lsa_invariant_under_positive_scaling():
    rng = np.random.default_rng(6)
    D = rng.uniform(0, 3, size=(4, 6))
    A1 = lsa_assign(cm(D)).A
    A2 = lsa_assign(cm(7.5 * D)).A
    np.testing.assert_array_equal(A1, A2)


def test_lsa_tie_break_prefers_lowest_column():
    D = np.array([[1.0, 1.0, 5.0]])
    A = lsa_assign(cm(D))
    np.testing.assert_array_equal(A.A, [[1, 0, 0]])
    # 2x2 global tie: both diagonals cost 2; lexicographic pick is (0->0, 1->1)
    D = np.array([[1.0, 1.0], [1.0, 1.0]])
    A = lsa_assign(cm(D))
    np.testing.assert_array_equal(A.A, np.eye(2))


def test_wtar_binary_row_minima():
    A = wta_assign(cm([[1.0, 2], [3, 0]]), "RWTAr", 0.0)
    np.testing.assert_array_equal(A.A, [[1, 0], [0, 1]])


def test_rwtar_epsilon_weights():
    D = np.array([[5.0, 1.0, 7.0]])
    A = wta_assign(cm(D), "RWTAr", 0.05)
    np.testing.assert_allclose(A.A, [[0.025, 0.95, 0.025]])


def test_wtac_equilibrium_pathology():
    # one student column is the row minimum of two expert rows: it takes both
    D = np.array([[0.1, 5, 5], [0.2, 5, 5]])
    A = wta_assign(cm(D), "WTAc", 0.0)
    assert A.A[0, 0] == 1.0  # column 0's minimum row
    # and every column assigns its own minimum row fully
    np.testing.assert_array_equal(A.A.sum(axis=0), np.ones(3))
    # the LSA assignment avoids the double-booking by construction
    L = lsa_assign(cm(D))
    assert np.all(L.A.sum(axis=0) <= 1.0)


def test_wta_structure_sums():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n_s = int(rng.integers(2, 7))
        n_e = int(rng.integers(2, n_s + 1))
        D = rng.uniform(0, 5, size=(n_e, n_s))
        eps = float(rng.uniform(0, 0.4))
        Ar = wta_assign(cm(D), "RWTAr", eps)
        np.testing.assert_allclose(Ar.A.sum(axis=1), 1.0, atol=1e-12)
        Ac = wta_assign(cm(D), "RWTAc", eps)
        np.testing.assert_allclose(Ac.A.sum(axis=0), 1.0, atol=1e-12)


def test_rwtac_single_expert_off_weight_zero():
    D = np.array([[1.0, 2.0, 3.0]])
    A = wta_assign(cm(D), "RWTAc", 0.1)
    np.testing.assert_allclose(A.A, [[0.9, 0.9, 0.9]])


def test_wta_invalid_eps():
    D = cm([[1.0, 2.0]])
    with pytest.raises(ValueError):
        wta_assign(D, "RWTAr", 1.0)
    with pytest.raises(ValueError):
        wta_assign(D, "RWTAr", -0.1)
    with pytest.raises(ValueError):
        wta_assign(D, "WTAr", 0.1)
    with pytest.raises(ValueError):
        wta_assign(D, "nope", 0.0)


def test_loss_zero_assignment():
    D = cm(np.ones((2, 3)), np.ones((2, 3)))
    A = AssignmentMatrix(np.zeros((2, 3)), "LSA")
    value, g_p, g_T = loss(A, D)
    assert value == 0.0
    np.testing.assert_array_equal(g_p, 0.0)


def test_loss_spec_example_and_gradients():
    D = cm([[1.0, 2, 3], [2, 1, 4]])
    A = lsa_assign(D)
    value, g_p, g_T = loss(A, D, beta_p=1.0, beta_T=1.0)
    assert value == pytest.approx(2.0)
    np.testing.assert_array_equal(g_p, A.A)
    np.testing.assert_array_equal(g_T, A.A)


def test_loss_beta_scaling():
    rng = np.random.default_rng(9)
    D = cm(rng.uniform(0, 1, (3, 4)), rng.uniform(0, 1, (3, 4)))
    A = lsa_assign(D)
    v1, _, _ = loss(A, D, beta_p=1.0, beta_T=0.0)
    v2, _, _ = loss(A, D, beta_p=2.0, beta_T=0.0)
    assert v2 == pytest.approx(2 * v1, rel=1e-12)


def test_loss_shape_mismatch():
    D = cm(np.ones((2, 3)))
    A = AssignmentMatrix(np.ones((2, 2)), "LSA")
    with pytest.raises(ValueError):
        loss(A, D)


def test_ne_one_lsa_equals_wtar():
    rng = np.random.default_rng(10)
    for _ in range(20):
        D = cm(rng.uniform(0, 5, size=(1, 6)))
        np.testing.assert_array_equal(lsa_assign(D).A, wta_assign(D, "WTAr", 0.0).A)
        np.testing.assert_array_equal(assign(D, "LSA").A, assign(D, "WTAr").A)
