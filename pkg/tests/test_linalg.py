import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from spacedec.errors import InvalidInput, RankDeficient
from spacedec.linalg import (numerical_rank, polar_factor, qr_orthonormalize, spd_power,
                             sym_part, thin_svd, truncate_rank)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def matrices(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


# -- thin_svd ----------------------------------------------------------------------------

def test_svd_of_diagonal():
    U, S, V = thin_svd(np.diag([3.0, 2.0]))
    assert np.allclose(S, [3, 2])
    assert np.allclose(np.abs(U), np.eye(2)) and np.allclose(np.abs(V), np.eye(2))
    assert np.allclose((U * S) @ V.T, np.diag([3.0, 2.0]))


def test_svd_of_zero_matrix():
    _, S, _ = thin_svd(np.zeros((2, 3)))
    assert np.array_equal(S, [0.0, 0.0])


def test_svd_reconstruction_random(rng):
    A = rng.standard_normal((5, 4))
    U, S, V = thin_svd(A)
    assert np.linalg.norm((U * S) @ V.T - A) <= 1e-10 * np.linalg.norm(A)


def test_svd_reconstruction_large(rng):
    A = rng.standard_normal((500, 500))
    U, S, V = thin_svd(A)
    assert np.linalg.norm((U * S) @ V.T - A) <= 1e-10 * np.linalg.norm(A)


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_svd_invariants(A):
    U, S, V = thin_svd(A)
    s = min(A.shape)
    assert U.shape == (A.shape[0], s) and V.shape == (A.shape[1], s) and S.shape == (s,)
    assert np.linalg.norm(U.T @ U - np.eye(s), 2) <= 1e-12
    assert np.linalg.norm(V.T @ V - np.eye(s), 2) <= 1e-12
    assert np.all(S >= 0) and np.all(np.diff(S) <= 0)
    assert np.linalg.norm((U * S) @ V.T - A) <= 1e-10 * max(np.linalg.norm(A), 1e-300)


def test_svd_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        thin_svd(np.array([[1.0, np.nan]]))
    with pytest.raises(InvalidInput):
        thin_svd(np.array([[np.inf]]))


def test_numerical_rank():
    assert numerical_rank(np.diag([1.0, 1e-3, 0.0])) == 2
    assert numerical_rank(np.zeros((3, 2))) == 0
    assert numerical_rank(np.diag([1.0, 1e-17])) == 1


# -- truncate_rank -------------------------------------------------------------------------

def test_truncate_diagonal():
    out = truncate_rank(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.allclose(out, np.diag([3.0, 2.0, 0.0]), atol=1e-14)


def test_truncate_full_rank_is_identity(rng):
    A = rng.standard_normal((4, 6))
    assert np.linalg.norm(truncate_rank(A, 4) - A) <= 1e-12


def test_truncate_residual_is_second_singular_value(rng):
    A = rng.standard_normal((4, 4))
    S = np.linalg.svd(A, compute_uv=False)
    res = np.linalg.norm(A - truncate_rank(A, 1), 2)
    assert abs(res - S[1]) <= 1e-10


def test_truncate_zero_rank(rng):
    assert np.array_equal(truncate_rank(rng.standard_normal((3, 2)), 0), np.zeros((3, 2)))


@pytest.mark.parametrize("k", [-1, 4])
def test_truncate_out_of_range(k):
    with pytest.raises(InvalidInput):
        truncate_rank(np.eye(3), k)


@settings(max_examples=60, deadline=None)
@given(matrices(), st.data())
def test_truncate_idempotent_and_optimal(A, data):
    k = data.draw(st.integers(0, min(A.shape)))
    T = truncate_rank(A, k)
    assert np.linalg.norm(truncate_rank(T, k) - T) <= 1e-12 * max(1.0, np.linalg.norm(A))
    S = np.linalg.svd(A, compute_uv=False)
    expected = np.sqrt(np.sum(S[k:] ** 2))
    assert abs(np.linalg.norm(A - T) - expected) <= 1e-10 * max(1.0, np.linalg.norm(A))


# -- polar_factor -----------------------------------------------------------------------------

def test_polar_positive_diagonal():
    assert np.allclose(polar_factor(np.diag([2.0, 3.0])), np.eye(2), atol=1e-14)


def test_polar_idempotent_on_orthonormal(rng):
    Q = qr_orthonormalize(rng.standard_normal((5, 3)))
    assert np.linalg.norm(polar_factor(Q) - Q) <= 1e-12


def test_polar_defining_equation(rng):
    L = rng.standard_normal((5, 2))
    W = polar_factor(L)
    assert np.linalg.norm(W.T @ W - np.eye(2)) <= 1e-12
    assert np.linalg.norm(W @ spd_power(L.T @ L, 0.5) - L) <= 1e-10


def test_polar_rank_deficient():
    with pytest.raises(RankDeficient):
        polar_factor(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_polar_orthonormal_columns(k, extra, seed):
    L = np.random.default_rng(seed).standard_normal((k + extra, k))
    W = polar_factor(L)
    assert np.linalg.norm(W.T @ W - np.eye(k)) <= 1e-12


# -- qr_orthonormalize --------------------------------------------------------------------------

def test_qr_identity():
    assert np.allclose(qr_orthonormalize(np.eye(3)), np.eye(3))


def test_qr_scalar_column():
    assert np.allclose(np.abs(qr_orthonormalize(np.array([[3.0]]))), [[1.0]])


def test_qr_column_space(rng):
    A = rng.standard_normal((6, 3))
    Q = qr_orthonormalize(A)
    assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-12
    P_A = A @ np.linalg.solve(A.T @ A, A.T)
    assert np.linalg.norm(Q @ Q.T - P_A) <= 1e-10


def test_qr_rank_deficient():
    with pytest.raises(RankDeficient):
        qr_orthonormalize(np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]))


# -- sym_part --------------------------------------------------------------------------------------

def test_sym_part_examples(rng):
    assert np.array_equal(sym_part(np.array([[0.0, 2.0], [0.0, 0.0]])), [[0, 1], [1, 0]])
    M = rng.standard_normal((4, 4))
    S = M + M.T
    assert np.array_equal(sym_part(S), S)
    assert np.array_equal(sym_part(M - M.T), np.zeros((4, 4)))


def test_sym_part_non_square():
    with pytest.raises(InvalidInput):
        sym_part(np.zeros((2, 3)))
