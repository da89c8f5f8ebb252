"""
矩阵基础运算测试
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from pwi.errors import InvalidInputError
from pwi.matrix_core import (
    fro_norm_sq,
    pinv,
    pinv_meter,
    psd_part,
    psd_sqrt,
    spectral_norm,
    trace_product,
)


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny)


@st.composite
def low_rank_matrices(draw):
    m = draw(st.integers(1, 32))
    n = draw(st.integers(1, 32))
    rank = draw(st.integers(0, min(m, n)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if rank == 0:
        return np.zeros((m, n))
    u, _ = np.linalg.qr(rng.standard_normal((m, rank)))
    v, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    s = 10.0 ** rng.uniform(-3.0, 0.0, rank)
    return (u * s) @ v.T


# ======================== 伪逆 ========================

def test_pinv_identity():
    assert_allclose(pinv(np.eye(3)), np.eye(3), atol=1e-15)


def test_pinv_diagonal_rank_deficient():
    assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-15)


def test_pinv_rank_one_analytic():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert_allclose(pinv(a), a / 25.0, rtol=1e-12)


def test_pinv_zero_matrix_is_transposed_zero():
    p = pinv(np.zeros((3, 5)))
    assert p.shape == (5, 3)
    assert_array_equal(p, 0.0)


@settings(max_examples=100, deadline=None)
@given(low_rank_matrices())
def test_penrose_conditions(a):
    p = pinv(a)
    tol = 1e-9
    assert np.linalg.norm(a @ p @ a - a) <= tol * np.linalg.norm(a)
    assert np.linalg.norm(p @ a @ p - p) <= tol * np.linalg.norm(p)
    ap, pa = a @ p, p @ a
    assert np.linalg.norm(ap - ap.T) <= tol * max(np.linalg.norm(ap), 1.0)
    assert np.linalg.norm(pa - pa.T) <= tol * max(np.linalg.norm(pa), 1.0)


@pytest.mark.parametrize("c", [1e-3, 1e3])
def test_pinv_scaling(rng, c):
    a = rng.standard_normal((6, 4))
    assert _rel(pinv(c * a), pinv(a) / c) <= 1e-10


def test_pinv_twice_is_identity_on_full_rank(rng):
    a = rng.standard_normal((5, 7))
    assert _rel(pinv(pinv(a)), a) <= 1e-9


def test_pinv_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        pinv(np.array([[1.0, np.nan]]))


@pytest.mark.parametrize("tol", [0.0, 1.0, -1e-3])
def test_pinv_rejects_bad_tolerance(tol):
    with pytest.raises(InvalidInputError):
        pinv(np.eye(2), rel_tol=tol)


def test_pinv_truncates_small_singular_values():
    a = np.diag([1.0, 1e-14])
    assert_allclose(pinv(a), np.diag([1.0, 0.0]))


def test_pinv_meter_counts_nested_scopes():
    with pinv_meter() as outer:
        pinv(np.eye(2))
        with pinv_meter() as inner:
            pinv(np.eye(2))
            pinv(np.eye(3))
    pinv(np.eye(2))
    assert inner.calls == 2
    assert outer.calls == 3


# ======================== 半正定平方根 ========================

def test_psd_sqrt_identity():
    assert_allclose(psd_sqrt(np.eye(2)), np.eye(2), atol=1e-15)


def test_psd_sqrt_diagonal():
    assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), rtol=1e-12)


def test_psd_sqrt_multiplies_back(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    s = q @ np.diag([5.0, 3.0, 1.0, 0.5, 0.0]) @ q.T
    s = 0.5 * (s + s.T)
    r = psd_sqrt(s)
    assert _rel(r @ r, s) <= 1e-10


def test_psd_sqrt_idempotent_on_square(rng):
    g = rng.standard_normal((4, 4))
    r = psd_sqrt(g @ g.T)
    assert _rel(psd_sqrt(r @ r), r) <= 1e-9


def test_psd_sqrt_clamps_tiny_negative_eigenvalues():
    s = np.diag([1.0, -1e-13])
    assert_allclose(psd_sqrt(s), np.diag([1.0, 0.0]))


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(InvalidInputError):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_psd_sqrt_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        psd_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_psd_part_clips_negative_eigenvalues():
    assert_allclose(psd_part(np.diag([2.0, -1.0])), np.diag([2.0, 0.0]), atol=1e-15)


# ======================== 范数 ========================

def test_fro_norm_sq_examples():
    assert fro_norm_sq(np.zeros((2, 3))) == 0.0
    assert fro_norm_sq(np.eye(3)) == 3.0
    assert fro_norm_sq(np.array([[1.0, 2.0], [3.0, 4.0]])) == 30.0


def test_trace_product_matches_trace(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))
    assert trace_product(a, b) == pytest.approx(np.trace(a @ b.T), rel=1e-12)


def test_spectral_norm_of_diagonal():
    assert spectral_norm(np.diag([3.0, -5.0, 1.0])) == pytest.approx(5.0)
