import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cdprune import (
    KernelSource,
    average_query,
    condition_kernel,
    condition_kernel_balanced,
    cosine_kernel,
    greedy_map,
    kernel_row,
    log_det_subset,
    minmax_normalize,
    normalize_rows,
    relevance,
)
from cdprune.errors import (
    DimensionMismatch,
    EmptyQuerySet,
    IndexOutOfRange,
    InvalidRelevance,
    InvalidTheta,
    NonFiniteValue,
    RowNormUnderflow,
)

from oracles import cosine_loop


class TestNormalizeRows:
    def test_three_four_five(self):
        np.testing.assert_allclose(normalize_rows([[3.0, 4.0]]), [[0.6, 0.8]], atol=1e-15)

    def test_unit_row_unchanged(self):
        assert normalize_rows([[1.0, 0.0]]).tolist() == [[1.0, 0.0]]

    def test_random_rows_have_unit_norm(self, rng):
        U = normalize_rows(rng.standard_normal((8, 4)))
        assert np.all(np.abs(np.linalg.norm(U, axis=1) - 1.0) <= 1e-12)

    def test_direction_preserved(self, rng):
        E = rng.standard_normal((5, 3))
        U = normalize_rows(E)
        for e, u in zip(E, U):
            assert cosine_loop(e, u) == pytest.approx(1.0, abs=1e-12)

    def test_zero_row_raises_with_index(self):
        with pytest.raises(RowNormUnderflow) as exc:
            normalize_rows([[1.0, 0.0], [0.0, 0.0]])
        assert exc.value.index == 1

    def test_tiny_row_raises(self):
        with pytest.raises(RowNormUnderflow):
            normalize_rows([[1e-13, 0.0]])

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite(self, bad):
        with pytest.raises(NonFiniteValue):
            normalize_rows([[1.0, bad]])

    def test_float32_widens(self):
        assert normalize_rows(np.ones((2, 2), dtype=np.float32)).dtype == np.float64


class TestCosineKernel:
    def test_orthogonal(self):
        K = cosine_kernel([[1.0, 0.0], [0.0, 1.0]])
        assert K.entry(0, 1) == 0.0

    def test_forty_five_degrees(self):
        K = cosine_kernel([[1.0, 0.0], [1.0, 1.0]])
        assert K.entry(0, 1) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_psd_random(self, rng):
        L = cosine_kernel(rng.standard_normal((16, 8))).dense()
        assert np.linalg.eigvalsh(L).min() >= -1e-8

    def test_unit_diagonal_exact(self, rng):
        for mode in ("dense", "lazy"):
            K = cosine_kernel(rng.standard_normal((10, 3)), mode=mode)
            assert np.all(K.diagonal() == 1.0)
            assert all(K.row(j)[j] == 1.0 for j in range(10))

    def test_entries_in_range(self, rng):
        L = cosine_kernel(rng.standard_normal((20, 4))).dense()
        assert L.min() >= -1.0 - 1e-12 and L.max() <= 1.0 + 1e-12

    def test_matches_scalar_loop(self, rng):
        E = rng.standard_normal((6, 5))
        L = cosine_kernel(E).dense()
        for i in range(6):
            for j in range(6):
                assert L[i, j] == pytest.approx(cosine_loop(E[i], E[j]), abs=1e-12)

    def test_auto_mode_threshold(self, rng):
        assert cosine_kernel(rng.standard_normal((8, 2))).mode == "dense"
        assert cosine_kernel(rng.standard_normal((4097, 2))).mode == "lazy"

    def test_immutable(self, rng):
        K = cosine_kernel(rng.standard_normal((4, 2)))
        with pytest.raises(ValueError):
            K.unit_embeddings[0, 0] = 5.0
        row = K.row(0)
        row[1] = 99.0
        assert K.row(0)[1] != 99.0

    def test_scale_invariance(self, rng):
        E = rng.standard_normal((12, 6))
        a = cosine_kernel(E).dense()
        b = cosine_kernel(E * 37.5).dense()
        assert np.max(np.abs(a - b)) <= 1e-10

    def test_from_matrix_requires_square(self):
        with pytest.raises(DimensionMismatch):
            KernelSource.from_matrix(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)),
              elements=st.floats(-10, 10)))
def test_symmetry_and_mode_equivalence_property(E):
    norms = np.linalg.norm(E, axis=1)
    if np.any(norms <= 1e-6):
        return
    dense = cosine_kernel(E, mode="dense")
    lazy = cosine_kernel(E, mode="lazy")
    D = dense.dense()
    assert np.max(np.abs(D - D.T)) <= 1e-12
    for j in range(E.shape[0]):
        assert np.max(np.abs(lazy.row(j) - D[j])) <= 1e-12


class TestRelevance:
    def test_aligned_and_orthogonal(self):
        assert relevance([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0]).tolist() == [1.0, 0.0]

    def test_self_similarity(self, rng):
        E = rng.standard_normal((5, 3))
        assert relevance(E, E[2])[2] == pytest.approx(1.0, abs=1e-12)

    def test_matches_scalar_loop(self, rng):
        E, q = rng.standard_normal((9, 4)), rng.standard_normal(4)
        r = relevance(E, q)
        expected = [cosine_loop(e, q) for e in E]
        assert np.max(np.abs(r - expected)) <= 1e-12
        assert np.all(np.abs(r) <= 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            relevance([[1.0, 0.0]], [1.0, 0.0, 0.0])

    def test_zero_query(self):
        with pytest.raises(RowNormUnderflow):
            relevance([[1.0, 0.0]], [0.0, 0.0])


class TestAverageQuery:
    def test_singleton(self):
        assert average_query([[1.0, 0.0]]).tolist() == [1.0, 0.0]

    def test_two_vectors(self):
        assert average_query([[1.0, 0.0], [0.0, 1.0]]).tolist() == [0.5, 0.5]

    def test_cancellation(self):
        with pytest.raises(RowNormUnderflow):
            average_query([[1.0, 0.0], [-1.0, 0.0]])

    def test_empty(self):
        with pytest.raises(EmptyQuerySet):
            average_query([])

    def test_ragged(self):
        with pytest.raises(DimensionMismatch):
            average_query([[1.0, 0.0], [1.0, 0.0, 0.0]])


class TestMinMax:
    def test_affine(self):
        np.testing.assert_allclose(minmax_normalize([0.2, 0.6, 1.0]), [0.0, 0.5, 1.0], atol=1e-15)

    def test_degenerate_is_all_ones(self):
        assert minmax_normalize([0.7, 0.7, 0.7]).tolist() == [1.0, 1.0, 1.0]

    def test_random_extremes_and_order(self, rng):
        r = rng.uniform(-1, 1, 50)
        out = minmax_normalize(r)
        assert out.min() == 0.0 and out.max() == 1.0
        assert np.array_equal(np.argsort(r, kind="stable"), np.argsort(out, kind="stable"))

    def test_floor(self):
        assert minmax_normalize([0.0, 1.0], floor=1e-6).tolist() == [1e-6, 1.0]

    def test_bad_floor(self):
        with pytest.raises(InvalidRelevance):
            minmax_normalize([0.0, 1.0], floor=2.0)


class TestConditioning:
    def test_neutral(self, rng):
        K = cosine_kernel(rng.standard_normal((7, 3)))
        Kc = condition_kernel(K, np.ones(7))
        assert np.max(np.abs(Kc.dense() - K.dense())) <= 1e-12

    def test_annihilation(self, rng):
        K = cosine_kernel(rng.standard_normal((5, 3)))
        r = np.array([0.3, 0.0, 1.0, 0.5, 0.9])
        L = condition_kernel(K, r).dense()
        assert np.all(L[1] == 0.0) and np.all(L[:, 1] == 0.0)

    def test_diag_r_L_diag_r(self, rng):
        K = cosine_kernel(rng.standard_normal((6, 4)))
        r = rng.uniform(0, 1, 6)
        expected = np.diag(r) @ K.dense() @ np.diag(r)
        assert np.max(np.abs(condition_kernel(K, r).dense() - expected)) <= 1e-12

    def test_log_det_identity_on_pair(self, rng):
        K = cosine_kernel(rng.standard_normal((5, 4)))
        r = rng.uniform(0.1, 1.0, 5)
        S = [1, 3]
        lhs = log_det_subset(condition_kernel(K, r), S)
        rhs = sum(math.log(r[i] ** 2) for i in S) + log_det_subset(K, S)
        assert abs(lhs - rhs) <= 1e-8

    def test_stays_psd(self, rng):
        K = cosine_kernel(rng.standard_normal((12, 5)))
        L = condition_kernel(K, rng.uniform(0, 1, 12)).dense()
        assert np.linalg.eigvalsh(L).min() >= -1e-8

    def test_length_mismatch(self, rng):
        K = cosine_kernel(rng.standard_normal((4, 2)))
        with pytest.raises(DimensionMismatch):
            condition_kernel(K, np.ones(3))

    def test_unnormalized_rejected(self, rng):
        K = cosine_kernel(rng.standard_normal((2, 2)))
        with pytest.raises(InvalidRelevance):
            condition_kernel(K, [0.5, 1.5])


class TestBalanced:
    def test_theta_zero_neutral(self, rng):
        K = cosine_kernel(rng.standard_normal((6, 3)))
        Kb = condition_kernel_balanced(K, rng.uniform(0, 1, 6), 0.0)
        assert np.max(np.abs(Kb.dense() - K.dense())) <= 1e-12

    def test_theta_zero_keeps_unconditional_fill(self, rng):
        K = cosine_kernel(rng.standard_normal((8, 2)))
        r = np.linspace(0.0, 1.0, 8)
        res = greedy_map(condition_kernel_balanced(K, r, 0.0), 4)
        assert res.selected == greedy_map(K, 4).selected
        assert res.fill_count == 2

    def test_theta_half_diagonal(self, rng):
        K = cosine_kernel(rng.standard_normal((3, 2)))
        Kb = condition_kernel_balanced(K, [0.0, 0.5, 1.0], 0.5)
        assert Kb.entry(2, 2) == pytest.approx(math.e, abs=1e-12)

    def test_identity(self, rng):
        K = cosine_kernel(rng.standard_normal((8, 6)))
        r = rng.uniform(0, 1, 8)
        theta = 0.8
        alpha = theta / (2 * (1 - theta))
        S = [0, 2, 5]
        lhs = log_det_subset(condition_kernel_balanced(K, r, theta), S)
        rhs = 2 * alpha * r[S].sum() + log_det_subset(K, S)
        assert abs(lhs - rhs) <= 1e-8

    @pytest.mark.parametrize("theta", [-0.1, 1.0, 1.5])
    def test_invalid_theta(self, rng, theta):
        K = cosine_kernel(rng.standard_normal((3, 2)))
        with pytest.raises(InvalidTheta):
            condition_kernel_balanced(K, np.ones(3), theta)


class TestKernelRow:
    def test_unit_diagonal_element(self, rng):
        K = cosine_kernel(rng.standard_normal((6, 3)), mode="lazy")
        assert kernel_row(K, 4)[4] == 1.0

    def test_zero_relevance_row(self, rng):
        K = condition_kernel(cosine_kernel(rng.standard_normal((4, 3))), [1.0, 0.0, 0.4, 0.2])
        assert np.all(kernel_row(K, 1) == 0.0)

    def test_lazy_equals_dense(self, rng):
        E = rng.standard_normal((30, 7))
        r = minmax_normalize(rng.standard_normal(30))
        dense = condition_kernel(cosine_kernel(E, mode="dense"), r)
        lazy = condition_kernel(cosine_kernel(E, mode="lazy"), r)
        D = dense.dense()
        for j in range(30):
            assert np.max(np.abs(lazy.row(j) - D[j])) <= 1e-12
        assert np.max(np.abs(lazy.dense() - D)) <= 1e-12
        assert np.max(np.abs(lazy.diagonal() - dense.diagonal())) <= 1e-12

    @pytest.mark.parametrize("j", [-1, 6, 2.0])
    def test_out_of_range(self, rng, j):
        K = cosine_kernel(rng.standard_normal((6, 3)))
        with pytest.raises(IndexOutOfRange):
            kernel_row(K, j)


def test_mode_equivalence_100_instances(rng):
    worst = 0.0
    for _ in range(100):
        n, d = rng.integers(2, 40), rng.integers(1, 12)
        E = rng.standard_normal((n, d))
        r = minmax_normalize(rng.standard_normal(n))
        a = condition_kernel(cosine_kernel(E, mode="dense"), r)
        b = condition_kernel(cosine_kernel(E, mode="lazy"), r)
        worst = max(worst, np.max(np.abs(a.dense() - np.stack([b.row(j) for j in range(n)]))))
    assert worst <= 1e-12


def test_lazy_symmetry(rng):
    K = condition_kernel(cosine_kernel(rng.standard_normal((15, 4)), mode="lazy"),
                         rng.uniform(0, 1, 15))
    for i in range(15):
        for j in range(15):
            assert abs(K.entry(i, j) - K.entry(j, i)) <= 1e-12


def test_psd_gram_random_sizes(rng):
    for _ in range(20):
        n = int(rng.integers(2, 65))
        L = cosine_kernel(rng.standard_normal((n, int(rng.integers(1, 16))))).dense()
        assert np.linalg.eigvalsh(L).min() >= -1e-8
