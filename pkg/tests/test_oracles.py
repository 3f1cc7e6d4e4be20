"""Dense-matrix reference constructions.

These oracles realize the convolution as explicit matrices and take
top singular values through LAPACK, giving an independent route against
which the spectral implementations are checked.
"""

import numpy as np
import pytest

from sanlab.oracles import (
    build_block_operator,
    build_circulant_matrix,
    oracle_exact_norm,
    oracle_san_norm,
    top_singular_value,
)
from sanlab.tensor_core import KernelBank, cyclic_conv2


@pytest.fixture
def rng():
    return np.random.default_rng(11)


class TestCirculantMatrix:
    def test_matrix_action_equals_convolution(self, rng):
        kernel = rng.standard_normal((3, 3))
        x = rng.standard_normal((6, 6))
        mat = build_circulant_matrix(kernel, 6, 6)
        y_mat = (mat @ x.ravel()).reshape(6, 6)
        y_conv = cyclic_conv2(x, kernel)
        assert np.abs(y_mat - y_conv).max() < 1e-12

    def test_delta_kernel_gives_identity(self):
        delta = np.zeros((2, 2))
        delta[0, 0] = 1.0
        mat = build_circulant_matrix(delta, 4, 4)
        assert np.array_equal(mat, np.eye(16))

    def test_every_row_is_permuted_kernel(self, rng):
        kernel = rng.standard_normal((2, 2))
        mat = build_circulant_matrix(kernel, 4, 4)
        # doubly circulant: every row holds the same 4 values
        expected = np.sort(np.concatenate([kernel.ravel(), np.zeros(12)]))
        for row in mat:
            assert np.allclose(np.sort(row), expected)

    def test_entry_guard(self):
        with pytest.raises(ValueError):
            build_circulant_matrix(np.ones((3, 3)), 2048, 2048)


class TestBlockOperator:
    def test_shape(self, rng):
        bank = KernelBank(rng.standard_normal((3, 2, 3, 3)))
        mat = build_block_operator(bank, 4, 4)
        assert mat.shape == (3 * 16, 2 * 16)

    def test_action_matches_channel_sums(self, rng):
        bank = KernelBank(rng.standard_normal((3, 2, 3, 3)))
        mat = build_block_operator(bank, 5, 5)
        x = rng.standard_normal((2, 5, 5))
        y_mat = (mat @ x.ravel()).reshape(3, 5, 5)
        for i in range(3):
            ref = sum(cyclic_conv2(x[j], bank.filter(i, j)) for j in range(2))
            assert np.abs(y_mat[i] - ref).max() < 1e-12

    def test_identity_bank_norm_one(self):
        data = np.zeros((2, 2, 1, 1))
        data[0, 0, 0, 0] = 1.0
        data[1, 1, 0, 0] = 1.0
        assert oracle_exact_norm(KernelBank(data), 4, 4) == pytest.approx(1.0)

    def test_entry_guard(self, rng):
        bank = KernelBank(rng.standard_normal((8, 8, 3, 3)))
        with pytest.raises(ValueError):
            build_block_operator(bank, 256, 256)


class TestTopSingularValue:
    def test_known_diagonal(self):
        assert top_singular_value(np.diag([3.0, -5.0, 1.0])) == pytest.approx(5.0)

    def test_rank_one(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(4)
        sv = top_singular_value(np.outer(u, v))
        assert sv == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))


class TestSisoAgreement:
    def test_single_filter_three_routes(self, rng):
        # for one in/out channel the circulant and block routes coincide
        kernel = rng.standard_normal((3, 3))
        bank = KernelBank(kernel[None, None])
        a = oracle_san_norm(bank, 8, 8)
        b = oracle_exact_norm(bank, 8, 8)
        c = top_singular_value(build_circulant_matrix(kernel, 8, 8))
        assert a == pytest.approx(b, rel=1e-12)
        assert a == pytest.approx(c, rel=1e-12)
