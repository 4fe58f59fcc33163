"""Unit tests for the trigonometric Gram matrices."""

from itertools import product
from unittest.mock import patch

import numpy as np
import pytest
from scipy import linalg

from noiselab.core.exceptions import EigenSolveError, ParameterError, QuadratureError
from noiselab.services.gram import (
    basis_transforms,
    build_gram,
    diag_asymptotic,
    hs_defect,
    inner_oracle,
    inner_XX,
    inner_XY,
    min_eigenvalue,
    truncate_gram,
)
from noiselab.services.kernel import make_kernel


@pytest.fixture(scope="module")
def kernel():
    """Default alpha = 2 kernel."""
    return make_kernel(2.0)


@pytest.fixture(scope="module")
def gram(kernel):
    """Normalized Gram matrix with N = 8 on T = 1."""
    return build_gram(kernel, 1.0, 8)


class TestBuildGram:
    """Test cases for Gram matrix assembly."""

    def test_layout(self, gram):
        """Test size and index mapping."""
        assert gram.matrix.shape == (34, 34)
        assert gram.size == 34
        assert gram.x_index(-8) == 0
        assert gram.y_index(8) == 33

    def test_hermitian_with_unit_diagonal(self, gram):
        """Test the normalized Gram structure."""
        np.testing.assert_allclose(gram.matrix, gram.matrix.conj().T, atol=1e-12)
        np.testing.assert_allclose(np.diag(gram.matrix).real, 1.0, atol=1e-12)

    def test_yy_block_equals_xx_block(self, gram):
        """Test translation invariance between the two families."""
        np.testing.assert_array_equal(gram.xx, gram.yy)

    def test_positive_definite(self, gram):
        """Test that the smallest eigenvalue is positive."""
        assert min_eigenvalue(gram) > 0

    def test_norms_are_even_in_index(self, gram):
        """Test ||X_-j|| = ||X_j||."""
        np.testing.assert_allclose(gram.norms2, gram.norms2[::-1], rtol=1e-12)
        assert np.all(gram.norms2 > 0)

    def test_diagonal_entry_matches_single_inner_product(self, kernel, gram):
        """Test that the stored norm equals <X_3, X_3>."""
        assert inner_XX(kernel, 1.0, 3, 3).real == pytest.approx(gram.norms2[gram.x_index(3)], rel=1e-7)

    def test_off_diagonal_entry_matches_single_inner_product(self, kernel, gram):
        """Test the normalized XY entry against the one-dimensional reduction."""
        raw = inner_XY(kernel, 1.0, 2, -1)
        scale = np.sqrt(gram.norms2[gram.x_index(2)] * gram.norms2[gram.x_index(-1)])

        assert abs(gram.matrix[gram.x_index(2), gram.y_index(-1)] - raw / scale) < 1e-6

    def test_invalid_size(self, kernel):
        """Test that N < 1 is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            build_gram(kernel, 1.0, 0)

        assert "N must be at least 1" in str(exc_info.value)


class TestOracle:
    """Test cases comparing the reductions with the double-integral oracle."""

    @pytest.mark.parametrize("m,n", [(0, 0), (1, 2), (-2, 1)])
    def test_xx_matches_oracle(self, kernel, m, n):
        """Test <X_m, X_n>."""
        reduced = inner_XX(kernel, 1.0, m, n)
        oracle = inner_oracle(kernel, 1.0, ("X", m), ("X", n))
        scale = inner_XX(kernel, 1.0, m, m).real

        assert abs(reduced - oracle) <= 1e-4 * scale

    @pytest.mark.parametrize("m,n", [(1, 1), (2, -1), (0, 3)])
    def test_xy_matches_oracle(self, kernel, m, n):
        """Test <X_m, Y_n>."""
        reduced = inner_XY(kernel, 1.0, m, n)
        oracle = inner_oracle(kernel, 1.0, ("X", m), ("Y", n))
        scale = inner_XX(kernel, 1.0, m, m).real

        assert abs(reduced - oracle) <= 1e-4 * scale

    @pytest.mark.slow
    @pytest.mark.parametrize("m,n", list(product(range(-4, 5), repeat=2)))
    def test_all_small_pairs_match_oracle(self, kernel, m, n):
        """Test both cross blocks on every index pair with |m|, |n| <= 4."""
        scale = inner_XX(kernel, 1.0, m, m).real

        assert abs(inner_XX(kernel, 1.0, m, n) - inner_oracle(kernel, 1.0, ("X", m), ("X", n))) <= 1e-4 * scale
        assert abs(inner_XY(kernel, 1.0, m, n) - inner_oracle(kernel, 1.0, ("X", m), ("Y", n))) <= 1e-4 * scale

    def test_unknown_family(self, kernel):
        """Test that only X and Y are accepted."""
        with pytest.raises(ParameterError) as exc_info:
            inner_oracle(kernel, 1.0, ("Z", 0), ("X", 0))

        assert "basis family" in str(exc_info.value)


class TestDefectAndSpectrum:
    """Test cases for Hilbert-Schmidt defects and eigenvalues."""

    def test_truncations(self, gram):
        """Test the dyadic truncation ladder."""
        defect = hs_defect(gram)

        assert defect.truncations == [1, 2, 4, 8]
        assert defect.total == defect.partial_sums[-1]
        assert all(inc >= 0 for inc in defect.increments)

    def test_truncate_gram(self, gram):
        """Test that truncation keeps the leading structure."""
        small = truncate_gram(gram, 2)

        assert small.N == 2
        assert small.matrix.shape == (10, 10)
        np.testing.assert_array_equal(small.matrix, gram.truncated(2))
        assert min_eigenvalue(small) >= min_eigenvalue(gram) - 1e-12

    def test_truncation_out_of_range(self, gram):
        """Test that truncation beyond N is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            truncate_gram(gram, 9)

        assert "truncation must lie in" in str(exc_info.value)

    def test_eigensolve_failure(self, gram):
        """Test that solver failures become EigenSolveError."""
        with patch("noiselab.services.gram.linalg.eigvalsh", side_effect=linalg.LinAlgError("no convergence")):
            with pytest.raises(EigenSolveError) as exc_info:
                min_eigenvalue(gram)

        assert "Hermitian eigen solve failed" in str(exc_info.value)

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5])
    def test_large_gram_signatures(self, alpha):
        """Test the defect increments and the eigenvalue floor up to N = 128."""
        g = build_gram(make_kernel(alpha), 1.0, 128)
        defect = hs_defect(g)
        lowest = {n: min_eigenvalue(truncate_gram(g, n)) for n in defect.truncations}

        assert defect.truncations == [1, 2, 4, 8, 16, 32, 64, 128]
        tail = defect.increments[4:]
        assert all(b < a for a, b in zip(tail[:-1], tail[1:]))
        assert all(value > 0.02 for value in lowest.values())
        assert (lowest[32] - lowest[128]) / lowest[32] < 0.1


class TestDiagAsymptote:
    """Test cases for the diagonal norm asymptote."""

    def test_ratios_positive(self, kernel):
        """Test positivity of the normalized diagonal."""
        report = diag_asymptotic(kernel, 1.0, [100, 1000])

        assert len(report.ratios) == 2
        assert all(r > 0 for r in report.ratios)

    @pytest.mark.slow
    def test_ratios_approach_one(self, kernel):
        """Test that the normalized diagonal increases toward 1 on k = 1e3, 1e4, 1e5."""
        report = diag_asymptotic(kernel, 1.0, [1_000, 10_000, 100_000])

        assert report.ratios[0] < report.ratios[1] < report.ratios[2] < 1.0
        assert abs(report.ratios[-1] - 1.0) < 0.35

    def test_norm_even_in_index(self, kernel):
        """Test ||X_k||^2 = ||X_-k||^2."""
        tr = basis_transforms(kernel, 1.0, [7, -7, 300, -300])

        assert tr.diag[0] == pytest.approx(tr.diag[1], rel=1e-6)
        assert tr.diag[2] == pytest.approx(tr.diag[3], rel=1e-6)

    def test_small_index(self, kernel):
        """Test that |k| < 2 is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            diag_asymptotic(kernel, 1.0, [1, 100])

        assert "|k| >= 2" in str(exc_info.value)

    def test_transform_failure_is_wrapped(self, kernel):
        """Test that unexpected errors become quadrature errors."""
        with patch("noiselab.services.gram.weighted_transform", side_effect=RuntimeError("boom")):
            with pytest.raises(QuadratureError) as exc_info:
                basis_transforms(kernel, 1.0, [1, 2])

        assert "Failed to evaluate basis transforms" in str(exc_info.value)
