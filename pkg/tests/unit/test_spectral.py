"""Unit tests for the corrected kernels and their half-line transforms."""

import numpy as np
import pytest

from noiselab.core.exceptions import ParameterError
from noiselab.models.schemas import CorrectionKind, TailContinuation
from noiselab.services.kernel import eval_B, kernel_moments, make_kernel, spectral_densities
from noiselab.services.spectral import (
    asymptote_check,
    continuation_gap,
    eval_corrected,
    finite_difference_gap,
    fourier_halfline,
    halfline_transform,
    hypothesis_report,
    lambda_grid,
    make_corrected,
    moment_bound,
)


@pytest.fixture
def kernel():
    """Default alpha = 2 kernel."""
    return make_kernel(2.0)


class TestCorrectedKernel:
    """Test cases for the hat-corrected kernels b1 and b2."""

    def test_no_correction_beyond_support(self, kernel):
        """Test that T = 1 past t_zero needs no correction."""
        b = make_corrected(kernel, 1.0)

        assert b.jump == 0.0
        assert b.kind is CorrectionKind.B1

    @pytest.mark.parametrize("kind", [CorrectionKind.B1, CorrectionKind.B2])
    def test_continuous_at_horizon(self, kernel, kind):
        """Test continuity at T and vanishing from 2T on."""
        T = 0.02
        b = make_corrected(kernel, T, kind)
        left, right = eval_corrected(b, np.array([T * (1 - 1e-10), T * (1 + 1e-10)]))

        assert left == pytest.approx(right, rel=1e-6, abs=1e-9)
        assert eval_corrected(b, np.array([3.0 * T]))[0] == 0.0

    def test_b1_jump_is_kernel_value(self, kernel):
        """Test that the b1 hat height is B(T)."""
        b = make_corrected(kernel, 0.02)

        assert b.jump == pytest.approx(eval_B(kernel, 0.02))

    def test_unknown_kind(self, kernel):
        """Test that an unknown kind is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            make_corrected(kernel, 1.0, "b3")

        assert "Unknown corrected kernel kind" in str(exc_info.value)

    def test_non_positive_horizon(self, kernel):
        """Test that T <= 0 is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            make_corrected(kernel, -1.0)

        assert "T must be positive" in str(exc_info.value)

    def test_evaluation_domain(self, kernel):
        """Test that t <= 0 is rejected."""
        b = make_corrected(kernel, 1.0)
        with pytest.raises(ParameterError) as exc_info:
            eval_corrected(b, np.array([0.0, 0.1]))

        assert "t > 0" in str(exc_info.value)


class TestHalflineTransform:
    """Test cases for b_hat and its derivative."""

    def test_zero_frequency_is_integral(self, kernel):
        """Test b_hat(0) = int_0^inf B when T is past the support."""
        b = make_corrected(kernel, 1.0)
        K, _ = kernel_moments(kernel, np.array([kernel.t_zero]))

        assert halfline_transform(b, np.array([0.0]))[0].real == pytest.approx(K[0], rel=1e-8)

    def test_real_part_is_half_the_density(self, kernel):
        """Test Re b_hat = B_hat / 2 when b1 equals B on (0, inf)."""
        b = make_corrected(kernel, 1.0)
        lams = np.array([10.0, 1e3, 1e5])

        np.testing.assert_allclose(
            halfline_transform(b, lams).real, 0.5 * spectral_densities(kernel, lams), rtol=1e-8
        )

    def test_positive_frequency_only(self, kernel):
        """Test that fourier_halfline needs lam > 0."""
        b = make_corrected(kernel, 1.0)
        with pytest.raises(ParameterError) as exc_info:
            fourier_halfline(b, 0.0)

        assert "lambda must be positive" in str(exc_info.value)

    @pytest.mark.parametrize("lam", [1e3, 1e4])
    def test_derivative_matches_finite_difference(self, kernel, lam):
        """Test the moment derivative against a central difference."""
        b = make_corrected(kernel, 1.0)

        assert finite_difference_gap(b, lam) < 1e-4

    def test_trivial_bound(self, kernel):
        """Test |b_hat| <= int |b|."""
        b = make_corrected(kernel, 0.02)
        bound = moment_bound(b)

        assert bound > 0
        assert abs(halfline_transform(b, np.array([1e3]))[0]) <= bound


class TestAsymptoteCheck:
    """Test cases for the logarithmic asymptote report."""

    def test_lambda_grid(self):
        """Test the default log grid."""
        grid = lambda_grid(2, 7, 8)

        assert grid.size == 41
        assert grid[0] == pytest.approx(1e2)
        assert grid[-1] == pytest.approx(1e7)

    def test_grid_out_of_range(self, kernel):
        """Test that lambdas beyond 1e7 are rejected."""
        with pytest.raises(ParameterError) as exc_info:
            asymptote_check(kernel, 1.0, [1e3, 1e8])

        assert "lambda grid must lie within" in str(exc_info.value)

    def test_grid_not_increasing(self, kernel):
        """Test that an unsorted grid is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            asymptote_check(kernel, 1.0, [1e4, 1e3])

        assert "strictly increasing" in str(exc_info.value)

    def test_ratio_near_one_at_high_frequency(self, kernel):
        """Test that the value ratio is within a quarter of 1 at 1e6."""
        report = asymptote_check(kernel, 1.0, [1e3, 1e4, 1e5, 1e6])

        assert len(report.ratio_value) == 4
        assert all(r > 0 for r in report.ratio_value)
        assert abs(report.ratio_value[-1] - 1.0) <= 0.25
        assert report.final_deviation == pytest.approx(abs(report.ratio_value[-1] - 1.0))

    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_deviation_decreases_with_frequency(self, alpha):
        """Test that |ratio - 1| shrinks monotonically over 1e3..1e6."""
        report = asymptote_check(make_kernel(alpha), 1.0, [1e3, 1e4, 1e5, 1e6])
        deviation = [abs(r - 1.0) for r in report.ratio_value]

        assert all(b < a for a, b in zip(deviation[:-1], deviation[1:]))

    @pytest.mark.slow
    def test_continuation_choice_fades_with_frequency(self, kernel):
        """Test that the tangent and quadratic tails give ratios within 20/lambda."""
        lams = np.array([1e3, 1e4, 1e5, 1e6])
        quadratic = make_kernel(2.0, eps_cut=kernel.eps_cut, continuation=TailContinuation.QUADRATIC)
        gap = continuation_gap(kernel, quadratic, 1.0, lams)

        assert gap.shape == (4,)
        assert np.all(gap * lams <= 20.0)

    def test_continuation_needs_common_germ(self, kernel):
        """Test that continuations with different alpha are rejected."""
        with pytest.raises(ParameterError) as exc_info:
            continuation_gap(kernel, make_kernel(2.5), 1.0, [1e3])

        assert "share alpha and eps_cut" in str(exc_info.value)


class TestHypothesisReport:
    """Test cases for the regularity hypotheses."""

    @pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5])
    def test_hypotheses_hold(self, alpha):
        """Test the monotone correction and the finite variation of tB."""
        report = hypothesis_report(make_kernel(alpha), n_grid=2000)

        assert report.psi_increasing
        assert np.isfinite(report.tb_variation) and report.tb_variation > 0
        assert report.passed

    def test_small_grid(self, kernel):
        """Test that tiny grids are rejected."""
        with pytest.raises(ParameterError) as exc_info:
            hypothesis_report(kernel, n_grid=10)

        assert "at least 100" in str(exc_info.value)
