"""Unit tests for the covariance kernel and its spectral density."""

from unittest.mock import patch

import numpy as np
import pytest

from noiselab.core.exceptions import DomainError, ParameterError, QuadratureError, ShapeError
from noiselab.core.quadrature import QuadResult, WeightPiece
from noiselab.models.schemas import TailContinuation
from noiselab.services.kernel import (
    closed_form,
    default_eps_cut,
    eval_B,
    interval_overlap,
    kernel_moments,
    kernel_values,
    make_kernel,
    second_primitive,
    shape_report,
    spectral_densities,
    spectral_density,
    tail_polynomial,
    weighted_transform,
)


class TestMakeKernel:
    """Test cases for kernel construction."""

    @pytest.fixture
    def kernel(self):
        """Default alpha = 2 kernel."""
        return make_kernel(2.0)

    def test_default_cutoff(self, kernel):
        """Test the default cutoff exp(-(alpha + 2))."""
        assert kernel.eps_cut == pytest.approx(np.exp(-4.0))
        assert default_eps_cut(3.0) == pytest.approx(np.exp(-5.0))

    def test_tangent_support(self, kernel):
        """Test that the tangent at eps_cut hits zero at eps/(1 - alpha/L) past the cut."""
        L = -np.log(kernel.eps_cut)
        expected = kernel.eps_cut + kernel.eps_cut / (1.0 - 2.0 / L)

        assert kernel.t_zero == pytest.approx(expected, rel=1e-12)
        assert kernel.t_zero < 1.0

    def test_quadratic_support_is_longer(self, kernel):
        """Test that the quadratic tail reaches twice as far past the cut."""
        quad = make_kernel(2.0, continuation=TailContinuation.QUADRATIC)

        assert quad.t_zero - quad.eps_cut == pytest.approx(2.0 * (kernel.t_zero - kernel.eps_cut))

    def test_alpha_not_above_one(self):
        """Test that alpha <= 1 is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            make_kernel(1.0)

        assert "alpha must exceed 1" in str(exc_info.value)

    def test_cutoff_past_monotone_region(self):
        """Test that eps_cut >= exp(-alpha) is a shape error."""
        with pytest.raises(ShapeError) as exc_info:
            make_kernel(2.0, eps_cut=0.2)

        assert exc_info.value.error_code == "KERNEL_NOT_DECREASING"

    def test_bad_horizon(self):
        """Test that a non-positive horizon is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            make_kernel(2.0, T=0.0)

        assert "support_T must be positive" in str(exc_info.value)


class TestKernelValues:
    """Test cases for pointwise evaluation."""

    @pytest.fixture(params=[TailContinuation.TANGENT, TailContinuation.QUADRATIC])
    def kernel(self, request):
        """Kernels with both continuations."""
        return make_kernel(2.0, continuation=request.param)

    def test_continuous_at_cutoff(self, kernel):
        """Test that the tail starts at the closed-form value."""
        tail = tail_polynomial(kernel)

        assert tail(kernel.eps_cut) == pytest.approx(float(closed_form(np.array(kernel.eps_cut), 2.0)))

    def test_even_and_compact(self, kernel):
        """Test symmetry and vanishing beyond t_zero."""
        t = np.array([1e-6, 1e-3, 0.5 * (kernel.eps_cut + kernel.t_zero)])

        np.testing.assert_array_equal(kernel_values(kernel, t), kernel_values(kernel, -t))
        assert eval_B(kernel, kernel.t_zero * 1.01) == 0.0
        assert eval_B(kernel, 0.9) == 0.0

    def test_singular_at_zero(self, kernel):
        """Test that t = 0 raises a domain error."""
        with pytest.raises(DomainError) as exc_info:
            eval_B(kernel, 0.0)

        assert "singular" in str(exc_info.value)

    def test_shape_report(self, kernel):
        """Test the grid shape witness and spectral positivity."""
        report = shape_report(kernel, n_grid=2000)

        assert report.positive and report.decreasing and report.convex
        assert report.passed

    def test_shape_report_flags_non_convex_profile(self, kernel):
        """Test that a concave profile fails the convexity witness."""
        with patch(
            "noiselab.services.kernel.kernel_values",
            side_effect=lambda k, t, *args, **kwargs: np.exp(-np.asarray(t) ** 2),
        ):
            report = shape_report(kernel, n_grid=2000)

        assert report.positive and report.decreasing
        assert not report.convex
        assert not report.passed

    def test_grid_matches_closed_form_near_zero(self, kernel):
        """Test B = 1/(t ln^alpha(1/t)) on the singular part of the grid."""
        t = np.geomspace(kernel.eps_cut * 1e-8, kernel.eps_cut, 500)

        np.testing.assert_allclose(kernel_values(kernel, t), closed_form(t, kernel.alpha), rtol=1e-12)
        assert eval_B(kernel, float(t[7])) == pytest.approx(float(closed_form(t[7], kernel.alpha)), rel=1e-12)


class TestPrimitives:
    """Test cases for the closed-form moments and the second primitive."""

    @pytest.fixture
    def kernel(self):
        """Default alpha = 2 kernel."""
        return make_kernel(2.0)

    @pytest.mark.parametrize("x", [1e-3, 0.01, 0.03, 0.05])
    def test_moment_derivatives(self, kernel, x):
        """Test K' = B and M1' = t B by central differences."""
        h = 1e-7
        K, M1 = kernel_moments(kernel, np.array([x - h, x + h]))
        B = eval_B(kernel, x)

        assert (K[1] - K[0]) / (2 * h) == pytest.approx(B, rel=1e-5)
        assert (M1[1] - M1[0]) / (2 * h) == pytest.approx(x * B, rel=1e-5)

    def test_moments_constant_beyond_support(self, kernel):
        """Test that K and M1 stop growing at t_zero."""
        K, M1 = kernel_moments(kernel, np.array([kernel.t_zero, 0.5, 1.0]))

        assert K[1] == K[0] and K[2] == K[0]
        assert M1[1] == M1[0] and M1[2] == M1[0]

    def test_second_primitive_curvature(self, kernel):
        """Test S00'' = B on the tail."""
        x, h = 0.03, 1e-4
        S = second_primitive(kernel, np.array([x - h, x, x + h]))

        assert (S[0] - 2 * S[1] + S[2]) / h ** 2 == pytest.approx(eval_B(kernel, x), rel=1e-3)

    def test_second_primitive_even_with_zero_origin(self, kernel):
        """Test S00(0) = 0 and evenness."""
        S = second_primitive(kernel, np.array([0.0, 0.2, -0.2]))

        assert S[0] == 0.0
        assert S[1] == S[2]

    def test_unit_overlap(self, kernel):
        """Test that the self overlap of (0, 1) is 2 S00(1)."""
        overlap = interval_overlap(kernel, 0.0, 1.0, 0.0, 1.0)

        assert overlap == pytest.approx(2.0 * second_primitive(kernel, np.array([1.0]))[0])
        assert overlap > 0

    def test_overlap_symmetric(self, kernel):
        """Test that swapping the intervals leaves the overlap unchanged."""
        a = interval_overlap(kernel, 0.1, 0.2, 0.15, 0.4)
        b = interval_overlap(kernel, 0.15, 0.4, 0.1, 0.2)

        assert a == pytest.approx(b, rel=1e-12)


class TestSpectralDensity:
    """Test cases for the spectral density."""

    @pytest.fixture
    def kernel(self):
        """Default alpha = 2 kernel."""
        return make_kernel(2.0)

    def test_zero_frequency_is_total_mass(self, kernel):
        """Test B_hat(0) = 2 int_0^t_zero B."""
        K, _ = kernel_moments(kernel, np.array([kernel.t_zero]))

        assert spectral_density(kernel, 0.0) == pytest.approx(2.0 * K[0], rel=1e-10)

    def test_even_and_nonnegative(self, kernel):
        """Test evenness and positivity on a few frequencies."""
        lams = np.array([1.0, 10.0, 100.0, 1000.0])
        values = spectral_densities(kernel, lams)

        np.testing.assert_allclose(values, spectral_densities(kernel, -lams), rtol=1e-10)
        assert np.all(values > 0)

    def test_decreasing_at_high_frequency(self, kernel):
        """Test the slow logarithmic decay."""
        values = spectral_densities(kernel, np.array([1e3, 1e5]))

        assert values[1] < values[0]

    def test_non_finite_frequency(self, kernel):
        """Test that infinite lambda is rejected."""
        with pytest.raises(ParameterError) as exc_info:
            spectral_density(kernel, np.inf)

        assert "finite" in str(exc_info.value)

    def test_tolerance_miss_raises(self, kernel):
        """Test that a large error estimate becomes a quadrature error."""
        fake = QuadResult(np.ones(1, dtype=complex), np.ones(1))
        with patch("noiselab.services.kernel._transform_batch", return_value=fake):
            with pytest.raises(QuadratureError) as exc_info:
                weighted_transform(kernel, np.array([10.0]), [WeightPiece(0.0, 1.0, 1.0, 0.0)])

        assert exc_info.value.error_code == "QUAD_TOLERANCE"
        assert "missed tolerance" in str(exc_info.value)
