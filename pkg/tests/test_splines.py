import numpy as np
import pytest

from agckan.errors import InvalidArgumentError
from agckan.splines import SplineGrid, bspline_basis, fit_coefficients


def naive_de_boor(x, knots, k, i):
    """Textbook recursive Cox-de Boor for basis i of order k (independent oracle)."""
    if k == 0:
        return 1.0 if knots[i] <= x < knots[i + 1] else 0.0
    left = 0.0
    if knots[i + k] != knots[i]:
        left = (x - knots[i]) / (knots[i + k] - knots[i]) * naive_de_boor(x, knots, k - 1, i)
    right = 0.0
    if knots[i + k + 1] != knots[i + 1]:
        right = ((knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1])
                 * naive_de_boor(x, knots, k - 1, i + 1))
    return left + right


class TestAgainstOracle:
    def test_random_cases_match_naive(self):
        rng = np.random.default_rng(0)
        max_err = 0.0
        for _ in range(200):  # 200 grids x 50 points = 10^4 cases
            lo = rng.uniform(-5, 0)
            hi = lo + rng.uniform(0.5, 6)
            g = rng.integers(1, 9)
            k = rng.integers(1, 4)
            grid = SplineGrid(lo, hi, int(g), int(k))
            xs = rng.uniform(lo, hi - 1e-9, 50)
            b = grid.basis(xs)
            for row, x in zip(b, xs):
                for i in range(g + k):
                    ref = naive_de_boor(x, grid.knots, int(k), i)
                    max_err = max(max_err, abs(row[i] - ref))
        assert max_err < 1e-10

    def test_partition_of_unity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            lo = rng.uniform(-3, 0)
            hi = lo + rng.uniform(1, 5)
            grid = SplineGrid(lo, hi, int(rng.integers(1, 10)), int(rng.integers(0, 4)))
            xs = np.linspace(lo, hi, 101)
            sums = grid.basis(xs).sum(axis=1)
            assert np.max(np.abs(sums - 1.0)) < 1e-12


class TestDerivatives:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            grid = SplineGrid(-2.0, 2.0, int(rng.integers(2, 8)), int(rng.integers(1, 4)))
            xs = rng.uniform(-1.9, 1.9, 30)
            h = 1e-6
            fd = (grid.basis(xs + h) - grid.basis(xs - h)) / (2 * h)
            np.testing.assert_allclose(grid.basis_deriv(xs), fd, atol=1e-6)

    def test_order_zero_derivative_is_zero(self):
        grid = SplineGrid(0.0, 1.0, 4, 0)
        xs = np.linspace(0.05, 0.95, 10)
        assert np.max(np.abs(grid.basis_deriv(xs))) == 0.0


class TestExtrapolation:
    def test_linear_outside_range(self):
        grid = SplineGrid(-1.0, 1.0, 5, 3)
        # Outside [lo, hi] each basis continues linearly: second differences vanish.
        xs = np.array([1.5, 2.0, 2.5])
        b = grid.basis(xs)
        second_diff = b[2] - 2 * b[1] + b[0]
        assert np.max(np.abs(second_diff)) < 1e-12

    def test_continuous_at_boundary(self):
        grid = SplineGrid(-1.0, 1.0, 5, 3)
        inside = grid.basis(np.array([1.0 - 1e-9]))
        outside = grid.basis(np.array([1.0 + 1e-9]))
        assert np.max(np.abs(inside - outside)) < 1e-6


class TestOrderZeroIndicator:
    def test_indicator_bases(self):
        grid = SplineGrid(0.0, 1.0, 4, 0)
        b = grid.basis(np.array([0.1, 0.3, 0.6, 0.9]))
        expected = np.eye(4)
        np.testing.assert_allclose(b, expected)


class TestFitCoefficients:
    def test_linear_reproduction(self):
        grid = SplineGrid(-2.0, 2.0, 6, 3)
        xs = np.linspace(-2, 2, 200)
        coef = fit_coefficients(grid, xs, 0.7 * xs - 0.3)
        recon = grid.basis(xs) @ coef
        np.testing.assert_allclose(recon, 0.7 * xs - 0.3, atol=1e-10)

    def test_cubic_reproduction(self):
        grid = SplineGrid(-1.0, 1.0, 5, 3)
        xs = np.linspace(-1, 1, 300)
        ys = xs ** 3 - 0.5 * xs
        coef = fit_coefficients(grid, xs, ys)
        np.testing.assert_allclose(grid.basis(xs) @ coef, ys, atol=1e-10)


class TestValidation:
    def test_bad_grid(self):
        with pytest.raises(InvalidArgumentError):
            SplineGrid(1.0, 1.0, 5, 3)
        with pytest.raises(InvalidArgumentError):
            SplineGrid(0.0, 1.0, 0, 3)
        with pytest.raises(InvalidArgumentError):
            SplineGrid(0.0, 1.0, 5, -1)

    def test_bspline_basis_function(self):
        grid = SplineGrid(-3.0, 3.0, 5, 3)
        vec = bspline_basis(0.5, grid)
        assert vec.shape == (8,)
        assert vec.sum() == pytest.approx(1.0)

    def test_roundtrip(self):
        grid = SplineGrid(-2.0, 1.5, 7, 2)
        again = SplineGrid.from_dict(grid.to_dict())
        np.testing.assert_array_equal(again.knots, grid.knots)
