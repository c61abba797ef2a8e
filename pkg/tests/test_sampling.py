import numpy as np
import pytest

from freedrag.sampling import (Point2, aggregate, aggregate_point_grad,
                               aggregate_vjp, sample, sample_vjp)

from conftest import relative_error


def random_field(rng, H=12, W=14, C=3):
    return rng.standard_normal((H, W, C))


class TestSample:
    def test_integer_point_reads_cell(self, rng):
        F = random_field(rng)
        np.testing.assert_array_equal(sample(F, Point2(3, 5)), F[5, 3, :])

    def test_midpoint_averages_neighbors(self, rng):
        F = random_field(rng)
        expected = 0.5 * (F[5, 3, :] + F[5, 4, :])
        np.testing.assert_allclose(sample(F, Point2(3.5, 5.0)), expected)

    def test_constant_field_everywhere(self):
        F = np.full((8, 8, 2), 2.5)
        for p in [(0.3, 0.7), (3.14, 2.72), (6.9, 6.9)]:
            np.testing.assert_allclose(sample(F, p), [2.5, 2.5])

    def test_out_of_bounds_clamps_to_border(self, rng):
        F = random_field(rng)
        np.testing.assert_array_equal(sample(F, Point2(-5.0, 3.0)), F[3, 0, :])
        np.testing.assert_array_equal(sample(F, Point2(100.0, 100.0)), F[-1, -1, :])

    def test_non_finite_coordinates_rejected(self, rng):
        F = random_field(rng)
        with pytest.raises(ValueError):
            sample(F, Point2(float("nan"), 1.0))
        with pytest.raises(ValueError):
            sample(F, Point2(1.0, float("inf")))

    def test_single_row_map(self, rng):
        F = rng.standard_normal((1, 5, 2))
        np.testing.assert_allclose(sample(F, Point2(1.5, 0.0)),
                                   0.5 * (F[0, 1] + F[0, 2]))


class TestAggregate:
    def test_r0_equals_sample(self, rng):
        F = random_field(rng)
        p = Point2(4.3, 6.1)
        np.testing.assert_allclose(aggregate(F, p, 0), sample(F, p))

    def test_constant_field_counts_patch(self):
        F = np.full((16, 16, 2), 3.0)
        np.testing.assert_allclose(aggregate(F, Point2(8, 8), 3), [49 * 3.0] * 2)

    def test_integer_point_equals_grid_sum(self, rng):
        # brute-force oracle: direct 3x3 window sum off the grid
        F = random_field(rng)
        expected = F[4:7, 2:5, :].sum(axis=(0, 1))
        np.testing.assert_allclose(aggregate(F, Point2(3, 5), 1), expected)

    def test_negative_radius_rejected(self, rng):
        with pytest.raises(ValueError):
            aggregate(random_field(rng), Point2(3, 3), -1)

    def test_linearity_in_field(self, rng):
        F = random_field(rng)
        h = Point2(5.7, 4.2)
        np.testing.assert_allclose(aggregate(2.5 * F, h, 2),
                                   2.5 * aggregate(F, h, 2))

    def test_translation_consistency(self, rng):
        F = random_field(rng, H=16, W=16)
        shifted = np.roll(F, (2, 3), axis=(0, 1))
        h = Point2(6.4, 7.1)
        np.testing.assert_allclose(aggregate(shifted, Point2(h.x + 3, h.y + 2), 2),
                                   aggregate(F, h, 2))


class TestAggregateVjp:
    def test_r0_integer_point_is_delta(self):
        u = np.array([1.0, -2.0])
        cot = aggregate_vjp((6, 6, 2), Point2(2, 3), 0, u)
        expected = np.zeros((6, 6, 2))
        expected[3, 2] = u
        np.testing.assert_array_equal(cot, expected)

    def test_zero_cotangent(self, rng):
        cot = aggregate_vjp((5, 5, 3), Point2(2.2, 2.8), 1, np.zeros(3))
        np.testing.assert_array_equal(cot, 0)

    def test_matches_finite_differences(self, rng):
        # oracle: perturb every field entry, rel err < 1e-6
        F = random_field(rng, H=7, W=7, C=2)
        h = Point2(3.3, 2.6)
        u = rng.standard_normal(2)
        cot = aggregate_vjp(F.shape, h, 1, u)
        step = 1e-6
        fd = np.zeros_like(F)
        for idx in np.ndindex(F.shape):
            Fp = F.copy()
            Fp[idx] += step
            Fm = F.copy()
            Fm[idx] -= step
            fd[idx] = (aggregate(Fp, h, 1) @ u - aggregate(Fm, h, 1) @ u) / (2 * step)
        assert relative_error(cot, fd) < 1e-6

    def test_adjoint_identity(self, rng):
        # <u, aggregate(F)> == <aggregate_vjp(u), F> for random F, u
        F = random_field(rng)
        h = Point2(6.7, 5.1)
        u = rng.standard_normal(F.shape[2])
        lhs = float(aggregate(F, h, 2) @ u)
        rhs = float((aggregate_vjp(F.shape, h, 2, u) * F).sum())
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))

    def test_sample_vjp_is_r0(self, rng):
        F = random_field(rng)
        u = rng.standard_normal(F.shape[2])
        np.testing.assert_array_equal(sample_vjp(F.shape, Point2(2.4, 3.7), u),
                                      aggregate_vjp(F.shape, Point2(2.4, 3.7), 0, u))


class TestPointGradient:
    def test_matches_finite_differences_interior(self, rng):
        F = random_field(rng, H=16, W=16, C=2)
        for _ in range(5):
            h = Point2(float(rng.uniform(4.1, 10.9)), float(rng.uniform(4.1, 10.9)))
            if abs(h.x - round(h.x)) < 0.05 or abs(h.y - round(h.y)) < 0.05:
                continue  # bilinear kink at integer coordinates
            J = aggregate_point_grad(F, h, 2)
            step = 1e-6
            fdx = (aggregate(F, Point2(h.x + step, h.y), 2)
                   - aggregate(F, Point2(h.x - step, h.y), 2)) / (2 * step)
            fdy = (aggregate(F, Point2(h.x, h.y + step), 2)
                   - aggregate(F, Point2(h.x, h.y - step), 2)) / (2 * step)
            assert relative_error(J[:, 0], fdx) < 1e-6
            assert relative_error(J[:, 1], fdy) < 1e-6

    def test_zero_beyond_border(self, rng):
        F = random_field(rng)
        J = aggregate_point_grad(F, Point2(-10.0, -10.0), 1)
        np.testing.assert_array_equal(J, 0)
