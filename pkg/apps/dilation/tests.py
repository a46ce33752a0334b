import math

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidInput, InvalidParameter
from apps.field.grid import GridSpec

from .geometry import (
    DilationGroup,
    RhoBall,
    euclidean_ball_volume,
    polar_integral,
    rho_distance_to_complement,
    unit_ball_measure,
)

PARABOLIC = DilationGroup((1, 2))
EUCLIDEAN = DilationGroup((1, 1))


def random_points(rng, count, dimension=2):
    # several orders of magnitude, so both the small and the large regime of rho are hit
    directions = rng.standard_normal((count, dimension))
    scales = 10.0 ** rng.uniform(-2, 2, size=(count, 1))
    return directions * scales


class DilationGroupTests(SimpleTestCase):
    def test_exponents_below_one_rejected(self):
        with self.assertRaises(InvalidParameter):
            DilationGroup((0.5, 2))

    def test_gamma_is_trace(self):
        self.assertEqual(PARABOLIC.gamma, 3.0)
        self.assertGreaterEqual(DilationGroup((1, 1.5, 2.25)).gamma, 3)

    def test_apply(self):
        np.testing.assert_allclose(PARABOLIC.apply(1, (3, 4)), (3, 4))
        np.testing.assert_allclose(PARABOLIC.apply(2, (1, 1)), (2, 4))
        np.testing.assert_allclose(EUCLIDEAN.apply(3, (1, 2)), (3, 6))

    def test_apply_nonpositive_t(self):
        with self.assertRaises(InvalidParameter):
            PARABOLIC.apply(0, (1, 1))

    def test_from_config(self):
        group = DilationGroup.from_config({"exponents": [1, 2], "root_tolerance": 1e-10})
        self.assertEqual(group.exponents, (1.0, 2.0))
        self.assertEqual(group.root_tolerance, 1e-10)


class RhoTests(SimpleTestCase):
    def test_axis_points(self):
        self.assertAlmostEqual(PARABOLIC.rho((3, 0)), 3.0, places=12)
        self.assertAlmostEqual(PARABOLIC.rho((0, 4)), 2.0, places=12)

    def test_golden_ratio_point(self):
        expected = math.sqrt((1 + math.sqrt(5)) / 2)
        self.assertAlmostEqual(PARABOLIC.rho((1, 1)), expected, places=11)
        self.assertAlmostEqual(expected, 1.27202, places=5)

    def test_origin(self):
        self.assertEqual(PARABOLIC.rho((0, 0)), 0.0)

    def test_non_finite(self):
        with self.assertRaises(InvalidInput):
            PARABOLIC.rho((np.nan, 1.0))

    def test_isotropic_reduction(self):
        x = random_points(np.random.default_rng(1), 100_000)
        norms = np.linalg.norm(x, axis=1)
        err = np.abs(EUCLIDEAN.rho(x) - norms)
        self.assertLessEqual(float(np.max(err / (1 + norms))), 1e-10)

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        x = random_points(rng, 100_000)
        t = 10.0 ** rng.uniform(-2, 2, size=100_000)
        lhs = PARABOLIC.rho(x * np.power(t[:, None], PARABOLIC.a))
        rhs = t * PARABOLIC.rho(x)
        self.assertLessEqual(float(np.max(np.abs(lhs - rhs) / rhs)), 1e-9)

    def test_quasi_triangle(self):
        rng = np.random.default_rng(3)
        x = random_points(rng, 100_000)
        y = random_points(rng, 100_000)
        excess = PARABOLIC.rho(x + y) - PARABOLIC.rho(x) - PARABOLIC.rho(y)
        self.assertLessEqual(float(np.max(excess)), 1e-9)

    def test_unit_ball_properties(self):
        x = random_points(np.random.default_rng(4), 100_000)
        rho = PARABOLIC.rho(x)
        norm = np.linalg.norm(x, axis=1)
        inner = norm <= 1
        clear = np.abs(norm - 1) > 1e-9
        np.testing.assert_array_equal((rho <= 1)[clear], inner[clear])
        self.assertTrue(np.all(norm[inner] <= rho[inner] + 1e-9))
        self.assertTrue(np.all(norm[~inner] >= rho[~inner] - 1e-9))

    def test_vectorised_shape(self):
        self.assertEqual(PARABOLIC.rho(np.ones((3, 5, 2))).shape, (3, 5))


class PolarTests(SimpleTestCase):
    def test_polar_weight_values(self):
        self.assertAlmostEqual(EUCLIDEAN.polar_weight((0.6, 0.8)), 1.0)
        self.assertAlmostEqual(PARABOLIC.polar_weight((0, 1)), 2.0)
        self.assertAlmostEqual(PARABOLIC.polar_weight((1, 0)), 1.0)

    def test_polar_weight_rejects_non_unit(self):
        with self.assertRaises(InvalidInput):
            PARABOLIC.polar_weight((1, 1))

    def test_sphere_integral_of_weight(self):
        angles = 2 * math.pi * np.arange(1024) / 1024
        theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        total = float(np.mean(PARABOLIC.polar_weight(theta))) * 2 * math.pi
        self.assertLessEqual(abs(total - 3 * math.pi) / (3 * math.pi), 1e-6)

    def test_unit_ball_measure_is_pi(self):
        for group in (EUCLIDEAN, PARABOLIC):
            self.assertLessEqual(abs(unit_ball_measure(group) - math.pi) / math.pi, 1e-4)

    def test_polar_integral_of_annulus(self):
        area = polar_integral(PARABOLIC, lambda y, r: np.ones(y.shape[:-1]), 0.5, 1.0)
        self.assertAlmostEqual(area, math.pi * (1 - 0.5 ** 3), places=8)

    def test_polar_integral_of_gaussian(self):
        value = polar_integral(
            PARABOLIC, lambda y, r: np.exp(-math.pi * np.sum(y ** 2, axis=-1)), 1e-3, 40.0
        )
        self.assertAlmostEqual(value, 1.0, places=5)


class BallTests(SimpleTestCase):
    def test_ball_volume(self):
        self.assertAlmostEqual(PARABOLIC.ball_volume(1), math.pi)
        self.assertAlmostEqual(PARABOLIC.ball_volume(2), 8 * math.pi)
        self.assertAlmostEqual(EUCLIDEAN.ball_volume(0.5), math.pi / 4)
        self.assertAlmostEqual(euclidean_ball_volume(3), 4 * math.pi / 3)

    def test_ball_volume_rejects_nonpositive(self):
        with self.assertRaises(InvalidParameter):
            PARABOLIC.ball_volume(0)

    def test_rasterized_ball_measure(self):
        grid = GridSpec((256, 256), (8.0, 8.0))
        mask = RhoBall((0.0, 0.0), 1.5).rasterize(PARABOLIC, grid)
        measured = mask.sum() * grid.cell_volume
        self.assertAlmostEqual(measured / PARABOLIC.ball_volume(1.5), 1.0, delta=0.02)

    def test_cell_indices_match_brute_force(self):
        grid = GridSpec((64, 64), (8.0, 8.0))
        ball = RhoBall((0.3, -0.7), 1.1)
        brute = np.flatnonzero(PARABOLIC.rho(grid.points() - np.asarray(ball.center)) < 1.1)
        np.testing.assert_array_equal(np.sort(ball.cell_indices(PARABOLIC, grid)), brute)

    def test_covering_factor(self):
        self.assertAlmostEqual(EUCLIDEAN.covering_factor(), math.sqrt(2))


class DistanceTests(SimpleTestCase):
    def test_point_in_complement(self):
        grid = GridSpec((64, 64), (8.0, 8.0))
        mask = np.linalg.norm(grid.points(), axis=-1) < 1
        self.assertEqual(rho_distance_to_complement(EUCLIDEAN, (3.0, 3.0), mask, grid), 0.0)

    def test_euclidean_disk(self):
        grid = GridSpec((64, 64), (8.0, 8.0))
        mask = np.linalg.norm(grid.points(), axis=-1) < 1
        distance = rho_distance_to_complement(EUCLIDEAN, (0.0, 0.0), mask, grid)
        self.assertAlmostEqual(distance, 1.0, delta=grid.cell_rho_diameter(EUCLIDEAN))

    def test_parabolic_ball(self):
        grid = GridSpec((64, 64), (16.0, 16.0))
        mask = PARABOLIC.rho(grid.points()) < 2
        distance = rho_distance_to_complement(PARABOLIC, (0.0, 0.0), mask, grid)
        self.assertAlmostEqual(distance, 2.0, delta=grid.cell_rho_diameter(PARABOLIC))

    def test_empty_complement(self):
        grid = GridSpec((8, 8), (1.0, 1.0))
        with self.assertRaises(InvalidInput):
            rho_distance_to_complement(PARABOLIC, (0.0, 0.0), np.ones((8, 8), bool), grid)
