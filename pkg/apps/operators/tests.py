import math

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from apps.core.exceptions import InvalidParameter, MeanNotRemoved
from apps.dilation.geometry import DilationGroup, RhoBall
from apps.field.grid import (
    GridSpec,
    SampledField,
    SpectralField,
    forward_transform,
    frequency_rho,
    lp_norm,
    make_band_limited,
    plane_wave,
    translate,
)

from .maximal import hl_maximal, m_s, maximal_constants, rectangle_half_widths
from .multipliers import (
    lp_block,
    poisson_semigroup,
    q_semigroup,
    riesz_potential,
    subordination,
)
from .partition import LPPartition, phi, phi_tilde, smooth_step
from .square import (
    DyadicQuadrature,
    DyadicRange,
    g_q,
    l2_constant,
    marcinkiewicz_d_alpha,
    mean_value_constant,
    t_j_square_function,
)
from .wfunction import w_alpha, w_alpha_closed_log_integral, w_alpha_log_integral

PARABOLIC = DilationGroup((1, 2))
EUCLIDEAN = DilationGroup((1, 1))
BAND_GRID = GridSpec.square(256, 16.0)


def relative_l2(a, b):
    return lp_norm(a - b, 2) / lp_norm(b, 2)


class PartitionTests(SimpleTestCase):
    def test_smooth_step_ends(self):
        np.testing.assert_array_equal(smooth_step([0.0, 1.0, 2.0, 3.0]), [1.0, 1.0, 0.0, 0.0])
        self.assertTrue(np.all(np.diff(smooth_step(np.linspace(0, 3, 301))) <= 0))

    def test_phi_support(self):
        r = np.linspace(0, 5, 5001)
        values = phi(r)
        self.assertTrue(np.all(values >= 0))
        self.assertFalse(np.any(values[(r <= 0.5) | (r >= 2)]))

    def test_phi_tilde_is_one_on_phi_support(self):
        r = np.linspace(0.5, 2, 301)
        np.testing.assert_allclose(phi_tilde(r), 1.0, atol=1e-15)

    def test_partition_of_unity(self):
        self.assertLess(LPPartition(-3, 3).unity_defect(), 1e-12)

    def test_covering(self):
        part = LPPartition.covering(1.0, 2.0)
        self.assertEqual((part.j_min, part.j_max), (-1, 0))

    def test_empty_range(self):
        with self.assertRaises(InvalidParameter):
            LPPartition(2, 1)


class RieszTests(SimpleTestCase):
    def test_plane_wave_eigenfunction(self):
        grid = GridSpec.square(64, 8.0)
        f, xi0 = plane_wave(grid, (3, 2))
        out = riesz_potential(f, PARABOLIC, 0.5)
        factor = (2 * math.pi * PARABOLIC.rho(xi0)) ** -0.5
        np.testing.assert_allclose(out.values, factor * f.values, atol=1e-12)

    def test_composition(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=1)
        twice = riesz_potential(riesz_potential(eta, PARABOLIC, 0.3), PARABOLIC, 0.4)
        once = riesz_potential(eta, PARABOLIC, 0.7)
        self.assertLess(relative_l2(twice, once), 1e-10)

    def test_norm_range_on_annulus(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=2)
        norm = lp_norm(riesz_potential(eta, PARABOLIC, 0.5), 2)
        self.assertGreaterEqual(norm, (2 * math.pi * 2) ** -0.5)
        self.assertLessEqual(norm, (2 * math.pi) ** -0.5)

    def test_mean_not_removed(self):
        grid = GridSpec.square(32, 4.0)
        with self.assertRaises(MeanNotRemoved) as caught:
            riesz_potential(SampledField(grid, np.ones(grid.shape)), PARABOLIC, 0.5)
        self.assertAlmostEqual(caught.exception.measured, 16.0)

    def test_alpha_range(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=2)
        with self.assertRaises(InvalidParameter):
            riesz_potential(eta, PARABOLIC, 3.0)


class SemigroupTests(SimpleTestCase):
    def setUp(self):
        self.eta = make_band_limited(BAND_GRID, PARABOLIC, seed=3)

    def test_semigroup_law(self):
        spectrum = forward_transform(self.eta)
        for t in (0.25, 1, 4):
            for s in (0.25, 1, 4):
                twice = poisson_semigroup(poisson_semigroup(spectrum, PARABOLIC, s), PARABOLIC, t)
                once = poisson_semigroup(spectrum, PARABOLIC, t + s)
                self.assertIsInstance(twice, SpectralField)
                difference = np.linalg.norm(twice.coefficients - once.coefficients)
                self.assertLess(difference, 1e-8 * np.linalg.norm(once.coefficients))

    def test_semigroup_law_in_real_space(self):
        # K_(4.25) eta is ~1e-12 of eta, so the composition is compared against ||eta||_2
        twice = poisson_semigroup(poisson_semigroup(self.eta, PARABOLIC, 0.25), PARABOLIC, 4)
        once = poisson_semigroup(self.eta, PARABOLIC, 4.25)
        self.assertLess(lp_norm(twice - once, 2), 1e-12 * lp_norm(self.eta, 2))

    def test_small_t_limit(self):
        errors = [lp_norm(poisson_semigroup(self.eta, PARABOLIC, t) - self.eta, 2)
                  for t in (1.0, 0.1, 0.01, 0.001)]
        self.assertTrue(all(a > b for a, b in zip(errors, errors[1:])))
        self.assertLess(errors[-1], 0.02)

    def test_constant_preserved(self):
        grid = GridSpec.square(32, 4.0)
        const = SampledField(grid, np.full(grid.shape, 2.5))
        np.testing.assert_allclose(poisson_semigroup(const, PARABOLIC, 1.0).values, 2.5)
        np.testing.assert_allclose(q_semigroup(const, PARABOLIC, 1.0).values, 0.0, atol=1e-14)

    def test_nonpositive_t(self):
        with self.assertRaises(InvalidParameter):
            poisson_semigroup(self.eta, PARABOLIC, 0.0)
        with self.assertRaises(InvalidParameter):
            q_semigroup(self.eta, PARABOLIC, -1.0)

    def test_q_is_t_derivative_of_k(self):
        t = 0.5
        h = 1e-4 * t
        difference = (poisson_semigroup(self.eta, PARABOLIC, t + h)
                      - poisson_semigroup(self.eta, PARABOLIC, t - h)) * (1 / (2 * h))
        expected = q_semigroup(self.eta, PARABOLIC, t) * (1 / t)
        self.assertLess(relative_l2(difference, expected), 1e-6)

    def test_q_plane_wave(self):
        grid = GridSpec.square(64, 8.0)
        f, xi0 = plane_wave(grid, (1, 4))
        u = 2 * math.pi * 0.7 * PARABOLIC.rho(xi0)
        np.testing.assert_allclose(q_semigroup(f, PARABOLIC, 0.7).values,
                                   -u * math.exp(-u) * f.values, atol=1e-12)


class WAlphaTests(SimpleTestCase):
    def test_examples(self):
        self.assertAlmostEqual(w_alpha(0.5, 2.0, 3.0), math.sqrt(2) / 0.5)
        self.assertEqual(w_alpha(0.5, 2.0, 0.0), 0.0)
        self.assertAlmostEqual(w_alpha(0.5, 4.0, 1.0), 2 * (2 - math.sqrt(3)), places=12)
        self.assertAlmostEqual(w_alpha(0.5, 4.0, 1.0), 0.535898, places=6)

    def test_matches_defining_integral(self):
        for alpha, t, s in ((0.3, 2.0, 0.7), (0.7, 1.5, 1.2), (0.5, 3.0, 5.0)):
            value, _ = integrate.quad(lambda u: (t - u) ** (alpha - 1), 0, min(t, s))
            self.assertAlmostEqual(w_alpha(alpha, t, s), value, places=7)

    def test_nonnegative(self):
        t, s = np.meshgrid(np.linspace(0, 5, 41), np.linspace(0, 5, 41))
        self.assertTrue(np.all(w_alpha(0.3, t, s) >= 0))

    def test_alpha_range(self):
        with self.assertRaises(InvalidParameter):
            w_alpha(1.0, 1.0, 1.0)

    def test_log_integral(self):
        for alpha in (0.3, 0.5, 0.7):
            result = w_alpha_log_integral(alpha)
            self.assertLess(result.tail_bound, 1e-6)
            self.assertAlmostEqual(result.value, w_alpha_closed_log_integral(alpha), delta=2e-6)


class SubordinationTests(SimpleTestCase):
    def test_plane_wave(self):
        grid = GridSpec.square(64, 8.0)
        f, xi0 = plane_wave(grid, (2, 1))
        rho0 = PARABOLIC.rho(xi0)
        expected = (2 * math.pi * rho0) ** -0.5 * math.exp(-2 * math.pi * rho0) * f.values
        np.testing.assert_allclose(subordination(f, PARABOLIC, 0.5, 1.0).values, expected, atol=1e-8)

    def test_matches_semigroup_of_potential(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=4)
        for alpha in (0.3, 0.5, 0.7):
            potential = riesz_potential(eta, PARABOLIC, alpha)
            for t in (0.5, 1, 2):
                direct = poisson_semigroup(potential, PARABOLIC, t)
                quadrature = subordination(eta, PARABOLIC, alpha, t)
                self.assertLess(relative_l2(quadrature, direct), 1e-3)

    def test_large_t_damps(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=4)
        out = subordination(eta, PARABOLIC, 0.5, 30 / (2 * math.pi))
        self.assertLess(lp_norm(out, np.inf), 1e-10)

    def test_mean_not_removed(self):
        grid = GridSpec.square(32, 4.0)
        with self.assertRaises(MeanNotRemoved):
            subordination(SampledField(grid, np.ones(grid.shape)), PARABOLIC, 0.5, 1.0)


class BlockTests(SimpleTestCase):
    def setUp(self):
        self.eta = make_band_limited(BAND_GRID, PARABOLIC, seed=5)

    def test_blocks_sum_to_identity(self):
        part = LPPartition.covering(1.0, 2.0)
        total = SampledField.zeros(BAND_GRID)
        for j in part.indices:
            total = total + lp_block(self.eta, PARABOLIC, j, part)
        self.assertLess(lp_norm(total - self.eta, 2), 1e-10)

    def test_distant_blocks_are_orthogonal(self):
        part = LPPartition(-2, 2)
        piece = lp_block(lp_block(self.eta, PARABOLIC, 1, part), PARABOLIC, -1, part)
        self.assertLess(lp_norm(piece, np.inf), 1e-12)

    def test_block_support(self):
        part = LPPartition(-2, 2)
        coefficients = np.abs(forward_transform(lp_block(self.eta, PARABOLIC, 0, part)).coefficients)
        rho = frequency_rho(BAND_GRID, PARABOLIC)
        outside = (rho < 0.5) | (rho > 2)
        self.assertLess(coefficients[outside].max(), 1e-12 * coefficients.max())

    def test_unresolved_block(self):
        with self.assertRaises(InvalidParameter):
            lp_block(self.eta, PARABOLIC, -3, LPPartition(-3, 0))


class DyadicQuadratureTests(SimpleTestCase):
    def test_default_range(self):
        grid = GridSpec.square(256, 32.0)
        quad = DyadicQuadrature.for_grid(grid, EUCLIDEAN)
        self.assertEqual((quad.k_min, quad.k_max), (-2, 2))
        self.assertGreaterEqual(quad.inner_radius, grid.cell_rho_diameter(EUCLIDEAN))
        self.assertLessEqual(quad.outer_radius, 32.0 / 4)

    def test_empty_range(self):
        with self.assertRaises(InvalidParameter):
            DyadicQuadrature(GridSpec.square(256, 32.0), EUCLIDEAN, 2, 1)

    def test_shell_beyond_box(self):
        with self.assertRaises(InvalidParameter):
            DyadicQuadrature(GridSpec.square(256, 32.0), EUCLIDEAN, 0, 5)


class MarcinkiewiczTests(SimpleTestCase):
    def test_zero_field(self):
        grid = GridSpec.square(64, 16.0)
        quad = DyadicQuadrature.for_grid(grid, EUCLIDEAN)
        out = marcinkiewicz_d_alpha(SampledField.zeros(grid), EUCLIDEAN, 0.5, quad)
        self.assertEqual(lp_norm(out, np.inf), 0.0)

    def test_plane_wave_constant(self):
        grids = {
            EUCLIDEAN: GridSpec.square(512, 32.0),
            PARABOLIC: GridSpec((512, 2048), (32.0, 128.0)),
        }
        for group, grid in grids.items():
            f, xi0 = plane_wave(grid, (1, 1))
            quad = DyadicQuadrature(grid, group, 0, DyadicQuadrature.for_grid(grid, group).k_max)
            out = marcinkiewicz_d_alpha(f, group, 0.5, quad).values.real
            c = mean_value_constant(group, 0.5, xi0, quad.inner_radius, quad.outer_radius)
            expected = (2 * math.pi * group.rho(xi0)) ** -0.5 * math.sqrt(c)
            self.assertLess(np.ptp(out) / expected, 1e-8)
            self.assertAlmostEqual(out.mean() / expected, 1.0, delta=0.02)

    def test_translation_equivariance(self):
        eta = make_band_limited(BAND_GRID, PARABOLIC, seed=6)
        quad = DyadicQuadrature.for_grid(BAND_GRID, PARABOLIC)
        shifted = marcinkiewicz_d_alpha(translate(eta, (7, -3)), PARABOLIC, 0.5, quad)
        expected = translate(marcinkiewicz_d_alpha(eta, PARABOLIC, 0.5, quad), (7, -3))
        np.testing.assert_allclose(shifted.values, expected.values, rtol=1e-9, atol=1e-12)

    def test_l2_bound(self):
        constant = l2_constant(PARABOLIC, 0.5, n_directions=8)
        self.assertGreaterEqual(constant.spread, 1.0)
        quad = DyadicQuadrature.for_grid(BAND_GRID, PARABOLIC)
        for seed in range(5):
            eta = make_band_limited(BAND_GRID, PARABOLIC, seed=seed)
            energy = lp_norm(marcinkiewicz_d_alpha(eta, PARABOLIC, 0.5, quad), 2) ** 2
            self.assertLessEqual(energy, 1.05 * constant.value)

    def test_mean_not_removed(self):
        grid = GridSpec.square(64, 16.0)
        quad = DyadicQuadrature.for_grid(grid, EUCLIDEAN)
        with self.assertRaises(MeanNotRemoved):
            marcinkiewicz_d_alpha(SampledField(grid, np.ones(grid.shape)), EUCLIDEAN, 0.5, quad)


class TjTests(SimpleTestCase):
    def setUp(self):
        self.eta = make_band_limited(BAND_GRID, PARABOLIC, seed=7)
        self.quad = DyadicQuadrature.for_grid(BAND_GRID, PARABOLIC)

    def test_single_block(self):
        part = LPPartition(0, 0)
        silent = 0 - self.quad.k_max - 1
        active = 0 - self.quad.k_min
        zero = t_j_square_function(self.eta, PARABOLIC, silent, 0.5, self.quad, part)
        self.assertEqual(lp_norm(zero, np.inf), 0.0)
        some = t_j_square_function(self.eta, PARABOLIC, active, 0.5, self.quad, part)
        self.assertGreater(lp_norm(some, 2), 0.0)

    def test_d_alpha_bounded_by_sum_of_pieces(self):
        part = LPPartition.covering(1.0, 2.0)
        d = marcinkiewicz_d_alpha(self.eta, PARABOLIC, 0.5, self.quad).values.real
        total = np.zeros(BAND_GRID.shape)
        for j in range(part.j_min - self.quad.k_max, part.j_max - self.quad.k_min + 1):
            total += t_j_square_function(self.eta, PARABOLIC, j, 0.5, self.quad, part).values.real
        self.assertTrue(np.all(d <= total + 1e-8))


class GQTests(SimpleTestCase):
    def test_zero_field(self):
        grid = GridSpec.square(32, 4.0)
        self.assertEqual(lp_norm(g_q(SampledField.zeros(grid), PARABOLIC), np.inf), 0.0)

    def test_plane_wave_is_one_half(self):
        grid = GridSpec.square(64, 8.0)
        f, _ = plane_wave(grid, (2, 3))
        np.testing.assert_allclose(g_q(f, PARABOLIC).values.real, 0.5, atol=1e-8)

    def test_tail_insensitive(self):
        eta = make_band_limited(GridSpec.square(128, 8.0), EUCLIDEAN, seed=8)
        base = DyadicRange.for_band(1.0, 2.0)
        wider = DyadicRange(base.m_lo - 8 * base.per_octave, base.m_hi + 8 * base.per_octave)
        difference = g_q(eta, EUCLIDEAN, base) - g_q(eta, EUCLIDEAN, wider)
        self.assertLess(lp_norm(difference, np.inf), 1e-8)

    def test_empty_range(self):
        with self.assertRaises(InvalidParameter):
            DyadicRange(3, 2)


class MaximalTests(SimpleTestCase):
    def test_constant(self):
        grid = GridSpec.square(32, 4.0)
        out = hl_maximal(SampledField(grid, np.full(grid.shape, -3.0)), PARABOLIC)
        np.testing.assert_allclose(out.values.real, 3.0)

    def test_dominates_modulus(self):
        grid = GridSpec.square(64, 8.0)
        f = SampledField(grid, np.random.default_rng(0).standard_normal(grid.shape))
        self.assertTrue(np.all(hl_maximal(f, PARABOLIC).values.real >= np.abs(f.values) - 1e-12))

    def test_ball_indicator_decay(self):
        grid = GridSpec.square(256, 32.0)
        indicator = RhoBall((0.0, 0.0), 1.0).rasterize(PARABOLIC, grid).astype(float)
        out = hl_maximal(SampledField(grid, indicator), PARABOLIC).values.real
        rho = PARABOLIC.rho(grid.points())
        ring = (rho >= 1) & (rho <= 8)
        ratio = out[ring] / np.minimum(1, rho[ring] ** -PARABOLIC.gamma)
        self.assertGreater(ratio.min(), 0.0)

        ratio_const = maximal_constants(PARABOLIC).rect_ball_ratio
        for point in ((1.5, 0.0), (0.0, 3.0), (2.0, 2.0)):
            index = tuple(grid.nearest_cells(point)[0])
            x = grid.points()[index]
            brute = max(
                indicator.flat[RhoBall(tuple(x), r).cell_indices(PARABOLIC, grid)].mean()
                for r in (1.0, 2.0, 4.0)
            )
            self.assertGreaterEqual(1.25 * ratio_const * out[index], brute)

    def test_constants(self):
        constants = maximal_constants(EUCLIDEAN)
        self.assertAlmostEqual(constants.rect_ball_ratio, 4 / math.pi)
        self.assertAlmostEqual(constants.covering_factor, math.sqrt(2))


class MsTests(SimpleTestCase):
    grid = GridSpec.square(16, 4.0)

    def field(self):
        return SampledField(self.grid, np.random.default_rng(12).standard_normal(self.grid.shape))

    def test_constant(self):
        out = m_s(SampledField(self.grid, np.full(self.grid.shape, 2.0)), PARABOLIC, 3)
        np.testing.assert_allclose(out.values.real, 2.0)

    def test_dominates_m(self):
        f = self.field()
        self.assertTrue(np.all(m_s(f, PARABOLIC, 2).values.real
                               >= hl_maximal(f, PARABOLIC).values.real - 1e-12))

    def test_matches_brute_force(self):
        f = self.field()
        powered = np.abs(f.values) ** 2
        fast = m_s(f, PARABOLIC, 2).values.real
        n0, n1 = self.grid.shape
        widths = rectangle_half_widths(self.grid, PARABOLIC)
        centred = []
        for k0, k1 in widths:
            total = sum(np.roll(powered, (a, b), axis=(0, 1))
                        for a in range(-k0, k0 + 1) for b in range(-k1, k1 + 1))
            centred.append((k0, k1, total / ((2 * k0 + 1) * (2 * k1 + 1))))
        rng = np.random.default_rng(13)
        for i, j in rng.integers(0, 16, size=(100, 2)):
            best = max(
                average[(i + a) % n0, (j + b) % n1]
                for k0, k1, average in centred
                for a in range(-k0, k0 + 1) for b in range(-k1, k1 + 1)
            )
            self.assertAlmostEqual(fast[i, j], math.sqrt(best), places=10)

    def test_s_must_exceed_one(self):
        with self.assertRaises(InvalidParameter):
            m_s(self.field(), PARABOLIC, 1.0)
