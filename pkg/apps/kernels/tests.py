import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidGrid, InvalidInput, InvalidParameter
from apps.dilation.geometry import DilationGroup
from apps.field.grid import (
    GridSpec,
    SampledField,
    forward_transform,
    frequency_rho,
    spectral_derivative,
)
from apps.operators.partition import phi_tilde

from .synthesis import (
    KernelField,
    KernelKind,
    RieszPieces,
    decay_profile,
    piece_span_grid,
    riesz_kernel_at,
    synthesize_kernel,
    synthesize_rho_tilde,
    synthesize_riesz_kernel,
)

EUCLIDEAN = DilationGroup((1, 1))
PARABOLIC = DilationGroup((1, 2))
# Gamma(3/2) / pi^(3/2), the constant of the planar Poisson kernel
POISSON_CONSTANT = 1 / (2 * math.pi)


def centre(grid):
    return tuple(n // 2 for n in grid.shape)


class KernelKindTests(SimpleTestCase):
    def test_parse(self):
        kind = KernelKind.parse("deriv2:0,1")
        self.assertEqual(kind.family, "deriv2")
        self.assertEqual(kind.axes, (0, 1))
        self.assertEqual(KernelKind.parse("rho_tilde:-2,1", alpha=0.5).m, -2)

    def test_rejects_unknown_or_malformed(self):
        with self.assertRaises(InvalidParameter):
            KernelKind.parse("poisson")
        with self.assertRaises(InvalidParameter):
            KernelKind.parse("deriv")
        with self.assertRaises(InvalidParameter):
            KernelKind.parse("deriv:x")

    def test_claimed_exponents(self):
        self.assertEqual(KernelKind("K").claimed_exponent(PARABOLIC), 4)
        self.assertEqual(KernelKind("Q").claimed_exponent(PARABOLIC), 4)
        self.assertEqual(KernelKind("deriv", (1,)).claimed_exponent(PARABOLIC), 6)
        self.assertEqual(KernelKind("deriv_rho", (0,)).claimed_exponent(PARABOLIC), 5)
        self.assertEqual(KernelKind("deriv2", (0, 1)).claimed_exponent(PARABOLIC), 7)
        self.assertAlmostEqual(KernelKind("rho_tilde", m=0, alpha=0.3).claimed_exponent(PARABOLIC), 2.7)
        self.assertAlmostEqual(KernelKind("rho_tilde", (1,), m=0, alpha=0.3).claimed_exponent(PARABOLIC), 4.7)


class PoissonKernelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = GridSpec.square(512, 32.0)
        cls.k = synthesize_kernel("K", EUCLIDEAN, cls.grid)
        cls.q = synthesize_kernel("Q", EUCLIDEAN, cls.grid)

    def test_value_at_origin_is_planar_poisson_constant(self):
        value = self.k.values[centre(self.grid)]
        self.assertAlmostEqual(value.real / POISSON_CONSTANT, 1.0, delta=1e-3)

    def test_matches_closed_form_inside_the_box(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0], [1.5, 1.5]])
        cells = self.grid.nearest_cells(x)
        sampled = self.k.values[tuple(cells.T)].real
        r2 = np.sum(self.grid.points()[tuple(cells.T)] ** 2, axis=-1)
        expected = POISSON_CONSTANT * (1 + r2) ** -1.5
        np.testing.assert_allclose(sampled, expected, rtol=5e-3)

    def test_real_and_even(self):
        values = self.k.values
        self.assertLess(np.max(np.abs(values.imag)), 1e-10)
        inner = values[1:, 1:]
        np.testing.assert_allclose(inner, inner[::-1, ::-1], atol=1e-10)

    def test_integrals(self):
        self.assertAlmostEqual(abs(self.k.field.integral() - 1), 0.0, delta=1e-8)
        self.assertAlmostEqual(abs(self.q.field.integral()), 0.0, delta=1e-8)

    def test_q_at_origin(self):
        # t d/dt of c t (t^2 + |x|^2)^(-3/2) at t = 1, x = 0
        value = self.q.values[centre(self.grid)].real
        self.assertAlmostEqual(value / (-2 * POISSON_CONSTANT), 1.0, delta=2e-3)

    def test_exponent_metadata(self):
        self.assertEqual(self.k.exponent, 3)
        self.assertEqual(self.k.kind.weighting, "one_plus_rho")

    def test_coarse_grid_fails_nyquist_check(self):
        with self.assertRaises(InvalidGrid):
            synthesize_kernel("K", EUCLIDEAN, GridSpec.square(64, 32.0))

    def test_derivative_index_out_of_range(self):
        with self.assertRaises(InvalidParameter):
            synthesize_kernel("deriv:2", EUCLIDEAN, self.grid)

    def test_homogeneous_kinds_are_rejected(self):
        with self.assertRaises(InvalidParameter):
            synthesize_kernel(KernelKind("riesz", alpha=0.5), EUCLIDEAN, self.grid)


class DerivativeKernelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = GridSpec((256, 1024), (16.0, 16.0))
        cls.k = synthesize_kernel("K", PARABOLIC, cls.grid)

    def test_first_derivative_kernel(self):
        for axis in (0, 1):
            kernel = synthesize_kernel(f"deriv:{axis}", PARABOLIC, self.grid)
            expected = spectral_derivative(self.k.field, axis).values / (2j * math.pi)
            np.testing.assert_allclose(kernel.values, expected, atol=1e-8)
            self.assertAlmostEqual(abs(kernel.field.integral()), 0.0, delta=1e-8)

    def test_second_derivative_kernel(self):
        kernel = synthesize_kernel("deriv2:0,1", PARABOLIC, self.grid)
        twice = spectral_derivative(spectral_derivative(self.k.field, 0), 1)
        np.testing.assert_allclose(kernel.values, twice.values / (2j * math.pi) ** 2, atol=1e-8)

    def test_rho_weighted_derivative_has_zero_mean(self):
        kernel = synthesize_kernel("deriv_rho:1", PARABOLIC, self.grid)
        self.assertAlmostEqual(abs(kernel.field.integral()), 0.0, delta=1e-8)
        self.assertEqual(kernel.exponent, 6)


class RhoTildeTests(SimpleTestCase):
    alpha = 0.5

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.base = GridSpec.square(128, 8.0)
        cls.piece = synthesize_rho_tilde(0, cls.alpha, EUCLIDEAN, cls.base)

    def test_scaling_between_dyadic_indices(self):
        scale = np.max(np.abs(self.piece.values))
        for m in (-2, -1, 1, 2):
            grid = self.base.dilated(EUCLIDEAN, 2.0 ** m)
            piece = synthesize_rho_tilde(m, self.alpha, EUCLIDEAN, grid)
            expected = 2.0 ** (m * (self.alpha - EUCLIDEAN.gamma)) * self.piece.values
            np.testing.assert_allclose(piece.values, expected, atol=1e-6 * scale)

    def test_spectrum_vanishes_off_support(self):
        for m in (-1, 0, 1):
            grid = self.base.dilated(EUCLIDEAN, 2.0 ** m)
            piece = synthesize_rho_tilde(m, self.alpha, EUCLIDEAN, grid)
            coefficients = np.abs(forward_transform(piece.field).coefficients)
            outside = phi_tilde(2.0 ** m * frequency_rho(grid, EUCLIDEAN)) == 0
            self.assertLess(coefficients[outside].max(), 1e-12 * coefficients.max())

    def test_zero_integral(self):
        self.assertAlmostEqual(abs(self.piece.field.integral()), 0.0, delta=1e-8)

    def test_unresolved_annulus(self):
        with self.assertRaises(InvalidGrid):
            synthesize_rho_tilde(-2, self.alpha, EUCLIDEAN, self.base)

    def test_alpha_range(self):
        with self.assertRaises(InvalidParameter):
            synthesize_rho_tilde(0, 1.0, EUCLIDEAN, self.base)

    def test_profile_uniform_in_m(self):
        # one lattice for every index, so the pieces meet different resolutions
        grid = piece_span_grid(self.base, EUCLIDEAN, -1, 1)
        self.assertEqual(grid, GridSpec.square(512, 16.0))
        maxima = []
        for m in range(-1, 2):
            profile = decay_profile(synthesize_rho_tilde(m, self.alpha, EUCLIDEAN, grid))
            self.assertEqual(profile.weighting, "rho")
            maxima.append(profile.sups.max())
        self.assertLessEqual(max(maxima) / min(maxima), 1.25)

    def test_piece_span_grid(self):
        grid = piece_span_grid(GridSpec((128, 2048), (8.0, 32.0)), PARABOLIC, 0, 1)
        self.assertEqual(grid.shape, (256, 8192))
        np.testing.assert_allclose(grid.extent, (16.0, 128.0))
        with self.assertRaises(InvalidParameter):
            piece_span_grid(self.base, EUCLIDEAN, 1, 0)

    def test_derivative_piece_exponent(self):
        piece = synthesize_rho_tilde(0, self.alpha, PARABOLIC, GridSpec((128, 512), (8.0, 8.0)), axis=1)
        self.assertAlmostEqual(piece.exponent, PARABOLIC.gamma - self.alpha + 2)


class RieszKernelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.euclidean = RieszPieces.build(1.0, EUCLIDEAN)
        cls.parabolic = RieszPieces.build(0.5, PARABOLIC)

    def test_classical_riesz_kernel(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0], [1.5, 1.5], [3.0, -1.0]])
        expected = 1 / (2 * math.pi * np.linalg.norm(x, axis=1))
        np.testing.assert_allclose(riesz_kernel_at(x, self.euclidean), expected, rtol=1e-3)

    def test_homogeneity(self):
        angles = np.linspace(0, 2 * math.pi, 12, endpoint=False)
        theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        for r in (1.0, 2.0, 4.0):
            x = PARABOLIC.apply(r, theta)
            ratio = riesz_kernel_at(PARABOLIC.apply(2.0, x), self.parabolic) / riesz_kernel_at(x, self.parabolic)
            np.testing.assert_allclose(ratio, 2.0 ** (0.5 - PARABOLIC.gamma), rtol=5e-3)

    def test_even_on_the_lattice(self):
        kernel = synthesize_riesz_kernel(0.5, PARABOLIC, GridSpec.square(32, 8.0), pieces=self.parabolic)
        inner = kernel.values.real[1:, 1:]
        np.testing.assert_allclose(inner, inner[::-1, ::-1], atol=1e-9 * np.max(np.abs(inner)))
        self.assertEqual(kernel.values[16, 16], 0)

    def test_alpha_must_be_below_gamma(self):
        with self.assertRaises(InvalidParameter):
            synthesize_riesz_kernel(2.0, EUCLIDEAN, GridSpec.square(32, 8.0))

    def test_mismatched_pieces(self):
        with self.assertRaises(InvalidParameter):
            synthesize_riesz_kernel(0.7, PARABOLIC, GridSpec.square(32, 8.0), pieces=self.parabolic)

    def test_singular_at_origin(self):
        with self.assertRaises(InvalidInput):
            riesz_kernel_at(np.zeros((1, 2)), self.euclidean)


class DecayProfileTests(SimpleTestCase):
    def test_zero_field(self):
        grid = GridSpec.square(64, 8.0)
        kernel = KernelField(SampledField.zeros(grid), KernelKind("K"), EUCLIDEAN, 3.0)
        profile = decay_profile(kernel)
        self.assertTrue(np.all(profile.sups == 0))
        self.assertEqual(profile.edges[0, 0], 0.0)
        # half the rho radius of the box
        self.assertAlmostEqual(profile.edges[-1, 1], 2.0)

    def test_reach_beyond_the_box(self):
        grid = GridSpec.square(64, 8.0)
        kernel = KernelField(SampledField.zeros(grid), KernelKind("K"), EUCLIDEAN, 3.0)
        self.assertAlmostEqual(decay_profile(kernel, reach=4.0).edges[-1, 1], 4.0)
        with self.assertRaises(InvalidParameter):
            decay_profile(kernel, reach=5.0)

    def test_poisson_profile_is_flat_beyond_the_core(self):
        grid = GridSpec.square(512, 32.0)
        for name in ("K", "Q"):
            profile = decay_profile(synthesize_kernel(name, EUCLIDEAN, grid))
            self.assertTrue(profile.bounded(epsilon=0.15), msg=f"{name}: excess {profile.excess():.3f}")
            self.assertTrue(np.any(profile.edges[:, 1] > 4.0))
            self.assertAlmostEqual(profile.edges[-1, 1], 8.0)
        k_profile = decay_profile(synthesize_kernel("K", EUCLIDEAN, grid))
        # (1 + r)^3 (1 + r^2)^(-3/2) peaks at r = 1 with value 2 sqrt 2
        self.assertLessEqual(k_profile.sups.max(), POISSON_CONSTANT * 2 * math.sqrt(2) * 1.01)

    def test_stable_under_doubling_the_box(self):
        small = decay_profile(synthesize_kernel("K", EUCLIDEAN, GridSpec.square(512, 32.0)))
        large = decay_profile(synthesize_kernel("K", EUCLIDEAN, GridSpec.square(1024, 64.0)))
        common = {tuple(e): s for e, s in zip(large.edges, large.sups)}
        compared = 0
        for (lo, hi), value in zip(small.edges, small.sups):
            if hi <= 4.0 and (lo, hi) in common:
                self.assertLess(abs(value / common[(lo, hi)] - 1), 0.1)
                compared += 1
        self.assertGreater(compared, 2)

    def test_csv_export(self):
        grid = GridSpec.square(64, 8.0)
        kernel = KernelField(SampledField.zeros(grid), KernelKind("K"), EUCLIDEAN, 3.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = decay_profile(kernel).to_csv(Path(tmp) / "profile.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "shell_lo,shell_hi,sup_weighted")
        self.assertGreater(len(lines), 2)
