import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import InvalidGrid, InvalidInput, InvalidParameter
from apps.dilation.geometry import DilationGroup, RhoBall

from .grid import (
    GridSpec,
    SampledField,
    SpectralField,
    dilate_field,
    distribution_function,
    forward_transform,
    frequency_rho,
    inverse_transform,
    lp_norm,
    make_band_limited,
    plane_wave,
    remove_mean,
    spectral_derivative,
    spectral_l2_norm,
    translate,
)
from .io import dump_binary, dump_csv, dump_field, load_binary

PARABOLIC = DilationGroup((1, 2))


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return SampledField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


class GridSpecTests(SimpleTestCase):
    def test_rejects_non_power_of_two(self):
        with self.assertRaises(InvalidGrid):
            GridSpec((100, 64), (1.0, 1.0))

    def test_rejects_nonpositive_extent(self):
        with self.assertRaises(InvalidGrid):
            GridSpec((64, 64), (1.0, 0.0))

    def test_frequencies_are_centered(self):
        grid = GridSpec((8, 16), (2.0, 4.0))
        xi = grid.frequency_axes()
        self.assertEqual(xi[0][0], -2.0)
        self.assertEqual(xi[0][4], 0.0)
        np.testing.assert_allclose(xi[1], np.arange(-8, 8) / 4.0)
        self.assertEqual(grid.zero_frequency_index(), (4, 8))

    def test_cell_volume(self):
        self.assertAlmostEqual(GridSpec((8, 16), (2.0, 4.0)).cell_volume, 0.0625)

    def test_dilated_grid(self):
        grid = GridSpec((16, 16), (4.0, 4.0)).dilated(PARABOLIC, 2.0)
        self.assertEqual(grid.extent, (8.0, 16.0))


class TransformTests(SimpleTestCase):
    def test_zero_field(self):
        grid = GridSpec.square(32, 4.0)
        spectrum = forward_transform(SampledField.zeros(grid))
        self.assertFalse(np.any(spectrum.coefficients))
        self.assertFalse(np.any(inverse_transform(spectrum).values))

    def test_plane_wave_is_a_single_coefficient(self):
        grid = GridSpec((32, 64), (4.0, 8.0))
        f, _ = plane_wave(grid, (3, -5))
        coefficients = forward_transform(f).coefficients
        peak = (16 + 3, 32 - 5)
        self.assertAlmostEqual(abs(coefficients[peak]), 32.0, places=10)
        rest = np.abs(coefficients).copy()
        rest[peak] = 0
        self.assertLess(rest.max(), 1e-10)

    def test_spike_inverts_to_plane_wave(self):
        grid = GridSpec.square(32, 4.0)
        coefficients = np.zeros(grid.shape, complex)
        coefficients[16 + 2, 16 - 1] = grid.volume
        f = inverse_transform(SpectralField(grid, coefficients))
        expected, _ = plane_wave(grid, (2, -1))
        np.testing.assert_allclose(f.values, expected.values, atol=1e-12)

    def test_gaussian_is_self_dual(self):
        grid = GridSpec.square(256, 16.0)
        f = SampledField.from_function(grid, lambda x: np.exp(-math.pi * np.sum(x ** 2, axis=-1)))
        coefficients = forward_transform(f).coefficients
        xi = grid.frequencies()
        expected = np.exp(-math.pi * np.sum(xi ** 2, axis=-1))
        self.assertLess(np.max(np.abs(coefficients - expected)), 1e-8)

    def test_round_trip(self):
        f = random_field(GridSpec((64, 32), (3.0, 7.0)))
        back = inverse_transform(forward_transform(f))
        rel = np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values))
        self.assertLess(rel, 1e-12)

    def test_parseval(self):
        f = random_field(GridSpec((64, 128), (5.0, 2.0)), seed=7)
        spatial = lp_norm(f, 2)
        spectral = spectral_l2_norm(forward_transform(f))
        self.assertLess(abs(spatial - spectral) / spatial, 1e-10)

    def test_translation_is_a_phase(self):
        grid = GridSpec((32, 32), (4.0, 2.0))
        f = random_field(grid, seed=3)
        cells = (5, -3)
        v = np.asarray(cells) * np.asarray(grid.spacing)
        shifted = forward_transform(translate(f, cells)).coefficients
        phase = np.exp(-2j * math.pi * grid.frequencies() @ v)
        expected = phase * forward_transform(f).coefficients
        self.assertLess(np.max(np.abs(shifted - expected)), 1e-10 * np.max(np.abs(expected)))

    def test_spectral_derivative(self):
        grid = GridSpec.square(64, 4.0)
        k = 3 / 4.0
        f = SampledField.from_function(grid, lambda x: np.sin(2 * math.pi * k * x[..., 1]))
        df = spectral_derivative(f, axis=1)
        expected = 2 * math.pi * k * np.cos(2 * math.pi * k * grid.points()[..., 1])
        np.testing.assert_allclose(df.values, expected, atol=1e-10)

    def test_remove_mean(self):
        grid = GridSpec.square(32, 4.0)
        f = SampledField(grid, random_field(grid).values + 2.0)
        self.assertLess(abs(forward_transform(remove_mean(f)).zero_coefficient()), 1e-12)


class NormTests(SimpleTestCase):
    def test_constant_l2(self):
        grid = GridSpec((16, 32), (2.0, 3.0))
        one = SampledField(grid, np.ones(grid.shape))
        self.assertAlmostEqual(lp_norm(one, 2), math.sqrt(6.0))

    def test_homogeneity(self):
        f = random_field(GridSpec.square(32, 2.0))
        for p in (1, 1.5, 2, np.inf):
            self.assertAlmostEqual(lp_norm(f * (-3j), p), 3 * lp_norm(f, p))

    def test_ball_indicator(self):
        grid = GridSpec.square(256, 8.0)
        mask = RhoBall((0.0, 0.0), 1.5).rasterize(PARABOLIC, grid)
        norm = lp_norm(SampledField(grid, mask.astype(float)), 1)
        self.assertAlmostEqual(norm / PARABOLIC.ball_volume(1.5), 1.0, delta=0.02)

    def test_rejects_p_below_one(self):
        with self.assertRaises(InvalidParameter):
            lp_norm(random_field(GridSpec.square(8, 1.0)), 0.5)

    def test_distribution_function(self):
        grid = GridSpec.square(32, 4.0)
        f = random_field(grid, seed=11)
        self.assertEqual(distribution_function(f, 1e6), 0.0)
        brute = sum(1 for v in f.values.ravel() if abs(v) > 1.2) * grid.cell_volume
        self.assertAlmostEqual(distribution_function(f, 1.2), brute)

    def test_distribution_of_indicator(self):
        grid = GridSpec.square(32, 4.0)
        values = np.zeros(grid.shape)
        values[3:10, 5:9] = 1.0
        measured = distribution_function(SampledField(grid, values), 0.5)
        self.assertAlmostEqual(measured, 28 * grid.cell_volume)

    def test_dilation_scales_norms(self):
        f = random_field(GridSpec.square(32, 4.0))
        t = 0.5
        f_t = dilate_field(f, PARABOLIC, t)
        for p in (1, 2, 3):
            expected = t ** (-PARABOLIC.gamma + PARABOLIC.gamma / p) * lp_norm(f, p)
            self.assertAlmostEqual(lp_norm(f_t, p) / expected, 1.0, places=12)


class BandLimitedTests(SimpleTestCase):
    grid = GridSpec.square(256, 16.0)

    def test_spectrum_inside_annulus(self):
        eta = make_band_limited(self.grid, PARABOLIC, seed=5)
        coefficients = np.abs(forward_transform(eta).coefficients)
        rho = frequency_rho(self.grid, PARABOLIC)
        outside = (rho < 1) | (rho > 2)
        self.assertLess(coefficients[outside].max(), 1e-12 * coefficients.max())

    def test_normalised_and_real(self):
        eta = make_band_limited(self.grid, PARABOLIC, seed=5)
        self.assertAlmostEqual(lp_norm(eta, 2), 1.0, places=12)
        self.assertFalse(np.any(eta.values.imag))

    def test_deterministic(self):
        first = make_band_limited(self.grid, PARABOLIC, seed=9)
        second = make_band_limited(self.grid, PARABOLIC, seed=9)
        np.testing.assert_array_equal(first.values, second.values)

    def test_coarse_grid_rejected(self):
        with self.assertRaises(InvalidGrid):
            make_band_limited(GridSpec.square(32, 16.0), PARABOLIC, seed=0)


class FieldIOTests(SimpleTestCase):
    def test_binary_round_trip(self):
        f = random_field(GridSpec((16, 8), (2.0, 5.0)), seed=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_binary(f, Path(tmp) / "f.ahf")
            self.assertEqual(path.stat().st_size, 4 + 4 + 2 * 8 + 2 * 8 + 16 * 128)
            loaded = load_binary(path)
        self.assertEqual(loaded.grid, f.grid)
        np.testing.assert_array_equal(loaded.values, f.values)

    def test_bad_magic(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "junk.ahf"
            path.write_bytes(b"NOPE" + bytes(32))
            with self.assertRaises(InvalidInput):
                load_binary(path)

    def test_csv_layout(self):
        f = random_field(GridSpec((4, 2), (1.0, 1.0)))
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_field(f, Path(tmp) / "f.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "x1,x2,re,im")
        self.assertEqual(len(lines), 9)
        first = [float(v) for v in lines[1].split(",")]
        self.assertEqual(first[:2], [-0.5, -0.5])
        self.assertEqual(complex(first[2], first[3]), f.values[0, 0])

    def test_csv_limited_to_small_grids(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InvalidInput):
                dump_csv(SampledField.zeros(GridSpec.square(512, 1.0)), Path(tmp) / "big.csv")
