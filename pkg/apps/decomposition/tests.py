import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import ndimage

from apps.core.exceptions import BetaTooSmall, InvalidInput, InvalidParameter
from apps.dilation.geometry import DilationGroup, RhoBall
from apps.field.grid import GridSpec, SampledField, smooth_bump, spatial_rho

from .cz import cz_decompose, level_set, verify_cz
from .whitney import check_cover, whitney_cover

EUCLIDEAN = DilationGroup((1, 1))
PARABOLIC = DilationGroup((1, 2))
GRID = GridSpec.square(64, 16.0)


def spike(grid, group, height=10.0, radius=0.5):
    mask = RhoBall((0.0, 0.0), radius).rasterize(group, grid)
    return SampledField(grid, np.where(mask, height, 0.0))


def bump(grid, group):
    return SampledField(grid, smooth_bump(spatial_rho(grid, group), -2.0, 2.0))


class WhitneyCoverTests(SimpleTestCase):
    def assert_valid(self, cover, mask):
        measured = check_cover(cover, mask)
        self.assertEqual(measured["cover_mismatch_cells"], 0)
        self.assertLessEqual(measured["touch_ratio"], 1 + 1e-9)
        self.assertGreater(measured["balls"], 0)
        return measured

    def test_single_ball(self):
        for group in (EUCLIDEAN, PARABOLIC):
            mask = RhoBall((0.0, 0.0), 2.0).rasterize(group, GRID)
            cover = whitney_cover(mask, group, GRID)
            self.assert_valid(cover, mask)
            for ball, distance in zip(cover.balls, cover.distances):
                self.assertLess(ball.radius, distance)

    def test_no_ball_crosses_components(self):
        mask = (RhoBall((-4.0, 0.0), 1.5).rasterize(EUCLIDEAN, GRID)
                | RhoBall((4.0, 0.0), 1.5).rasterize(EUCLIDEAN, GRID))
        labels, count = ndimage.label(mask)
        self.assertEqual(count, 2)
        cover = whitney_cover(mask, EUCLIDEAN, GRID, dilate=2.0)
        self.assert_valid(cover, mask)
        flat = labels.reshape(-1)
        for j in range(len(cover)):
            self.assertEqual(len(set(flat[cover.cells(j)])), 1)

    def test_square_overlap_is_bounded(self):
        grid = GridSpec.square(128, 16.0)
        x = grid.points()
        mask = np.all(np.abs(x) < 4.0, axis=-1)
        cover = whitney_cover(mask, EUCLIDEAN, grid)
        measured = self.assert_valid(cover, mask)
        self.assertLessEqual(measured["overlap"], 64)

    def test_selected_balls_are_rho_separated(self):
        for group in (EUCLIDEAN, PARABOLIC):
            grid = GridSpec.square(128, 16.0)
            mask = np.all(np.abs(grid.points()) < 4.0, axis=-1)
            cover = whitney_cover(mask, group, grid)
            centers = np.array([ball.center for ball in cover.balls])
            radii = np.array([ball.radius for ball in cover.balls])
            for j in range(len(cover) - 1):
                gaps = np.atleast_1d(group.rho(centers[j + 1:] - centers[j]))
                # 5r-balls with r = radius / 10
                np.testing.assert_array_less((radii[j + 1:] + radii[j]) / 2 - 1e-12, gaps)

    def test_deterministic(self):
        mask = RhoBall((0.5, -1.0), 2.5).rasterize(PARABOLIC, GRID)
        first = whitney_cover(mask, PARABOLIC, GRID)
        second = whitney_cover(mask, PARABOLIC, GRID)
        self.assertEqual(first.as_dict(), second.as_dict())

    def test_rejects_degenerate_masks(self):
        with self.assertRaises(InvalidInput):
            whitney_cover(np.zeros(GRID.shape, dtype=bool), EUCLIDEAN, GRID)
        with self.assertRaises(InvalidInput):
            whitney_cover(np.ones(GRID.shape, dtype=bool), EUCLIDEAN, GRID)
        with self.assertRaises(InvalidInput):
            whitney_cover(np.ones((8, 8), dtype=bool), EUCLIDEAN, GRID)

    def test_rejects_small_dilate(self):
        mask = RhoBall((0.0, 0.0), 2.0).rasterize(EUCLIDEAN, GRID)
        with self.assertRaises(InvalidParameter):
            whitney_cover(mask, EUCLIDEAN, GRID, dilate=0.5)


class CZDecomposeTests(SimpleTestCase):
    def test_trivial_when_beta_exceeds_sup(self):
        f = bump(GRID, EUCLIDEAN)
        dec = cz_decompose(f, 1.5, 2.0, EUCLIDEAN)
        self.assertTrue(dec.is_trivial)
        self.assertIs(dec.good, f)
        verification = verify_cz(dec, f)
        self.assertTrue(verification.passed)
        for name in ("good_sup_constant", "good_lp_constant", "omega_constant", "ball_sum_constant"):
            self.assertLessEqual(verification.metrics[name], 1.0)

    def test_spike_decomposition(self):
        for group in (EUCLIDEAN, PARABOLIC):
            f = spike(GRID, group)
            dec = cz_decompose(f, 1.0, 1.0, group)
            self.assertFalse(dec.is_trivial)
            self.assertTrue(dec.omega[GRID.zero_frequency_index()])
            self.assertEqual(verify_cz(dec, f).failed(), [])
            for part in dec.bad:
                self.assertLessEqual(abs(part.integral(GRID)), 1e-10 * (part.l1_norm(GRID) + 1))

    def test_level_set_contains_the_spike(self):
        f = spike(GRID, EUCLIDEAN)
        omega = level_set(f, 1.0, 1.0, EUCLIDEAN)
        self.assertTrue(np.all(omega[np.abs(f.values) > 0]))

    def test_linear_in_scale(self):
        f = spike(GRID, EUCLIDEAN)
        dec = cz_decompose(f, 1.0, 2.0, EUCLIDEAN)
        doubled = cz_decompose(f * 2.0, 2.0, 2.0, EUCLIDEAN)
        np.testing.assert_array_equal(doubled.omega, dec.omega)
        self.assertEqual(doubled.cover.as_dict(), dec.cover.as_dict())
        np.testing.assert_array_equal(doubled.good.values, 2 * dec.good.values)
        for a, b in zip(doubled.bad, dec.bad):
            np.testing.assert_array_equal(a.cells, b.cells)
            np.testing.assert_array_equal(a.values, 2 * b.values)

    def test_beta_too_small(self):
        with self.assertRaises(BetaTooSmall):
            cz_decompose(spike(GRID, EUCLIDEAN), 0.01, 1.0, EUCLIDEAN)

    def test_parameter_checks(self):
        f = spike(GRID, EUCLIDEAN)
        with self.assertRaises(InvalidParameter):
            cz_decompose(f, 0.0, 1.0, EUCLIDEAN)
        with self.assertRaises(InvalidParameter):
            cz_decompose(f, 1.0, 0.5, EUCLIDEAN)
        edge = np.zeros(GRID.shape)
        edge[0, 10] = 1.0
        with self.assertRaises(InvalidInput):
            cz_decompose(SampledField(GRID, edge), 1.0, 1.0, EUCLIDEAN)

    def test_verification_lists_failed_checks(self):
        f = spike(GRID, PARABOLIC)
        verification = verify_cz(cz_decompose(f, 1.0, 1.0, PARABOLIC), f)
        self.assertEqual(verification.failed(), [])
        self.assertEqual(verification.verdicts["overlap_bounded"].limit, 64)
        verification.bound("omega_tight", "omega_constant", 0.0)
        self.assertFalse(verification.passed)
        self.assertEqual(verification.failed(), ["omega_tight"])

    def test_verify_rejects_other_grid(self):
        dec = cz_decompose(spike(GRID, EUCLIDEAN), 1.0, 1.0, EUCLIDEAN)
        with self.assertRaises(InvalidInput):
            verify_cz(dec, spike(GridSpec.square(32, 16.0), EUCLIDEAN))

    def test_dump(self):
        dec = cz_decompose(spike(GRID, EUCLIDEAN), 1.0, 1.0, EUCLIDEAN)
        with tempfile.TemporaryDirectory() as tmp:
            written = dec.dump(tmp)
            data = json.loads((Path(tmp) / "decomposition.json").read_text())
            self.assertEqual(len(written), 1 + len(dec.bad))
        self.assertEqual(len(data["bad_parts"]), len(dec.bad))
        self.assertEqual(data["cover"]["overlap"], dec.cover.overlap)
