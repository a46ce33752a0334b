"""Quasi-norm axioms and the polar/volume identities."""

import math

import numpy as np

from apps.dilation.geometry import DilationGroup, euclidean_ball_volume, unit_ball_measure

from ..registry import experiment
from ..report import ExperimentReport

# points this close to the unit sphere are not used to test rho <= 1 <=> |x| <= 1
_SPHERE_BAND = 1e-9


def sample_points(rng, count, dimension):
    """Gaussian directions with radii spread over four decades."""
    directions = rng.standard_normal((count, dimension))
    return directions * 10.0 ** rng.uniform(-2, 2, size=(count, 1))


@experiment("rho-axioms", "Homogeneity, triangle inequality, unit-ball and polar identities of rho.",
            samples=100_000)
def rho_axioms(config):
    group = config.group
    n = group.dimension
    rng = np.random.default_rng(config["seed"])
    count = config["samples"]
    report = ExperimentReport("rho-axioms")

    x = sample_points(rng, count, n)
    y = sample_points(rng, count, n)
    t = 10.0 ** rng.uniform(-2, 2, size=count)
    rho_x, rho_y = group.rho(x), group.rho(y)

    scaled = group.rho(x * np.power(t[:, None], group.a))
    report.add_metric("homogeneity_error", np.max(np.abs(scaled - t * rho_x) / (t * rho_x)))
    report.require_at_most("homogeneity", "homogeneity_error", config.tolerance("homogeneity", 1e-9))

    excess = (group.rho(x + y) - rho_x - rho_y) / (rho_x + rho_y)
    report.add_metric("triangle_excess", max(float(np.max(excess)), 0.0))
    report.require_at_most("triangle", "triangle_excess", config.tolerance("triangle", 1e-9))

    norms = np.linalg.norm(x, axis=1)
    away = np.abs(norms - 1) > _SPHERE_BAND
    report.add_metric("unit_ball_mismatches", np.count_nonzero((rho_x[away] <= 1) != (norms[away] <= 1)))
    report.require_at_most("unit_ball", "unit_ball_mismatches", 0)
    inner, outer = norms <= 1, norms >= 1
    report.add_metric("inner_excess", max(float(np.max(norms[inner] - rho_x[inner], initial=0.0)), 0.0))
    report.add_metric("outer_excess", max(float(np.max(rho_x[outer] - norms[outer], initial=0.0)), 0.0))
    report.require_at_most("norm_below_rho_inside", "inner_excess", config.tolerance("inner", 1e-9))
    report.require_at_most("rho_below_norm_outside", "outer_excess", config.tolerance("outer", 1e-9))

    euclidean = DilationGroup((1.0,) * n)
    isotropic = np.abs(euclidean.rho(x) - norms) / (1 + norms)
    report.add_metric("isotropic_error", np.max(isotropic))
    report.require_at_most("isotropic", "isotropic_error", config.tolerance("isotropic", 1e-10))

    if n == 2:
        angles = 2 * math.pi * np.arange(4096) / 4096
        theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        sphere_mass = float(np.mean(group.polar_weight(theta))) * 2 * math.pi
        expected = group.gamma * euclidean_ball_volume(2)
        report.add_metric("polar_mass", sphere_mass, source="trapezoid over 4096 angles")
        report.add_metric("polar_error", abs(sphere_mass - expected) / expected,
                          source="reference gamma * |B(0, 1)|")
        report.require_at_most("polar_consistency", "polar_error", config.tolerance("polar", 1e-6))

        measure = unit_ball_measure(group)
        report.add_metric("unit_ball_measure", measure, source="Gauss-Legendre over x_1, bisection in x_2")
        report.add_metric("unit_ball_measure_error", abs(measure - math.pi) / math.pi)
        report.require_at_most("ball_volume", "unit_ball_measure_error", config.tolerance("volume", 1e-4))
    return report
