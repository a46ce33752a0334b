"""Transform identities: Parseval, the semigroup law, subordination and the W_alpha integral."""

import numpy as np

from apps.field.grid import (
    GridSpec,
    SampledField,
    SpectralField,
    forward_transform,
    inverse_transform,
    lp_norm,
    make_band_limited,
    remove_mean,
    spectral_l2_norm,
)
from apps.operators.multipliers import poisson_semigroup, riesz_potential, subordination
from apps.operators.wfunction import w_alpha_closed_log_integral, w_alpha_log_integral

from ..registry import experiment
from ..report import ExperimentReport

BAND_GRID = GridSpec.square(256, 16.0)


def relative_l2(a, b):
    return lp_norm(a - b, 2) / lp_norm(b, 2)


def relative_spectral_l2(a, b):
    """relative_l2 measured on the transform side, without an inverse transform."""
    difference = SpectralField(a.grid, a.coefficients - b.coefficients)
    return spectral_l2_norm(difference) / spectral_l2_norm(b)


@experiment("parseval", "Parseval identity, transform round trip and mean removal on a random field.")
def parseval(config):
    grid = config.grid(BAND_GRID)
    rng = np.random.default_rng(config["seed"])
    f = SampledField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    report = ExperimentReport("parseval")

    spectrum = forward_transform(f)
    norm = lp_norm(f, 2)
    report.add_metric("parseval_error", abs(spectral_l2_norm(spectrum) - norm) / norm)
    back = inverse_transform(spectrum)
    report.add_metric("round_trip_error", np.max(np.abs(back.values - f.values)) / np.max(f.modulus))
    report.add_metric("mean_after_removal", abs(forward_transform(remove_mean(f)).zero_coefficient()) / norm)

    report.require_at_most("parseval", "parseval_error", config.tolerance("parseval", 1e-10))
    report.require_at_most("round_trip", "round_trip_error", config.tolerance("round_trip", 1e-12))
    report.require_at_most("mean_removed", "mean_after_removal", config.tolerance("mean", 1e-12))
    return report


@experiment("semigroup-law", "K_t * K_s = K_(t+s) on a band-limited field.",
            t_values=[0.25, 1.0, 4.0])
def semigroup_law(config):
    group = config.group
    grid = config.grid(BAND_GRID)
    eta = make_band_limited(grid, group, config["seed"])
    spectrum = forward_transform(eta)
    norm = lp_norm(eta, 2)
    report = ExperimentReport("semigroup-law")
    worst = floor = 0.0
    for t in config["t_values"]:
        for s in config["t_values"]:
            twice = poisson_semigroup(poisson_semigroup(spectrum, group, s), group, t)
            once = poisson_semigroup(spectrum, group, t + s)
            worst = max(worst, relative_spectral_l2(twice, once))
            # in real space K_(t+s) eta is far below the transform round-off of eta
            direct = poisson_semigroup(poisson_semigroup(eta, group, s), group, t)
            floor = max(floor, lp_norm(direct - inverse_transform(once), 2) / norm)
    report.add_metric("max_relative_l2_error", worst, source="multiplier identity e^-2pi t rho e^-2pi s rho")
    report.add_metric("real_space_error", floor, source="two transform round trips, relative to ||eta||_2")
    report.require_at_most("semigroup", "max_relative_l2_error", config.tolerance("semigroup", 1e-8))
    report.require_at_most("real_space", "real_space_error", config.tolerance("real_space", 1e-12))
    return report


@experiment("subordination", "Gamma-subordination quadrature against K_t applied to I_alpha f.",
            alpha_values=[0.3, 0.5, 0.7], t_values=[0.5, 1.0, 2.0])
def subordination_check(config):
    group = config.group
    grid = config.grid(BAND_GRID)
    eta = make_band_limited(grid, group, config["seed"])
    report = ExperimentReport("subordination")
    worst = 0.0
    for alpha in config["alpha_values"]:
        potential = riesz_potential(eta, group, alpha)
        errors = []
        for t in config["t_values"]:
            direct = poisson_semigroup(potential, group, t)
            errors.append(relative_l2(subordination(eta, group, alpha, t), direct))
        report.add_metric(f"alpha={alpha:g}_max_error", max(errors))
        worst = max(worst, max(errors))
    report.add_metric("max_relative_l2_error", worst, source="direct multiplier e^-2pi t rho (2 pi rho)^-alpha")
    report.require_at_most("subordination", "max_relative_l2_error", config.tolerance("subordination", 1e-3))
    return report


@experiment("w-alpha", "int_0^inf W_alpha(t, 1) dt/t by quadrature with tail bound, against its closed form.",
            alpha_values=[0.3, 0.5, 0.7])
def w_alpha_integral(config):
    report = ExperimentReport("w-alpha")
    worst = 0.0
    for alpha in config["alpha_values"]:
        result = w_alpha_log_integral(alpha)
        exact = w_alpha_closed_log_integral(alpha)
        report.add_metric(f"alpha={alpha:g}_value", result.value)
        report.add_metric(f"alpha={alpha:g}_tail_bound", result.tail_bound)
        report.add_metric(f"alpha={alpha:g}_closed_form", exact, source="pi / (alpha sin(pi alpha))")
        report.require_at_most(f"alpha={alpha:g}_tail", f"alpha={alpha:g}_tail_bound",
                               config.tolerance("tail", 1e-6))
        worst = max(worst, abs(result.value - exact))
    report.add_metric("max_error", worst)
    report.require_at_most("closed_form", "max_error", config.tolerance("closed_form", 2e-6))
    return report
