"""Weak type (p0, p0) of D_alpha and the scaling argument that rules out p < p0."""

import logging
import math

import numpy as np

from apps.core.exceptions import HypothesisViolated, InvalidParameter
from apps.field.grid import (
    GridSpec,
    SampledField,
    dilate_field,
    forward_transform,
    lp_norm,
    make_band_limited,
    remove_mean,
    smooth_bump,
)
from apps.operators.multipliers import riesz_potential, spectral_band
from apps.operators.square import DyadicQuadrature, marcinkiewicz_d_alpha

from ..registry import experiment
from ..report import ExperimentReport
from .square_functions import quadrature
from .transforms import BAND_GRID

logger = logging.getLogger(__name__)


def critical_exponent(group, alpha):
    """p0 = 2 gamma / (gamma + 2 alpha)."""
    return 2 * group.gamma / (group.gamma + 2 * alpha)


def weak_quotient(values, p, cell_volume):
    """sup_beta beta^p |{|v| > beta}|; the sup is approached as beta rises to a sample value."""
    ordered = np.sort(np.abs(np.asarray(values)).reshape(-1))[::-1]
    counts = np.arange(1, ordered.size + 1)
    return float(np.max(ordered ** p * counts) * cell_volume)


def focusing_dipole(grid, group, t, p, separation=1.5):
    """g(A_t^-1 x) for g = bump(x - e) - bump(x + e), mean removed, unit L^p norm."""
    x = grid.points() / np.power(t, group.a)
    offset = np.zeros(grid.dimension)
    offset[0] = separation
    values = (smooth_bump(group.rho(x - offset), -1.0, 1.0)
              - smooth_bump(group.rho(x + offset), -1.0, 1.0))
    f = remove_mean(SampledField(grid, values))
    return f * (1 / lp_norm(f, p))


def weak_grid(group):
    if group.is_isotropic:
        return GridSpec((256,) * group.dimension, (16.0,) * group.dimension)
    return GridSpec((256, 2048), (16.0, 32.0))


@experiment("weak-type", "sup_beta beta^p0 |{D_alpha f_t > beta}| / ||f_t||_p0^p0 over focusing scales t.",
            alpha=0.5, t_values=[2.0, 1.0, 0.5, 0.25])
def weak_type(config):
    group, alpha = config.group, config["alpha"]
    p0 = critical_exponent(group, alpha)
    if not p0 > 1:
        raise HypothesisViolated(f"p0 = 2 gamma / (gamma + 2 alpha) = {p0:g} is not above 1", p0=p0)
    grid = config.grid(weak_grid)
    quad = quadrature(config, grid)
    report = ExperimentReport("weak-type")
    report.add_metric("p0", p0, source="2 gamma / (gamma + 2 alpha)")

    quotients = []
    for t in config["t_values"]:
        f = focusing_dipole(grid, group, t, p0)
        d = marcinkiewicz_d_alpha(f, group, alpha, quad)
        quotients.append((t, weak_quotient(d.values, p0, grid.cell_volume) / lp_norm(f, p0) ** p0))
        logger.debug("weak-type t=%g: S = %.6g", t, quotients[-1][1])
    values = [s for _, s in quotients]
    report.add_series("weak_quotient", quotients)
    report.add_metric("quotient_max", max(values))
    report.add_metric("quotient_spread", max(values) / min(values))
    report.require_at_most("bounded", "quotient_spread", config.tolerance("weak_spread", 4.0))
    return report


def _dyadic_power(t):
    m = round(math.log2(t))
    if abs(2.0 ** m - t) > 1e-12 * t:
        raise InvalidParameter(f"sharpness scales must be powers of two, got {t}")
    return m


@experiment("sharpness", "Scaling of ||I_alpha eta_t||_2 / ||eta_t||_p across p0, with D_alpha dilation-invariant.",
            alpha=0.5, p_values=[1.2, 1.8], t_values=[1.0, 0.5, 0.25, 0.125, 0.0625])
def sharpness(config):
    group, alpha = config.group, config["alpha"]
    gamma = group.gamma
    p0 = critical_exponent(group, alpha)
    grid = config.grid(BAND_GRID)
    base_quad = quadrature(config, grid)
    eta = make_band_limited(grid, group, config["seed"])
    band = spectral_band(forward_transform(eta), group)
    report = ExperimentReport("sharpness")
    report.add_metric("p0", p0, source="2 gamma / (gamma + 2 alpha)")

    ts = list(config["t_values"])
    norms = {"i_alpha_l2": []}
    for p in config["p_values"]:
        norms.update({f"eta_lp_p{p:g}": [], f"d_alpha_lp_p{p:g}": [], f"i_alpha_lp_p{p:g}": []})
    band_error = 0.0
    for t in ts:
        m = _dyadic_power(t)
        eta_t = dilate_field(eta, group, t)
        lo, hi = spectral_band(forward_transform(eta_t), group)
        band_error = max(band_error, abs(lo * t / band[0] - 1), abs(hi * t / band[1] - 1))
        # the shells move with the lattice, so D_alpha commutes with the dilation
        quad = DyadicQuadrature(eta_t.grid, group, base_quad.k_min + m, base_quad.k_max + m)
        potential = riesz_potential(eta_t, group, alpha)
        d = marcinkiewicz_d_alpha(eta_t, group, alpha, quad)
        norms["i_alpha_l2"].append(lp_norm(potential, 2))
        for p in config["p_values"]:
            norms[f"eta_lp_p{p:g}"].append(lp_norm(eta_t, p))
            norms[f"d_alpha_lp_p{p:g}"].append(lp_norm(d, p))
            norms[f"i_alpha_lp_p{p:g}"].append(lp_norm(potential, p))

    report.add_metric("band_tracking_error", band_error, source="rho-band of eta_t^ times t against that of eta^")
    report.require_at_most("band_tracks_dilation", "band_tracking_error", config.tolerance("band", 1e-9))

    report.add_slope("i_alpha_l2", ts, norms["i_alpha_l2"])
    report.add_metric("i_alpha_l2_expected_slope", alpha - gamma / 2, source="alpha - gamma/2 from the multiplier scaling")
    report.require_within("i_alpha_l2_exponent", "i_alpha_l2_slope", alpha - gamma / 2,
                          config.tolerance("exponent", 0.05))
    i2 = np.asarray(norms["i_alpha_l2"])
    for p in config["p_values"]:
        tag = f"p{p:g}"
        eta_p = np.asarray(norms[f"eta_lp_{tag}"])
        d_p = np.asarray(norms[f"d_alpha_lp_{tag}"])
        i_p = np.asarray(norms[f"i_alpha_lp_{tag}"])
        report.add_slope(f"eta_lp_{tag}", ts, eta_p)
        report.add_slope(f"d_alpha_lp_{tag}", ts, d_p)
        report.add_slope(f"i_alpha_lp_{tag}", ts, i_p)

        expected = alpha + gamma / 2 - gamma / p
        report.add_slope(f"ratio_{tag}", ts, i2 / eta_p)
        report.add_metric(f"ratio_{tag}_expected_slope", expected, source="alpha + gamma/2 - gamma/p")
        report.require_within(f"ratio_{tag}_exponent", f"ratio_{tag}_slope", expected,
                              config.tolerance("exponent", 0.05))
        if p < p0:
            report.require_at_most(f"ratio_{tag}_blows_up", f"ratio_{tag}_slope", -0.1)
        elif p > p0:
            report.require_at_least(f"ratio_{tag}_bounded", f"ratio_{tag}_slope", 0.0)

        report.add_slope(f"d_ratio_{tag}", ts, d_p / eta_p)
        report.add_metric(f"d_ratio_{tag}_abs_slope", abs(report.metrics[f"d_ratio_{tag}_slope"]))
        report.require_at_most(f"d_ratio_{tag}_flat", f"d_ratio_{tag}_abs_slope", config.tolerance("flat", 0.05))

        report.add_metric(f"chain_constant_{tag}", float(np.max(i2 / (d_p + i_p))),
                          source="||I_a eta||_2 / (||D_a eta||_p + ||I_a eta||_p), measured")
        report.require_at_most(f"chain_constant_{tag}_finite", f"chain_constant_{tag}", math.inf)
    return report
