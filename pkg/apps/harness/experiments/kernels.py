"""Weighted decay profiles of the synthesised kernels."""

import re

import numpy as np

from apps.field.grid import GridSpec
from apps.kernels.synthesis import (KernelKind, decay_profile, piece_span_grid, synthesize_kind,
                                     synthesize_rho_tilde)

from ..registry import experiment
from ..report import ExperimentReport

CORE_RADIUS = 4.0
POISSON_FAMILIES = ["K", "Q", "deriv:0", "deriv:1", "deriv_rho:0", "deriv_rho:1", "deriv2:0,1"]


def metric_key(label):
    """``deriv2(0, 1)`` -> ``deriv2_0_1``."""
    return re.sub(r"[^A-Za-z0-9.-]+", "_", label.replace("=", "")).strip("_")


def decay_grid(group):
    """Boxes whose rho radius is at least 12, so the profiles reach past the core rho <= 4."""
    if group.is_isotropic:
        return GridSpec((512,) * group.dimension, (32.0,) * group.dimension)
    # rho radius 12; e^(-2 pi rho) below 1e-14 on the Nyquist rows
    return GridSpec((256, 16384), (24.0, 256.0))


def base_piece_grid(group):
    """The grid of piece m = 0; its rho radius is 4 for the parabolic group, 8 otherwise."""
    if group.is_isotropic:
        return GridSpec((256,) * group.dimension, (16.0,) * group.dimension)
    return GridSpec((128, 2048), (8.0, 32.0))


def default_piece_window(group):
    # the parabolic span grid grows by 2 x 4 per extra index
    return [-1, 1] if group.is_isotropic else [0, 1]


def halved(grid):
    """Same spacing, half the sides: the box whose double is ``grid``."""
    return GridSpec(tuple(n // 2 for n in grid.shape), tuple(length / 2 for length in grid.extent))


def doubling_change(small, large, limit):
    """max |s / l - 1| over the shells shared by both profiles with outer edge <= limit."""
    common = {tuple(e): s for e, s in zip(large.edges, large.sups)}
    changes = [abs(value / common[tuple(edge)] - 1)
               for edge, value in zip(small.edges, small.sups)
               if edge[1] <= limit and tuple(edge) in common and common[tuple(edge)] > 0]
    return (max(changes) if changes else float("nan")), len(changes)


@experiment("kernel-decay", "Shell profiles of |k| (1 + rho)^(gamma + 1 + ...) for K, Q and the derivative kernels.",
            kernels=POISSON_FAMILIES)
def kernel_decay(config):
    group = config.group
    grid = config.grid(decay_grid)
    epsilon = config.tolerance("decay_excess", 0.15)
    report = ExperimentReport("kernel-decay")
    large = None
    for text in config["kernels"]:
        kernel = synthesize_kind(text, group, grid, alpha=config.get("alpha"))
        profile = decay_profile(kernel)
        key = metric_key(kernel.kind.label)
        report.add_metric(f"{key}_exponent", kernel.exponent)
        report.add_metric(f"{key}_core_max", profile.core_max())
        report.add_metric(f"{key}_excess", profile.excess())
        report.add_metric(f"{key}_boundary_sup", kernel.boundary_sup,
                          source="measured on the box faces, not asserted")
        report.add_metric(f"{key}_outer_shells", int(np.sum(profile.edges[:, 1] > CORE_RADIUS * (1 + 1e-12))))
        report.add_series(f"{key}_profile", [(hi, s) for _, hi, s in profile.rows()])
        report.require_at_least(f"{key}_outer_measured", f"{key}_outer_shells", 1)
        report.require_at_most(f"{key}_bounded", f"{key}_excess", epsilon)
        if kernel.kind.family == "K" and not kernel.kind.axes:
            large = profile

    if large is None:
        large = decay_profile(synthesize_kind("K", group, grid))
    small_grid = halved(grid)
    small = decay_profile(synthesize_kind("K", group, small_grid))
    change, shells = doubling_change(small, large, small_grid.rho_radius(group) / 4)
    report.add_metric("doubling_change", change, source="K on the box with halved sides and sample counts")
    report.add_metric("doubling_shells", shells)
    report.require_at_least("doubling_compared", "doubling_shells", 1)
    report.require_at_most("doubling_stable", "doubling_change", config.tolerance("doubling", 0.1))
    return report


@experiment("rho-tilde-uniformity", "Decay profiles of the dyadic Riesz pieces, uniform in the dyadic index.",
            alpha=0.5, j_range=[-3, 3], m_range=None)
def rho_tilde_uniformity(config):
    group = config.group
    alpha = config["alpha"]
    base = config.grid(base_piece_grid)
    lo, hi = config["j_range"]
    m_lo, m_hi = config["m_range"] or default_piece_window(group)
    report = ExperimentReport("rho-tilde-uniformity")

    # every piece of the window on one lattice, so each index meets a different resolution
    span = piece_span_grid(base, group, m_lo, m_hi)
    report.add_metric("span_points", span.size)
    for axis in [None, *range(group.dimension)]:
        maxima = []
        for m in range(m_lo, m_hi + 1):
            piece = synthesize_rho_tilde(m, alpha, group, span, axis=axis)
            maxima.append((m, float(decay_profile(piece).sups.max())))
        name = "rho_tilde" if axis is None else f"rho_tilde_axis{axis}"
        values = [v for _, v in maxima]
        report.add_series(f"{name}_profile_max", maxima)
        report.add_metric(f"{name}_uniformity", max(values) / min(values))
        report.add_metric(f"{name}_exponent", KernelKind("rho_tilde", () if axis is None else (axis,), m=0,
                                                         alpha=alpha).claimed_exponent(group))
        report.require_at_most(f"{name}_uniform", f"{name}_uniformity", config.tolerance("uniformity", 1.25))

    # the pieces outside the window follow from the exact rescaling of piece 0
    reference = synthesize_rho_tilde(0, alpha, group, base)
    scale = float(np.max(reference.field.modulus))
    scaling_error = 0.0
    for m in range(lo, hi + 1):
        piece = synthesize_rho_tilde(m, alpha, group, base.dilated(group, 2.0 ** m))
        expected = 2.0 ** (m * (alpha - group.gamma)) * reference.values
        scaling_error = max(scaling_error, float(np.max(np.abs(piece.values - expected))) / scale)
    report.add_metric("scaling_error", scaling_error, source="2^(m (alpha - gamma)) times the m = 0 piece")
    report.require_at_most("exact_scaling", "scaling_error", config.tolerance("scaling", 1e-6))
    return report
