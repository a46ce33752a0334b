"""Whitney covers of fixed masks and the Calderon-Zygmund suite over heights and grids."""

import math

import numpy as np

from apps.decomposition.cz import OVERLAP_LIMIT, cz_decompose, verify_cz
from apps.decomposition.whitney import check_cover, whitney_cover
from apps.dilation.geometry import RhoBall
from apps.field.grid import GridSpec, SampledField, smooth_bump, spatial_rho

from ..registry import experiment
from ..report import ExperimentReport

CZ_CONSTANTS = ("omega_constant", "good_sup_constant", "good_lp_constant",
                "ball_average_constant", "bad_lp_constant", "ball_sum_constant")


def reference_masks(group, grid):
    """A rho-ball, an axis-parallel square and two disjoint balls."""
    origin = (0.0,) * grid.dimension
    shift = np.zeros(grid.dimension)
    shift[0] = grid.extent[0] / 4
    square = np.all(np.abs(grid.points()) < min(grid.extent) / 4, axis=-1)
    pair = (RhoBall(tuple(-shift), 1.5).rasterize(group, grid)
            | RhoBall(tuple(shift), 1.5).rasterize(group, grid))
    return {"ball": RhoBall(origin, 2.0).rasterize(group, grid), "square": square, "pair": pair}


@experiment("whitney", "Whitney covers of three masks: exact union, bounded overlap, complement contact.",
            dilate=1.0, grid={"shape": [128, 128], "extent": [16.0, 16.0]})
def whitney(config):
    group, grid = config.group, config.grid()
    report = ExperimentReport("whitney")
    for name, mask in reference_masks(group, grid).items():
        measured = check_cover(whitney_cover(mask, group, grid, dilate=config["dilate"]), mask)
        for key, value in measured.items():
            report.add_metric(f"{name}_{key}", value)
        report.require_at_most(f"{name}_exact", f"{name}_cover_mismatch_cells", 0)
        report.require_at_most(f"{name}_overlap", f"{name}_overlap", config.tolerance("overlap", OVERLAP_LIMIT))
        report.require_at_most(f"{name}_contact", f"{name}_touch_ratio", 1 + 1e-9)
    return report


def cz_field(grid, group, height=4.0, radius=1.0):
    """height * smooth bump in rho(x), supported in B(0, radius)."""
    return SampledField(grid, height * smooth_bump(spatial_rho(grid, group), -radius, radius))


def cz_report(verification, name="cz-verify"):
    """The checks of a CZ verification as an experiment report."""
    report = ExperimentReport(name, config={"beta": verification.beta, "p": verification.p})
    for metric, value in verification.metrics.items():
        report.add_metric(metric, value)
    for check, bound in verification.verdicts.items():
        report.require_at_most(check, bound.metric, bound.limit)
    return report


def spread(values):
    values = [v for v in values if v > 0]
    return max(values) / min(values) if values else 1.0


@experiment("cz-suite", "CZ decompositions over heights beta = factor * median|f| and refined grids.",
            p=1.0, beta_factors=[0.5, 1.0, 2.0], samples=3)
def cz_suite(config):
    group, p = config.group, config["p"]
    base = config.grid(GridSpec.square(64, 8.0))
    grids = [base.refined(2 ** k) for k in range(config["samples"])]
    report = ExperimentReport("cz-suite")
    failures = 0
    constants = {(name, factor): [] for name in CZ_CONSTANTS for factor in config["beta_factors"]}
    for grid in grids:
        f = cz_field(grid, group)
        median = float(np.median(f.modulus[f.modulus > 0]))
        for factor in config["beta_factors"]:
            beta = factor * median
            dec = cz_decompose(f, beta, p, group, dilate=config.get("dilate", 1.0))
            check = verify_cz(dec, f)
            failed = check.failed()
            failures += len(failed)
            tag = f"n{grid.shape[0]}_beta{factor:g}"
            for name in ("reconstruction_error", "mean_zero_error", "overlap", *CZ_CONSTANTS):
                report.add_metric(f"{tag}_{name}", check.metrics[name])
            report.add_metric(f"{tag}_bad_parts", len(dec.bad))
            for name in CZ_CONSTANTS:
                constants[(name, factor)].append(check.metrics[name])
            if failed:
                report.provenance[tag] = "failed: " + ", ".join(failed)

    report.add_metric("verify_failures", failures, source="verdicts of every individual decomposition")
    report.require_at_most("all_decompositions_verified", "verify_failures", 0)
    worst = max(spread(values) for values in constants.values())
    report.add_metric("refinement_spread", worst, source="max/min of each constant over the grids at fixed beta")
    report.require_at_most("constants_stable", "refinement_spread", config.tolerance("stability", 2.0))
    across_beta = max(spread([v for (n, _), vs in constants.items() if n == name for v in vs])
                      for name in CZ_CONSTANTS)
    report.add_metric("beta_spread", across_beta, source="measured only")
    report.require_at_most("constants_finite", "beta_spread", math.inf)
    return report
