"""Calderon-Zygmund decomposition f = g + sum_j b_j at height beta.

Omega = {M(|f|^p) > beta^p} is covered by a Whitney cover {B_j}; with the partition
h_j = chi_Bj / sum_k chi_Bk on Omega,

    b_j = f h_j - m_j chi_Bj,    m_j = |B_j|^-1 int_Bj f h_j,
    g   = sum_j m_j chi_Bj + f chi_(Omega^c).

Measures are cell counts times the cell volume, so int b_j = 0 holds to round-off.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from apps.core.exceptions import BetaTooSmall, InvalidInput, InvalidParameter
from apps.field.grid import SampledField, lp_norm
from apps.field.io import dump_binary
from apps.operators.maximal import hl_maximal

from .whitney import EXPANSION, check_cover, whitney_cover

logger = logging.getLogger(__name__)

OVERLAP_LIMIT = 64


@dataclass(frozen=True, eq=False)
class BadPart:
    ball: int
    cells: np.ndarray
    values: np.ndarray

    def to_field(self, grid):
        values = np.zeros(grid.size, dtype=complex)
        values[self.cells] = self.values
        return SampledField(grid, values.reshape(grid.shape))

    def integral(self, grid):
        return complex(np.sum(self.values) * grid.cell_volume)

    def l1_norm(self, grid):
        return float(np.sum(np.abs(self.values)) * grid.cell_volume)

    def lp_power(self, grid, p):
        return float(np.sum(np.abs(self.values) ** p) * grid.cell_volume)


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    beta: float
    p: float
    group: object
    grid: object
    omega: np.ndarray
    cover: object
    good: SampledField
    bad: tuple
    averages: tuple

    @property
    def is_trivial(self):
        return not self.bad

    def ball_measure(self, j):
        return self.bad[j].cells.size * self.grid.cell_volume

    def reconstruct(self):
        total = self.good.values.copy().reshape(-1)
        for part in self.bad:
            total[part.cells] += part.values
        return SampledField(self.grid, total.reshape(self.grid.shape))

    def as_dict(self):
        return {
            "beta": self.beta,
            "p": self.p,
            "exponents": list(self.group.exponents),
            "grid": {"shape": list(self.grid.shape), "extent": list(self.grid.extent)},
            "omega_measure": float(np.count_nonzero(self.omega) * self.grid.cell_volume),
            "cover": self.cover.as_dict() if self.cover is not None else None,
            "bad_parts": [
                {
                    "ball": part.ball,
                    "cells": int(part.cells.size),
                    "average": [self.averages[j].real, self.averages[j].imag],
                    "l1_norm": part.l1_norm(self.grid),
                }
                for j, part in enumerate(self.bad)
            ],
        }

    def dump(self, out_dir):
        """decomposition.json, good.ahf and bad_<j>.ahf under ``out_dir``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "decomposition.json").write_text(json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n")
        written = [dump_binary(self.good, out_dir / "good.ahf")]
        for j, part in enumerate(self.bad):
            written.append(dump_binary(part.to_field(self.grid), out_dir / f"bad_{j}.ahf"))
        return written


def _touches_faces(mask):
    return any(np.take(mask, 0, axis=k).any() or np.take(mask, -1, axis=k).any()
               for k in range(mask.ndim))


def _check_parameters(beta, p):
    if not beta > 0:
        raise InvalidParameter(f"beta must be positive, got {beta}")
    if not 1 <= p < math.inf:
        raise InvalidParameter(f"p must lie in [1, inf), got {p}")


def level_set(f, beta, p, group):
    """Omega = {M(|f|^p) > beta^p}."""
    powered = SampledField(f.grid, np.abs(f.values) ** p)
    return hl_maximal(powered, group).values.real > beta ** p


def cz_decompose(f, beta, p, group, dilate=1.0, support=None):
    _check_parameters(beta, p)
    support = np.abs(f.values) > 0 if support is None else np.asarray(support, dtype=bool)
    if support.shape != f.grid.shape:
        raise InvalidInput("support mask does not match the grid")
    if np.any(f.values[~support] != 0):
        raise InvalidInput("f does not vanish outside the given support")
    if _touches_faces(support):
        raise InvalidInput("f must be supported away from the box faces")

    grid = f.grid
    omega = level_set(f, beta, p, group)
    if not omega.any():
        logger.info("beta=%g above the maximal function: trivial decomposition", beta)
        return CZDecomposition(beta, p, group, grid, omega, None, f, (), ())
    if omega.all() or _touches_faces(omega):
        raise BetaTooSmall(
            f"beta={beta:g}: the level set reaches the box faces, so the periodic maximal "
            "function no longer describes f on R^n",
            omega_fraction=float(omega.mean()),
        )

    cover = whitney_cover(omega, group, grid, dilate, EXPANSION)
    ball_cells = [cover.cells(j) for j in range(len(cover))]
    counts = np.zeros(grid.size)
    for cells in ball_cells:
        counts[cells] += 1

    values = f.values.reshape(-1)
    good = np.where(omega.reshape(-1), 0.0, values).astype(complex)
    bad, averages = [], []
    for j, cells in enumerate(ball_cells):
        weighted = values[cells] / counts[cells]
        mean = weighted.sum() / cells.size
        good[cells] += mean
        bad.append(BadPart(j, cells, weighted - mean))
        averages.append(complex(mean))
    logger.info("CZ decomposition beta=%g p=%g: |Omega| = %d cells, %d bad parts",
                beta, p, int(omega.sum()), len(bad))
    return CZDecomposition(beta, p, group, grid, omega, cover,
                           SampledField(grid, good.reshape(grid.shape)), tuple(bad), tuple(averages))


@dataclass(frozen=True)
class Check:
    metric: str
    limit: float
    value: float

    @property
    def passed(self):
        return bool(math.isfinite(self.value) and self.value <= self.limit)


@dataclass
class CZVerification:
    """Measured constants of one decomposition plus the bounds each check holds them to."""

    beta: float
    p: float
    metrics: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def measure(self, name, value):
        self.metrics[name] = float(value)

    def bound(self, check, metric, limit):
        self.verdicts[check] = Check(metric, float(limit), self.metrics[metric])

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts.values())

    def failed(self):
        return sorted(k for k, v in self.verdicts.items() if not v.passed)


def verify_cz(dec, f):
    """Measure every conclusion of the Whitney cover and the decomposition ``dec`` against ``f``."""
    if f.grid != dec.grid:
        raise InvalidInput("the field and the decomposition live on different grids")
    grid, beta, p = dec.grid, dec.beta, dec.p
    result = CZVerification(beta, p)
    f_power = lp_norm(f, p) ** p
    cellvol = grid.cell_volume

    error = float(np.max(np.abs(f.values - dec.reconstruct().values)))
    result.measure("reconstruction_error", error)
    result.bound("reconstruction", "reconstruction_error", 1e-10)

    omega_measure = np.count_nonzero(dec.omega) * cellvol
    result.measure("omega_constant", omega_measure * beta ** p / f_power if f_power else 0.0)
    outside = ~dec.omega
    off_sup = float(np.max(np.abs(f.values[outside]))) if outside.any() else 0.0
    result.measure("off_omega_constant", off_sup / beta)
    result.measure("good_sup_constant", float(np.max(dec.good.modulus)) / beta)
    f_norm = lp_norm(f, p)
    result.measure("good_lp_constant", lp_norm(dec.good, p) / f_norm if f_norm else 0.0)

    overlap, mismatch, touch = 0, 0, 0.0
    ball_average = bad_lp = mean_zero = ball_sum = 0.0
    support_violations = 0
    if dec.cover is not None:
        covered = check_cover(dec.cover, dec.omega)
        overlap, mismatch, touch = covered["overlap"], covered["cover_mismatch_cells"], covered["touch_ratio"]
        modulus_p = np.abs(f.values.reshape(-1)) ** p
        for j, part in enumerate(dec.bad):
            cells = dec.cover.cells(j)
            measure = dec.ball_measure(j)
            support_violations += int(np.setdiff1d(part.cells, cells).size)
            ball_average = max(ball_average, float(modulus_p[cells].mean()) / beta ** p)
            bad_lp = max(bad_lp, part.lp_power(grid, p) / (beta ** p * measure))
            mean_zero = max(mean_zero, abs(part.integral(grid)) / (part.l1_norm(grid) + 1))
            ball_sum += measure
        ball_sum = ball_sum * beta ** p / f_power

    result.measure("overlap", overlap)
    result.measure("cover_mismatch_cells", mismatch)
    result.measure("touch_ratio", touch)
    result.measure("ball_average_constant", ball_average)
    result.measure("bad_lp_constant", bad_lp)
    result.measure("mean_zero_error", mean_zero)
    result.measure("ball_sum_constant", ball_sum)
    result.measure("support_violations", support_violations)

    result.bound("cover_exact", "cover_mismatch_cells", 0)
    result.bound("overlap_bounded", "overlap", OVERLAP_LIMIT)
    result.bound("complement_contact", "touch_ratio", 1 + 1e-9)
    result.bound("supports", "support_violations", 0)
    result.bound("mean_zero", "mean_zero_error", 1e-10)
    # M(|f|^p) >= |f|^p cell by cell, so |f| <= beta off Omega
    result.bound("bounded_off_omega", "off_omega_constant", 1 + 1e-12)
    for name in ("omega_constant", "ball_average_constant", "good_sup_constant",
                 "good_lp_constant", "bad_lp_constant", "ball_sum_constant"):
        result.bound(f"{name}_finite", name, math.inf)
    if not result.passed:
        logger.warning("CZ decomposition beta=%g p=%g failed: %s", beta, p, ", ".join(result.failed()))
    return result
