"""Hardy-Littlewood maximal operator over anisotropic rectangles, and M_s.

Rectangles prod [-r^a_j, r^a_j] replace rho-balls: B(x, r) sits inside the rectangle of
radius r, which in turn sits inside B(x, c r) with c = rho(1, ..., 1). Averages come from
summed-area tables (one cumulative sum per axis, periodic padding); the sup over the
rectangles that contain x, rather than those centred at x, is a sliding maximum.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from apps.core.exceptions import InvalidParameter
from apps.dilation.geometry import euclidean_ball_volume
from apps.field.grid import SampledField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaximalConstants:
    rect_ball_ratio: float
    covering_factor: float

    def as_dict(self):
        return {"rect_ball_ratio": self.rect_ball_ratio, "covering_factor": self.covering_factor}


def maximal_constants(group):
    n = group.dimension
    return MaximalConstants(
        rect_ball_ratio=2.0 ** n / euclidean_ball_volume(n),
        covering_factor=group.covering_factor(),
    )


def rectangle_half_widths(grid, group):
    """Half-widths in cells of the rectangles for dyadic r, from the single cell upwards."""
    spacing = np.asarray(grid.spacing)
    cap = (np.asarray(grid.shape) - 1) // 2
    smallest = min(h ** (1 / a) for h, a in zip(spacing, group.exponents))
    largest = max((length / 2) ** (1 / a) for length, a in zip(grid.extent, group.exponents))
    widths = [tuple(0 for _ in grid.shape)]
    for m in range(math.floor(math.log2(smallest)), math.ceil(math.log2(largest)) + 1):
        r = 2.0 ** m
        k = np.minimum(np.floor(r ** group.a / spacing + 1e-9).astype(int), cap)
        k = tuple(int(v) for v in k)
        if k != widths[-1]:
            widths.append(k)
    return widths


def _box_sum(values, axis, k):
    if k == 0:
        return values
    padded = np.pad(values, [(k, k) if ax == axis else (0, 0) for ax in range(values.ndim)], mode="wrap")
    cumulative = np.cumsum(padded, axis=axis)
    zero_shape = list(cumulative.shape)
    zero_shape[axis] = 1
    cumulative = np.concatenate([np.zeros(zero_shape), cumulative], axis=axis)
    width = 2 * k + 1
    upper = np.take(cumulative, np.arange(width, cumulative.shape[axis]), axis=axis)
    lower = np.take(cumulative, np.arange(0, cumulative.shape[axis] - width), axis=axis)
    return upper - lower


def rectangle_average(values, half_widths):
    """Average of ``values`` over the rectangle of (2k_j + 1) cells centred at each cell."""
    total = values
    for axis, k in enumerate(half_widths):
        total = _box_sum(total, axis, k)
    return total / math.prod(2 * k + 1 for k in half_widths)


def hl_maximal(f, group, centered=False):
    """M(f)(x) = sup over dyadic rectangles R containing x of the average of |f| over R."""
    modulus = np.abs(f.values)
    best = np.zeros(f.grid.shape)
    widths = rectangle_half_widths(f.grid, group)
    for k in widths:
        average = rectangle_average(modulus, k)
        if not centered:
            average = ndimage.maximum_filter(average, size=[2 * w + 1 for w in k], mode="wrap")
        np.maximum(best, average, out=best)
    logger.debug("maximal function over %d rectangle sizes on %s", len(widths), f.grid.shape)
    return SampledField(f.grid, best)


def m_s(f, group, s):
    """M_s(f) = M(|f|^s)^(1/s)."""
    if not s > 1:
        raise InvalidParameter(f"M_s needs s > 1, got {s}")
    powered = SampledField(f.grid, np.abs(f.values) ** s)
    return SampledField(f.grid, hl_maximal(powered, group).values.real ** (1 / s))
