"""Whitney-type covers of grid regions by rho-balls.

For every cell x of the region, r(x) = dist_rho(x, complement) / (10 C1 N). Cells are taken
by decreasing r(x), ties broken by lattice order, and x is selected when
rho(x - c) >= 5 r(x) + 5 r(c) for every centre c already selected, so the 5r-balls are
disjoint as subsets of R^n and not merely on the lattice. The cover consists of
B(c_j, 10 r(c_j)):

* a skipped cell x has a selected c with r(c) >= r(x) and rho(x - c) < 5 r(x) + 5 r(c)
  <= 10 r(c), so x is covered;
* 10 r(c_j) = dist / (C1 N) < dist, so no ball reaches the complement;
* the closed ball of radius C1 N r_j touches the complement.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, replace

import numpy as np

from apps.core.exceptions import InvalidInput, InvalidParameter
from apps.dilation.geometry import RhoBall, distances_to_complement

logger = logging.getLogger(__name__)

EXPANSION = 2.0
SELECTION_FACTOR = 5.0


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    grid: object
    group: object
    balls: tuple
    dilate: float
    expansion: float
    overlap: int
    distances: tuple

    def __len__(self):
        return len(self.balls)

    def cells(self, j, scale=1.0):
        return self.balls[j].cell_indices(self.group, self.grid, scale)

    def union(self, scale=1.0):
        mask = np.zeros(self.grid.size, dtype=bool)
        for j in range(len(self.balls)):
            mask[self.cells(j, scale)] = True
        return mask.reshape(self.grid.shape)

    def touch_ratio(self):
        """max_j dist(c_j, complement) / (C1 N r_j); at most 1 when every closed C1 N-dilate meets it."""
        if not self.balls:
            return 0.0
        return max(d / (self.expansion * self.dilate * b.radius) for b, d in zip(self.balls, self.distances))

    def as_dict(self):
        return {
            "dilate": self.dilate,
            "expansion": self.expansion,
            "overlap": self.overlap,
            "balls": [{"center": list(b.center), "radius": b.radius} for b in self.balls],
        }


def _validate_mask(mask, grid):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise InvalidInput(f"mask shape {mask.shape} does not match grid {grid.shape}")
    if not mask.any():
        raise InvalidInput("cannot cover an empty region")
    if mask.all():
        raise InvalidInput("the region has an empty complement")
    return mask


def overlap_count(cover, scale):
    counts = np.zeros(cover.grid.size, dtype=int)
    for j in range(len(cover)):
        counts[cover.cells(j, scale)] += 1
    return counts.reshape(cover.grid.shape)


def whitney_cover(mask, group, grid, dilate=1.0, expansion=EXPANSION):
    if not dilate >= 1:
        raise InvalidParameter(f"the dilate factor N must be >= 1, got {dilate}")
    if not expansion >= 1:
        raise InvalidParameter(f"the expansion constant must be >= 1, got {expansion}")
    mask = _validate_mask(mask, grid)

    cells = np.flatnonzero(mask)
    points = grid.points().reshape(-1, grid.dimension)[cells]
    distance = distances_to_complement(group, points, mask, grid)
    radius = distance / (10 * expansion * dilate)
    # largest radius first; flat index order is lexicographic order of the centres
    order = np.lexsort((cells, -radius))

    # cell -> selected candidates whose cover ball B(c, 10 r_c) holds that cell's centre
    holders = defaultdict(list)
    selected = []
    for idx in order:
        rivals = holders.get(cells[idx])
        if rivals:
            rivals = np.asarray(rivals)
            gaps = np.atleast_1d(group.rho(points[idx] - points[rivals]))
            if np.any(gaps < SELECTION_FACTOR * (radius[idx] + radius[rivals])):
                continue
        for cell in RhoBall(points[idx], 10 * radius[idx]).cell_indices(group, grid):
            holders[cell].append(idx)
        selected.append(idx)

    balls = tuple(RhoBall(points[i], 10 * radius[i]) for i in selected)
    cover = WhitneyCover(grid, group, balls, float(dilate), float(expansion), 0,
                         tuple(float(distance[i]) for i in selected))
    overlap = int(overlap_count(cover, dilate).max())
    logger.info("Whitney cover of %d cells: %d balls, N-dilate overlap %d",
                cells.size, len(balls), overlap)
    return replace(cover, overlap=overlap)


def check_cover(cover, mask):
    """Measured conclusions of the covering: mismatched cells, overlap, complement contact."""
    mask = np.asarray(mask, dtype=bool)
    union = cover.union()
    return {
        "cover_mismatch_cells": int(np.count_nonzero(union != mask)),
        "overlap": cover.overlap,
        "touch_ratio": cover.touch_ratio(),
        "balls": len(cover),
    }
