"""On-disk formats for sampled fields.

Binary (``.ahf``), all little-endian::

    magic    4 bytes   b"AHF1"
    n        uint32    dimension
    N_j      n x uint64 sample counts
    L_j      n x float64 extents
    values   prod(N_j) x (float64 re, float64 im), row-major, lattice order

CSV (small grids only): header ``x1,...,xn,re,im`` then one row per lattice point in the
same row-major order.
"""

import csv
import logging
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidInput

from .grid import GridSpec, SampledField

logger = logging.getLogger(__name__)

MAGIC = b"AHF1"
CSV_MAX_POINTS = 1 << 16


def dump_binary(f, path):
    path = Path(path)
    n = f.grid.dimension
    with path.open("wb") as handle:
        handle.write(MAGIC)
        handle.write(np.asarray([n], dtype="<u4").tobytes())
        handle.write(np.asarray(f.grid.shape, dtype="<u8").tobytes())
        handle.write(np.asarray(f.grid.extent, dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())
    logger.debug("wrote %s (%d points)", path, f.grid.size)
    return path


def load_binary(path):
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise InvalidInput(f"{path} is not a field dump (bad magic)")
    offset = 4
    n = int(np.frombuffer(data, dtype="<u4", count=1, offset=offset)[0])
    offset += 4
    shape = tuple(int(v) for v in np.frombuffer(data, dtype="<u8", count=n, offset=offset))
    offset += 8 * n
    extent = tuple(float(v) for v in np.frombuffer(data, dtype="<f8", count=n, offset=offset))
    offset += 8 * n
    grid = GridSpec(shape, extent)
    expected = offset + 16 * grid.size
    if len(data) != expected:
        raise InvalidInput(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<c16", count=grid.size, offset=offset)
    return SampledField(grid, values.reshape(shape))


def dump_csv(f, path):
    if f.grid.size > CSV_MAX_POINTS:
        raise InvalidInput(
            f"CSV export is limited to {CSV_MAX_POINTS} points; use the binary format"
        )
    path = Path(path)
    coords = f.grid.points().reshape(-1, f.grid.dimension)
    values = f.values.reshape(-1)
    header = [f"x{k + 1}" for k in range(f.grid.dimension)] + ["re", "im"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for point, value in zip(coords, values):
            row = [float(c) for c in point] + [float(value.real), float(value.imag)]
            writer.writerow([repr(v) for v in row])
    return path


def dump_field(f, path):
    """Write by suffix: ``.csv`` as CSV, anything else binary."""
    path = Path(path)
    if path.suffix == ".csv":
        return dump_csv(f, path)
    return dump_binary(f, path)
