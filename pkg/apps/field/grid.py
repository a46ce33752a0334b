"""Periodic sampled fields and their Fourier transforms.

Sign and scaling follow f^(xi) = int f(x) exp(-2 pi i <x, xi>) dx: the DFT is scaled by
the cell volume, samples sit at x = (i - N/2) h and frequencies at xi = k / L with
k in [-N/2, N/2), the Nyquist row on the negative side.
"""

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from apps.core.conf import analysis_setting
from apps.core.exceptions import InvalidGrid, InvalidInput, InvalidParameter

logger = logging.getLogger(__name__)


def _is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class GridSpec:
    shape: tuple
    extent: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        extent = tuple(float(length) for length in self.extent)
        if len(shape) != len(extent) or not shape:
            raise InvalidGrid("shape and extent must have the same positive length")
        if not all(_is_power_of_two(n) for n in shape):
            raise InvalidGrid(f"sample counts must be powers of two, got {shape}")
        if not all(length > 0 and math.isfinite(length) for length in extent):
            raise InvalidGrid(f"extents must be positive, got {extent}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "extent", extent)

    @classmethod
    def square(cls, n_points, length, dimension=2):
        return cls((n_points,) * dimension, (length,) * dimension)

    @classmethod
    def from_config(cls, data):
        return cls(tuple(data["shape"]), tuple(data["extent"]))

    @property
    def dimension(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(length / n for length, n in zip(self.extent, self.shape))

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def volume(self):
        return math.prod(self.extent)

    @property
    def size(self):
        return math.prod(self.shape)

    def axes(self):
        return [(np.arange(n) - n // 2) * h for n, h in zip(self.shape, self.spacing)]

    def frequency_axes(self):
        return [sp_fft.fftshift(sp_fft.fftfreq(n, d=h)) for n, h in zip(self.shape, self.spacing)]

    def points(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def frequencies(self):
        return np.stack(np.meshgrid(*self.frequency_axes(), indexing="ij"), axis=-1)

    def zero_frequency_index(self):
        return tuple(n // 2 for n in self.shape)

    def nearest_cells(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        index = np.rint(points / np.asarray(self.spacing) + np.asarray(self.shape) // 2)
        return np.clip(index.astype(np.intp), 0, np.asarray(self.shape) - 1)

    def dilated(self, group, t):
        """The grid carrying A_t applied to every lattice point (same sample counts)."""
        return GridSpec(self.shape, tuple(np.asarray(self.extent) * np.power(t, group.a)))

    def refined(self, factor):
        return GridSpec(tuple(n * factor for n in self.shape), self.extent)

    def rho_radius(self, group):
        """Largest r with B(0, r) inside the sampled box [-L/2, L/2)."""
        return min((length / 2) ** (1 / a) for length, a in zip(self.extent, group.exponents))

    def nyquist_rho_radius(self, group):
        """Largest r with the frequency ball {rho(xi) <= r} inside the dual lattice box."""
        return min((n / (2 * length)) ** (1 / a)
                   for n, length, a in zip(self.shape, self.extent, group.exponents))

    def cell_rho_diameter(self, group):
        return group.rho(np.asarray(self.spacing))


@functools.lru_cache(maxsize=8)
def spatial_rho(grid, group):
    """rho at every lattice point, read-only and cached per (grid, group)."""
    values = group.rho(grid.points())
    values.setflags(write=False)
    return values


@functools.lru_cache(maxsize=8)
def frequency_rho(grid, group):
    """rho at every dual-lattice frequency, read-only and cached per (grid, group)."""
    values = group.rho(grid.frequencies())
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise InvalidInput(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.points()))

    def with_values(self, values):
        return SampledField(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    @property
    def modulus(self):
        return np.abs(self.values)

    def integral(self):
        return complex(np.sum(self.values) * self.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=complex)
        if coefficients.shape != self.grid.shape:
            raise InvalidInput("coefficient shape does not match grid")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    def zero_coefficient(self):
        return complex(self.coefficients[self.grid.zero_frequency_index()])


def _workers():
    return analysis_setting("FFT_WORKERS")


def forward_transform(f):
    raw = sp_fft.fftn(sp_fft.ifftshift(f.values), workers=_workers())
    return SpectralField(f.grid, sp_fft.fftshift(raw) * f.grid.cell_volume)


def inverse_transform(spectrum):
    raw = sp_fft.ifftn(sp_fft.ifftshift(spectrum.coefficients), workers=_workers())
    return SampledField(spectrum.grid, sp_fft.fftshift(raw) / spectrum.grid.cell_volume)


def apply_multiplier(f, multiplier):
    """Inverse transform of multiplier * f^; ``multiplier`` lives on the centered lattice."""
    spectrum = forward_transform(f)
    return inverse_transform(SpectralField(f.grid, spectrum.coefficients * multiplier))


def synthesize(grid, multiplier):
    """Inverse transform of a multiplier sampled on the dual lattice."""
    return inverse_transform(SpectralField(grid, multiplier))


def spectral_derivative(f, axis):
    """d f / d x_axis, computed as the multiplier 2 pi i xi_axis."""
    xi = grid_frequency(f.grid, axis)
    return apply_multiplier(f, 2j * math.pi * xi)


def grid_frequency(grid, axis):
    shape = [1] * grid.dimension
    shape[axis] = grid.shape[axis]
    return grid.frequency_axes()[axis].reshape(shape)


def lp_norm(f, p):
    if p == np.inf or p == "inf":
        return float(np.max(f.modulus))
    p = float(p)
    if p < 1:
        raise InvalidParameter(f"L^p norms need p >= 1, got {p}")
    return float((np.sum(f.modulus ** p) * f.grid.cell_volume) ** (1 / p))


def spectral_l2_norm(spectrum):
    """(sum |f^|^2 / prod L)^(1/2), the Parseval side of ||f||_2."""
    return float(np.sqrt(np.sum(np.abs(spectrum.coefficients) ** 2) / spectrum.grid.volume))


def distribution_function(f, beta):
    """|{|f| > beta}| measured in cells."""
    if not beta > 0:
        raise InvalidParameter(f"beta must be positive, got {beta}")
    return float(np.count_nonzero(f.modulus > beta) * f.grid.cell_volume)


def translate(f, cells):
    """f(. - v) for the lattice vector v = cells * h (periodic)."""
    return f.with_values(np.roll(f.values, shift=tuple(cells), axis=tuple(range(f.grid.dimension))))


def remove_mean(f):
    """Project out the zero frequency."""
    spectrum = forward_transform(f)
    coefficients = spectrum.coefficients.copy()
    coefficients[f.grid.zero_frequency_index()] = 0.0
    return inverse_transform(SpectralField(f.grid, coefficients))


def dilate_field(f, group, t):
    """f_t(x) = t^-gamma f(A_t^-1 x), realised on the grid dilated by A_t.

    Samples move with the lattice, so f_t is exact rather than interpolated.
    """
    if not t > 0:
        raise InvalidParameter(f"dilation parameter must be positive, got {t}")
    return SampledField(f.grid.dilated(group, t), f.values * t ** (-group.gamma))


def smooth_bump(r, lo, hi):
    """C-infinity bump supported in (lo, hi), equal to 1 at the midpoint."""
    u = (2 * np.asarray(r, dtype=float) - lo - hi) / (hi - lo)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1 - 1 / (1 - u[inside] ** 2))
    return out


def require_annulus(grid, group, lo, hi, min_points=16):
    """Raise InvalidGrid unless lo <= rho(xi) <= hi is inside the lattice and sampled."""
    reach = grid.nyquist_rho_radius(group)
    if hi >= reach:
        raise InvalidGrid(
            f"annulus [{lo:g}, {hi:g}] exceeds the frequency box (rho reach {reach:.4g})",
            reach=reach,
        )
    xi_rho = frequency_rho(grid, group)
    count = int(np.count_nonzero((xi_rho >= lo) & (xi_rho <= hi)))
    if count < min_points:
        raise InvalidGrid(
            f"annulus [{lo:g}, {hi:g}] holds only {count} lattice frequencies",
            lattice_points=count,
        )
    return count


def make_band_limited(grid, group, seed, band=(1.0, 2.0), scale=1.0):
    """Real random eta with spectrum in the rho-annulus scale * band, ||eta||_2 = 1."""
    lo, hi = band[0] * scale, band[1] * scale
    require_annulus(grid, group, lo, hi)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    envelope = smooth_bump(frequency_rho(grid, group), lo, hi)
    field = synthesize(grid, noise * envelope)
    # the real part keeps the support since rho(-xi) = rho(xi)
    field = field.with_values(field.values.real)
    norm = lp_norm(field, 2)
    if norm == 0:
        raise InvalidGrid("band-limited generator produced a zero field")
    logger.debug("band-limited field seed=%s band=%s on %s", seed, band, grid.shape)
    return field * (1 / norm)


def plane_wave(grid, frequency_index):
    """exp(2 pi i <x, xi_0>) for the dual-lattice point with integer index k."""
    xi0 = np.asarray(frequency_index, dtype=float) / np.asarray(grid.extent)
    return SampledField(grid, np.exp(2j * math.pi * grid.points() @ xi0)), xi0
