"""Spectral synthesis of the Poisson-type kernels, the dyadic Riesz pieces and R_alpha.

Every kernel here is the inverse transform of a multiplier sampled on the dual lattice, so
what the grid holds is the periodisation of the kernel over the box. Decay profiles are
read off inside rho <= R, the largest ball the box contains.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from apps.core.conf import analysis_setting
from apps.core.exceptions import InvalidGrid, InvalidInput, InvalidParameter
from apps.field.grid import (
    GridSpec,
    SampledField,
    frequency_rho,
    grid_frequency,
    require_annulus,
    spatial_rho,
    synthesize,
)
from apps.operators.multipliers import riesz_multiplier
from apps.operators.partition import phi, phi_tilde

logger = logging.getLogger(__name__)

FAMILIES = ("K", "Q", "deriv", "deriv_rho", "deriv2", "rho_tilde", "riesz")
_AXIS_COUNT = {"K": (0,), "Q": (0,), "deriv": (1,), "deriv_rho": (1,), "deriv2": (2,),
               "rho_tilde": (0, 1), "riesz": (0,)}

ONE_PLUS_RHO = "one_plus_rho"
RHO = "rho"


@dataclass(frozen=True)
class KernelKind:
    """A kernel family with its coordinate indices and, for the Riesz family, m and alpha."""

    family: str
    axes: tuple = ()
    m: int = None
    alpha: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown kernel kind {self.family!r}; expected one of {FAMILIES}")
        axes = tuple(int(k) for k in self.axes)
        if len(axes) not in _AXIS_COUNT[self.family]:
            raise InvalidParameter(f"kernel kind {self.family} takes {_AXIS_COUNT[self.family]} indices")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def parse(cls, text, alpha=None):
        """``K``, ``Q``, ``deriv:k``, ``deriv_rho:k``, ``deriv2:k,l``, ``rho_tilde:m[,s]``, ``riesz``."""
        family, _, rest = text.partition(":")
        try:
            args = [int(v) for v in rest.split(",")] if rest else []
        except ValueError:
            raise InvalidParameter(f"cannot parse kernel kind {text!r}") from None
        if family == "rho_tilde":
            if not args:
                raise InvalidParameter("rho_tilde needs its dyadic index, e.g. rho_tilde:0")
            return cls(family, tuple(args[1:]), m=args[0], alpha=alpha)
        return cls(family, tuple(args), alpha=alpha)

    @property
    def label(self):
        parts = [str(k) for k in self.axes]
        if self.m is not None:
            parts.insert(0, f"m={self.m}")
        if self.alpha is not None and self.family in ("rho_tilde", "riesz"):
            parts.append(f"alpha={self.alpha:g}")
        return f"{self.family}({', '.join(parts)})" if parts else self.family

    @property
    def weighting(self):
        """(1 + rho)^e for the Poisson family, rho^e for the homogeneous pieces."""
        return RHO if self.family in ("rho_tilde", "riesz") else ONE_PLUS_RHO

    def claimed_exponent(self, group):
        a = group.exponents
        if self.family in ("K", "Q"):
            return group.gamma + 1
        if self.family in ("deriv", "deriv_rho"):
            return group.gamma + 1 + a[self.axes[0]]
        if self.family == "deriv2":
            return group.gamma + 1 + a[self.axes[0]] + a[self.axes[1]]
        extra = a[self.axes[0]] if self.axes else 0.0
        return group.gamma - self.alpha + extra


@dataclass(frozen=True, eq=False)
class KernelField:
    field: SampledField
    kind: KernelKind
    group: object
    exponent: float
    boundary_sup: float = 0.0

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values


def _check_axes(kind, group):
    for k in kind.axes:
        if not 0 <= k < group.dimension:
            raise InvalidParameter(f"coordinate index {k} out of range for n = {group.dimension}")


def check_nyquist(grid, group, tolerance=None):
    """Raise InvalidGrid unless e^(-2 pi rho) is below ``tolerance`` on the Nyquist rows."""
    tolerance = analysis_setting("NYQUIST_TOLERANCE") if tolerance is None else tolerance
    rho = frequency_rho(grid, group)
    edge = min(float(np.take(rho, 0, axis=axis).min()) for axis in range(grid.dimension))
    value = math.exp(-2 * math.pi * edge)
    if value >= tolerance:
        raise InvalidGrid(
            f"e^(-2 pi rho) = {value:.3e} at the Nyquist shell exceeds {tolerance:.1e}; refine the grid",
            nyquist_value=value,
        )
    return value


def boundary_sup(field):
    """sup |k| over the cells on the box faces x_j = -L_j / 2."""
    modulus = field.modulus
    return max(float(np.take(modulus, 0, axis=axis).max()) for axis in range(field.grid.dimension))


def _poisson_family_multiplier(kind, grid, group):
    rho = frequency_rho(grid, group)
    decay = np.exp(-2 * math.pi * rho)
    if kind.family == "K":
        return decay
    if kind.family == "Q":
        return -2 * math.pi * rho * decay
    xi = [grid_frequency(grid, k) for k in kind.axes]
    if kind.family == "deriv":
        return xi[0] * decay
    if kind.family == "deriv_rho":
        return xi[0] * rho * decay
    return xi[0] * xi[1] * decay


def _finish(field, kind, group):
    sup = boundary_sup(field)
    target = analysis_setting("BOUNDARY_SUP_TARGET")
    if sup > target:
        logger.warning(
            "%s: sup on the box faces is %.3e (target %.1e); the periodised tail is visible",
            kind.label, sup, target,
        )
    return KernelField(field, kind, group, kind.claimed_exponent(group), boundary_sup=sup)


def synthesize_kernel(kind, group, grid, tolerance=None):
    """K, Q or one of the derivative-type kernels on ``grid``.

    The multipliers are e^(-2 pi rho), -2 pi rho e^(-2 pi rho), xi_k e^(-2 pi rho),
    xi_k rho e^(-2 pi rho) and xi_k xi_l e^(-2 pi rho); their value at xi = 0 is the
    continuous one.
    """
    if isinstance(kind, str):
        kind = KernelKind.parse(kind)
    if kind.family in ("rho_tilde", "riesz"):
        raise InvalidParameter(f"{kind.family} kernels have their own synthesis routine")
    _check_axes(kind, group)
    check_nyquist(grid, group, tolerance)
    field = synthesize(grid, _poisson_family_multiplier(kind, grid, group))
    logger.info("synthesised %s on %s (extent %s)", kind.label, grid.shape, grid.extent)
    return _finish(field, kind, group)


def synthesize_rho_tilde(m, alpha, group, grid, axis=None):
    """rho~_m, the inverse transform of (2 pi rho)^-alpha Phi~(2^m rho); d/dx_axis of it if asked."""
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    kind = KernelKind("rho_tilde", () if axis is None else (axis,), m=int(m), alpha=alpha)
    _check_axes(kind, group)
    require_annulus(grid, group, 2.0 ** (-m) / 4, 4 * 2.0 ** (-m))
    multiplier = riesz_multiplier(grid, group, alpha) * phi_tilde(2.0 ** m * frequency_rho(grid, group))
    if axis is not None:
        multiplier = multiplier * 2j * math.pi * grid_frequency(grid, axis)
    return _finish(synthesize(grid, multiplier), kind, group)


def _next_power_of_two(value):
    return 1 << max(0, math.ceil(math.log2(value)))


def piece_span_grid(base, group, lo, hi):
    """One grid holding every piece m = lo..hi: the box of ``base`` dilated by A_(2^hi),
    sampled at least as finely as ``base`` dilated by A_(2^lo).
    """
    if lo > hi:
        raise InvalidParameter(f"empty piece range [{lo}, {hi}]")
    shape = tuple(_next_power_of_two(n * 2.0 ** ((hi - lo) * a) - 1e-9)
                  for n, a in zip(base.shape, group.exponents))
    return GridSpec(shape, base.dilated(group, 2.0 ** hi).extent)


@dataclass(frozen=True, eq=False)
class RieszPieces:
    """The m = 0 piece of R_alpha and the quintic spline coefficients used to rescale it.

    Piece m is 2^(m (alpha - gamma)) phi_0(A_(2^-m) x), where phi_0 has the multiplier
    (2 pi rho)^-alpha Phi(rho); summing over m in Z gives R_alpha.
    """

    alpha: float
    group: object
    grid: GridSpec
    values: np.ndarray
    coefficients: np.ndarray

    @classmethod
    def build(cls, alpha, group, length=64.0, samples=8):
        """phi_0 on a box of side ``length`` with ``samples`` cells per shortest wavelength."""
        if not 0 < alpha < group.gamma:
            raise InvalidParameter(f"alpha must lie in (0, gamma = {group.gamma:g}), got {alpha}")
        # Phi(rho) lives in rho <= 2, i.e. |xi_j| <= 2^a_j
        shape = tuple(_next_power_of_two(length * 2.0 ** a * samples) for a in group.exponents)
        grid = GridSpec(shape, (length,) * group.dimension)
        multiplier = riesz_multiplier(grid, group, alpha) * phi(frequency_rho(grid, group))
        values = synthesize(grid, multiplier).values.real.copy()
        coefficients = ndimage.spline_filter(values, order=5, mode="grid-wrap")
        logger.info("Riesz piece alpha=%s on %s", alpha, shape)
        return cls(alpha, group, grid, values, coefficients)

    @property
    def exponent(self):
        return self.alpha - self.group.gamma

    def at_origin(self):
        return float(self.values[tuple(n // 2 for n in self.grid.shape)])


# below this rho, phi_0(A_(2^-m) x) is replaced by phi_0(0) in the geometric tail
_TAIL_RHO = 1e-3


def riesz_kernel_at(points, pieces):
    """R_alpha at arbitrary nonzero points (trailing axis = coordinates)."""
    group = pieces.group
    points = np.asarray(points, dtype=float)
    flat = points.reshape(-1, group.dimension)
    rho = group.rho(flat).reshape(-1)
    if np.any(rho == 0):
        raise InvalidInput("R_alpha is singular at the origin")
    grid = pieces.grid
    half = np.asarray(grid.extent) / 2
    spacing = np.asarray(grid.spacing)
    centre = np.asarray(grid.shape) // 2
    corner = group.rho(half)
    m_lo = math.floor(math.log2(rho.min() / corner))
    m_hi = math.ceil(math.log2(rho.max() / _TAIL_RHO))

    total = np.zeros(flat.shape[0])
    for m in range(m_lo, m_hi + 1):
        y = flat * np.power(2.0, -m * group.a)
        inside = np.all(np.abs(y) < half, axis=1)
        if not inside.any():
            continue
        coords = (y[inside] / spacing + centre).T
        sampled = ndimage.map_coordinates(
            pieces.coefficients, coords, order=5, mode="grid-wrap", prefilter=False
        )
        total[inside] += 2.0 ** (m * pieces.exponent) * sampled
    ratio = 2.0 ** pieces.exponent
    total += pieces.at_origin() * ratio ** (m_hi + 1) / (1 - ratio)
    logger.debug("R_alpha at %d points from pieces m = %d..%d", flat.shape[0], m_lo, m_hi)
    return total.reshape(points.shape[:-1]) if points.ndim > 1 else float(total[0])


def synthesize_riesz_kernel(alpha, group, grid, pieces=None):
    """R_alpha sampled on ``grid``; the singular origin cell is set to 0."""
    if not 0 < alpha < group.gamma:
        raise InvalidParameter(f"alpha must lie in (0, gamma = {group.gamma:g}), got {alpha}")
    if pieces is None:
        pieces = RieszPieces.build(alpha, group)
    elif pieces.alpha != alpha or pieces.group != group:
        raise InvalidParameter("precomputed pieces belong to another alpha or group")
    points = grid.points().reshape(-1, grid.dimension)
    rho = spatial_rho(grid, group).reshape(-1)
    values = np.zeros(grid.size)
    nonzero = rho > 0
    values[nonzero] = riesz_kernel_at(points[nonzero], pieces)
    kind = KernelKind("riesz", alpha=alpha)
    field = SampledField(grid, values.reshape(grid.shape))
    return KernelField(field, kind, group, kind.claimed_exponent(group), boundary_sup=boundary_sup(field))


@dataclass(frozen=True, eq=False)
class DecayProfile:
    """Per-shell sup of |k| (1 + rho)^e, or |k| rho^e for the homogeneous family."""

    label: str
    exponent: float
    weighting: str
    edges: np.ndarray
    sups: np.ndarray

    def rows(self):
        return [(float(lo), float(hi), float(s)) for (lo, hi), s in zip(self.edges, self.sups)]

    def core_max(self, core_radius=4.0):
        core = self.edges[:, 1] <= core_radius * (1 + 1e-12)
        return float(self.sups[core].max()) if core.any() else 0.0

    def excess(self, core_radius=4.0):
        """max over shells beyond ``core_radius`` of sup / core_max, minus 1."""
        outer = self.edges[:, 1] > core_radius * (1 + 1e-12)
        core = self.core_max(core_radius)
        if not outer.any() or core == 0:
            return 0.0
        return float(self.sups[outer].max()) / core - 1.0

    def bounded(self, epsilon=0.15, core_radius=4.0):
        return self.excess(core_radius) <= epsilon

    def as_dict(self):
        return {
            "label": self.label,
            "exponent": self.exponent,
            "weighting": self.weighting,
            "shells": [{"shell_lo": lo, "shell_hi": hi, "sup_weighted": s} for lo, hi, s in self.rows()],
        }

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["shell_lo", "shell_hi", "sup_weighted"])
            for row in self.rows():
                writer.writerow([repr(v) for v in row])
        return path


def _shell_edges(grid, group, weighting, reach):
    k0 = math.ceil(math.log2(grid.cell_rho_diameter(group)) - 1e-12)
    edges = [0.0] if weighting == ONE_PLUS_RHO else []
    k = k0
    while 2.0 ** k < reach:
        edges.append(2.0 ** k)
        k += 1
    edges.append(reach)
    return list(zip(edges[:-1], edges[1:]))


def decay_profile(kernel, reach=None):
    """Shell sups out to ``reach``, by default half the rho radius of the box.

    Beyond that the periodic images of the kernel are no longer small against the kernel
    itself, so outer shells would measure the torus rather than the decay.
    """
    grid, group = kernel.grid, kernel.group
    limit = grid.rho_radius(group)
    reach = limit / 2 if reach is None else reach
    if not 0 < reach <= limit:
        raise InvalidParameter(f"profile reach must lie in (0, {limit:g}], got {reach}")
    rho = spatial_rho(grid, group)
    weighting = kernel.kind.weighting
    if weighting == ONE_PLUS_RHO:
        weighted = kernel.field.modulus * (1 + rho) ** kernel.exponent
    else:
        weighted = kernel.field.modulus * rho ** kernel.exponent
    edges, sups = [], []
    shells = _shell_edges(grid, group, weighting, reach)
    for index, (lo, hi) in enumerate(shells):
        last = index == len(shells) - 1
        mask = (rho >= lo) & ((rho <= hi) if last else (rho < hi))
        if not mask.any():
            continue
        edges.append((lo, hi))
        sups.append(float(weighted[mask].max()))
    return DecayProfile(
        label=kernel.kind.label,
        exponent=kernel.exponent,
        weighting=weighting,
        edges=np.asarray(edges, dtype=float).reshape(-1, 2),
        sups=np.asarray(sups, dtype=float),
    )


def synthesize_kind(kind, group, grid, alpha=None, tolerance=None):
    """Any family by name; ``rho_tilde`` and ``riesz`` read alpha from the kind or ``alpha``."""
    if isinstance(kind, str):
        kind = KernelKind.parse(kind, alpha=alpha)
    if kind.family in ("rho_tilde", "riesz") and kind.alpha is None:
        raise InvalidParameter(f"{kind.family} kernels need alpha")
    if kind.family == "rho_tilde":
        axis = kind.axes[0] if kind.axes else None
        return synthesize_rho_tilde(kind.m, kind.alpha, group, grid, axis=axis)
    if kind.family == "riesz":
        return synthesize_riesz_kernel(kind.alpha, group, grid)
    return synthesize_kernel(kind, group, grid, tolerance)
