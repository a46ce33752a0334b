"""Square functions D_alpha, T_j and g_Q, and the oracle constants that bound them.

D_alpha is evaluated as a lattice sum over offsets y in dyadic shells
2^k_min <= rho(y) < 2^(k_max+1). Expanding the square,

    sum_y W(y) |u(x+y) - u(x)|^2 = (W * |u|^2)(x) - 2 Re(conj(u(x)) (W * u)(x)) + |u(x)|^2 sum W

where (W * g)(x) = sum_y W(y) g(x+y) is a periodic correlation done with FFTs.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from apps.core.conf import analysis_setting
from apps.core.exceptions import InvalidParameter
from apps.dilation.geometry import euclidean_ball_volume, polar_integral
from apps.field.grid import SampledField, forward_transform, spatial_rho

from .multipliers import (
    NODES_PER_OCTAVE,
    check_mean_free,
    lp_block,
    q_multiplier,
    riesz_potential,
    spectral_band,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DyadicQuadrature:
    """Lattice offsets y in shells [2^k, 2^(k+1)), k_min <= k <= k_max, weight = cell volume."""

    grid: object
    group: object
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise InvalidParameter(f"quadrature range [{self.k_min}, {self.k_max}] is empty")
        diameter = self.grid.cell_rho_diameter(self.group)
        if 2.0 ** self.k_min < diameter * (1 - 1e-12):
            raise InvalidParameter(
                f"inner shell 2^{self.k_min} is below the cell diameter {diameter:.4g}"
            )
        reach = self.grid.rho_radius(self.group)
        if 2.0 ** (self.k_max + 1) > reach * (1 + 1e-12):
            raise InvalidParameter(
                f"outer shell 2^{self.k_max + 1} exceeds the half box (rho {reach:.4g})"
            )

    @classmethod
    def for_grid(cls, grid, group, k_min=None, k_max=None):
        """Default range: first shell above the cell diameter, last one inside rho <= R/2."""
        if k_min is None:
            k_min = math.ceil(math.log2(grid.cell_rho_diameter(group)) - 1e-12)
        if k_max is None:
            k_max = math.floor(math.log2(grid.rho_radius(group) / 2) + 1e-12) - 1
        return cls(grid, group, k_min, k_max)

    @property
    def shells(self):
        return range(self.k_min, self.k_max + 1)

    @property
    def inner_radius(self):
        return 2.0 ** self.k_min

    @property
    def outer_radius(self):
        return 2.0 ** (self.k_max + 1)

    def weights(self, alpha, shell=None):
        """rho(y)^(-gamma-2 alpha) * cellvol on the shells (one shell if ``shell`` is given)."""
        lo, hi = (self.inner_radius, self.outer_radius) if shell is None else (2.0 ** shell, 2.0 ** (shell + 1))
        rho = spatial_rho(self.grid, self.group)
        inside = (rho >= lo) & (rho < hi)
        out = np.zeros(self.grid.shape)
        out[inside] = rho[inside] ** (-self.group.gamma - 2 * alpha) * self.grid.cell_volume
        return out

    def outer_tail_bound(self, alpha, sup_norm):
        """4 ||u||_inf^2 int_(rho > R) rho^(-gamma-2 alpha) dy for the omitted outer offsets."""
        gamma = self.group.gamma
        mass = gamma * euclidean_ball_volume(self.group.dimension) * self.outer_radius ** (-2 * alpha) / (2 * alpha)
        return 4 * sup_norm ** 2 * mass


class _Correlator:
    """Correlations sum_y W(y) g(x+y) against one fixed weight array."""

    def __init__(self, weights):
        self.workers = analysis_setting("FFT_WORKERS")
        self.kernel = np.conj(sp_fft.fftn(sp_fft.ifftshift(weights), workers=self.workers))
        self.total = float(weights.sum())

    def __call__(self, values):
        return sp_fft.ifftn(self.kernel * sp_fft.fftn(values, workers=self.workers), workers=self.workers)

    def square(self, u):
        """sum_y W(y) |u(x+y) - u(x)|^2, clipped at zero against round-off."""
        energy = self(np.abs(u) ** 2).real
        cross = np.real(np.conj(u) * self(u))
        value = energy - 2 * cross + np.abs(u) ** 2 * self.total
        return np.maximum(value, 0.0)


def _check_square_alpha(alpha):
    if not 0 < alpha < 1:
        raise InvalidParameter(f"square functions need alpha in (0, 1), got {alpha}")


def marcinkiewicz_d_alpha(f, group, alpha, quad):
    """D_alpha(f)(x) = (sum_y |I_a f(x+y) - I_a f(x)|^2 rho(y)^(-gamma-2a) cellvol)^(1/2)."""
    _check_square_alpha(alpha)
    u = riesz_potential(f, group, alpha).values
    correlator = _Correlator(quad.weights(alpha))
    return SampledField(f.grid, np.sqrt(correlator.square(u)))


def t_j_square_function(f, group, j, alpha, quad, part):
    """T_j(f)(x) = (sum_k sum_(y in shell k) |I_a Delta_(j+k) f(x+y) - I_a Delta_(j+k) f(x)|^2 W(y))^(1/2).

    Blocks outside the partition range contribute nothing; when the partition covers the
    spectrum of f and the shells are those of D_alpha, D_alpha(f) <= sum_j T_j(f).
    """
    _check_square_alpha(alpha)
    check_mean_free(forward_transform(f))
    total = np.zeros(f.grid.shape)
    for k in quad.shells:
        block = j + k
        if block < part.j_min or block > part.j_max:
            continue
        piece = lp_block(f, group, block, part)
        u = riesz_potential(piece, group, alpha, tolerance=np.inf).values
        total += _Correlator(quad.weights(alpha, shell=k)).square(u)
    return SampledField(f.grid, np.sqrt(total))


@dataclass(frozen=True)
class DyadicRange:
    """t-nodes 2^(m/per_octave) for m_lo <= m <= m_hi (per_octave = 1 is the dyadic set)."""

    m_lo: int
    m_hi: int
    per_octave: int = NODES_PER_OCTAVE

    def __post_init__(self):
        if self.m_lo > self.m_hi:
            raise InvalidParameter(f"empty t-range [{self.m_lo}, {self.m_hi}]")
        if self.per_octave < 1:
            raise InvalidParameter("per_octave must be a positive integer")

    @classmethod
    def for_band(cls, rho_lo, rho_hi, per_octave=NODES_PER_OCTAVE, low_margin=1e6, high_margin=100.0):
        """Covers [1 / (low_margin rho_hi), high_margin / rho_lo].

        Below the range |Q_t f|^2 dt/t loses only O((2 pi t rho)^2), so the low margin must be
        much wider than the high one, where the loss is exponential.
        """
        lo = math.floor(per_octave * math.log2(1 / (rho_hi * low_margin)))
        hi = math.ceil(per_octave * math.log2(high_margin / rho_lo))
        return cls(lo, hi, per_octave)

    def nodes(self):
        return 2.0 ** (np.arange(self.m_lo, self.m_hi + 1) / self.per_octave)

    @property
    def log_step(self):
        return math.log(2.0) / self.per_octave


def g_q(f, group, t_range=None):
    """g_Q(f)(x) = (sum_t |Q_t * f(x)|^2 log_step)^(1/2) over a geometric t-grid."""
    spectrum = forward_transform(f)
    check_mean_free(spectrum)
    if t_range is None:
        band = spectral_band(spectrum, group)
        if band is None:
            return SampledField(f.grid, np.zeros(f.grid.shape))
        t_range = DyadicRange.for_band(*band)
    workers = analysis_setting("FFT_WORKERS")
    coefficients = sp_fft.ifftshift(spectrum.coefficients)
    total = np.zeros(f.grid.shape)
    for t in t_range.nodes():
        multiplier = sp_fft.ifftshift(q_multiplier(f.grid, group, t))
        values = sp_fft.fftshift(sp_fft.ifftn(coefficients * multiplier, workers=workers))
        total += np.abs(values / f.grid.cell_volume) ** 2
    return SampledField(f.grid, np.sqrt(total * t_range.log_step))


def _increment_integrand(group, alpha, xi):
    xi = np.asarray(xi, dtype=float)

    def integrand(points, r):
        phase = 2 * math.pi * (points @ xi)
        return 4 * np.sin(phase / 2) ** 2 * r ** (-group.gamma - 2 * alpha)

    return integrand


def mean_value_constant(group, alpha, xi, r_lo, r_hi, n_theta=2048, nodes_per_octave=128):
    """c(xi) = int_(r_lo <= rho(y) <= r_hi) |e^(2 pi i <y, xi>) - 1|^2 rho(y)^(-gamma-2 alpha) dy."""
    _check_square_alpha(alpha)
    return polar_integral(
        group, _increment_integrand(group, alpha, xi), r_lo, r_hi,
        n_theta=n_theta, nodes_per_octave=nodes_per_octave,
    )


def _inner_taylor(group, alpha, xi, r_lo, n_theta):
    # |e^(i phi) - 1|^2 ~ phi^2 near y = 0; the cross terms cancel by symmetry of mu
    angles = 2 * math.pi * np.arange(n_theta) / n_theta
    theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    mu = group.polar_weight(theta)
    total = 0.0
    for j, a in enumerate(group.exponents):
        moment = float(np.mean(theta[:, j] ** 2 * mu)) * 2 * math.pi
        total += xi[j] ** 2 * moment * r_lo ** (2 * a - 2 * alpha) / (2 * a - 2 * alpha)
    return (2 * math.pi) ** 2 * total


@dataclass(frozen=True)
class L2Constant:
    value: float
    spread: float
    directions: int
    per_direction: tuple


def l2_constant(group, alpha, n_directions=16, phase_limit=64.0, n_theta=2048, nodes_per_octave=256):
    """(2 pi)^(-2 alpha) sup over unit rho-sphere directions xi' of c(xi') on all of R^n.

    c is integrated numerically on [1e-6, R0] with R0^(max a) = phase_limit; the inner
    ball is added from the Taylor expansion and the outer part as its non-oscillating
    half 2 int_(rho > R0) rho^(-gamma-2 alpha) dy.
    """
    _check_square_alpha(alpha)
    if group.dimension != 2:
        raise InvalidParameter("l2_constant is implemented for n = 2 only")
    r_lo = 1e-6
    r_outer = phase_limit ** (1 / max(group.exponents))
    outer = 2 * group.gamma * euclidean_ball_volume(2) * r_outer ** (-2 * alpha) / (2 * alpha)
    values = []
    # quarter circle suffices: c(xi) is even in each coordinate
    for phi in np.linspace(0, math.pi / 2, n_directions):
        direction = np.array([math.cos(phi), math.sin(phi)])
        xi = direction / np.power(group.rho(direction), group.a)
        body = mean_value_constant(group, alpha, xi, r_lo, r_outer, n_theta, nodes_per_octave)
        values.append(body + _inner_taylor(group, alpha, xi, r_lo, n_theta) + outer)
    scale = (2 * math.pi) ** (-2 * alpha)
    values = [scale * v for v in values]
    best = max(values)
    logger.info("L2 constant alpha=%s: %.6g (directional spread %.4f)", alpha, best, best / min(values))
    return L2Constant(value=best, spread=best / min(values), directions=n_directions,
                      per_direction=tuple(values))
