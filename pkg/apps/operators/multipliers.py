"""Fourier-multiplier operators: I_alpha, the semigroups K_t and Q_t, Delta_j blocks and the
Gamma-subordination of K_t o I_alpha.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from apps.core.conf import analysis_setting
from apps.core.exceptions import InvalidParameter, MeanNotRemoved
from apps.field.grid import (
    SpectralField,
    apply_multiplier,
    forward_transform,
    frequency_rho,
    inverse_transform,
    spectral_l2_norm,
)

logger = logging.getLogger(__name__)

# geometric s- and t-grids advance by 2^(1/4)
NODES_PER_OCTAVE = 4
# e^-40 is below double precision relative to the leading term
_EXP_CUTOFF = 40.0


def _check_alpha(alpha, upper):
    if not 0 < alpha < upper:
        raise InvalidParameter(f"alpha must lie in (0, {upper:g}), got {alpha}")


def _check_t(t):
    if not t > 0:
        raise InvalidParameter(f"t must be positive, got {t}")


def check_mean_free(spectrum, tolerance=None):
    """Raise MeanNotRemoved unless |f^(0)| <= tolerance * ||f||_2."""
    tolerance = analysis_setting("MEAN_TOLERANCE") if tolerance is None else tolerance
    measured = abs(spectrum.zero_coefficient())
    norm = spectral_l2_norm(spectrum)
    if measured > tolerance * norm:
        raise MeanNotRemoved(measured, tolerance)
    return measured


def riesz_multiplier(grid, group, alpha):
    """(2 pi rho(xi))^-alpha with a hard zero at xi = 0."""
    rho = frequency_rho(grid, group)
    out = np.zeros(grid.shape)
    nonzero = rho > 0
    out[nonzero] = (2 * math.pi * rho[nonzero]) ** (-alpha)
    return out


def riesz_potential(f, group, alpha, tolerance=None):
    _check_alpha(alpha, group.gamma)
    spectrum = forward_transform(f)
    check_mean_free(spectrum, tolerance)
    multiplier = riesz_multiplier(f.grid, group, alpha)
    return inverse_transform(SpectralField(f.grid, spectrum.coefficients * multiplier))


def poisson_multiplier(grid, group, t):
    return np.exp(-2 * math.pi * t * frequency_rho(grid, group))


def poisson_semigroup(f, group, t):
    """K_t * f. A SpectralField stays on the transform side, so compositions skip the
    intermediate inverse transform.
    """
    _check_t(t)
    multiplier = poisson_multiplier(f.grid, group, t)
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, f.coefficients * multiplier)
    return apply_multiplier(f, multiplier)


def q_multiplier(grid, group, t):
    u = 2 * math.pi * t * frequency_rho(grid, group)
    return -u * np.exp(-u)


def q_semigroup(f, group, t):
    """Q_t * f = t d/dt (K_t * f)."""
    _check_t(t)
    return apply_multiplier(f, q_multiplier(f.grid, group, t))


def lp_block(f, group, j, part):
    """Delta_j f, the multiplier Phi(2^j rho(xi))."""
    part.check_resolved(f.grid, group, j)
    return apply_multiplier(f, part.multiplier(j, frequency_rho(f.grid, group)))


def spectral_band(spectrum, group, relative=1e-14):
    """(min, max) of rho(xi) over the nonzero frequencies carrying the spectrum."""
    magnitude = np.abs(spectrum.coefficients)
    rho = frequency_rho(spectrum.grid, group)
    carried = (magnitude > relative * magnitude.max()) & (rho > 0)
    if not carried.any():
        return None
    return float(rho[carried].min()), float(rho[carried].max())


@dataclass(frozen=True)
class SubordinationGrid:
    """Nodes s_i and weights w_i with int_0^inf g(s) s^(alpha-1) ds ~ sum w_i g(s_i)."""

    alpha: float
    s_min: float
    s_max: float
    per_octave: int = NODES_PER_OCTAVE

    @classmethod
    def for_band(cls, alpha, rho_lo, rho_hi, per_octave=NODES_PER_OCTAVE):
        # the mass below s_min is added analytically and the trapezoid end error scales
        # with (2 pi s_min rho)^alpha; above s_max every exponential is negligible
        s_min = 1e-14 / rho_hi
        s_max = _EXP_CUTOFF / (2 * math.pi * rho_lo)
        return cls(alpha, s_min, s_max, per_octave)

    @property
    def log_step(self):
        return math.log(2.0) / self.per_octave

    def nodes(self):
        count = int(math.ceil(math.log(self.s_max / self.s_min) / self.log_step))
        return self.s_min * np.exp(self.log_step * np.arange(count + 1))

    def weights(self, nodes):
        # trapezoid in u = log s on an integrand analytic in a strip: geometric accuracy
        w = nodes ** self.alpha * self.log_step
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


def subordination(f, group, alpha, t, per_octave=NODES_PER_OCTAVE, tolerance=None):
    """Gamma(alpha)^-1 int_0^inf K_(t+s) * f s^(alpha-1) ds, by log-spaced quadrature in s.

    Equals K_t * I_alpha f; the s-grid is chosen from the rho-band of f^.
    """
    _check_alpha(alpha, 1.0)
    _check_t(t)
    spectrum = forward_transform(f)
    check_mean_free(spectrum, tolerance)
    band = spectral_band(spectrum, group)
    if band is None:
        return inverse_transform(SpectralField(f.grid, np.zeros(f.grid.shape)))

    quadrature = SubordinationGrid.for_band(alpha, *band, per_octave=per_octave)
    nodes = quadrature.nodes()
    weights = quadrature.weights(nodes)
    rho = frequency_rho(f.grid, group)
    decay = np.exp(-2 * math.pi * t * rho)
    multiplier = decay * quadrature.s_min ** alpha / alpha
    for s, w in zip(nodes, weights):
        multiplier = multiplier + w * np.exp(-2 * math.pi * (t + s) * rho)
    multiplier = multiplier / gamma_fn(alpha)
    multiplier[rho == 0] = 0.0
    logger.debug(
        "subordination alpha=%s t=%s: %d s-nodes on [%.3g, %.3g]",
        alpha, t, len(nodes), quadrature.s_min, quadrature.s_max,
    )
    return inverse_transform(SpectralField(f.grid, spectrum.coefficients * multiplier))
