import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from apps.core.exceptions import InvalidParameter

logger = logging.getLogger(__name__)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise InvalidParameter(f"W_alpha needs alpha in (0, 1), got {alpha}")


def w_alpha(alpha, t, s):
    """W_alpha(t, s) = (t^alpha - (t - min(t, s))^alpha) / alpha = int_0^(t^s) (t-u)^(alpha-1) du."""
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise InvalidParameter("W_alpha is defined for t, s >= 0")
    value = (t ** alpha - (t - np.minimum(t, s)) ** alpha) / alpha
    return float(value) if value.ndim == 0 else value


def w_alpha_closed_log_integral(alpha):
    """int_0^inf W_alpha(t, 1) dt / t = pi / (alpha sin(pi alpha))."""
    _check_alpha(alpha)
    return math.pi / (alpha * math.sin(math.pi * alpha))


@dataclass(frozen=True)
class LogIntegral:
    value: float
    tail_bound: float
    upper_limit: float
    octaves: int


def w_alpha_log_integral(alpha, tail_target=1e-6):
    """int_0^inf W_alpha(t, 1) dt / t by dyadic quadrature with an explicit tail bound.

    On t <= 1 the integrand is t^(alpha-1)/alpha, integrated exactly. Beyond, each octave
    [2^m, 2^(m+1)] goes through adaptive quadrature until the bound
    int_T^inf W dt/t <= (T-1)^(alpha-1)/(1-alpha) drops below ``tail_target``.
    """
    _check_alpha(alpha)
    upper = 1.0 + (tail_target * (1 - alpha)) ** (1 / (alpha - 1))
    octaves = int(math.ceil(math.log2(upper)))

    def integrand(u):
        # t = e^u, dt/t = du; written as t^alpha (1 - (1 - 1/t)^alpha) to avoid cancellation
        t = math.exp(u)
        return t ** alpha * -math.expm1(alpha * math.log1p(-1.0 / t)) / alpha if t > 1 else 1 / alpha

    total = 1.0 / alpha ** 2
    for m in range(octaves):
        piece, _ = integrate.quad(integrand, m * math.log(2), (m + 1) * math.log(2))
        total += piece
    upper = 2.0 ** octaves
    tail = (upper - 1) ** (alpha - 1) / (1 - alpha)
    logger.debug("W_alpha log-integral alpha=%s over %d octaves, tail <= %.2e", alpha, octaves, tail)
    return LogIntegral(value=total, tail_bound=tail, upper_limit=upper, octaves=octaves)
