"""Smooth dyadic partitions of unity in rho(xi)."""

import math
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidParameter


def _psi(s):
    out = np.zeros_like(s)
    positive = s > 0
    out[positive] = np.exp(-1.0 / s[positive])
    return out


def smooth_step(r):
    """C-infinity theta with theta = 1 on r <= 1, theta = 0 on r >= 2, nonincreasing."""
    r = np.asarray(r, dtype=float)
    upper = _psi(2.0 - r)
    return upper / (upper + _psi(r - 1.0))


def phi(r):
    """Phi(r) = theta(r) - theta(2r), supported in [1/2, 2]."""
    r = np.asarray(r, dtype=float)
    return smooth_step(r) - smooth_step(2 * r)


def phi_tilde(r):
    """theta(r/2) - theta(4r): supported in [1/4, 4] and equal to 1 on [1/2, 2]."""
    r = np.asarray(r, dtype=float)
    return smooth_step(r / 2) - smooth_step(4 * r)


@dataclass(frozen=True)
class LPPartition:
    """Blocks Phi(2^j rho(xi)) for j_min <= j <= j_max.

    Their sum is exactly 1 on 2^-j_max <= rho(xi) <= 2^-j_min.
    """

    j_min: int
    j_max: int

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise InvalidParameter(f"empty block range [{self.j_min}, {self.j_max}]")

    @classmethod
    def covering(cls, rho_lo, rho_hi):
        """The smallest block range whose sum is 1 on [rho_lo, rho_hi]."""
        if not 0 < rho_lo <= rho_hi:
            raise InvalidParameter(f"need 0 < rho_lo <= rho_hi, got {rho_lo}, {rho_hi}")
        return cls(math.floor(-math.log2(rho_hi)), math.ceil(-math.log2(rho_lo)))

    @property
    def indices(self):
        return range(self.j_min, self.j_max + 1)

    def support(self, j):
        return 2.0 ** (-j - 1), 2.0 ** (-j + 1)

    def multiplier(self, j, rho):
        return phi(2.0 ** j * np.asarray(rho))

    def total(self, rho):
        return sum(self.multiplier(j, rho) for j in self.indices)

    def unity_defect(self, samples=4096):
        """max |sum_j Phi(2^j r) - 1| over the covered range."""
        r = np.geomspace(2.0 ** -self.j_max, 2.0 ** -self.j_min, samples)
        return float(np.max(np.abs(self.total(r) - 1.0)))

    def check_resolved(self, grid, group, j=None):
        """Raise if block ``j`` (default: the highest-frequency one) lies beyond the lattice."""
        j = self.j_min if j is None else j
        reach = grid.nyquist_rho_radius(group)
        inner = self.support(j)[0]
        if inner >= reach:
            raise InvalidParameter(
                f"block {j} starts at rho = {inner:g}, beyond the lattice ({reach:.4g})",
                block=j,
                reach=reach,
            )
