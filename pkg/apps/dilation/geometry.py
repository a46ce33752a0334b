"""Non-isotropic dilations A_t = diag(t^a_1, ..., t^a_n) and the gauge rho they define.

rho(x) is the unique t > 0 with |A_{1/t} x| = 1. Everything else here (balls, volumes,
polar coordinates, distances) is built on top of that root.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage
from scipy.special import gamma as gamma_fn
from scipy.special import logsumexp

from apps.core.conf import analysis_setting
from apps.core.exceptions import InvalidInput, InvalidParameter

logger = logging.getLogger(__name__)

# bisection halvings before the Newton polish
_BISECTION_STEPS = 24
_NEWTON_MAX_STEPS = 60


def euclidean_ball_volume(n):
    """Volume omega_n of the Euclidean unit ball in R^n."""
    return math.pi ** (n / 2) / gamma_fn(n / 2 + 1)


@dataclass(frozen=True)
class DilationGroup:
    exponents: tuple
    root_tolerance: float = 1e-12

    def __post_init__(self):
        exps = tuple(float(a) for a in self.exponents)
        if not exps:
            raise InvalidParameter("a dilation group needs at least one exponent")
        if any(not math.isfinite(a) or a < 1 for a in exps):
            raise InvalidParameter(f"every exponent must be >= 1, got {exps}")
        if not 0 < self.root_tolerance < 1e-3:
            raise InvalidParameter(f"root_tolerance out of range: {self.root_tolerance}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def from_config(cls, data):
        return cls(
            exponents=tuple(data["exponents"]),
            root_tolerance=data.get("root_tolerance", analysis_setting("ROOT_TOLERANCE")),
        )

    @property
    def dimension(self):
        return len(self.exponents)

    @property
    def gamma(self):
        """Homogeneous dimension, the trace of P."""
        return math.fsum(self.exponents)

    @property
    def matrix(self):
        return np.diag(self.exponents)

    @property
    def a(self):
        return np.asarray(self.exponents)

    @property
    def is_isotropic(self):
        return all(e == self.exponents[0] for e in self.exponents)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise InvalidInput(
                f"points must have trailing dimension {self.dimension}, got shape {x.shape}"
            )
        return x

    def apply(self, t, x):
        """A_t x for a point or an array of points (trailing axis = coordinates)."""
        if not t > 0:
            raise InvalidParameter(f"dilation parameter must be positive, got {t}")
        return self._points(x) * np.power(float(t), self.a)

    def rho(self, x):
        """Quasi-norm of each point; rho(0) = 0 without root-finding."""
        x = self._points(x)
        if not np.all(np.isfinite(x)):
            raise InvalidInput("rho is undefined for non-finite coordinates")
        flat = np.abs(x.reshape(-1, self.dimension))
        out = np.zeros(flat.shape[0])
        nonzero = np.any(flat > 0, axis=1)
        if nonzero.any() and self.is_isotropic:
            # |A_(1/t) x| = t^-a |x|
            out[nonzero] = np.linalg.norm(flat[nonzero], axis=1) ** (1.0 / self.exponents[0])
        elif nonzero.any():
            out[nonzero] = self._solve(flat[nonzero])
        if x.ndim == 1:
            return float(out[0])
        return out.reshape(x.shape[:-1])

    def _solve(self, y):
        # Work in s = log t. g(s) = log sum_j (y_j t^-a_j)^2 is a log-sum-exp of affine
        # functions of s, hence convex and strictly decreasing; the root is bracketed by
        # [log m, log m + log(n)/2] with m = max_j y_j^(1/a_j).
        a = self.a
        with np.errstate(divide="ignore"):
            log_y = np.log(y)
        lo = np.max(log_y / a, axis=1)
        hi = lo + 0.5 * math.log(self.dimension)

        def g(s):
            return logsumexp(2.0 * (log_y - a * s[:, None]), axis=1)

        for _ in range(_BISECTION_STEPS):
            if np.all(hi - lo <= self.root_tolerance):
                break
            mid = 0.5 * (lo + hi)
            above = g(mid) > 0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)

        s = lo.copy()
        for _ in range(_NEWTON_MAX_STEPS):
            terms = 2.0 * (log_y - a * s[:, None])
            lse = logsumexp(terms, axis=1)
            weights = np.exp(terms - lse[:, None])
            slope = -2.0 * np.sum(weights * a, axis=1)
            step = -lse / slope
            s = s + step
            if np.max(np.abs(step)) <= self.root_tolerance:
                break
        else:
            logger.warning("rho Newton polish hit the iteration cap; max step %.2e",
                           float(np.max(np.abs(step))))
        return np.exp(s)

    def polar_weight(self, theta):
        """mu(theta) = <P theta, theta>, the density of Lebesgue measure in (t, theta)."""
        theta = self._points(theta)
        norms = np.linalg.norm(theta, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise InvalidInput("polar_weight expects unit vectors")
        value = np.sum(self.a * theta ** 2, axis=-1)
        return float(value) if theta.ndim == 1 else value

    def ball_volume(self, r):
        """|B(x, r)| = r^gamma * omega_n (the unit rho-ball is the Euclidean unit ball)."""
        if not r > 0:
            raise InvalidParameter(f"ball radius must be positive, got {r}")
        return float(r) ** self.gamma * euclidean_ball_volume(self.dimension)

    def covering_factor(self):
        """rho(1, ..., 1): the box prod [-r^a_j, r^a_j] sits inside B(0, c r) for this c."""
        return self.rho(np.ones(self.dimension))


@dataclass(frozen=True)
class RhoBall:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def dilate(self, factor):
        return RhoBall(self.center, self.radius * factor)

    def volume(self, group):
        return group.ball_volume(self.radius)

    def contains(self, group, points):
        return group.rho(np.asarray(points) - np.asarray(self.center)) < self.radius

    def cell_indices(self, group, grid, scale=1.0):
        """Flat indices of the grid cells whose centers lie in B(center, scale * radius).

        Only the bounding box |y_j - c_j| < R^a_j is scanned; the grid is not wrapped.
        """
        radius = scale * self.radius
        axes = grid.axes()
        local = []
        for axis, (coords, c, a, h) in enumerate(zip(axes, self.center, group.a, grid.spacing)):
            half = radius ** a
            lo = max(int(np.ceil((c - half) / h + grid.shape[axis] / 2)) - 1, 0)
            hi = min(int(np.floor((c + half) / h + grid.shape[axis] / 2)) + 1,
                     grid.shape[axis] - 1)
            if hi < lo:
                return np.empty(0, dtype=np.intp)
            local.append(np.arange(lo, hi + 1))
        index = np.meshgrid(*local, indexing="ij")
        points = np.stack([axes[k][index[k]] for k in range(len(axes))], axis=-1)
        inside = group.rho(points - np.asarray(self.center)) < radius
        return np.ravel_multi_index(tuple(i[inside] for i in index), grid.shape)

    def rasterize(self, group, grid, scale=1.0):
        mask = np.zeros(grid.shape, dtype=bool)
        mask.flat[self.cell_indices(group, grid, scale)] = True
        return mask


def complement_frontier(mask):
    """Complement cells with an axis neighbour inside ``mask`` (no wrap-around)."""
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    return ndimage.binary_dilation(mask, structure=structure) & ~mask


def distances_to_complement(group, points, mask, grid, chunk=512):
    """min over complement cells y of rho(x - y), for every x in ``points``.

    The minimiser always sits on the frontier of the complement (moving a complement
    cell one step towards x along an axis lowers rho), so only frontier cells are
    scanned, plus the cells around x for points that fall inside the complement.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise InvalidInput(f"mask shape {mask.shape} does not match grid {grid.shape}")
    if mask.all():
        raise InvalidInput("the complement of the mask is empty")
    points = group._points(points).reshape(-1, group.dimension)
    frontier = complement_frontier(mask)
    if not frontier.any():
        frontier = ~mask
    coords = grid.points()
    targets = coords[frontier]

    nearest = grid.nearest_cells(points)
    in_complement = ~mask[tuple(nearest.T)]

    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        diffs = block[:, None, :] - targets[None, :, :]
        out[start:start + chunk] = np.min(group.rho(diffs), axis=1)
    out[in_complement] = 0.0
    return out


def rho_distance_to_complement(group, x, mask, grid):
    """dist_rho(x, complement of mask), exact over the grid."""
    return float(distances_to_complement(group, np.atleast_2d(x), mask, grid)[0])


def polar_integral(group, integrand, r_lo, r_hi, n_theta=512, nodes_per_octave=24):
    """Integrate ``integrand(points, r)`` over the annulus r_lo <= rho(y) <= r_hi in the plane.

    Uses dy = r^(gamma-1) mu(theta) dr dsigma(theta): trapezoid in theta (exact for
    trigonometric integrands), Gauss-Legendre in log r on each octave. The integrand gets
    the points A_r theta with shape (nodes, n_theta, 2) and r = rho(points) with shape
    (nodes, 1), and is evaluated one octave at a time.
    """
    if group.dimension != 2:
        raise InvalidParameter("polar quadrature is implemented for n = 2 only")
    if not 0 < r_lo < r_hi:
        raise InvalidParameter(f"need 0 < r_lo < r_hi, got {r_lo}, {r_hi}")
    angles = 2 * math.pi * np.arange(n_theta) / n_theta
    theta = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    mu = group.polar_weight(theta)

    u_lo, u_hi = math.log(r_lo), math.log(r_hi)
    octaves = max(1, int(math.ceil((u_hi - u_lo) / math.log(2))))
    base_x, base_w = leggauss(nodes_per_octave)
    edges = np.linspace(u_lo, u_hi, octaves + 1)
    total = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        half = 0.5 * (right - left)
        r = np.exp(0.5 * (left + right) + half * base_x)
        points = theta[None, :, :] * np.power(r[:, None, None], group.a)
        values = integrand(points, r[:, None])
        radial = half * base_w * r ** group.gamma
        total += float(np.sum(values * mu[None, :] * radial[:, None]))
    return total * (2 * math.pi / n_theta)


def unit_ball_measure(group, n_nodes=128):
    """Cartesian measure of {rho < 1} in the plane, without using mu.

    For each x_1 the height of the section is found by bisection on rho(x_1, .) = 1;
    the x_1 integral runs in x_1 = sin(phi) to keep the integrand smooth.
    """
    if group.dimension != 2:
        raise InvalidParameter("unit_ball_measure is implemented for n = 2 only")
    nodes, weights = leggauss(n_nodes)
    phi = 0.5 * math.pi * nodes
    x1 = np.sin(phi)
    lo = np.zeros_like(x1)
    hi = np.full_like(x1, 2.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        inside = group.rho(np.stack([x1, mid], axis=-1)) < 1.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    height = 0.5 * (lo + hi)
    return float(np.sum(weights * 2 * height * np.cos(phi)) * 0.5 * math.pi)
