"""Stieltjes transforms, the saddle equation z - g0(z) = lambda, and contours.

The solver follows the structure of the self-consistent equation itself:
for a fixed abscissa x the bulk constraint

    sum_j w_j / ((x - h_j)^2 + y^2) = 1

is monotone in y^2, so y^2(x) is found by bracketing on [0, 1] (the left
side is <= 1/y^2, hence any root satisfies y^2 <= 1).  The map

    x -> lambda(x) = x + sum_j w_j (x - h_j) / ((x - h_j)^2 + y^2(x))

is continuous and non-decreasing on the whole axis, so lambda -> x is
inverted by monotone bracketing; a complex Newton polish then pushes the
residual to machine level.  Outside the bulk this procedure lands on the
real branch that continues like lambda - 1/lambda at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from .errors import PoleError, RecipeError, SolverFailureError


# ---------------------------------------------------------------------------
# Measures


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite atomic probability measure; atoms sorted, duplicates merged."""

    locations: tuple
    weights: tuple

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if locs.size == 0 or locs.shape != w.shape:
            raise RecipeError("measure needs matching, nonempty locations/weights")
        if not np.all(np.isfinite(locs)):
            raise RecipeError("atom locations must be finite")
        if np.any(w <= 0):
            raise RecipeError("atom weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise RecipeError(f"atom weights must sum to 1, got {w.sum()!r}")
        order = np.argsort(locs)
        locs, w = locs[order], w[order]
        # merge exact duplicates so repeated deformations become one atom
        keep_locs, keep_w = [locs[0]], [w[0]]
        for loc, wt in zip(locs[1:], w[1:]):
            if loc == keep_locs[-1]:
                keep_w[-1] += wt
            else:
                keep_locs.append(loc)
                keep_w.append(wt)
        object.__setattr__(self, "locations", tuple(keep_locs))
        object.__setattr__(self, "weights", tuple(float(x) for x in keep_w))

    @classmethod
    def point(cls, c: float = 0.0) -> "AtomicMeasure":
        return cls((float(c),), (1.0,))

    @classmethod
    def two_point(cls, a: float) -> "AtomicMeasure":
        if a == 0:
            return cls.point(0.0)
        return cls((-float(a), float(a)), (0.5, 0.5))

    @classmethod
    def from_atoms(cls, values: Sequence[float]) -> "AtomicMeasure":
        values = np.asarray(values, dtype=float)
        return cls(tuple(values), tuple(np.full(values.size, 1.0 / values.size)))

    def arrays(self):
        return np.asarray(self.locations), np.asarray(self.weights)

    @property
    def support_lo(self) -> float:
        return self.locations[0]

    @property
    def support_hi(self) -> float:
        return self.locations[-1]


@dataclass(frozen=True)
class DensityMeasure:
    """Absolutely continuous limiting measure given by a density on [lo, hi]."""

    density: Callable[[float], float]
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise RecipeError("density support needs lo < hi")

    @property
    def support_lo(self) -> float:
        return self.lo

    @property
    def support_hi(self) -> float:
        return self.hi


Measure = Union[AtomicMeasure, DensityMeasure]

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-10, limit=200)


def _measure_sums(measure: Measure):
    """Return callables (cond_sum, real_sum, g0, g0_prime) for either measure kind.

    cond_sum(x, s) = int dN(h) / ((x-h)^2 + s)     [constraint left side]
    real_sum(x, s) = int (x-h) dN(h) / ((x-h)^2 + s)
    """
    if isinstance(measure, AtomicMeasure):
        h, w = measure.arrays()

        def cond_sum(x, s):
            return float(np.sum(w / ((x - h) ** 2 + s)))

        def real_sum(x, s):
            return float(np.sum(w * (x - h) / ((x - h) ** 2 + s)))

        def g0(z):
            return complex(np.sum(w / (h - z)))

        def g0_prime(z):
            return complex(np.sum(w / (h - z) ** 2))

    else:
        rho, lo, hi = measure.density, measure.lo, measure.hi

        def _quad(f):
            val, _ = integrate.quad(f, lo, hi, **_QUAD_OPTS)
            return val

        def cond_sum(x, s):
            return _quad(lambda h: rho(h) / ((x - h) ** 2 + s))

        def real_sum(x, s):
            return _quad(lambda h: rho(h) * (x - h) / ((x - h) ** 2 + s))

        def g0(z):
            re = _quad(lambda h: rho(h) * ((h - z).real / abs(h - z) ** 2))
            im = _quad(lambda h: rho(h) * (-(h - z).imag / abs(h - z) ** 2))
            return complex(re, -im)

        def g0_prime(z):
            val_re = _quad(lambda h: (rho(h) / (h - z) ** 2).real)
            val_im = _quad(lambda h: (rho(h) / (h - z) ** 2).imag)
            return complex(val_re, val_im)

    return cond_sum, real_sum, g0, g0_prime


# ---------------------------------------------------------------------------
# Stieltjes transform


def g0_eval(measure: Measure, z: complex) -> complex:
    """Stieltjes transform int dN(h)/(h - z); maps the upper half-plane to itself."""
    z = complex(z)
    if isinstance(measure, AtomicMeasure):
        h, _ = measure.arrays()
        if np.any(np.abs(z - h) == 0.0):
            raise PoleError(f"z = {z} coincides with an atom")
    elif z.imag == 0.0 and measure.support_lo <= z.real <= measure.support_hi:
        raise PoleError(f"z = {z} lies on the support of the density")
    _, _, g0, _ = _measure_sums(measure)
    return g0(z)


# ---------------------------------------------------------------------------
# Saddle solutions


@dataclass(frozen=True)
class SaddleSolution:
    """Solution of z - g0(z) = lambda with derivative data.

    a + i b = 1 - g0'(z); x_prime = a / (a^2 + b^2) is dx/dlambda.
    """

    lam: float
    z: complex
    in_bulk: bool
    a: float
    b: float
    x_prime: float
    residual: float

    @property
    def x(self) -> float:
        return self.z.real

    @property
    def y(self) -> float:
        return self.z.imag


def _ysq_at(cond_sum, x: float, finite_phi: bool, tol: float) -> float:
    """Solve cond_sum(x, s) = 1 for s >= 0; returns 0 outside the bulk."""
    if finite_phi:
        phi = cond_sum(x, 0.0)
        if not phi > 1.0:
            return 0.0
        lo = 0.0
    else:
        lo = 1e-300
    f = lambda s: cond_sum(x, s) - 1.0
    if f(1.0) > 0.0:  # only possible within roundoff of a single atom
        return 1.0
    return float(optimize.brentq(f, lo, 1.0, xtol=1e-16, rtol=8.9e-16, maxiter=200))


def _lambda_map(measure: Measure):
    """Return Lambda(x) -> (lambda, y^2) along the monotone global branch."""
    cond_sum, real_sum, _, _ = _measure_sums(measure)
    if isinstance(measure, AtomicMeasure):
        h, _ = measure.arrays()

        def at_atom(x):
            return bool(np.any(x == h))

    else:

        def at_atom(x):
            return measure.lo <= x <= measure.hi

    def Lambda(x: float):
        finite = not at_atom(x)
        s = _ysq_at(cond_sum, x, finite, 0.0)
        return x + real_sum(x, s), s

    return Lambda


def solve_saddle(measure: Measure, lam: float, tol: float = 1e-12, max_iter: int = 200) -> SaddleSolution:
    """Solve z - g0(z) = lambda on the closed upper half-plane.

    Returns the unique y > 0 solution when lambda is in the bulk, otherwise
    the real branch obtained by monotone continuation from large |lambda|.
    """
    if not tol > 0:
        raise SolverFailureError("tolerance must be positive")
    lam = float(lam)
    cond_sum, real_sum, g0, g0_prime = _measure_sums(measure)
    Lambda = _lambda_map(measure)

    lo = min(measure.support_lo, lam) - 1.5
    hi = max(measure.support_hi, lam) + 1.5
    for _ in range(max_iter):
        if Lambda(lo)[0] <= lam:
            break
        lo -= 1.0 + (hi - lo) * 0.5
    else:
        raise SolverFailureError(f"could not bracket lambda = {lam} from below")
    for _ in range(max_iter):
        if Lambda(hi)[0] >= lam:
            break
        hi += 1.0 + (hi - lo) * 0.5
    else:
        raise SolverFailureError(f"could not bracket lambda = {lam} from above")

    x = float(optimize.brentq(lambda t: Lambda(t)[0] - lam, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=max_iter))
    lam_x, s = Lambda(x)
    in_bulk = s > 0.0
    z = complex(x, math.sqrt(s) if in_bulk else 0.0)

    def F(zz):
        return zz - g0(zz) - lam

    def Fp(zz):
        # d/dz g0(z) = int dN(h)/(h - z)^2 = g0_prime(z)
        return 1.0 - g0_prime(zz)

    # Newton polish; the bracketing result is the fallback if it degrades.
    best, best_res = z, abs(F(z))
    zz = z
    for _ in range(30):
        if best_res <= 1e-3 * tol:
            break
        fp = Fp(zz)
        if fp == 0:
            break
        step = F(zz) / fp
        zz = zz - step
        if in_bulk and zz.imag <= 0:
            zz = complex(zz.real, max(1e-300, best.imag * 0.5))
        if not in_bulk:
            zz = complex(zz.real, 0.0)
        res = abs(F(zz))
        if res < best_res:
            best, best_res = zz, res
        else:
            break
    z = best
    if best_res > tol:
        raise SolverFailureError(
            f"saddle residual {best_res:.3e} exceeds tol {tol:.3e} at lambda = {lam}",
            context={"lambda": lam, "z": z},
        )

    one_minus = 1.0 - g0_prime(z)  # 1 - d/dz g0(z), Newton denominator and derivative data
    a, b = float(one_minus.real), float(one_minus.imag)
    denom = a * a + b * b
    x_prime = a / denom if denom > 0 else math.inf
    return SaddleSolution(lam=lam, z=z, in_bulk=in_bulk, a=a, b=b, x_prime=x_prime, residual=float(best_res))


# ---------------------------------------------------------------------------
# Contours and bands


@dataclass(frozen=True)
class ContourTrace:
    """Saddle solutions along a lambda grid, with the detected bulk bands."""

    points: tuple
    bands: tuple
    length: float

    def band_containing(self, lam: float):
        for lo, hi in self.bands:
            if lo <= lam <= hi:
                return (lo, hi)
        return None


def contour_trace(measure: Measure, lambda_grid: Sequence[float], tol: float = 1e-12) -> ContourTrace:
    """Trace z_n(lambda) over a sorted grid and detect the off-axis bands.

    length is the polyline length of the closed contour (upper part twice).
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise RecipeError("lambda grid must be sorted and contain at least two points")
    points = []
    for lam in grid:
        try:
            points.append(solve_saddle(measure, float(lam), tol=tol))
        except SolverFailureError as exc:
            raise SolverFailureError(f"{exc} (while tracing at lambda = {lam})") from exc
    bands = []
    start = None
    for i, p in enumerate(points):
        if p.in_bulk and start is None:
            start = i
        if (not p.in_bulk or i == len(points) - 1) and start is not None:
            end = i if p.in_bulk else i - 1
            if end > start:
                bands.append((float(grid[start]), float(grid[end])))
            start = None
    length = 0.0
    for i in range(len(points) - 1):
        if points[i].in_bulk and points[i + 1].in_bulk:
            length += abs(points[i + 1].z - points[i].z)
    return ContourTrace(points=tuple(points), bands=tuple(bands), length=2.0 * length)


@dataclass(frozen=True)
class BulkWindow:
    """A bulk reference point with its local density and containing interval."""

    lambda0: float
    rho: float
    interval: tuple

    def __post_init__(self):
        lo, hi = self.interval
        if not (self.rho > 0 and lo < self.lambda0 < hi):
            raise RecipeError("bulk window needs rho > 0 and lambda0 inside the interval")


def support_bands(measure: Measure, resolution: int = 2048, pad: float = 2.5) -> tuple:
    """Spectral bands in lambda, located by sign changes of phi(x) - 1.

    phi(x) = int dN(h)/(x-h)^2; the band edges in x are phi = 1 crossings and
    map to lambda edges through the real part of the saddle relation.
    """
    cond_sum, real_sum, _, _ = _measure_sums(measure)
    lo = measure.support_lo - pad
    hi = measure.support_hi + pad
    xs = np.linspace(lo, hi, int(resolution))
    if isinstance(measure, AtomicMeasure):
        h, _ = measure.arrays()
        xs = np.setdiff1d(xs, h)

    def phi_minus_1(x):
        return cond_sum(float(x), 0.0) - 1.0

    vals = np.array([phi_minus_1(x) for x in xs])
    edges = []
    for i in range(xs.size - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]) and np.isfinite(vals[i]) and np.isfinite(vals[i + 1]):
            edges.append(float(optimize.brentq(phi_minus_1, xs[i], xs[i + 1], xtol=1e-14)))
    if len(edges) % 2 == 1:
        raise SolverFailureError("band-edge detection found an odd number of crossings; raise resolution")
    bands = []
    for xl, xr in zip(edges[0::2], edges[1::2]):
        lam_l = xl + real_sum(xl, 0.0)
        lam_r = xr + real_sum(xr, 0.0)
        bands.append((float(lam_l), float(lam_r)))
    return tuple(bands)


# ---------------------------------------------------------------------------
# Limiting density and action


def pastur_solve(measure: Measure, lam: float, tol: float = 1e-12) -> tuple:
    """Solve the limiting self-consistent equation at a real point.

    Returns (g, rho) with g = z - lambda and rho = Im z / pi; rho = 0 off
    the support.
    """
    sol = solve_saddle(measure, lam, tol=tol)
    g = sol.z - lam
    rho = max(0.0, sol.z.imag) / math.pi
    return complex(g), float(rho)


def pastur_density(measure: Measure, lams: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    return np.array([pastur_solve(measure, float(l), tol=tol)[1] for l in np.asarray(lams, dtype=float)])


def density_mass(measure: Measure, tol: float = 1e-12) -> float:
    """Quadrature of the limiting density over the detected support."""
    total = 0.0
    for lam_l, lam_r in support_bands(measure):
        val, _ = integrate.quad(
            lambda l: pastur_solve(measure, l, tol=tol)[1], lam_l, lam_r, epsabs=1e-10, epsrel=1e-9, limit=300
        )
        total += val
    return float(total)


def s_action(measure: AtomicMeasure, z: complex, lambda0: float) -> complex:
    """S(z) = z^2/2 + sum_j w_j Log(z - h_j) - lambda0 z with principal logs.

    Only differences of Re S and the exponential exp{n S} are meaningful
    downstream; both are insensitive to the branch of the logarithm.
    """
    z = complex(z)
    h, w = measure.arrays()
    if np.any(np.abs(z - h) == 0.0):
        raise PoleError(f"z = {z} coincides with an atom")
    return z * z / 2.0 + complex(np.sum(w * np.log(z - h))) - lambda0 * z
