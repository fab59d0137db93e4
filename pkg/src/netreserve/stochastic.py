"""Demand and channel models plus the integral operators behind the planner objective.

Rates are Mnats/s and radio resources MHz throughout; SNR is linear.

Two operators carry the objective of the reservation problem:

* expected supportable traffic

      expected_min(r, demand) = int_0^r y f(y) dy + r (1 - F(r)) = E[min(d, r)]

  nondecreasing and concave in r with derivative 1 - F(r);

* expected outage of a downlink that received resource t

      expected_outage(r, t, ch) = int_0^r z(v, t) (r - v) dv = int_0^r Z(v, t) dv

  (integration by parts, Z(0, t) = 0), nondecreasing convex in r with
  d/dr = Z(r, t), and equal to r in the t -> 0 limit.

For a Rayleigh fading downlink with mean SNR s the achievable-rate law is

      Z(v, t) = 1 - exp((1 - 2^(v/t)) / s)
      z(v, t) = ln(2) 2^(v/t) exp((1 - 2^(v/t)) / s) / (s t).

Public operators use adaptive quadrature (abs tol 1e-9, rel tol 1e-8, infinite
tails truncated where the CDF exceeds 1 - 1e-10).  The solvers additionally use
vectorized closed forms obtained from the substitution x = 2^(v/t),

      O(r, t)     = r - (t e^a / ln 2) (E1(a) - E1(a X))
      dO/dt(r, t) = -(e^a / ln 2) (E1(a) - E1(a X) - e^(-a X) ln X)
      E[v | t]    = t e^a E1(a) / ln 2

with a = 1/s, X = 2^(r/t) and E1 the exponential integral; these are regression
tested against the quadrature operators, never trusted on their own.
"""

import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError

LN2 = math.log(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

QUAD_ABS_TOL = 1e-9
QUAD_REL_TOL = 1e-8
TAIL_MASS = 1e-10

# exp2 argument cap; exp2(1000) ~ 1.07e301 stays finite in float64
_EXP2_CAP = 1000.0
_QUANTILE_EPS = 1e-16


def _quad(fn, lo, hi, points=None):
    if points is not None:
        points = sorted(p for p in points if lo < p < hi)
        if not points:
            points = None
    val, _ = integrate.quad(
        fn, lo, hi, points=points, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, limit=400
    )
    return val


def scaled_exp1(a):
    """e^a E1(a), overflow-safe for large a via the asymptotic series."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0.0):
        raise DomainError("scaled_exp1 requires a > 0")
    out = np.empty_like(a)
    small = a < 50.0
    if np.any(small):
        asm = a[small]
        out[small] = np.exp(asm) * special.exp1(asm)
    if np.any(~small):
        x = a[~small]
        # e^a E1(a) ~ (1/a) sum_n (-1)^n n! / a^n; truncation error < 1e-14 for a >= 50
        term = 1.0 / x
        acc = term.copy()
        for n in range(1, 13):
            term = term * (-n / x)
            acc += term
        out[~small] = acc
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# demand distributions
# ---------------------------------------------------------------------------


class LognormalDemand:
    """Log-normal user demand: ln d ~ N(eta, sigma^2)."""

    kind = "log-normal"

    def __init__(self, eta, sigma):
        if not sigma > 0.0:
            raise DomainError("lognormal sigma must be positive")
        self.eta = float(eta)
        self.sigma = float(sigma)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        safe = np.where(y > 0.0, y, 1.0)
        u = (np.log(safe) - self.eta) / self.sigma
        val = np.exp(-0.5 * u * u) / (safe * self.sigma * SQRT_2PI)
        val = np.where(y > 0.0, val, 0.0)
        return val if val.ndim else float(val)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        safe = np.where(y > 0.0, y, 1.0)
        val = special.ndtr((np.log(safe) - self.eta) / self.sigma)
        val = np.where(y > 0.0, val, 0.0)
        return val if val.ndim else float(val)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), _QUANTILE_EPS, 1.0 - _QUANTILE_EPS)
        val = np.exp(self.eta + self.sigma * special.ndtri(u))
        return val if val.ndim else float(val)

    def mean(self):
        return math.exp(self.eta + 0.5 * self.sigma**2)

    def pdf_max(self):
        # density peak at the mode exp(eta - sigma^2)
        return math.exp(0.5 * self.sigma**2 - self.eta) / (self.sigma * SQRT_2PI)

    def pdf_bound(self, lo, hi):
        """Supremum of the density over [lo, hi] (exact: the density is unimodal)."""
        if hi < lo:
            lo, hi = hi, lo
        mode = math.exp(self.eta - self.sigma**2)
        if lo <= mode <= hi:
            return self.pdf_max()
        return float(max(self.pdf(lo), self.pdf(hi)))

    def upper_tail(self):
        return float(self.quantile(1.0 - TAIL_MASS))

    def quad_points(self):
        # scale ladder so the adaptive integrator finds the (possibly very
        # wide) bump of y * f(y) on huge intervals
        levels = (1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.5, 0.7, 0.9,
                  1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6, 1.0 - 1e-9, 1.0 - 1e-12)
        return [float(self.quantile(u)) for u in levels]


class PointMassDemand:
    """Deterministic demand: all mass at a single value (average-based model)."""

    kind = "point-mass"

    def __init__(self, mass):
        if mass < 0.0:
            raise DomainError("point mass must be nonnegative")
        self.mass = float(mass)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        val = np.where(y >= self.mass, 1.0, 0.0)
        return val if val.ndim else float(val)

    def pdf(self, y):
        raise DomainError("point-mass demand has no density; handled analytically")

    def pdf_max(self):
        return 1.0

    def pdf_bound(self, lo, hi):
        # no density; the unit kink bound stands in everywhere
        return 1.0

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        val = np.full_like(u, self.mass, dtype=float)
        return val if val.ndim else float(val)

    def mean(self):
        return self.mass

    def upper_tail(self):
        return self.mass

    def quad_points(self):
        return [self.mass]


class EmpiricalDemand:
    """Demand distribution backed by a kernel density estimate on a grid."""

    kind = "empirical-kde"

    def __init__(self, grid, density):
        grid = np.asarray(grid, dtype=float)
        density = np.maximum(np.asarray(density, dtype=float), 0.0)
        if grid.ndim != 1 or grid.shape != density.shape or grid.size < 2:
            raise DomainError("empirical demand needs matching 1-D grid and density")
        self.grid = grid
        self.density = density
        dx = np.diff(grid)
        mids = 0.5 * (density[1:] + density[:-1])
        self._cdf_grid = np.concatenate([[0.0], np.cumsum(mids * dx)])
        self._cdf_grid = np.minimum(self._cdf_grid, 1.0)
        # exact per-cell integral of y * f(y) for the linear density
        cell = dx / 6.0 * (density[:-1] * (2.0 * grid[:-1] + grid[1:])
                           + density[1:] * (grid[:-1] + 2.0 * grid[1:]))
        self._ymom_grid = np.concatenate([[0.0], np.cumsum(cell)])

    @classmethod
    def from_kde(cls, state):
        if state.count == 0:
            raise DomainError("cannot build a demand model from an empty estimator")
        return cls(state.grid, state.density)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        val = np.interp(y, self.grid, self.density, left=0.0, right=0.0)
        return val if val.ndim else float(val)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        val = np.interp(y, self.grid, self._cdf_grid,
                        left=0.0, right=float(self._cdf_grid[-1]))
        return val if val.ndim else float(val)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, float(self._cdf_grid[-1]))
        val = np.interp(u, self._cdf_grid, self.grid)
        return val if val.ndim else float(val)

    def mean(self):
        return float(np.trapezoid(self.grid * self.density, self.grid))

    def head_integral(self, r):
        """Exact int_0^r y f(y) dy of the piecewise-linear density."""
        g, f = self.grid, self.density
        if r <= g[0]:
            return 0.0
        if r >= g[-1]:
            return float(self._ymom_grid[-1])
        i = int(np.searchsorted(g, r, side="right") - 1)
        x0, dx = g[i], g[i + 1] - g[i]
        f0, f1 = f[i], f[i + 1]
        part = (f0 * (r * r - x0 * x0) / 2.0
                + (f1 - f0) / dx * (r**3 / 3.0 - x0 * r * r / 2.0 + x0**3 / 6.0))
        return float(self._ymom_grid[i] + part)

    def pdf_max(self):
        return float(np.max(self.density))

    def pdf_bound(self, lo, hi):
        """Supremum of the interpolated density over [lo, hi]."""
        if hi < lo:
            lo, hi = hi, lo
        # piecewise-linear density: the sup sits at an interior grid node or
        # at one of the clipped endpoints
        inside = (self.grid >= lo) & (self.grid <= hi)
        best = float(np.max(self.density[inside])) if np.any(inside) else 0.0
        return max(best, float(self.pdf(lo)), float(self.pdf(hi)))

    def upper_tail(self):
        return float(self.grid[-1])

    def quad_points(self):
        return [float(self.quantile(u)) for u in (0.25, 0.5, 0.75)]


def expected_min(r, demand):
    """Expected supportable traffic E[min(d, r)] by adaptive quadrature.

    Point-mass demand is evaluated analytically (min(r, mass)), grid-backed
    densities by their exact piecewise integral; every other distribution
    goes through the two-integral formula.
    """
    if r < 0.0:
        raise DomainError("reserved rate must be nonnegative")
    if isinstance(demand, PointMassDemand):
        return min(float(r), demand.mass)
    if r == 0.0:
        return 0.0
    if isinstance(demand, EmpiricalDemand):
        return demand.head_integral(r) + float(r) * (1.0 - float(demand.cdf(r)))
    head = _quad(lambda y: y * demand.pdf(y), 0.0, float(r), points=demand.quad_points())
    return head + float(r) * (1.0 - float(demand.cdf(r)))


def expected_min_derivative(r, demand):
    """d/dr E[min(d, r)] = 1 - F(r)."""
    if r < 0.0:
        raise DomainError("reserved rate must be nonnegative")
    return 1.0 - float(demand.cdf(r))


# ---------------------------------------------------------------------------
# channel distributions
# ---------------------------------------------------------------------------


def ray_cdf(v, t, snr):
    """Vectorized limit-aware Z(v, t): t = 0 rows use Z = 1 for v > 0 (full outage)."""
    v, t, snr = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (v, t, snr))
    )
    tt = np.where(t > 0.0, t, 1.0)
    e = np.minimum(v / tt, _EXP2_CAP)
    z = -np.expm1((1.0 - np.exp2(e)) / snr)
    z = np.where(t > 0.0, z, 1.0)
    z = np.where(v > 0.0, z, 0.0)
    return z


def ray_outage(r, t, snr):
    """Vectorized closed-form E[(r - v)^+] for the Rayleigh channel."""
    r, t, snr = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (r, t, snr))
    )
    a = 1.0 / snr
    tt = np.where(t > 0.0, t, 1.0)
    e = np.minimum(r / tt, _EXP2_CAP)
    aX = a * np.exp2(e)
    s1 = scaled_exp1(a)
    s2 = np.exp(a - aX) * scaled_exp1(aX)
    out = r - (tt / LN2) * (s1 - s2)
    out = np.where(t > 0.0, out, r)
    out = np.where(r > 0.0, out, 0.0)
    return np.maximum(out, 0.0)


def ray_outage_dt(r, t, snr):
    """Vectorized closed-form d/dt of ray_outage; <= 0 everywhere."""
    r, t, snr = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (r, t, snr))
    )
    a = 1.0 / snr
    tt = np.where(t > 0.0, t, 1.0)
    e = np.minimum(r / tt, _EXP2_CAP)
    aX = a * np.exp2(e)
    s1 = scaled_exp1(a)
    s2 = np.exp(a - aX) * scaled_exp1(aX)
    s3 = np.exp(a - aX) * (e * LN2)
    d = -(s1 - s2 - s3) / LN2
    d = np.where(t > 0.0, d, -s1 / LN2)
    d = np.where(r > 0.0, d, 0.0)
    return np.minimum(d, 0.0)


def ray_mean_rate(t, snr):
    """Closed-form E[v | t] = t e^a E1(a) / ln 2 (internal; curve building uses quadrature)."""
    t = np.asarray(t, dtype=float)
    val = t * scaled_exp1(1.0 / np.asarray(snr, dtype=float)) / LN2
    return val if val.ndim else float(val)


class RayleighChannel:
    """Rayleigh-fading downlink rate law parameterized by mean SNR (linear)."""

    kind = "rayleigh"

    def __init__(self, mean_snr):
        if not mean_snr > 0.0:
            raise DomainError("mean SNR must be positive")
        self.mean_snr = float(mean_snr)

    def cdf(self, v, t):
        if t <= 0.0:
            raise DomainError("channel CDF needs t > 0; use the outage limit at t = 0")
        if np.any(np.asarray(v) < 0.0):
            raise DomainError("rate must be nonnegative")
        val = ray_cdf(v, t, self.mean_snr)
        return val if np.ndim(val) else float(val)

    def pdf(self, v, t):
        if t <= 0.0:
            raise DomainError("channel PDF needs t > 0")
        v = np.asarray(v, dtype=float)
        if np.any(v < 0.0):
            raise DomainError("rate must be nonnegative")
        e = np.minimum(v / t, _EXP2_CAP)
        x = np.exp2(e)
        val = LN2 * x * np.exp((1.0 - x) / self.mean_snr) / (self.mean_snr * t)
        return val if val.ndim else float(val)

    def quantile(self, u, t):
        if t < 0.0:
            raise DomainError("resource must be nonnegative")
        if t == 0.0:
            return 0.0 * np.asarray(u, dtype=float) if np.ndim(u) else 0.0
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0 - _QUANTILE_EPS)
        val = t * np.log2(1.0 - self.mean_snr * np.log1p(-u))
        return val if val.ndim else float(val)

    def upper_rate(self, t, tail=TAIL_MASS):
        # v with Z(v, t) = 1 - tail
        return t * math.log2(1.0 - self.mean_snr * math.log(tail))

    def quad_points(self, t):
        # the knee of Z sits near v where the exponent (1 - 2^(v/t))/s ~ -1
        s = self.mean_snr
        return [t * math.log2(1.0 + s * c) for c in (0.25, 1.0, 4.0, 23.0)]

    def mean_rate(self, t):
        return ray_mean_rate(t, self.mean_snr)

    def outage(self, r, t):
        val = ray_outage(r, t, self.mean_snr)
        return val if np.ndim(val) else float(val)

    def outage_dt(self, r, t):
        val = ray_outage_dt(r, t, self.mean_snr)
        return val if np.ndim(val) else float(val)


class DeterministicChannel:
    """Deterministic downlink: achievable rate is a known function of t.

    Either a fixed spectral efficiency delta (rate = delta * t, nats/s/Hz) or a
    tabulated nondecreasing rate curve (used for the average-based baseline's
    mean-rate model).
    """

    kind = "deterministic"

    def __init__(self, delta=None, curve=None):
        if (delta is None) == (curve is None):
            raise DomainError("provide exactly one of delta or curve")
        if delta is not None:
            if not delta > 0.0:
                raise DomainError("spectral efficiency must be positive")
            self.delta = float(delta)
            self.curve = None
        else:
            tg, rg = (np.asarray(a, dtype=float) for a in curve)
            if tg.ndim != 1 or tg.shape != rg.shape or tg.size < 2:
                raise DomainError("curve needs matching 1-D grids")
            if tg[0] != 0.0 or np.any(np.diff(tg) <= 0.0) or np.any(np.diff(rg) < 0.0):
                raise DomainError("curve must start at t=0 and be nondecreasing")
            self.delta = None
            self.curve = (tg, rg)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise DomainError("resource must be nonnegative")
        if self.delta is not None:
            val = self.delta * t
        else:
            tg, rg = self.curve
            val = np.interp(t, tg, rg)
            # linear extension beyond the cached grid using the last slope
            end_slope = (rg[-1] - rg[-2]) / (tg[-1] - tg[-2])
            val = np.where(t > tg[-1], rg[-1] + end_slope * (t - tg[-1]), val)
        return val if val.ndim else float(val)

    def rate_slope(self, t):
        if self.delta is not None:
            return self.delta
        tg, rg = self.curve
        i = int(np.clip(np.searchsorted(tg, t, side="right") - 1, 0, tg.size - 2))
        return float((rg[i + 1] - rg[i]) / (tg[i + 1] - tg[i]))

    def cdf(self, v, t):
        v = np.asarray(v, dtype=float)
        val = np.where(v > self.rate(t), 1.0, 0.0)
        return val if val.ndim else float(val)

    def quantile(self, u, t):
        rate = self.rate(t)
        u = np.asarray(u, dtype=float)
        val = np.full_like(u, rate, dtype=float) if u.ndim else rate
        return val

    def mean_rate(self, t):
        return self.rate(t)

    def outage(self, r, t):
        r = np.asarray(r, dtype=float)
        val = np.maximum(r - self.rate(t), 0.0)
        return val if val.ndim else float(val)

    def outage_dt(self, r, t):
        r = np.asarray(r, dtype=float)
        val = np.where(self.rate(t) < r, -self.rate_slope(t), 0.0)
        return val if val.ndim else float(val)


def channel_cdf(v, t, ch):
    """Probability that the downlink rate stays below v given resource t."""
    return ch.cdf(v, t)


def channel_pdf(v, t, ch):
    """Density of the downlink rate at v given resource t."""
    return ch.pdf(v, t)


def expected_outage(r, t, ch):
    """Expected outage E[(r - v)^+] = int_0^r Z(v, t) dv by adaptive quadrature.

    Deterministic channels are analytic: (r - rate(t))^+.  The t = 0 limit is
    full outage, O(r, 0) = r.
    """
    if r < 0.0 or t < 0.0:
        raise DomainError("rate and resource must be nonnegative")
    r = float(r)
    t = float(t)
    if r == 0.0:
        return 0.0
    if isinstance(ch, DeterministicChannel):
        return float(ch.outage(r, t))
    if t == 0.0:
        return r
    # beyond v* with Z(v*) = 1 - 1e-10 the integrand is 1 to within 1e-10
    hi = min(r, ch.upper_rate(t))
    val = _quad(lambda v: ray_cdf(v, t, ch.mean_snr), 0.0, hi,
                points=ch.quad_points(t))
    return val + max(r - hi, 0.0)


def shared_outage(rates, t, ch):
    """Expected outage of a downlink shared by several paths: one t, summed rate."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0.0):
        raise DomainError("rates must be nonnegative")
    return expected_outage(float(rates.sum()), t, ch)
