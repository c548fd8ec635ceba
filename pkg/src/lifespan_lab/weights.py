"""Grids, quadrature, smooth cutoffs and the space-time weight functions.

All weights use the Japanese bracket <z> = sqrt(1 + z^2).  Points are
given as (t, r) with r = |x|; functions broadcast over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


def jb(z):
    """Japanese bracket sqrt(1 + z^2), safe for |z| up to the float limit."""
    return np.hypot(1.0, z)


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    r: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")
        if self.r < 0:
            raise ValueError(f"r must be non-negative, got {self.r}")


@dataclass(frozen=True)
class WeightParams:
    nu: float = 0.0
    kappa: float = 0.0
    rho: float = 0.0
    mu: float = 0.25
    lam: float = 0.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if not 0.0 <= self.lam <= 0.5:
            raise ValueError("lambda must lie in [0, 1/2]")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("Grid1D needs lo < hi")
        if self.n < 2:
            raise ValueError("Grid1D needs at least two points")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def refined(self) -> "Grid1D":
        """Halve the spacing; the old points are a subset of the new ones."""
        return Grid1D(self.lo, self.hi, 2 * self.n - 1)


# ---------------------------------------------------------------------------
# weights

def psi_nu(nu: float, t):
    """log(2+t) when nu == 0, otherwise 1."""
    t = np.asarray(t, dtype=float)
    if nu == 0:
        return np.log(2.0 + t)
    return np.ones_like(t)


def w_nu_kappa(nu: float, kappa: float, t, r):
    """<t+r>^nu * min(<r>, <t-r>)^kappa."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return jb(t + r) ** nu * np.minimum(jb(r), jb(t - r)) ** kappa


def phi_nu(nu: float, t, r):
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if nu < 0:
        return jb(t + r) ** nu
    if nu == 0:
        return 1.0 / np.log(2.0 + jb(t + r) / jb(t - r))
    return jb(t - r) ** nu


def weighted_sup(field, t, r, weight: Callable | None = None) -> float:
    """Grid maximum of <r> * weight(t, r) * |field|.

    ``field``, ``t`` and ``r`` must broadcast together; ``weight`` defaults
    to 1.  This is the discrete k = 0 version of the N_k(W) norm.
    """
    field = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(field)):
        raise ValueError("weighted_sup: field contains non-finite samples")
    t, r = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
    wt = 1.0 if weight is None else weight(t, r)
    vals = jb(r) * wt * np.abs(field)
    return float(np.max(vals)) if vals.size else 0.0


def data_norm(rho: float, r, f0, df0, f1) -> float:
    """Sampled sup_x <x>^rho (|f0| + |grad f0| + |f1|) for radial data (k = 0)."""
    r = np.asarray(r, dtype=float)
    return float(np.max(jb(r) ** rho * (np.abs(f0) + np.abs(df0) + np.abs(f1))))


# ---------------------------------------------------------------------------
# quadrature

def adaptive_quad(f: Callable, a: float, b: float, tol: float = 1e-10,
                  max_depth: int = 40) -> float:
    """Globally adaptive Simpson rule with Richardson-corrected panels.

    ``f`` must accept a numpy array.  Every pass evaluates the midpoints of
    all unfinished panels in one vectorized call.  A panel is accepted when
    |S2 - S1| / 15 is below its share of ``tol * (1 + |Q|)``; the accepted
    value is the extrapolated S2 + (S2 - S1) / 15.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0

    n0 = 16
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    flo = np.asarray(f(lo), dtype=float)
    fhi = np.asarray(f(hi), dtype=float)
    fmid = np.asarray(f(mid), dtype=float)
    whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
    span = b - a
    total = 0.0
    scale = abs(float(np.sum(whole)))

    for _ in range(max_depth):
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        fq1 = np.asarray(f(q1), dtype=float)
        fq3 = np.asarray(f(q3), dtype=float)
        left = (mid - lo) / 6.0 * (flo + 4 * fq1 + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * fq3 + fhi)
        s2 = left + right
        err = np.abs(s2 - whole) / 15.0
        if not np.all(np.isfinite(s2)):
            raise QuadratureError("adaptive_quad: non-finite integrand values")
        scale = max(scale, abs(total + float(np.sum(s2))))
        local_tol = 0.5 * tol * (1.0 + scale) * (hi - lo) / span
        ok = err <= local_tol
        total += float(np.sum((s2 + (s2 - whole) / 15.0)[ok]))
        if np.all(ok):
            return sign * total
        bad = ~ok
        lo, mid, hi = lo[bad], mid[bad], hi[bad]
        flo, fmid, fhi = flo[bad], fmid[bad], fhi[bad]
        fq1, fq3 = fq1[bad], fq3[bad]
        left, right = left[bad], right[bad]
        # split each unfinished panel into its two halves
        lo, mid, hi = (np.concatenate([lo, mid]), np.concatenate([q1[bad], q3[bad]]),
                       np.concatenate([mid, hi]))
        flo, fmid, fhi = (np.concatenate([flo, fmid]), np.concatenate([fq1, fq3]),
                          np.concatenate([fmid, fhi]))
        whole = np.concatenate([left, right])
    raise QuadratureError(
        f"adaptive_quad: no convergence on [{a}, {b}] within depth {max_depth}")


def trapezoid(y, x) -> float:
    return float(np.trapezoid(y, x))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def gl_integrate(f: Callable, a, b, n: int = 16):
    """Fixed-order Gauss-Legendre on [a, b]; broadcasts over array endpoints."""
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b)[..., None] + half[..., None] * x
    return half * np.sum(w * f(nodes), axis=-1)


class CumulativeIntegral:
    """Antiderivative x -> int_lo^x f on [lo, hi] from composite Gauss panels.

    Panel totals are summed once; a query integrates the partial panel it
    falls in with the same rule.  Values outside [lo, hi] are clamped.
    """

    def __init__(self, f: Callable, lo: float, hi: float, panels: int = 400,
                 order: int = 16):
        self.f = f
        self.lo = float(lo)
        self.hi = float(hi)
        self.order = order
        self.edges = np.linspace(self.lo, self.hi, panels + 1)
        pan = gl_integrate(f, self.edges[:-1], self.edges[1:], order)
        self.cum = np.concatenate([[0.0], np.cumsum(pan)])

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    def __call__(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1,
                    0, len(self.edges) - 2)
        part = gl_integrate(self.f, self.edges[k], x, self.order)
        return self.cum[k] + part


class HermiteAntiderivative:
    """x -> int_lo^x f on a uniform grid, read back by quintic Hermite.

    Node values come from Gauss-Legendre panels; the slopes f and the
    curvatures f' at the nodes are exact, so a query costs a handful of
    multiplications and the error is O(dx^6).  Values outside [lo, hi]
    are clamped.
    """

    def __init__(self, f: Callable, df: Callable, lo: float, hi: float,
                 panels: int = 2048, order: int = 12):
        edges = np.linspace(float(lo), float(hi), panels + 1)
        pan = gl_integrate(f, edges[:-1], edges[1:], order)
        self._setup(edges, pan, f(edges), df(edges))

    @classmethod
    def from_samples(cls, edges, panel_integrals, f_edges, df_edges) -> "HermiteAntiderivative":
        """Build from precomputed panel integrals and node values of f, f'."""
        obj = cls.__new__(cls)
        obj._setup(np.asarray(edges, float), panel_integrals, f_edges, df_edges)
        return obj

    def _setup(self, edges, pan, f_edges, df_edges):
        self.edges = edges
        self.lo = float(edges[0])
        self.hi = float(edges[-1])
        self.dx = (self.hi - self.lo) / (len(edges) - 1)
        self.K = np.concatenate([[0.0], np.cumsum(pan)])
        self.K1 = np.asarray(f_edges, dtype=float)
        self.K2 = np.asarray(df_edges, dtype=float)

    @property
    def total(self) -> float:
        return float(self.K[-1])

    def __call__(self, x):
        y = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = np.clip(((y - self.lo) / self.dx).astype(np.int64), 0, len(self.edges) - 2)
        d = self.dx
        u = (y - self.edges[k]) / d
        u2 = u * u
        u3 = u2 * u
        u4 = u3 * u
        u5 = u4 * u
        h00 = 1 - 10 * u3 + 15 * u4 - 6 * u5
        h10 = u - 6 * u3 + 8 * u4 - 3 * u5
        h20 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5)
        h01 = 10 * u3 - 15 * u4 + 6 * u5
        h11 = -4 * u3 + 7 * u4 - 3 * u5
        h21 = 0.5 * (u3 - 2 * u4 + u5)
        out = (self.K[k] * h00 + self.K1[k] * d * h10 + self.K2[k] * d * d * h20
               + self.K[k + 1] * h01 + self.K1[k + 1] * d * h11 + self.K2[k + 1] * d * d * h21)
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# smooth cutoffs

def smooth_bump(x):
    """exp(-1/(x(1-x))) on (0, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    xm = x[m]
    with np.errstate(over="ignore"):     # exp(-inf) = 0 is the right limit
        out[m] = np.exp(-1.0 / (xm * (1.0 - xm)))
    return out if out.ndim else float(out)


def smooth_bump_derivs(x, order: int):
    """Derivative of ``smooth_bump`` of the given order (0..3), analytic."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    xm = x[m]
    g = xm * (1.0 - xm)
    gp = 1.0 - 2.0 * xm
    b = np.exp(-1.0 / g)
    a1 = gp / g**2
    a1p = (-2.0 * g - 2.0 * gp**2) / g**3
    a1pp = 6.0 * gp / g**3 + 6.0 * gp * (g + gp**2) / g**4
    if order == 0:
        out[m] = b
    elif order == 1:
        out[m] = b * a1
    elif order == 2:
        out[m] = b * (a1**2 + a1p)
    elif order == 3:
        out[m] = b * (a1**3 + 3.0 * a1 * a1p + a1pp)
    else:
        raise ValueError("order must be 0..3")
    return out if out.ndim else float(out)


_STEP_TABLE = CumulativeIntegral(smooth_bump, 0.0, 1.0, panels=64, order=20)
_BUMP_MASS = _STEP_TABLE.total


def bump_mass() -> float:
    """int_0^1 smooth_bump."""
    return _BUMP_MASS


def smoothstep(x):
    """Normalized running integral of the bump: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 0.0, 1.0)
    # integrate from the nearer end so both plateaus are reached exactly
    lower = _STEP_TABLE(xc) / _BUMP_MASS
    upper = 1.0 - (_STEP_TABLE.total - _STEP_TABLE(xc)) / _BUMP_MASS
    out = np.where(xc <= 0.5, lower, upper)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def smoothstep_deriv(x, order: int = 1):
    """Derivatives of ``smoothstep`` (order 0..3)."""
    if order == 0:
        return smoothstep(x)
    return smooth_bump_derivs(x, order - 1) / _BUMP_MASS


@dataclass(frozen=True)
class SmoothCutoffs:
    """chi = 1 on [0,1], 0 on [2,inf); xi = 0 on [0,1/2], 1 on [3/4,inf)."""

    def chi(self, s, order: int = 0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return 1.0 - smoothstep(s - 1.0)
        return -smoothstep_deriv(s - 1.0, order)

    def xi(self, s, order: int = 0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return smoothstep(4.0 * s - 2.0)
        return 4.0**order * smoothstep_deriv(4.0 * s - 2.0, order)


def golden_max(f: Callable[[float], float], a: float, b: float,
               tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for a local maximum of ``f`` on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
