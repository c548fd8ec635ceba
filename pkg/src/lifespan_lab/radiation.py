"""Radon transforms and radiation fields.

Two routes are provided.  The free-space Friedlander field

    F0[phi](s, theta) = (R[phi1](s, theta) - d/ds R[phi0](s, theta)) / (4 pi)

is computed from plane integrals, and the exterior-ball field for radial
data is computed from the odd reflection ("check extension") of r * f(r)
about r = 1:

    F+(s) = (d/ds fcheck0(s) - fcheck1(s)) / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .weights import (HermiteAntiderivative, QuadratureError, adaptive_quad,
                      gauss_legendre, jb, smooth_bump_derivs)

Array = np.ndarray


@dataclass(frozen=True)
class RadialProfile:
    """Smooth radial datum f*(r) on [1, inf), zero outside ``support``.

    ``derivs[k]`` evaluates the (k+1)-th derivative.  Missing derivatives
    fall back to central differences with step ``fd_step``.
    """

    func: Callable[[Array], Array]
    support: tuple[float, float]
    derivs: Sequence[Callable[[Array], Array]] = ()
    fd_step: float = 1e-4
    name: str = "profile"
    zero: bool = False

    def __post_init__(self):
        a, b = self.support
        if not 1.0 <= a < b:
            raise ValueError(f"support must satisfy 1 <= a < b, got {self.support}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        a, b = self.support
        inside = (r >= a) & (r <= b) & (r > 1.0)
        out = np.where(inside, self.func(np.where(inside, r, 0.5 * (a + b))), 0.0)
        return out if out.ndim else float(out)

    def deriv(self, r, order: int = 1):
        if order == 0:
            return self(r)
        r = np.asarray(r, dtype=float)
        if order <= len(self.derivs):
            a, b = self.support
            inside = (r >= a) & (r <= b) & (r > 1.0)
            out = np.where(inside, self.derivs[order - 1](np.where(inside, r, 0.5 * (a + b))), 0.0)
            return out if out.ndim else float(out)
        h = self.fd_step
        return (self.deriv(r + h, order - 1) - self.deriv(r - h, order - 1)) / (2 * h)

    @property
    def is_zero(self) -> bool:
        return self.zero

    def scaled(self, k: float) -> "RadialProfile":
        """k * f, with derivatives scaled alike."""
        f = self.func
        ds = [lambda r, d=d: k * d(r) for d in self.derivs]
        return RadialProfile(lambda r: k * f(r), self.support, ds, self.fd_step,
                             f"{k:g}*{self.name}", self.zero or k == 0)


def zero_profile() -> RadialProfile:
    return RadialProfile(lambda r: np.zeros_like(r), (2.0, 3.0),
                         derivs=[lambda r: np.zeros_like(r)] * 3, name="zero", zero=True)


def bump_profile(center: float = 3.0, half_width: float = 1.0,
                 amplitude: float = 1.0) -> RadialProfile:
    """amplitude * smooth_bump((r - a) / (b - a)) supported on [a, b]."""
    a = center - half_width
    b = center + half_width
    width = b - a
    if a <= 1.0:
        raise ValueError("bump support must stay inside r > 1")

    def make(k):
        return lambda r: amplitude * smooth_bump_derivs((r - a) / width, k) / width**k

    return RadialProfile(make(0), (a, b), derivs=[make(1), make(2), make(3)],
                         name=f"bump[{a:g},{b:g}]x{amplitude:g}")


def canonical_f1() -> RadialProfile:
    """f1*(r) = smooth_bump((r - 2) / 2), supported on [2, 4]."""
    return bump_profile(3.0, 1.0)


# ---------------------------------------------------------------------------
# check extension

@dataclass(frozen=True)
class CheckExtension:
    """rho -> rho f(rho) for rho > 1, -(2 - rho) f(2 - rho) for rho <= 1."""

    source: RadialProfile

    def __call__(self, rho):
        return self.deriv(rho, 0)

    def deriv(self, rho, order: int = 0):
        """Derivative of the extension (order 0..3), analytic from f's derivatives."""
        rho = np.asarray(rho, dtype=float)
        up = rho > 1.0
        x = np.where(up, rho, 2.0 - rho)
        f = self.source
        # d^k/dx^k [x f(x)] = x f^(k)(x) + k f^(k-1)(x)
        base = x * f.deriv(x, order)
        if order > 0:
            base = base + order * f.deriv(x, order - 1)
        # reflected branch: g(rho) = -G(2 - rho), so g^(k) = -(-1)^k G^(k)
        out = np.where(up, base, -((-1.0) ** order) * base)
        return out if out.ndim else float(out)

    @property
    def support_radius(self) -> float:
        return self.source.support[1]


def check_extend(f: RadialProfile) -> CheckExtension:
    return CheckExtension(f)


class CheckAntiderivative:
    """K(x) = int_1^x fcheck, made exactly even about x = 1.

    Because fcheck is odd about 1, int_a^b fcheck = K(b) - K(a) for all a, b.
    Building K only on [1, R] and reflecting means boundary and Huygens
    cancellations hold to rounding rather than to quadrature error.
    """

    def __init__(self, ext: CheckExtension, panels: int = 2048, order: int = 12):
        a, b = ext.source.support
        self.ext = ext
        self.a = a
        self.b = b
        self.table = HermiteAntiderivative(ext, lambda x: ext.deriv(x, 1), a, b, panels, order)

    @property
    def total(self) -> float:
        return self.table.total

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.table(np.where(x >= 1.0, x, 2.0 - x))


# ---------------------------------------------------------------------------
# Radon transforms

@dataclass(frozen=True)
class FreeSpaceData:
    """Pair (phi0, phi1) of rapidly decaying functions on R^3.

    ``phi0``/``phi1`` take an array of points with trailing axis 3.  When
    the data is radial, ``radial0``/``radial1`` give the profiles of |y|.
    ``effective_support`` bounds the region where values exceed 1e-14.
    """

    phi0: Callable[[Array], Array]
    phi1: Callable[[Array], Array]
    effective_support: float
    radial0: Callable[[Array], Array] | None = None
    radial1: Callable[[Array], Array] | None = None

    @classmethod
    def radial(cls, psi0: Callable | None, psi1: Callable | None,
               effective_support: float) -> "FreeSpaceData":
        zero = lambda rho: np.zeros_like(np.asarray(rho, dtype=float))
        p0 = psi0 or zero
        p1 = psi1 or zero
        return cls(lambda y: p0(np.linalg.norm(y, axis=-1)),
                   lambda y: p1(np.linalg.norm(y, axis=-1)),
                   effective_support, p0, p1)


def _plane_basis(theta: Array) -> tuple[Array, Array]:
    theta = np.asarray(theta, dtype=float)
    pick = np.array([1.0, 0.0, 0.0]) if abs(theta[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = pick - np.dot(pick, theta) * theta
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(theta, e1)
    return e1, e2


def _check_unit(theta) -> Array:
    theta = np.asarray(theta, dtype=float)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
        raise ValueError("theta must be a unit vector")
    return theta


def _plane_integral(psi, s, theta, L, n_rho, n_phi, panels):
    rmax = math.sqrt(max(L * L - s * s, 0.0))
    if rmax == 0.0:
        return 0.0
    e1, e2 = _plane_basis(theta)
    gx, gw = gauss_legendre(n_rho)
    edges = np.linspace(0.0, rmax, panels + 1)
    half = 0.5 * np.diff(edges)
    rho = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * gx
    wr = (half[:, None] * gw).ravel()
    rho = rho.ravel()
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    dirs = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    pts = s * theta + rho[:, None, None] * dirs[None, :, :]
    vals = psi(pts)
    ang = vals.sum(axis=1) * (2.0 * np.pi / n_phi)
    return float(np.sum(wr * rho * ang))


def radon_plane(psi: Callable[[Array], Array], s: float, theta,
                effective_support: float, tol: float = 1e-10,
                n_phi: int = 32, panels: int = 16, max_refine: int = 5) -> float:
    """Integral of ``psi`` over the plane {y . theta = s}.

    Polar coordinates on the plane around s*theta, truncated at the disc
    where |y| <= effective_support.  Gauss-Legendre in the radius, the
    periodic trapezoid rule in angle.  Both are doubled until successive
    values agree to ``tol``.
    """
    theta = _check_unit(theta)
    if abs(s) >= effective_support:
        return 0.0
    prev = _plane_integral(psi, s, theta, effective_support, 16, n_phi, panels)
    for _ in range(max_refine):
        n_phi *= 2
        panels *= 2
        cur = _plane_integral(psi, s, theta, effective_support, 16, n_phi, panels)
        if abs(cur - prev) <= tol * (1.0 + abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(f"radon_plane did not converge at s={s}")


def radon_radial(psi_star: Callable[[Array], Array], s: float,
                 effective_support: float = math.inf, tol: float = 1e-12) -> float:
    """Radon transform of a radial function: 2 pi int_{|s|}^inf rho psi*(rho) drho."""
    lo = abs(s)
    hi = effective_support
    if lo >= hi:
        return 0.0
    if not math.isfinite(hi):
        raise ValueError("radon_radial needs a finite effective support")
    return 2.0 * math.pi * adaptive_quad(lambda rho: rho * psi_star(rho), lo, hi, tol)


def _radon(psi, psi_star, s, theta, L):
    if psi_star is not None:
        return radon_radial(psi_star, s, L)
    return radon_plane(psi, s, theta, L)


def fd_derivative(g: Callable[[float], float], s: float, h: float) -> float:
    """Fourth-order central difference of a scalar function."""
    return (-g(s + 2 * h) + 8 * g(s + h) - 8 * g(s - h) + g(s - 2 * h)) / (12 * h)


def richardson_ratio(g: Callable[[float], float], s: float, h: float,
                     exact: float | None = None) -> float:
    """Error ratio of the 4th-order stencil for steps h and h/2 (about 16).

    Without an exact value the finest stencil at h/4 stands in for it.
    """
    d1 = fd_derivative(g, s, h)
    d2 = fd_derivative(g, s, h / 2)
    ref = exact if exact is not None else fd_derivative(g, s, h / 4)
    return abs(d1 - ref) / max(abs(d2 - ref), 1e-300)


def radiation_field_free(data: FreeSpaceData, s: float, theta, h_s: float = 1e-2) -> float:
    """Friedlander field (R[phi1] - d/ds R[phi0]) / (4 pi) at (s, theta)."""
    theta = _check_unit(theta)
    L = data.effective_support
    r1 = _radon(data.phi1, data.radial1, s, theta, L)
    if data.radial0 is None and data.phi0 is None:
        d0 = 0.0
    else:
        d0 = fd_derivative(lambda x: _radon(data.phi0, data.radial0, x, theta, L), s, h_s)
    return (r1 - d0) / (4.0 * math.pi)


# ---------------------------------------------------------------------------
# exterior radial field

@dataclass(frozen=True)
class RadiationField:
    """Radial radiation field F+(s) with its support radius.

    ``derivative(s, k)`` returns the k-th s-derivative (k <= 2), analytic.
    """

    f0: RadialProfile
    f1: RadialProfile
    support_radius: float
    decay_order: int = 6
    _ext0: CheckExtension = field(init=False, repr=False, compare=False)
    _ext1: CheckExtension = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_ext0", CheckExtension(self.f0))
        object.__setattr__(self, "_ext1", CheckExtension(self.f1))

    def __call__(self, s, theta=None):
        return self.derivative(s, 0)

    def derivative(self, s, order: int = 0):
        s = np.asarray(s, dtype=float)
        out = 0.5 * (self._ext0.deriv(s, order + 1) - self._ext1.deriv(s, order))
        out = np.where(s >= self.support_radius, 0.0, out)
        return out if out.ndim else float(out)

    @property
    def lower_support(self) -> float:
        """F+ vanishes for s <= 2 - R as well (reflected copy)."""
        return 2.0 - self.support_radius

    def primitive(self) -> Callable:
        """s -> -int_s^inf F+ = (fcheck0(s) + int_s^inf fcheck1) / 2."""
        K = CheckAntiderivative(self._ext1)
        kinf = K(self.support_radius)

        def F0(s):
            s = np.asarray(s, dtype=float)
            out = np.asarray(0.5 * (self._ext0(s) + (kinf - K(s))))
            return out if out.ndim else float(out)

        return F0


def radiation_field_exterior_radial(f0: RadialProfile, f1: RadialProfile) -> RadiationField:
    R = max(f0.support[1] if not f0.is_zero else 1.0,
            f1.support[1] if not f1.is_zero else 1.0)
    if R <= 1.0:
        R = 2.0
    return RadiationField(f0, f1, R)


def decay_sup(F: Callable, s_grid: Array, N: int) -> float:
    """sup over the grid of <s>^N |F(s)|."""
    s_grid = np.asarray(s_grid, dtype=float)
    return float(np.max(jb(s_grid) ** N * np.abs(F(s_grid))))
