"""Null-form coefficient G(theta), the critical slow time tau*, and the
Riccati profile along outgoing rays.

The nonlinearity is written as F(du) = sum_{a,b} g^{ab} d_a u d_b u with
index 0 for time.  On the unit sphere

    G(theta) = sum g^{ab} theta_a theta_b,   theta_0 = -1,

and the profile obeys  2 d_tau P = -G P^2,  P(s, theta, 0) = F+(s, theta),
whose solution is P = F / (1 + G F tau / 2).  It first becomes singular at

    tau* = 1 / sup_{s, theta} ( -G(theta) F(s, theta) / 2 ).

The slow-time integral p = -int_s^inf P d sigma carries the far-field
amplitude of the approximate solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .radiation import CheckExtension, RadialProfile, RadiationField
from .weights import HermiteAntiderivative, adaptive_quad, gauss_legendre, golden_max

NEGLIGIBLE = 1e-14


class ProfileDomainError(ValueError):
    """Raised when tau reaches the blow-up time tau* of the profile."""


@dataclass(frozen=True)
class NonlinCoeffs:
    """Symmetric 4x4 matrix g^{ab}; asymmetric input is symmetrized."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (4, 4):
            raise ValueError("g must be a 4x4 matrix")
        if not np.all(np.isfinite(g)):
            raise ValueError("g must be finite")
        g = 0.5 * (g + g.T)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @classmethod
    def time_derivative_squared(cls, c: float) -> "NonlinCoeffs":
        """F = c (d_t u)^2."""
        g = np.zeros((4, 4))
        g[0, 0] = c
        return cls(g)

    @property
    def is_null(self) -> bool:
        """G vanishes on the whole sphere (the null condition)."""
        sp = self.g[1:, 1:]
        # G(theta) = g00 - 2 g0i theta_i + g_ij theta_i theta_j; vanishing on S^2
        # forces g0i = 0 and g_ij = -g00 delta_ij.
        return (np.allclose(self.g[0, 1:], 0.0, atol=NEGLIGIBLE)
                and np.allclose(sp, -self.g[0, 0] * np.eye(3), atol=NEGLIGIBLE))


def _unit(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != 3:
        raise ValueError("theta must have 3 components")
    if np.any(np.abs(np.linalg.norm(theta, axis=-1) - 1.0) > 1e-12):
        raise ValueError("theta must be a unit vector")
    return theta


def g_of_theta(coeffs: NonlinCoeffs, theta):
    """G(theta); theta has trailing dimension 3 and must be unit length."""
    theta = _unit(theta)
    om = np.concatenate([-np.ones(theta.shape[:-1] + (1,)), theta], axis=-1)
    out = np.einsum("...a,ab,...b->...", om, coeffs.g, om)
    return out if np.ndim(out) else float(out)


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def _sphere_point(polar: float, azim: float) -> np.ndarray:
    return np.array([math.sin(polar) * math.cos(azim),
                     math.sin(polar) * math.sin(azim), math.cos(polar)])


def _scan_s(field_values, lo: float, hi: float, per_unit: int = 401):
    n = max(int(math.ceil((hi - lo) * per_unit)), 2) + 1
    s = np.linspace(lo, hi, n)
    return s, field_values(s)


def tau_star_general(coeffs: NonlinCoeffs, F: RadiationField,
                     n_theta: int = 128, tol: float = 1e-10) -> float:
    """1 / sup(-G F / 2) by a coarse (s, theta) scan plus golden refinement.

    The radiation field here is radial, so theta enters through G only.
    Returns math.inf when the supremum is not positive.
    """
    lo, hi = F.lower_support, F.support_radius
    s, Fs = _scan_s(F, lo, hi)
    thetas = fibonacci_sphere(n_theta)
    Gs = g_of_theta(coeffs, thetas)
    vals = -0.5 * np.outer(Gs, Fs)
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    if vals[i, j] <= NEGLIGIBLE:
        return math.inf
    ds = s[1] - s[0]
    th = thetas[i]
    polar, azim = math.acos(np.clip(th[2], -1, 1)), math.atan2(th[1], th[0])
    s_best = s[j]
    best = vals[i, j]
    span = math.pi / math.sqrt(n_theta)
    # alternate golden searches over s and the two sphere angles
    for _ in range(4):
        G_here = g_of_theta(coeffs, _sphere_point(polar, azim))
        s_best, _ = golden_max(lambda x: -0.5 * G_here * float(F(x)),
                               max(lo, s_best - 2 * ds), min(hi, s_best + 2 * ds), tol)
        F_here = float(F(s_best))
        polar, _ = golden_max(lambda a: -0.5 * g_of_theta(coeffs, _sphere_point(a, azim)) * F_here,
                              max(0.0, polar - span), min(math.pi, polar + span), tol)
        azim, val = golden_max(lambda b: -0.5 * g_of_theta(coeffs, _sphere_point(polar, b)) * F_here,
                               azim - span, azim + span, tol)
        if abs(val - best) <= tol * abs(best):
            best = max(best, val)
            break
        best = max(best, val)
    return 1.0 / best


def tau_star_radial(c: float, f0: RadialProfile, f1: RadialProfile, tol: float = 1e-10) -> float:
    """tau* = 1 / sup_s c (fcheck1(s) - fcheck0'(s)) / 4 for F = c (d_t u)^2."""
    e0, e1 = CheckExtension(f0), CheckExtension(f1)
    R = max(f0.support[1], f1.support[1])
    lo = 2.0 - R

    def q(s):
        return c * (e1(s) - e0.deriv(s, 1)) / 4.0

    s, vals = _scan_s(q, lo, R)
    j = int(np.argmax(vals))
    if vals[j] <= NEGLIGIBLE:
        return math.inf
    ds = s[1] - s[0]
    _, best = golden_max(lambda x: float(q(x)), max(lo, s[j] - 2 * ds), min(R, s[j] + 2 * ds), tol)
    return 1.0 / max(best, float(vals[j]))


# ---------------------------------------------------------------------------
# the profile

@dataclass(frozen=True)
class ProfileContext:
    """Radial profile data: a radiation field and a sphere-independent G."""

    coeffs: NonlinCoeffs
    radiation: RadiationField

    def __post_init__(self):
        Gs = g_of_theta(self.coeffs, fibonacci_sphere(64))
        if np.ptp(Gs) > 1e-12 * (1.0 + np.max(np.abs(Gs))):
            raise ValueError("radial profiles need G independent of theta")

    @classmethod
    def from_data(cls, c: float, f0: RadialProfile, f1: RadialProfile) -> "ProfileContext":
        from .radiation import radiation_field_exterior_radial
        return cls(NonlinCoeffs.time_derivative_squared(c),
                   radiation_field_exterior_radial(f0, f1))

    @cached_property
    def G(self) -> float:
        return float(g_of_theta(self.coeffs, np.array([0.0, 0.0, 1.0])))

    @cached_property
    def tau_star(self) -> float:
        return tau_star_general(self.coeffs, self.radiation)

    @property
    def support(self) -> tuple[float, float]:
        return self.radiation.lower_support, self.radiation.support_radius

    def _check(self, tau):
        t = np.asarray(tau, dtype=float)
        if np.any(t < 0):
            raise ProfileDomainError("tau must be non-negative")
        if np.any(t >= self.tau_star):
            raise ProfileDomainError(f"tau must stay below tau* = {self.tau_star:.6g}")

    def P(self, s, tau):
        self._check(tau)
        Fs = self.radiation(s)
        return Fs / (1.0 + 0.5 * self.G * Fs * np.asarray(tau, dtype=float))

    def P_tau(self, s, tau):
        return -0.5 * self.G * self.P(s, tau) ** 2

    def P_tautau(self, s, tau):
        return 0.5 * self.G**2 * self.P(s, tau) ** 3

    def P_s(self, s, tau):
        """d_s P = F' / (1 + G F tau / 2)^2."""
        self._check(tau)
        Fs = self.radiation(s)
        den = 1.0 + 0.5 * self.G * Fs * np.asarray(tau, dtype=float)
        return self.radiation.derivative(s, 1) / den**2

    def p(self, s: float, tau: float, tol: float = 1e-12) -> float:
        """-int_s^inf P(sigma, tau) d sigma by adaptive quadrature."""
        self._check(tau)
        lo, hi = self.support
        if s >= hi:
            return 0.0
        return -adaptive_quad(lambda x: self.P(x, tau), max(s, lo), hi, tol=tol)

    @cached_property
    def _grids(self) -> dict:
        return {}

    def quadrature_grid(self, panels: int, order: int = 12):
        """Edges, panel half-widths, GL weights, and F on nodes and edges."""
        key = (panels, order)
        if key not in self._grids:
            self._grids[key] = self._build_grid(panels, order)
        return self._grids[key]

    def _build_grid(self, panels: int, order: int):
        lo, hi = self.support
        edges = np.linspace(lo, hi, panels + 1)
        x, w = gauss_legendre(order)
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = 0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * x
        F = self.radiation
        return edges, half, w, F(nodes), F(edges), F.derivative(edges, 1)

    def slice(self, tau: float, panels: int = 2048) -> "ProfileSlice":
        self._check(tau)
        return ProfileSlice(self, float(tau), panels)


@dataclass
class ProfileSlice:
    """p, p_tau, p_tautau at one slow time, vectorized in s.

    d_tau^k p = -int_s^inf d_tau^k P, with d_tau P = -G P^2 / 2 and
    d_tau^2 P = G^2 P^3 / 2.  Each is tabulated once and read back by
    quintic Hermite interpolation, using the exact s-derivatives.
    """

    ctx: ProfileContext
    tau: float
    panels: int = 2048
    _ints: tuple = field(init=False, repr=False)

    def __post_init__(self):
        edges, half, w, F_nodes, F_edges, dF_edges = self.ctx.quadrature_grid(self.panels)
        a = 0.5 * self.ctx.G * self.tau
        G = self.ctx.G
        P_n = F_nodes / (1.0 + a * F_nodes)
        P_e = F_edges / (1.0 + a * F_edges)
        Ps_e = dF_edges / (1.0 + a * F_edges) ** 2

        def table(vals_nodes, vals_edges, d_edges):
            pan = half * np.sum(w * vals_nodes, axis=1)
            return HermiteAntiderivative.from_samples(edges, pan, vals_edges, d_edges)

        self._ints = (
            table(P_n, P_e, Ps_e),
            table(-0.5 * G * P_n**2, -0.5 * G * P_e**2, -G * P_e * Ps_e),
            table(0.5 * G**2 * P_n**3, 0.5 * G**2 * P_e**3, 1.5 * G**2 * P_e**2 * Ps_e),
        )

    def _tail(self, k: int, s):
        I = self._ints[k]
        return I(s) - I.total

    def p(self, s):
        return self._tail(0, s)

    def p_tau(self, s):
        return self._tail(1, s)

    def p_tautau(self, s):
        return self._tail(2, s)

    def P(self, s):
        return self.ctx.P(s, self.tau)

    def P_s(self, s):
        return self.ctx.P_s(s, self.tau)

    def P_tau(self, s):
        return self.ctx.P_tau(s, self.tau)


def profile_P(ctx: ProfileContext, s, tau):
    return ctx.P(s, tau)


def profile_p(ctx: ProfileContext, s: float, tau: float) -> float:
    return ctx.p(s, tau)
