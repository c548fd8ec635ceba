"""The glued approximate solution u1 and its residual E(u1).

    u1 = chi_eps(t) eps u0 + (1 - chi_eps(t)) eta(t, r) w,
    w  = eps r^{-1} p(r - t, eps log t),

with chi_eps(t) = chi(eps t) and eta = xi(r / t).  Points are handled as
(t, q) with q = r - t, so that horizons like t = exp(500) keep full
precision in the wave zone.

E(u1) = box u1 - c (d_t u1)^2 is assembled from exact identities rather
than finite differences: box u0 = 0, box(g / r) = (g_tt - g_rr) / r, and

    (d_t^2 - d_r^2) p~ = (eps/t) G P^2 + (eps/t^2)(eps p_tautau - p_tau).

Where eta = 1 and chi = 0 the leading parts of box w and c (d_t w)^2 cancel.
They are combined algebraically before evaluation, because in floating
point each of them is many orders of magnitude larger than their difference.
A fourth-order finite-difference route is kept for cross-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profile import ProfileContext, ProfileDomainError, ProfileSlice
from .radiation import RadialProfile
from .solver import LinearSolution, SolutionField
from .weights import SmoothCutoffs, jb


@dataclass(frozen=True)
class ApproxConfig:
    eps: float
    c: float
    f0: RadialProfile
    f1: RadialProfile
    tau0: float | None = None          # None: 0.7 tau*
    cutoffs: SmoothCutoffs = SmoothCutoffs()
    fd_step: float = 1e-2
    tau_slices: int = 400

    def __post_init__(self):
        if not 0.0 < self.eps <= 0.5:
            raise ValueError("eps must lie in (0, 1/2]")


class ProfileTable:
    """p, p_tau, p_tautau at arbitrary (s, tau) from slices on a tau grid.

    p and p_tau use cubic Hermite interpolation in tau (their tau-derivatives
    are tabulated too); p_tautau is interpolated linearly.
    """

    def __init__(self, ctx: ProfileContext, tau_max: float, n: int = 400):
        if tau_max >= ctx.tau_star:
            raise ProfileDomainError("table must stop below tau*")
        self.ctx = ctx
        self.taus = np.linspace(0.0, tau_max, n + 1)
        self.dtau = self.taus[1] - self.taus[0] if n else 1.0
        self.slices: dict[int, ProfileSlice] = {}

    def _slice(self, k: int) -> ProfileSlice:
        if k not in self.slices:
            self.slices[k] = self.ctx.slice(float(self.taus[k]))
        return self.slices[k]

    def eval(self, s, tau):
        s, tau = np.broadcast_arrays(np.asarray(s, float), np.asarray(tau, float))
        if np.any(tau > self.taus[-1] + 1e-12) or np.any(tau < 0):
            raise ProfileDomainError("tau outside the tabulated range")
        x = np.clip(tau / self.dtau, 0.0, len(self.taus) - 1 - 1e-12)
        k = np.minimum(x.astype(np.int64), len(self.taus) - 2)
        u = x - k
        p = np.empty_like(s)
        pt = np.empty_like(s)
        ptt = np.empty_like(s)
        d = self.dtau
        for kk in np.unique(k):
            m = k == kk
            a, b = self._slice(int(kk)), self._slice(int(kk) + 1)
            sm, um = s[m], u[m]
            vals_a = (a.p(sm), a.p_tau(sm), a.p_tautau(sm))
            vals_b = (b.p(sm), b.p_tau(sm), b.p_tautau(sm))
            h00 = 2 * um**3 - 3 * um**2 + 1
            h10 = um**3 - 2 * um**2 + um
            h01 = -2 * um**3 + 3 * um**2
            h11 = um**3 - um**2
            p[m] = h00 * vals_a[0] + h10 * d * vals_a[1] + h01 * vals_b[0] + h11 * d * vals_b[1]
            # d/dtau of p_tau is p_tautau
            pt[m] = h00 * vals_a[1] + h10 * d * vals_a[2] + h01 * vals_b[1] + h11 * d * vals_b[2]
            ptt[m] = (1 - um) * vals_a[2] + um * vals_b[2]
        return p, pt, ptt


@dataclass
class ApproxField:
    """Evaluators of u1, its first derivatives and E(u1) for one configuration."""

    cfg: ApproxConfig
    ctx: ProfileContext = field(init=False)
    linear: LinearSolution = field(init=False)
    tau0: float = field(init=False)
    table: ProfileTable | None = field(init=False, default=None)

    def __post_init__(self):
        cfg = self.cfg
        self.ctx = ProfileContext.from_data(cfg.c, cfg.f0, cfg.f1)
        if abs(self.ctx.G - cfg.c) > 1e-14 * (1 + abs(cfg.c)):
            raise ValueError("the approximator is written for F = c (d_t u)^2")
        self.linear = LinearSolution(cfg.f0, cfg.f1)
        ts = self.ctx.tau_star
        self.tau0 = cfg.tau0 if cfg.tau0 is not None else (0.7 * ts if math.isfinite(ts) else 50.0)
        if math.isfinite(ts) and not 0 < self.tau0 < ts:
            raise ValueError("tau0 must lie in (0, tau*)")

    @property
    def t_max(self) -> float:
        return math.exp(self.tau0 / self.cfg.eps)

    @property
    def log_t_max(self) -> float:
        return self.tau0 / self.cfg.eps

    # -- cutoffs ---------------------------------------------------------
    def chi_eps(self, t, order: int = 0):
        eps = self.cfg.eps
        return eps**order * self.cfg.cutoffs.chi(eps * np.asarray(t, float), order)

    def eta(self, t, r):
        t = np.asarray(t, float)
        r = np.asarray(r, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(t > 0, r / np.where(t > 0, t, 1.0), 0.0)
        return self.cfg.cutoffs.xi(x)

    # -- profile access --------------------------------------------------
    def _profile(self, t, q):
        """p~, p_tau, p_tautau, P, P_s, P_tau at tau = eps log t (t >= 1)."""
        tau = self.cfg.eps * np.log(t)
        if self.table is None:
            self.table = ProfileTable(self.ctx, self.tau0 * (1 + 1e-9) if math.isfinite(self.ctx.tau_star) else self.tau0,
                                      self.cfg.tau_slices)
        p, pt, ptt = self.table.eval(q, tau)
        P = self.ctx.P(q, tau)
        Ps = self.ctx.P_s(q, tau)
        return p, pt, ptt, P, Ps, -0.5 * self.ctx.G * P**2

    # -- the main evaluator ----------------------------------------------
    def evaluate(self, t, q, want_E: bool = True):
        """u1, u1_t, u1_r (and E) at points (t, r = t + q).

        Also returned, under keys with a ``_s`` suffix, are the same
        quantities multiplied by sigma = max(t, 1) (sigma^3 for E).  These
        stay O(1) at horizons where the plain values underflow; ``sigma``
        is returned as well.
        """
        t, q = np.broadcast_arrays(np.asarray(t, float), np.asarray(q, float))
        shape = t.shape
        t = t.astype(float).ravel()
        q = q.astype(float).ravel()
        if np.any(np.log(np.maximum(t, 1e-300)) > self.log_t_max * (1 + 1e-12)):
            raise ValueError("t beyond exp(tau0/eps)")
        eps, c = self.cfg.eps, self.cfg.c
        cut = self.cfg.cutoffs
        r = t + q
        # near the wall at huge t, q = r - t carries only ulp(t) precision
        if np.any(r < 1.0 - 1e-12 * np.maximum(t, 1.0)):
            raise ValueError("points must satisfy r >= 1")
        sig = np.maximum(t, 1.0)
        chi = cut.chi(eps * t)
        chi1 = eps * cut.chi(eps * t, 1)
        chi2 = eps**2 * cut.chi(eps * t, 2)
        one_m_chi = 1.0 - chi

        out = {k: np.zeros_like(t) for k in ("u1_s", "u1_t_s", "u1_r_s", "E_s")}

        # near block chi eps u0: lives where t <= 2/eps, so no scaling issues
        near = (chi > 0) | (chi1 != 0)
        if np.any(near):
            tn, qn, sn = t[near], q[near], sig[near]
            L = self.linear
            u0, u0t, u0r = L.u(tn, qn), L.u_t(tn, qn), L.u_r(tn, qn)
            ch, c1, c2 = chi[near], chi1[near], chi2[near]
            out["u1_s"][near] = sn * ch * eps * u0
            out["u1_t_s"][near] = sn * eps * (c1 * u0 + ch * u0t)
            out["u1_r_s"][near] = sn * ch * eps * u0r
            out["E_s"][near] = sn**3 * eps * (c2 * u0 + 2.0 * c1 * u0t)

        # far block Phi w, Phi = (1 - chi) eta; here t > 1/eps, so sigma = t
        x = np.where(t > 0, r / np.where(t > 0, t, 1.0), 0.0)
        xi0 = cut.xi(x)
        far = (one_m_chi > 0) & (xi0 > 0) & (q < self.ctx.support[1])
        XS = out["u1_t_s"].copy()          # sigma * (d_t u1 minus Phi w_t)
        if np.any(far):
            tf, qf = t[far], q[far]
            rho = x[far]                   # r / sigma
            p, pt, ptt, P, Ps, Ptau = self._profile(tf, qf)
            W = eps * p
            Wt_s = eps * (-P * tf + eps * pt)    # sigma * d_t W
            Wr = eps * P
            et = xi0[far]
            xi1 = cut.xi(rho, 1)
            xi2 = cut.xi(rho, 2)
            eta_t_s = -xi1 * rho
            eta_r_s = xi1
            eta_tt_s2 = xi2 * rho**2 + 2.0 * xi1 * rho
            eta_rr_s2 = xi2
            omc = one_m_chi[far]
            c1t = chi1[far] * tf
            c2t2 = chi2[far] * tf * tf
            Phi = omc * et
            one_m_Phi = chi[far] + omc * (1.0 - et)
            Phi_t_s = -c1t * et + omc * eta_t_s
            Phi_r_s = omc * eta_r_s
            Phi_tt_s2 = -c2t2 * et - 2.0 * c1t * eta_t_s + omc * eta_tt_s2
            Phi_rr_s2 = omc * eta_rr_s2

            w_s = W / rho
            w_t_s = (Wt_s / tf) / rho
            w_r_s = (Wr - w_s / tf) / rho
            out["u1_s"][far] += Phi * w_s
            out["u1_t_s"][far] += Phi_t_s * w_s / tf + Phi * w_t_s
            out["u1_r_s"][far] += Phi_r_s * w_s / tf + Phi * w_r_s

            X_s = XS[far] + Phi_t_s * w_s / tf
            g = eps / tf
            # Phi box w - c Phi^2 (d_t w)^2 with G = c, cancellation removed
            core = (c * eps**2 * Phi / rho**2) * (
                P**2 * one_m_Phi * tf + P**2 * qf + Phi * eps * (2.0 * P * pt - g * pt**2))
            core += Phi * eps**2 * (eps * ptt - pt) / rho
            commut = (2.0 * (Phi_t_s * Wt_s - Phi_r_s * Wr * tf) + W * (Phi_tt_s2 - Phi_rr_s2)) / rho
            cross = c * (2.0 * Phi * w_t_s * X_s + X_s**2) * tf
            out["E_s"][far] += core + commut - cross

        only_near = near & ~far
        out["E_s"][only_near] -= c * out["u1_t_s"][only_near] ** 2 * sig[only_near]
        out["sigma"] = sig
        for k in ("u1", "u1_t", "u1_r"):
            out[k] = out[k + "_s"] / sig
        out["E"] = out["E_s"] / sig / sig / sig
        if not want_E:
            out.pop("E")
            out.pop("E_s")
        return {k: v.reshape(shape) if shape else float(v[0]) for k, v in out.items()}

    # -- convenience -----------------------------------------------------
    def u1(self, t, r):
        return self.evaluate(t, np.asarray(r) - np.asarray(t), want_E=False)["u1"]

    def w(self, t, r):
        """eps r^{-1} p(r - t, eps log t) (no cutoffs)."""
        t = np.asarray(t, float)
        r = np.asarray(r, float)
        if np.any(t < 1):
            raise ValueError("w is defined for t >= 1")
        tau = self.cfg.eps * np.log(t)
        if np.any(tau >= self.ctx.tau_star):
            raise ProfileDomainError("eps log t must stay below tau*")
        q = r - t
        p = np.vectorize(lambda s, ta: self.ctx.p(float(s), float(ta)))(q, tau)
        return self.cfg.eps * p / r

    def E(self, t, r):
        t = np.asarray(t, float)
        return self.evaluate(t, np.asarray(r) - t)["E"]

    def E_fd(self, t: float, r: float, step: float | None = None) -> float:
        """Fourth-order central differences of u1, minus c (d_t u1)^2."""
        k = self.cfg.fd_step if step is None else step
        off = np.array([-2, -1, 0, 1, 2], float) * k
        w2 = np.array([-1, 16, -30, 16, -1]) / (12 * k * k)
        w1 = np.array([1, -8, 0, 8, -1]) / (12 * k)
        if r - 2 * k < 1.0 or t - 2 * k < 0:
            raise ValueError("finite-difference stencil leaves the domain")
        ut = self.u1(t + off, np.full(5, r))
        ur = self.u1(np.full(5, t), r + off)
        u_tt = float(w2 @ ut)
        u_rr = float(w2 @ ur)
        u_r = float(w1 @ ur)
        u_t = float(w1 @ ut)
        return u_tt - u_rr - 2.0 / r * u_r - self.cfg.c * u_t**2

    def E_fd_checked(self, t: float, r: float) -> tuple[float, float]:
        """(E by FD, Richardson-style change when the step is halved)."""
        a = self.E_fd(t, r)
        b = self.E_fd(t, r, self.cfg.fd_step / 2)
        return b, abs(b - a)


def chi_eps(approx: ApproxField, t):
    return approx.chi_eps(t)


def eta(approx: ApproxField, t, r):
    return approx.eta(t, r)


def w_field(approx: ApproxField, t, r):
    return approx.w(t, r)


def u1_eval(approx: ApproxField, t, r):
    return approx.u1(t, r)


def du1_eval(approx: ApproxField, t, r):
    t = np.asarray(t, float)
    d = approx.evaluate(t, np.asarray(r) - t, want_E=False)
    return d["u1_t"], d["u1_r"]


def error_E(approx: ApproxField, t, r):
    return approx.E(t, r)


# ---------------------------------------------------------------------------
# diagnostics

def diagnostic_grid(approx: ApproxField, n_t: int = 120, n_q: int = 160, n_in: int = 60):
    """Rows (t, q-array) covering [0, exp(tau0/eps)] x [1, t + R].

    t is spaced uniformly in log(1 + t), with n_t extra times spread evenly
    over [0, 3/eps] where the time cutoff switches off.  Each row is dense in
    the wave zone q in [2 - 2R, R]; towards the wall it mixes log-spaced r
    with n_in points across r/t in [0.45, 0.8], where the space cutoff turns on.
    """
    R = approx.ctx.support[1]
    eps = approx.cfg.eps
    ts = np.expm1(np.linspace(0.0, approx.log_t_max, n_t))
    early = np.linspace(0.0, min(3.0 / eps, float(ts[-1])), n_t)
    ts = np.unique(np.concatenate([ts, early]))
    rows = []
    for t in ts:
        wave = np.linspace(max(2.0 - 2.0 * R, 1.0 - t), R, n_q)
        lo = 1.0 - t
        if wave[0] > lo + 1e-12:
            r_top = t + wave[0]
            r_in = np.geomspace(1.0, r_top, n_in, endpoint=False)
            band = np.linspace(0.45 * t, 0.8 * t, n_in)
            band = band[(band >= 1.0) & (band < r_top)]
            r_in = np.unique(np.concatenate([r_in, band]))
            q = np.concatenate([r_in - t, wave])
        else:
            q = wave
        rows.append((float(t), q))
    return rows


@dataclass
class DecayReport:
    eps: float
    lam: float
    mu: float
    S1: float
    S2: float
    S3: float
    S4: float


def l2_radial(values, r) -> float:
    """sqrt(4 pi int |f|^2 r^2 dr) by the trapezoid rule."""
    return math.sqrt(4.0 * math.pi * float(np.trapezoid(values**2 * r**2, r)))


def decay_diagnostics(approx: ApproxField, lam: float, mu: float, rows=None) -> DecayReport:
    """The four normalized sups of u1, d u1 and E(u1).

    Weights are formed as ratios to sigma = max(t, 1) so that rows at
    t ~ exp(500) neither overflow nor underflow.
    """
    eps = approx.cfg.eps
    rows = diagnostic_grid(approx) if rows is None else rows
    a_pow, b_pow = 2.0 - lam + mu, 1.0 - mu
    S = np.zeros(4)
    for t, q in rows:
        d = approx.evaluate(np.full_like(q, t), q)
        sig = max(t, 1.0)
        tp_s = np.hypot(1.0 / sig, (2.0 * t + q) / sig)   # <t+r> / sigma
        tm_s = np.hypot(1.0 / sig, q / sig)               # <t-r> / sigma
        tm = np.hypot(1.0, q)
        du_s = np.abs(d["u1_t_s"]) + np.abs(d["u1_r_s"])
        S[0] = max(S[0], float(np.max(tp_s * np.abs(d["u1_s"]))) / eps)
        S[1] = max(S[1], float(np.max(tp_s * tm * du_s)) / eps)
        s3 = np.abs(d["E_s"]) * tp_s**a_pow * tm_s**b_pow * sig ** (a_pow + b_pow - 3.0)
        S[2] = max(S[2], float(np.max(s3)) / eps ** (1 + lam))
        # (1+t)^{3/2-lam} |E|_{L2} = ((1+t)/sig)^{3/2-lam} sig^{-lam} sqrt(4 pi int (E sig^3)^2 (r/sig)^2 d(q/sig))
        order = np.argsort(q)
        Es, rr, qq = d["E_s"][order], (t + q[order]) / sig, q[order] / sig
        integral = float(np.trapezoid(Es**2 * rr**2, qq))
        s4 = ((1.0 + t) / sig) ** (1.5 - lam) * sig ** (-lam) * math.sqrt(4.0 * math.pi * integral)
        S[3] = max(S[3], s4 / eps ** (1 + lam))
    return DecayReport(eps, lam, mu, *map(float, S))


def weighted_error(approx: ApproxField, sol: SolutionField) -> float:
    """sup <r><t-r>(|d_t(u_num - u1)| + |d_r(u_num - u1)|) over stored samples."""
    best = 0.0
    lt = approx.log_t_max
    for t, q, r, u, ut, ur in sol.samples():
        keep = np.log(np.maximum(t, 1e-300)) <= lt
        keep &= np.isfinite(u)
        if not np.any(keep):
            continue
        t, q, r, ut, ur = t[keep], q[keep], r[keep], ut[keep], ur[keep]
        d = approx.evaluate(t, q, want_E=False)
        err = np.abs(ut - d["u1_t"]) + np.abs(ur - d["u1_r"])
        best = max(best, float(np.max(jb(r) * jb(q) * err)))
    return best


def matching_sup(approx: ApproxField, n_t: int = 60, n_r: int = 200) -> float:
    """sup of <t+r>^2 |w - eps u0| / (eps log(2/eps)) on t/2 <= r <= t+R, 2 <= t <= 2/eps."""
    eps = approx.cfg.eps
    R = approx.ctx.support[1]
    best = 0.0
    for t in np.linspace(2.0, 2.0 / eps, n_t):
        q = np.linspace(-t / 2, R, n_r)
        tau = eps * math.log(t)
        sl = approx.ctx.slice(tau)
        r = t + q
        w = eps * sl.p(q) / r
        u0 = approx.linear.u(np.full_like(q, t), q)
        best = max(best, float(np.max(jb(t + r) ** 2 * np.abs(w - eps * u0))))
    return best / (eps * math.log(2.0 / eps))
