"""Radial exterior-ball solver for  u_tt - Lap u = c (u_t)^2,  u = 0 on |x| = 1.

Everything is written for v = r u, which satisfies

    v_tt - v_rr = c v_t^2 / r,   v(t, 1) = 0.

Near field.  A characteristic-aligned grid (dt = dr = h).  Each diamond
S = (t-h, r), W/E = (t, r -/+ h), N = (t+h, r) obeys

    v_N = v_E + v_W - v_S + (integral of the source over the diamond),

which is exact for the homogeneous part.  The source is sampled at the
diamond centre with v_t ~ (v_N - v_S) / (2h) and the implicit relation is
closed by Picard iteration.

Far field.  Work after t = W + 1 continues in null coordinates
alpha = t - r, beta = t + r, where  d_alpha d_beta v = c v_t^2 / (4 r).
The alpha spacing stays uniform (2h, one sublattice of the near grid) and
the beta spacing grows geometrically.  Every point depends only on points
with smaller alpha and beta, so keeping alpha <= W is exact: no boundary
condition is needed at the inner edge, and the Dirichlet wall never re-enters.
The cost therefore grows with log T instead of T, which is what makes
lifespans of order exp(tau*/eps) reachable.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .radiation import CheckAntiderivative, CheckExtension, RadialProfile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadialIVP:
    c: float
    eps: float
    f0: RadialProfile
    f1: RadialProfile

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def support_radius(self) -> float:
        ends = [p.support[1] for p in (self.f0, self.f1) if not p.is_zero]
        return max(ends) if ends else 2.0

    @property
    def data_scale(self) -> float:
        """max |fcheck1| + max |fcheck0'| sampled over the support."""
        r = np.linspace(1.0, self.support_radius, 4001)
        e0, e1 = CheckExtension(self.f0), CheckExtension(self.f1)
        return float(np.max(np.abs(e1(r))) + np.max(np.abs(e0.deriv(r, 1))))


# ---------------------------------------------------------------------------
# exact linear solution

class LinearSolution:
    """Exact radial solution of the linear Dirichlet problem with data (f0, f1).

    r u0(t, r) = (fcheck0(r-t) + fcheck0(r+t)) / 2 + (1/2) int_{r-t}^{r+t} fcheck1.

    Evaluation is in (t, q) with q = r - t so that very large t loses no
    precision in r - t.  The data are NOT multiplied by eps.
    """

    def __init__(self, f0: RadialProfile, f1: RadialProfile):
        self.f0 = f0
        self.f1 = f1
        self.e0 = CheckExtension(f0)
        self.e1 = CheckExtension(f1)
        self.K1 = CheckAntiderivative(self.e1)

    def rv(self, t, q):
        """r u0 at (t, r = t + q)."""
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        p = 2.0 * t + q
        return 0.5 * (self.e0(q) + self.e0(p)) + 0.5 * (self.K1(p) - self.K1(q))

    def rv_t(self, t, q):
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        p = 2.0 * t + q
        return 0.5 * (self.e0.deriv(p, 1) - self.e0.deriv(q, 1)) + 0.5 * (self.e1(p) + self.e1(q))

    def rv_r(self, t, q):
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        p = 2.0 * t + q
        return 0.5 * (self.e0.deriv(p, 1) + self.e0.deriv(q, 1)) + 0.5 * (self.e1(p) - self.e1(q))

    def rv_tt(self, t, q):
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        p = 2.0 * t + q
        return 0.5 * (self.e0.deriv(p, 2) + self.e0.deriv(q, 2)) + 0.5 * (self.e1.deriv(p, 1) - self.e1.deriv(q, 1))

    def u(self, t, q):
        return self.rv(t, q) / (np.asarray(t) + np.asarray(q))

    def u_t(self, t, q):
        return self.rv_t(t, q) / (np.asarray(t) + np.asarray(q))

    def u_r(self, t, q):
        r = np.asarray(t) + np.asarray(q)
        return (self.rv_r(t, q) - self.rv(t, q) / r) / r

    def u_tt(self, t, q):
        return self.rv_tt(t, q) / (np.asarray(t) + np.asarray(q))


def linear_exact(ivp: RadialIVP, t, r):
    """u0*(t, r) for the unscaled data of ``ivp`` (boundary r = 1 included)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 1.0) or np.any(t < 0):
        raise ValueError("linear_exact needs r >= 1 and t >= 0")
    return LinearSolution(ivp.f0, ivp.f1).u(t, r - t)


# ---------------------------------------------------------------------------
# configuration and results

@dataclass(frozen=True)
class SolverConfig:
    h: float = 0.01
    band_window: float | None = None     # None: 2R;  math.inf: whole domain
    blowup_threshold: float | None = None  # None: threshold_factor * eps * max|fcheck1|
    threshold_factor: float = 1e4
    picard_iters: int = 3
    picard_tol: float = 1e-12
    t_max: float = math.inf
    log_t_max: float | None = None       # alternative horizon, log of time
    far_field: bool = True
    dlam: float | None = None            # far-field step in log(beta); None: 2h
    growth_limit: float | None = None    # cap on c |v_t| dlog(beta); None: 4h
    store_every: int = 0                 # near-field snapshot stride (0: none)
    store_dlog: float = 0.0              # far-field snapshot spacing in log(beta)
    second_threshold: bool = True        # keep going to 2B for sensitivity

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.blowup_threshold is not None and self.blowup_threshold <= 0:
            raise ValueError("blowup_threshold must be positive")

    def window(self, R: float) -> float:
        W = 2.0 * R if self.band_window is None else self.band_window
        if math.isfinite(W) and W < 2.0 * R:
            raise ValueError(f"band_window must be >= 2R = {2 * R}")
        return W

    def threshold(self, ivp: RadialIVP) -> float:
        if self.blowup_threshold is not None:
            return self.blowup_threshold
        r = np.linspace(1.0, ivp.support_radius, 4001)
        scale = float(np.max(np.abs(CheckExtension(ivp.f1)(r))))
        if scale == 0.0:
            scale = float(np.max(np.abs(CheckExtension(ivp.f0).deriv(r, 1))))
        return self.threshold_factor * ivp.eps * max(scale, 1e-300)

    def log_horizon(self) -> float:
        lt = math.log(self.t_max) if math.isfinite(self.t_max) else math.inf
        if self.log_t_max is not None:
            lt = min(lt, self.log_t_max)
        return lt


@dataclass
class BlowupReport:
    T_num: float                 # lifespan estimate (or horizon reached)
    log_T: float
    trigger: str                 # "threshold" | "picard-divergence" | "none"
    T_2B: float | None = None    # crossing time of the doubled threshold
    log_T_2B: float | None = None
    uncertainty: float = 0.0     # half the width of the bracketing step
    threshold: float = 0.0
    threshold_sensitivity: float | None = None
    grid_convergence: float | None = None
    rows: int = 0

    @property
    def blew_up(self) -> bool:
        return self.trigger != "none"


@dataclass
class NearRow:
    t: float
    r: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    vr: np.ndarray


@dataclass
class FarRow:
    """Cell-centre samples between two null rows beta_o < beta_n."""

    beta: float                  # cell-centre beta
    alpha: np.ndarray            # cell-centre alphas
    v: np.ndarray
    vt: np.ndarray
    vr: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return 0.5 * (self.alpha + self.beta)

    @property
    def r(self) -> np.ndarray:
        return 0.5 * (self.beta - self.alpha)

    @property
    def q(self) -> np.ndarray:
        return -self.alpha


@dataclass
class SolutionField:
    ivp: RadialIVP
    h: float
    near: list[NearRow] = field(default_factory=list)
    far: list[FarRow] = field(default_factory=list)
    band_window: float = math.inf
    switch_time: float = math.inf

    def samples(self):
        """Yield (t, q, r, u, u_t, u_r) arrays for every stored row."""
        for row in self.near:
            t = np.full_like(row.r, row.t)
            u = row.v / row.r
            yield t, row.r - row.t, row.r, u, row.vt / row.r, (row.vr - u) / row.r
        for row in self.far:
            r = row.r
            u = row.v / r
            yield row.t, row.q, r, u, row.vt / r, (row.vr - u) / r

    def characteristic(self, s: float):
        """U(t) = (t+s) u_t(t, t+s) = v_t along r - t = s, by linear interpolation."""
        ts, Us = [], []
        for row in self.near:
            r = row.t + s
            if row.r[0] <= r <= row.r[-1]:
                ts.append(row.t)
                Us.append(float(np.interp(r, row.r, row.vt)))
            elif r > row.r[-1]:
                ts.append(row.t)
                Us.append(0.0)
        for row in self.far:
            a = -s
            if row.alpha[0] <= a <= row.alpha[-1]:
                ts.append(0.5 * (a + row.beta))
                Us.append(float(np.interp(a, row.alpha, row.vt)))
            elif a < row.alpha[0]:
                ts.append(0.5 * (a + row.beta))
                Us.append(0.0)
        return np.array(ts), np.array(Us)


def u_along_characteristic(sol: SolutionField, s: float):
    if s < 1.0:
        raise ValueError("characteristic parameter s must be >= 1")
    return sol.characteristic(s)


def lower_bound_rhs(ivp: RadialIVP, t, s):
    """2 eps s f1(s) / (4 - eps c s f1(s) log((t+s)/s)); +inf past its blow-up."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    sf = s * ivp.f1(s)
    den = 4.0 - ivp.eps * ivp.c * sf * np.log((t + s) / s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, 2.0 * ivp.eps * sf / np.where(den > 0, den, 1.0), np.inf)
    out = np.where(sf == 0, 0.0, out)
    return out if out.ndim else float(out)


def bound_blowup_time(ivp: RadialIVP, s: float) -> float:
    """Time at which lower_bound_rhs(., s) blows up: s exp(4/(c s f1 eps)) - s."""
    sf = s * float(ivp.f1(s))
    if sf * ivp.c <= 0:
        return math.inf
    return s * math.exp(4.0 / (ivp.c * sf * ivp.eps)) - s


# ---------------------------------------------------------------------------
# the scheme

class _Stop(Exception):
    pass


class _Tracker:
    """Records threshold crossings of max |v_t| for B and 2B."""

    def __init__(self, B: float, want_2B: bool):
        self.B = B
        self.want_2B = want_2B
        self.prev_t = 0.0
        self.prev_logt = -math.inf
        self.hit: dict[float, tuple[float, float, float]] = {}
        self.trigger = "none"

    def observe(self, amp: float, t: float, logt: float) -> bool:
        """Feed one row; True once the run can stop."""
        for level in (self.B, 2.0 * self.B):
            if level not in self.hit and amp >= level:
                mid = 0.5 * (self.prev_t + t)
                lmid = 0.5 * (self.prev_logt + logt) if math.isfinite(self.prev_logt) else logt
                self.hit[level] = (mid, lmid, 0.5 * (t - self.prev_t))
                self.trigger = "threshold"
        self.prev_t = t
        self.prev_logt = logt
        done = self.B in self.hit and (not self.want_2B or 2.0 * self.B in self.hit)
        return done

    def diverged(self, t: float, logt: float):
        mid = 0.5 * (self.prev_t + t)
        lmid = 0.5 * (self.prev_logt + logt) if math.isfinite(self.prev_logt) else logt
        for level in (self.B, 2.0 * self.B):
            if level not in self.hit:
                self.hit[level] = (mid, lmid, 0.5 * (t - self.prev_t))
        if self.trigger == "none":
            self.trigger = "picard-divergence"


def _picard_near(A, S, coef, iters, tol):
    """Solve x = A + coef (x - S)^2 by fixed-point iteration (vectorized)."""
    x = A.copy()
    prev_change = math.inf
    for _ in range(iters):
        nxt = A + coef * (x - S) ** 2
        change = float(np.max(np.abs(nxt - x))) if x.size else 0.0
        x = nxt
        if not np.isfinite(change) or change > 10.0 * prev_change + 1e-300 and change > 1e-8:
            return x, False
        if change <= tol * (1.0 + float(np.max(np.abs(x)))):
            break
        prev_change = change
    ok = bool(np.all(np.isfinite(x)))
    # contraction factor of the map at the solution
    if ok and x.size:
        ok = float(np.max(np.abs(2.0 * coef * (x - S)))) < 1.0
    return x, ok


def solve(ivp: RadialIVP, cfg: SolverConfig = SolverConfig()):
    """Integrate the radial problem; returns (SolutionField, BlowupReport).

    For c < 0 the problem is solved for -u (coefficient -c, data -f) and
    the stored fields are negated afterwards, so blow-up detection only
    ever looks at one sign.
    """
    if ivp.c < 0:
        flipped = RadialIVP(-ivp.c, ivp.eps, ivp.f0.scaled(-1.0), ivp.f1.scaled(-1.0))
        sol, rep = _solve(flipped, cfg)
        for row in sol.near + sol.far:
            row.v, row.vt, row.vr = -row.v, -row.vt, -row.vr
        sol.ivp = ivp
        return sol, rep
    return _solve(ivp, cfg)


def _solve(ivp: RadialIVP, cfg: SolverConfig):
    h = cfg.h
    c = ivp.c
    eps = ivp.eps
    R = ivp.support_radius
    W = cfg.window(R)
    B = cfg.threshold(ivp)
    log_hor = cfg.log_horizon()
    e0, e1 = CheckExtension(ivp.f0), CheckExtension(ivp.f1)
    tracker = _Tracker(B, cfg.second_threshold)
    sol = SolutionField(ivp, h, band_window=W)

    use_far = cfg.far_field and math.isfinite(W)
    N1 = int(math.ceil((W + 1.0) / h - 1e-9)) if use_far else None
    t_end_near = N1 * h if use_far else math.exp(log_hor) if math.isfinite(log_hor) else math.inf
    if not math.isfinite(t_end_near):
        raise ValueError("near-field-only runs need a finite horizon")
    sol.switch_time = t_end_near if use_far else math.inf

    # ---- near field -----------------------------------------------------
    pad = 256
    J = int(math.ceil((min(t_end_near, W + 1.0 if math.isfinite(W) else t_end_near) + R) / h)) + pad
    j0 = 0
    r = 1.0 + h * np.arange(J)
    prev = eps * e0(r)
    cur = prev + h * eps * e1(r) + 0.5 * h * h * (eps * e0.deriv(r, 2) + c * (eps * e1(r)) ** 2 / r)
    prev[0] = 0.0
    cur[0] = 0.0
    vt_prev_row = eps * e1(r)  # v_t at t = 0
    diag: list[float] = []     # v along beta = beta0 (nodes (N1 - k, k))
    rows = 1
    n = 1                      # cur is row n

    def store_near(nrow, vrow, vtrow, rr):
        if cfg.store_every and nrow % cfg.store_every == 0:
            ok = np.isfinite(vrow) & np.isfinite(vtrow)
            vr = np.gradient(vrow[ok], h)
            sol.near.append(NearRow(nrow * h, rr[ok].copy(), vrow[ok].copy(), vtrow[ok].copy(), vr))

    store_near(0, prev, vt_prev_row, r)
    if use_far:
        diag.append(float(prev[N1]) if N1 < len(prev) else 0.0)
        if N1 - 1 < len(cur):
            diag.append(float(cur[N1 - 1]))

    stop = False
    try:
        while True:
            t_cur = n * h
            if (use_far and n >= N1) or (not use_far and t_cur >= t_end_near):
                break
            # grow the grid to the right so that r > t + R is always present
            if r[-1] < t_cur + R + 4 * h:
                extra = pad
                r = np.concatenate([r, r[-1] + h * np.arange(1, extra + 1)])
                prev = np.concatenate([prev, np.zeros(extra)])
                cur = np.concatenate([cur, np.zeros(extra)])
            A = cur[2:] + cur[:-2] - prev[1:-1]
            S = prev[1:-1]
            coef = c / (4.0 * r[1:-1])
            inner, ok = _picard_near(A, S, coef, cfg.picard_iters, cfg.picard_tol)
            nxt = np.empty_like(cur)
            nxt[1:-1] = inner
            nxt[-1] = 0.0
            if j0 == 0:
                nxt[0] = 0.0
            else:
                nxt[0] = np.nan  # outside the band: never read again
            vt_cur = (nxt - prev) / (2.0 * h)
            t_next = t_cur + h
            if not ok:
                tracker.diverged(t_next, math.log(t_next))
                stop = True
                break
            amp = float(np.nanmax(np.abs(vt_cur[1:-1])))
            store_near(n, cur, vt_cur, r)
            if tracker.observe(amp, t_cur, math.log(t_cur)):
                stop = True
                break
            prev, cur = cur, nxt
            n += 1
            rows += 1
            if use_far and n <= N1:
                k = N1 - n
                diag.append(float(cur[k]) if k < len(cur) else 0.0)
            # band truncation (near-field-only runs past t = W + 1)
            if not use_far and math.isfinite(W) and n * h > W + 1.0:
                r, prev, cur = r[1:], prev[1:], cur[1:]
                j0 += 1
    except _Stop:
        stop = True

    if not stop and not use_far:
        t_cur = n * h
        tracker.observe(0.0, t_cur, math.log(t_cur))

    # ---- far field ------------------------------------------------------
    if use_far and not stop:
        stop = _far_field(sol, ivp, cfg, tracker, diag, N1, log_hor)

    report = _report(tracker, B, sol, rows)
    return sol, report


def _report(tracker: _Tracker, B: float, sol: SolutionField, rows: int) -> BlowupReport:
    if B in tracker.hit:
        T, lT, unc = tracker.hit[B]
        T2 = tracker.hit.get(2.0 * B)
        rep = BlowupReport(T, lT, tracker.trigger, threshold=B, uncertainty=unc, rows=rows)
        if T2 is not None:
            rep.T_2B, rep.log_T_2B = T2[0], T2[1]
            rep.threshold_sensitivity = abs(math.expm1(T2[1] - lT))
        return rep
    return BlowupReport(tracker.prev_t, tracker.prev_logt, "none", threshold=B, rows=rows)


def _far_field(sol, ivp, cfg, tracker, diag, N1, log_hor) -> bool:
    h = cfg.h
    c = ivp.c
    R = ivp.support_radius
    delta = 2.0 * h
    dlam_max = cfg.dlam if cfg.dlam is not None else 2.0 * h
    growth = cfg.growth_limit if cfg.growth_limit is not None else 4.0 * h
    beta = 1.0 + N1 * h
    # diag[n] is v at node (n, N1 - n): alpha = (2n - N1) h - 1, ascending in n
    vals = np.array(diag)
    alphas = (2.0 * np.arange(len(vals)) - N1) * h - 1.0
    keep = alphas >= -(R + 4.0 * delta)
    V = vals[keep].copy()
    alpha = alphas[keep].copy()
    V[0] = 0.0
    alpha_c = 0.5 * (alpha[:-1] + alpha[1:])
    Q = np.zeros(len(alpha) - 1)
    d_o = np.diff(V)
    amp_prev = float(np.max(np.abs(d_o))) / delta
    next_store = math.log(beta)
    rows = 0
    last_dbeta = 1.0
    while True:
        lam = math.log(beta)
        if math.log(max(0.5 * (beta + alpha[0]), 1e-300)) >= log_hor:
            tracker.observe(0.0, 0.5 * (beta + alpha[0]), math.log(0.5 * (beta + alpha[0])))
            return False
        if lam > 700.0:
            log.warning("far field stopped: beta exceeds float range")
            return False
        dlam = min(dlam_max, growth / max(abs(c) * amp_prev, 1e-300))
        beta_n = beta * math.exp(dlam)
        dbeta = beta_n - beta
        beta_c = 0.5 * (beta + beta_n)
        r_c = 0.5 * (beta_c - alpha_c)
        coef = c * delta * dbeta / (4.0 * r_c)
        Vsum_o = V[:-1] + V[1:]
        if rows:
            Q = Q * (dbeta / last_dbeta)  # predictor: last increment, rescaled
        ok = False
        prev_change = math.inf
        for it in range(max(cfg.picard_iters, 1) + 3):
            d_n = d_o + Q
            cq = np.concatenate([[0.0], np.cumsum(Q)])
            a_al = (d_o + d_n) / (2.0 * delta)
            a_be = (cq[:-1] + cq[1:]) / (2.0 * dbeta)
            vt = a_al + a_be
            Q_new = coef * vt * vt
            change = float(np.max(np.abs(Q_new - Q)))
            Q = Q_new
            if not np.isfinite(change) or (change > prev_change and change > 1e-14 * (1 + np.max(np.abs(d_o)))):
                ok = False
                break
            ok = True
            if change <= cfg.picard_tol * (1.0 + float(np.max(np.abs(d_o)))):
                break
            prev_change = change
        last_dbeta = dbeta
        t_row = 0.5 * (beta_n + alpha_c)
        if not ok:
            k = int(np.argmax(np.abs(d_o)))
            tracker.diverged(float(t_row[k]), math.log(float(t_row[k])))
            return True
        d_n = d_o + Q
        cq = np.concatenate([[0.0], np.cumsum(Q)])
        a_al = (d_o + d_n) / (2.0 * delta)
        a_be = (cq[:-1] + cq[1:]) / (2.0 * dbeta)
        vt = a_al + a_be
        absvt = np.abs(vt)
        k = int(np.argmax(absvt))
        amp = float(absvt[k])
        if cfg.store_dlog and math.log(beta_c) >= next_store:
            Vn = np.concatenate([[0.0], np.cumsum(d_n)])
            vc = 0.25 * (V[:-1] + V[1:] + Vn[:-1] + Vn[1:])
            sol.far.append(FarRow(beta_c, alpha_c.copy(), vc, vt.copy(), a_be - a_al))
            next_store = math.log(beta_c) + cfg.store_dlog
        V = np.concatenate([[0.0], np.cumsum(d_n)])
        d_o = d_n
        beta = beta_n
        amp_prev = max(amp, float(np.max(np.abs(a_al))))
        rows += 1
        tk = 0.5 * (beta_c + float(alpha_c[k]))
        if tracker.observe(amp, tk, math.log(tk)):
            return True


# ---------------------------------------------------------------------------
# consistency checks on a computed solution

def duhamel_residual(sol: SolutionField, points=None):
    """Max residual of the integral identity for v_t along both characteristics.

    For r - t >= 1 the backward cone never meets the wall and

        v_t(t, r) = eps (r v0)_t(t, r) + (c/2) int_0^t [v_t^2 / rho](s, r + t - s) ds
                                        + (c/2) int_0^t [v_t^2 / rho](s, r - t + s) ds,

    where (r v0)_t is the linear part.  Integrals use the trapezoid rule on
    stored near-field rows (every row must be stored for second order).
    ``points`` defaults to stored nodes with r - t >= 1; returns
    (max residual, number of points checked).
    """
    rows = sol.near
    if len(rows) < 2:
        raise ValueError("duhamel_residual needs stored near-field rows")
    ivp = sol.ivp
    lin = LinearSolution(ivp.f0, ivp.f1)
    times = np.array([row.t for row in rows])
    if points is None:
        points = []
        for row in rows[1:]:
            sel = row.r - row.t >= 1.0
            rr = row.r[sel][:: max(1, int(sel.sum() // 20))]
            points.extend((row.t, float(x)) for x in rr)
    worst = 0.0
    used = 0
    for t, r in points:
        if r - t < 1.0 - 1e-12:
            continue
        n = int(np.searchsorted(times, t - 1e-9 * max(1.0, t)))
        if n >= len(times) or abs(times[n] - t) > 1e-9 * max(1.0, t):
            continue
        sig = times[: n + 1]
        out_in = []
        for sign in (1.0, -1.0):
            rho = r + sign * (t - sig)
            vals = np.array([np.interp(x, rows[k].r, rows[k].vt, right=0.0) ** 2 / x
                             for k, x in enumerate(rho)])
            out_in.append(float(np.trapezoid(vals, sig)) if len(sig) > 1 else 0.0)
        lhs = float(np.interp(r, rows[n].r, rows[n].vt))
        rhs = ivp.eps * float(lin.rv_t(t, r - t)) + 0.5 * ivp.c * (out_in[0] + out_in[1])
        worst = max(worst, abs(lhs - rhs))
        used += 1
    return worst, used


def domination_table(sol: SolutionField, T_end: float, s_values, n_t: int = 50):
    """U_num(t, s) and lower_bound_rhs(t, s) on a (t, s) grid below T_end.

    t is spaced uniformly in log(1 + t).  U_num is interpolated along each
    characteristic in log(1 + t).  Returns (t_grid, s_values, U, rhs).
    """
    ivp = sol.ivp
    t_grid = np.expm1(np.linspace(0.0, math.log1p(T_end), n_t))
    s_values = np.asarray(s_values, dtype=float)
    U = np.full((n_t, len(s_values)), np.nan)
    rhs = np.empty_like(U)
    for j, s in enumerate(s_values):
        ts, Us = sol.characteristic(float(s))
        order = np.argsort(ts)
        ts, Us = ts[order], Us[order]
        inside = t_grid <= ts[-1] if len(ts) else np.zeros(n_t, bool)
        U[inside, j] = np.interp(np.log1p(t_grid[inside]), np.log1p(ts), Us)
        rhs[:, j] = lower_bound_rhs(ivp, t_grid, s)
    return t_grid, s_values, U, rhs


def write_rows_csv(sol: SolutionField, path) -> int:
    """Write stored rows as (t, r, v, dv_dt); returns the number of lines."""
    import csv

    n = 0
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "r", "v", "dv_dt"])
        for row in sol.near:
            for r, v, vt in zip(row.r, row.v, row.vt):
                wr.writerow([repr(row.t), repr(float(r)), repr(float(v)), repr(float(vt))])
                n += 1
        for row in sol.far:
            for t, r, v, vt in zip(row.t, row.r, row.v, row.vt):
                wr.writerow([repr(float(t)), repr(float(r)), repr(float(v)), repr(float(vt))])
                n += 1
    return n
