"""Acceptance checks for the lifespan lab, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line with output
capture suspended, then asserts.  Criteria 4 and 5 share
one converged sweep, which takes several minutes on one core.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest

from lifespan_lab import lab
from lifespan_lab.profile import ProfileContext, tau_star_general, tau_star_radial
from lifespan_lab.radiation import canonical_f1, radon_plane, radon_radial, zero_profile
from lifespan_lab.solver import LinearSolution, RadialIVP, SolverConfig, linear_exact, solve
from lifespan_lab.weights import smooth_bump

SWEEP_EPS = (0.5, 0.42, 0.35, 0.29, 0.24, 0.20)
BOUND_EPS = (0.5, 0.35, 0.25)


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line past pytest's capture, then assert."""
    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        assert ok, line
    return report


@pytest.fixture(scope="module")
def sweep():
    cfg = lab.ExperimentConfig(eps_list=SWEEP_EPS)
    records, fit = lab.lifespan_sweep(cfg)
    return cfg, {r.eps: r for r in records}, fit


def test_criterion_1_tau_star_routes_agree(verdict):
    t0 = time.perf_counter()
    ctx = ProfileContext.from_data(1.0, zero_profile(), canonical_f1())
    general = tau_star_general(ctx.coeffs, ctx.radiation)
    radial = tau_star_radial(1.0, zero_profile(), canonical_f1())
    elapsed = time.perf_counter() - t0
    rel = abs(general - radial) / radial
    verdict(1, rel <= 1e-6 and elapsed < 1.0,
            f"general={general:.10g} radial={radial:.10g} rel={rel:.1e} time={elapsed:.2f}s")


def test_criterion_2_linear_oracle_second_order(verdict):
    ivp = RadialIVP(0.0, 1.0, zero_profile(), canonical_f1())
    t0 = time.perf_counter()
    errs = []
    for h in (0.02, 0.01):
        cfg = SolverConfig(h=h, t_max=50.0 + h, store_every=int(round(0.5 / h)),
                           far_field=False, band_window=math.inf)
        sol, _ = solve(ivp, cfg)
        assert sol.near[-1].t >= 50.0 - 1e-9
        errs.append(max(float(np.max(np.abs(row.v / row.r - linear_exact(ivp, row.t, row.r))))
                        for row in sol.near))
    elapsed = time.perf_counter() - t0
    ratio = errs[0] / errs[1]
    verdict(2, 3.5 <= ratio <= 4.5 and elapsed < 10.0,
            f"Linf errors {errs[0]:.3e}, {errs[1]:.3e} ratio={ratio:.4f} time={elapsed:.1f}s")


def test_criterion_3_boundary_and_huygens_identities(verdict):
    lin = LinearSolution(zero_profile(), canonical_f1())
    R = 4.0
    rng = np.random.default_rng(20240601)
    n = 10_000
    scale = float(np.max(np.abs(lin.e1(np.linspace(1.0, R, 4001)))))
    t_wall = rng.uniform(0.0, 200.0, n)
    wall = float(np.max(np.abs(lin.u(t_wall, 1.0 - t_wall))))
    # sample {r - t <= 2 - R, r + t >= R, r >= 1}
    t = rng.uniform(R - 1.0, 200.0, n)
    r = rng.uniform(np.maximum(1.0, R - t), t - (R - 2.0))
    q = r - t
    assert np.all((q <= 2.0 - R) & (r + t >= R) & (r >= 1.0))
    huygens = float(np.max(np.abs(lin.u(t, q))))
    ok = wall <= 1e-12 and huygens <= 1e-12 * scale
    verdict(3, ok, f"|u0(t,1)|max={wall:.1e} interior max={huygens:.1e} "
                   f"(data scale {scale:.3g}, {n} + {n} points)")


def test_criterion_4_upper_bound(sweep, verdict):
    cfg, records, fit = sweep
    R = 4.0
    lines = []
    ok = True
    for eps in BOUND_EPS:
        rec = records.get(eps) or lab.converged_lifespan(cfg, eps)
        bound = math.log(R) + fit.tau_star_reference / eps + math.log(1.05)
        margin = rec.log_T - bound
        ok &= rec.grid_converged and margin <= 0
        lines.append(f"eps={eps}: log T={rec.log_T:.4f} bound={bound:.4f} conv={rec.grid_converged}")
    verdict(4, ok, "; ".join(lines))


def test_criterion_5_lifespan_law(sweep, verdict):
    cfg, records, fit = sweep
    flags = all(r.grid_converged and r.threshold_robust for r in records.values())
    ok = flags and fit.relative_gap <= 0.10 and fit.n_used == len(SWEEP_EPS)
    pts = ", ".join(f"{e}:{records[e].eps_log_T:.3f}" for e in SWEEP_EPS)
    verdict(5, ok, f"tau_hat={fit.tau_hat:.3f} tau*={fit.tau_star_reference:.3f} "
                   f"gap={fit.relative_gap:.4f} all flags={flags} eps*logT [{pts}]")


def test_criterion_6_lower_bound_domination(verdict):
    cfg = lab.ExperimentConfig()
    res = lab.bound_check(cfg, 0.3, n=50)
    ok = res["violations"] == 0 and res["samples"] > 0
    verdict(6, ok, f"{res['samples']} samples, {res['violations']} violations, "
                   f"max normalized excess {res['max_normalized_violation']:.2e}, "
                   f"Duhamel residual {res['duhamel_residual']:.1e}")


def test_criterion_7_profile_closed_form(verdict):
    ctx = ProfileContext.from_data(1.0, zero_profile(), canonical_f1())
    lo, hi = ctx.support
    s = np.linspace(lo, hi, 100)
    taus = np.linspace(0.0, 0.9 * ctx.tau_star, 100)
    d = 1e-3
    worst_ode = 0.0
    worst_ps = 0.0
    ds = 1e-4
    for tau in taus:
        a = max(tau, d)
        dP = (ctx.P(s, a + d) - ctx.P(s, a - d)) / (2 * d)
        worst_ode = max(worst_ode, float(np.max(np.abs(2 * dP + ctx.G * ctx.P(s, a) ** 2))))
        sl = ctx.slice(tau)
        dp = (sl.p(s + ds) - sl.p(s - ds)) / (2 * ds)
        worst_ps = max(worst_ps, float(np.max(np.abs(dp - sl.P(s)))))
    verdict(7, worst_ode <= 1e-6 and worst_ps <= 1e-6,
            f"ODE residual {worst_ode:.1e}, |d_s p - P| {worst_ps:.1e}")


def test_criterion_8_approximation_error_scaling(verdict):
    cfg = lab.ExperimentConfig(approx_eps=(0.4, 0.2, 0.1))
    rows, order = lab.approx_error(cfg)
    ratios = []
    for a, b in zip(rows, rows[1:]):
        ratios.append(max(b[k] / a[k] for k in ("S1", "S2", "S3", "S4")))
    ok = all(r <= 1.5 for r in ratios) and order >= 1.2
    errs = ", ".join(f"{r['eps']}:{r['weighted_err']:.3e}" for r in rows)
    verdict(8, ok, f"worst S ratio {max(ratios):.3f}, weighted errors [{errs}] order={order:.3f}")


def test_criterion_9_radon_oracles(verdict):
    bump = lambda rho: smooth_bump((np.asarray(rho) - 2.0) / 2.0)
    bump3 = lambda y: bump(np.linalg.norm(y, axis=-1))
    gauss = lambda rho: np.exp(-np.asarray(rho) ** 2)
    gauss3 = lambda y: gauss(np.linalg.norm(y, axis=-1))
    theta = np.array([1.0, 2.0, 2.0]) / 3.0
    bump_gap = max(abs(radon_radial(bump, s, 4.0) - radon_plane(bump3, s, theta, 4.0))
                   for s in (0.0, 0.7, 1.9, 2.5, 3.3, 3.9))
    gauss_gap = 0.0
    for s in (0.0, 1.0, 2.0):
        exact = math.pi * math.exp(-s * s)
        gauss_gap = max(gauss_gap, abs(radon_radial(gauss, s, 7.0) - exact),
                        abs(radon_plane(gauss3, s, theta, 7.0) - exact))
    verdict(9, bump_gap <= 1e-7 and gauss_gap <= 1e-8,
            f"bump radial vs plane {bump_gap:.1e}, Gaussian vs pi e^(-s^2) {gauss_gap:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
