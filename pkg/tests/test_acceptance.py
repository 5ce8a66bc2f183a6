"""Acceptance criteria, each run at its stated tolerance.

Every test stores (passed, detail) in conftest.ACCEPTANCE; the terminal summary
prints one PASS/FAIL line per criterion.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, special

import conftest
from unialign.core import FlowState, Scheme, SolverConfig, alignment_force, self_convergence_slopes
from unialign.diagnostics import criterion_monitor, fit_flocking
from unialign.grid import ScalarField, fractional_laplacian, make_grid
from unialign.moc.family import Moc
from unialign.moc.integrals import A_quadrature, c_alpha, dissipation_D_quadrature
from unialign.moc.lemmas import fit_empirical_constants, linearity_check, verify_all
from unialign.runner import run
from unialign.scenarios import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ALPHAS = (0.5, 1.0, 1.5)
pytestmark = pytest.mark.slow


def record(key, ok, detail):
    conftest.ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def config_run(name, tmp_path_factory, **overrides):
    from dataclasses import replace

    cfg = load_config(CONFIGS / name)
    if overrides:
        cfg = replace(cfg, **overrides)
    return run(cfg, tmp_path_factory.mktemp(name.split(".")[0]))


# -- 1 -----------------------------------------------------------------------------------

def test_1_spectral_operator_exactness():
    start = time.perf_counter()
    worst = 0.0
    for d in (1, 2):
        g = make_grid(d, 32)
        x = g.coords
        modes = [(1,), (3,), (15,)] if d == 1 else [(1, 0), (0, 2), (3, 4), (-5, 7), (15, 15)]
        for k in modes:
            phase = sum(ki * xi for ki, xi in zip(k, x))
            kk = math.sqrt(sum(ki * ki for ki in k))
            for alpha in ALPHAS:
                for basis in (np.cos, np.sin):
                    out = fractional_laplacian(ScalarField(g, basis(phase)), alpha).physical
                    exact = kk**alpha * basis(phase)
                    worst = max(worst, float(np.max(np.abs(out - exact))) / kk**alpha)
    elapsed = time.perf_counter() - start
    record("1 spectral exactness", worst <= 1e-12 and elapsed < 1.0,
           f"max rel err {worst:.2e} (tol 1e-12), {elapsed:.3f} s (limit 1 s)")


# -- 2 -----------------------------------------------------------------------------------

def _periodic_kernel(z, alpha):
    """Sum over images of c_alpha |z + 2 pi k|^(-1-alpha) for z in (0, 2 pi)."""
    s = 1.0 + alpha
    w = z / (2.0 * math.pi)
    return c_alpha(alpha, 1) * (2.0 * math.pi) ** (-s) * (special.zeta(s, w) + special.zeta(s, 1.0 - w))


def _trig(coef_c, coef_s, mean):
    ks = np.arange(1, len(coef_c) + 1)

    def f(x):
        return mean + float(np.dot(coef_c, np.cos(ks * x)) + np.dot(coef_s, np.sin(ks * x)))
    return f


def test_2_commutator_matches_kernel_quadrature():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 64
    g = make_grid(1, n)
    x = g.coords[0]
    worst = 0.0
    for alpha in ALPHAS:
        rc, rs = 0.3 * rng.standard_normal((2, 8)) / np.arange(1, 9)
        uc, us = rng.standard_normal((2, 8)) / np.arange(1, 9)
        rho, u = _trig(rc, rs, 1.0), _trig(uc, us, 0.2)
        force = alignment_force(ScalarField(g, np.array([rho(t) for t in x])),
                                ScalarField(g, np.array([u(t) for t in x])), alpha).physical
        for j, xj in enumerate(x):
            uj = u(xj)

            def integrand(z):
                return _periodic_kernel(z, alpha) * (rho(xj + z) * (u(xj + z) - uj)
                                                     + rho(xj - z) * (u(xj - z) - uj))
            val, _ = integrate.quad(integrand, 0.0, math.pi, limit=400, epsabs=1e-11, epsrel=1e-11)
            worst = max(worst, abs(val - force[j]))
    elapsed = time.perf_counter() - start
    record("2 commutator vs kernel", worst <= 1e-4 and elapsed < 60.0,
           f"sup err {worst:.2e} (tol 1e-4), {elapsed:.1f} s (limit 60 s)")


# -- 3 -----------------------------------------------------------------------------------

def test_3_conservation_suite(tmp_path_factory):
    start = time.perf_counter()
    art = config_run("generic_subcritical.ini", tmp_path_factory, moc=False)
    elapsed = time.perf_counter() - start
    recs = art.records
    r0 = recs[0]
    mass = max(abs(r.mass - r0.mass) / abs(r0.mass) for r in recs)
    p_scale = max(abs(r0.momentum), r0.mass * r0.u_dev)
    mom = max(abs(r.momentum - r0.momentum) / p_scale for r in recs)
    gint = max(abs(r.G_integral - r0.G_integral) / r0.G_abs_integral for r in recs)
    f_ok = all(r.F_sup <= r0.F_sup * (1 + 1e-6) for r in recs)
    g_ok = all(r.G_sup <= r.rho_max * r0.F_sup * (1 + 1e-6) for r in recs)
    ok = (art.status == "completed" and recs[-1].t == pytest.approx(10.0) and mass <= 1e-9
          and mom <= 1e-7 and gint <= 1e-9 and f_ok and g_ok and elapsed < 300)
    record("3 conservation", ok,
           f"mass {mass:.1e} momentum {mom:.1e} intG {gint:.1e} F_max ok={f_ok} G bound ok={g_ok}, "
           f"{elapsed:.0f} s")


# -- 4 -----------------------------------------------------------------------------------

def test_4_gzero_preserved(tmp_path_factory):
    from dataclasses import replace

    cfg = load_config(CONFIGS / "gzero.ini")
    cfg = replace(cfg, n=256, solver=replace(cfg.solver, t_end=1.0, output_stride=1), snapshots=False)
    art = run(cfg, tmp_path_factory.mktemp("gzero"))
    sup = max(r.G_sup for r in art.records)
    ok = art.status == "completed" and art.records[-1].t == pytest.approx(1.0) and sup <= 1e-6
    record("4 G0 = 0 preserved", ok, f"sup|G| = {sup:.1e} over {len(art.records)} steps (tol 1e-6)")


# -- 5 -----------------------------------------------------------------------------------

def test_5_lemma_sweeps():
    start = time.perf_counter()
    lines, ok = [], True
    for alpha in ALPHAS:
        for d in (1, 2):
            consts = fit_empirical_constants(alpha, d)
            reports = verify_all(alpha, d, consts)
            lin = linearity_check(alpha, d, consts)
            n_xi = min(r.xi.size for r in reports)
            viol = sum(r.n_violations for r in reports)
            good = all(r.passed for r in reports) and lin["pass"] and n_xi >= 40
            ok &= good
            lines.append(f"a={alpha:g},d={d}:{viol}viol,lin{max(lin['rel_change'].values()):.0e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    record("5 lemma sweeps", ok, " ".join(lines) + f", {elapsed:.0f} s")


# -- 6 -----------------------------------------------------------------------------------

def test_6_critical_scaling():
    worst = 0.0
    m = Moc.with_lambda(1.0, 0.5, 0.01)
    for s in (2.0, 10.0):
        ms = Moc(1.0, 0.5, m.log_lam + math.log(s))
        for xi in np.geomspace(1e-4, 1.0, 12):
            for fn in (lambda x, mm: dissipation_D_quadrature(x, mm, 1.0).value,
                       lambda x, mm: A_quadrature(x, mm, 1.0, 1).value,
                       lambda x, mm: A_quadrature(x, mm, 1.0, 2).value):
                base = fn(xi, m)
                worst = max(worst, abs(s * fn(s * xi, ms) - base) / abs(base))
    record("6 critical scaling", worst <= 1e-6, f"max rel deviation {worst:.1e} (tol 1e-6)")


# -- 7, 8 ----------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def critical_run(tmp_path_factory):
    return config_run("critical_demo.ini", tmp_path_factory)


def test_7_moc_propagation(critical_run):
    art = critical_run
    recs = art.records
    mr = min(r.moc_margin_rho for r in recs)
    mu = min(r.moc_margin_u for r in recs)
    ok = (art.status == "completed" and art.choice is not None and recs[-1].t == pytest.approx(10.0)
          and mr > 0 and mu > 0)
    c0 = art.choice.pair.c0 if art.choice is not None else float("nan")
    record("7 MOC propagation", ok,
           f"min margin rho {mr:.3e}, u {mu:.3e} over {len(recs)} records, c0_hat = {c0:.3g}")


def test_8_flocking(critical_run):
    from unialign.grid import read_snapshot

    art = critical_run
    states = []
    for name in art.snapshots:
        header, fields = read_snapshot(art.run_dir / "snapshots" / name)
        states.append((header["time"], fields["rho"]))
    fl = fit_flocking(art.records, states, beta=0.5)
    res = np.array(fl.profile_residual)
    mono = bool(np.all(np.diff(res) <= 1e-8))
    dev = np.array([r.u_dev for r in art.records])
    t = np.array([r.t for r in art.records])
    late = dev[t >= 0.5 * t[-1]]
    dec = bool(np.all(np.diff(late) <= 0)) and dev[-1] < dev[0]
    ok = fl.r_squared >= 0.95 and mono and dec and len(res) >= 3
    record("8 flocking", ok, f"R^2 {fl.r_squared:.5f} (min 0.95), rate {fl.decay_rate_fit:.3g}, "
           f"residual monotone={mono} over {len(res)} snapshots, |u-ubar| decreasing={dec}")


# -- 9 -----------------------------------------------------------------------------------

def test_9_criterion_monitor(tmp_path_factory):
    art = config_run("supercritical_criterion.ini", tmp_path_factory, moc=False)
    cfg = art.config
    mon = criterion_monitor(art.records, cfg.sigma, cfg.solver.alpha, factor=2.0)
    bounded = art.status == "completed" and math.isfinite(mon["max_holder"])
    record("9 criterion monitor", bounded and mon["pass"],
           f"max lip_rho / bound = {mon['max_ratio']:.3g} at t = {mon['t_max_ratio']:.3g} "
           f"(limit 2), sup |u|_C^sigma = {mon['max_holder']:.3g}")


def test_9_burgers_control_blows_up(tmp_path_factory):
    art = config_run("frozen_burgers_blowup.ini", tmp_path_factory, snapshots=False)
    t_blow = art.status_detail.get("t", float("nan"))
    ok = art.status == "blowup" and t_blow < art.config.solver.t_end
    record("9b Burgers blow-up control", ok, f"status {art.status} at t = {t_blow:.4g}")


# -- 10 ----------------------------------------------------------------------------------

@pytest.mark.parametrize("scheme,order", [(Scheme.ExplicitRK4, 4.0), (Scheme.ImexCN, 2.0)])
def test_10_time_order(scheme, order):
    g = make_grid(1, 64)
    x = g.coords[0]
    state = FlowState.from_arrays(g, np.ones(64), 0.5 * np.sin(x) + 0.2 * np.cos(2 * x))
    cfg = SolverConfig(alpha=1.5, scheme=scheme, frozen_density=True)
    _, slopes = self_convergence_slopes(state, cfg, 0.5, steps=(20, 40, 80, 160, 320))
    ok = abs(slopes[-1] - order) <= 0.2
    record(f"10 time order {scheme.value}", ok,
           f"slopes {', '.join(f'{s:.2f}' for s in slopes)} (target {order:g} +- 0.2)")
