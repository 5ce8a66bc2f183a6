"""Quadratures of the singular integrals that drive the modulus-of-continuity
argument: the dissipation bracket D, the nonlocal drift A, the cross term
majorant K-bar and the Riesz-type integrals that bound density increments.

All integrands are evaluated through :meth:`Moc.inc` / :meth:`Moc.second_diff`
so that small increments never suffer cancellation, and the logarithmic tail
of omega is integrated in closed form beyond ``TAIL_FACTOR * max(xi, lam)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma

from .family import Moc, MocPair
from .quadrature import (QuadratureError, QuadResult, adaptive_quad, gauss_legendre,
                         geometric_points, graded_around)

TAIL_FACTOR = 1e6
D_RTOL = 1e-10
A_RTOL = 1e-9
INNER_NODES = 12


def c_alpha(alpha: float, d: int) -> float:
    """Normalising constant of the kernel of Lambda^alpha on R^d (positive)."""
    return 2.0**alpha * gamma((d + alpha) / 2.0) / (math.pi ** (d / 2.0) * abs(gamma(-alpha / 2.0)))


def sphere_area(d: int) -> float:
    """|S^{d-1}|: 2, 2 pi, 4 pi for d = 1, 2, 3."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def _log_tail(a: float, b: float, T: float, p: float) -> float:
    """Integral over (T, inf) of (a + b log s) s^(-1-p)."""
    Tp = T ** (-p)
    return a * Tp / p + b * Tp * (math.log(T) / p + 1.0 / p**2)


def _check(xi: float, m: Moc, alpha: float):
    if not xi > 0:
        raise ValueError("xi must be positive")
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    lam = m.lam
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError("quadratures need a representable lambda")
    return lam


def _small_scale(xi: float, lam: float, factor: float) -> float:
    gap = abs(xi - lam)
    scale = min(xi, gap) if gap > 0 else xi
    return factor * scale


# -- dissipation ---------------------------------------------------------------

def dissipation_D_quadrature(xi: float, m: Moc, alpha: float, rtol: float = D_RTOL) -> QuadResult:
    """Bracketed dissipation integral (without the C1 prefactor).

    int_0^{xi/2} [2w(xi) - w(xi+2e) - w(xi-2e)] e^{-1-alpha} de
      + int_{xi/2}^inf [2w(xi) - w(2e+xi) + w(2e-xi)] e^{-1-alpha} de
    """
    lam = _check(xi, m, alpha)
    if abs(xi - lam) <= 1e-14 * lam:
        if alpha >= 1.0:
            raise QuadratureError("dissipation integral diverges at the kink xi = lambda for alpha >= 1")
    eta_k = 0.5 * abs(xi - lam)
    eps0 = _small_scale(xi, lam, 1e-8) if eta_k > 0 else 1e-10 * xi
    eps0 = min(eps0, 0.25 * xi)

    if eta_k > 0:
        # -w''(xi) (2 eta)^2 near eta = 0
        patch = -4.0 * float(m.deriv2(xi)) * eps0 ** (2.0 - alpha) / (2.0 - alpha)
    else:
        jump = m.delta / lam * (1.0 - (1.0 + m.mu) / 4.0) - m.delta / (2.0 * lam)
        patch = 2.0 * jump * eps0 ** (1.0 - alpha) / (1.0 - alpha)

    def f_near(eta):
        return m.second_diff(xi, 2.0 * eta) / eta ** (1.0 + alpha)

    pts = [geometric_points(eps0, 0.5 * xi)]
    if 0 < eta_k < 0.5 * xi:
        pts.append(graded_around(eta_k, eps0, 0.5 * xi))
    near = adaptive_quad(f_near, np.concatenate(pts), rtol=rtol)

    T = TAIL_FACTOR * max(xi, lam)
    w_xi = float(m(xi))

    def f_far(eta):
        spread = m.inc(2.0 * eta - xi, 2.0 * xi)
        return (2.0 * w_xi - spread) / eta ** (1.0 + alpha)

    pts = [geometric_points(0.5 * xi, T)]
    for c in (0.5 * (lam + xi), 0.5 * (lam - xi)):
        if 0.5 * xi < c < T:
            pts.append(graded_around(c, 0.5 * xi, min(T, 4 * c), levels=6))
    far = adaptive_quad(f_far, np.concatenate(pts), rtol=rtol)

    tail = 2.0 * w_xi * T ** (-alpha) / alpha
    for k in range(4):
        q = 2 * k + 1
        tail -= m.delta * (0.5 * xi) ** q / q * T ** (-(q + alpha)) / (q + alpha)
    total = near + far
    return QuadResult(total.value + patch + tail, total.error + 1e-8 * abs(patch), total.n_intervals)


# -- angular machinery for d >= 2 ----------------------------------------------

def _angular_weight(d: int):
    if d == 2:
        return 2.0, lambda th: np.ones_like(th)
    if d == 3:
        return 2.0 * math.pi, np.sin
    raise ValueError("d must be 1, 2 or 3")


_GL_X, _GL_W = gauss_legendre(INNER_NODES)


def _angular_integral(s: np.ndarray, integrand, cos_breaks, theta_scale, d: int) -> np.ndarray:
    """sigma_{d-2} int_0^pi integrand(s, theta) sin^{d-2}(theta) dtheta for each s.

    ``cos_breaks(s)`` gives an (Ns, K) array of cos(theta) kink locations
    (values outside (-1, 1) are ignored); ``theta_scale(s)`` gives the angular
    width of the sharpest feature near theta = 0, toward which the panels are
    graded geometrically.
    """
    s = np.asarray(s, dtype=float).ravel()
    sigma, wfun = _angular_weight(d)
    cb = np.atleast_2d(cos_breaks(s))
    if cb.shape[0] != s.size:
        cb = cb.T
    with np.errstate(invalid="ignore"):
        th_k = np.where(np.abs(cb) < 1.0, np.arccos(np.clip(cb, -1.0, 1.0)), 0.0)
    scale = np.clip(theta_scale(s), 1e-12, math.pi)
    levels = int(min(45, max(1, np.ceil(np.log2(math.pi / np.min(scale))) + 2)))
    grade = math.pi * 0.5 ** np.arange(1, levels + 1)
    grade = np.where(grade[None, :] >= 0.25 * scale[:, None], grade[None, :], 0.0)
    # a few extra points near pi as well, for kinks close to theta = pi
    extra = math.pi - math.pi * 0.5 ** np.arange(2, 8)
    br = np.concatenate([
        np.zeros((s.size, 1)), np.full((s.size, 1), math.pi), th_k, grade,
        np.broadcast_to(extra, (s.size, extra.size)),
        np.broadcast_to([0.5 * math.pi], (s.size, 1)),
    ], axis=1)
    br.sort(axis=1)
    lo, hi = br[:, :-1], br[:, 1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    th = mid[..., None] + half[..., None] * _GL_X
    vals = integrand(s[:, None, None], th) * wfun(th)
    return sigma * np.einsum("spq,q,sp->s", vals, _GL_W, half)


# -- nonlocal drift A ---------------------------------------------------------

def A_quadrature(xi: float, m: Moc, alpha: float, d: int, rtol: float = A_RTOL) -> QuadResult:
    """c_alpha p.v. int_{R^d} [w(|xi e1 - z|) - w(xi)] |z|^{-d-alpha} dz."""
    lam = _check(xi, m, alpha)
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    ca = c_alpha(alpha, d)
    eps0 = _small_scale(xi, lam, 1e-5)
    T = TAIL_FACTOR * max(xi, lam)
    w_xi = float(m(xi))
    lap = float(m.deriv2(xi)) + (d - 1) * float(m.deriv(xi)) / xi
    patch = sphere_area(d) * lap / (2 * d) * eps0 ** (2.0 - alpha) / (2.0 - alpha)
    tail = sphere_area(d) * _log_tail(0.75 * m.delta - 0.5 * m.delta * m.log_lam - w_xi,
                                      0.5 * m.delta, T, alpha)

    pts = [geometric_points(eps0, T), graded_around(xi, eps0, min(T, 4 * xi))]
    for c in (abs(xi - lam), xi + lam):
        if eps0 < c < T:
            pts.append(graded_around(c, eps0, min(T, 4 * c), levels=6))
    pts = np.concatenate(pts)

    if d == 1:
        def f(z):
            g = np.where(z <= xi, -m.second_diff(xi, np.minimum(z, xi)),
                         m.inc(xi, z) + m.inc(xi, z - 2.0 * xi))
            return g / z ** (1.0 + alpha)
    else:
        def inner(s, th):
            c = np.cos(th)
            r = np.sqrt(np.maximum(xi * xi + s * s - 2.0 * xi * s * c, 0.0))
            return m.inc(xi, (s * s - 2.0 * xi * s * c) / (r + xi))

        def cos_breaks(s):
            return ((xi * xi + s * s - lam * lam) / (2.0 * xi * s))[:, None]

        def theta_scale(s):
            return np.abs(s - xi) / np.sqrt(xi * s)

        def f(z):
            shape = z.shape
            z = z.ravel()
            phi = _angular_integral(z, inner, cos_breaks, theta_scale, d)
            return (phi / z ** (1.0 + alpha)).reshape(shape)

    body = adaptive_quad(f, pts, rtol=rtol, atol=1e-14 * abs(tail) + 1e-300)
    return QuadResult(ca * (body.value + patch + tail), ca * (body.error + 1e-6 * abs(patch)),
                      body.n_intervals)


# -- cross-term majorant K-bar ---------------------------------------------------

def K_bar_quadrature(xi: float, pair: MocPair, alpha: float, d: int, weight=None,
                     rtol: float = A_RTOL) -> QuadResult:
    """2 c_alpha int_{|z| <= 2 xi} W(|z|) |w2(|xi - z1|) - w2(xi)| |z|^{-d-alpha} dz.

    ``W`` defaults to omega1 (the density modulus); pass another increasing
    function with W(0) = 0 to use a different density-increment majorant.
    """
    w2 = pair.omega2
    lam = _check(xi, w2, alpha)
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    W = pair.omega1 if weight is None else weight
    ca = c_alpha(alpha, d)
    # W is only Lipschitz-linear up to (s/lam)^mu corrections, so start very close to 0
    eps0 = min(_small_scale(xi, lam, 1e-13), 1e-13 * lam)
    slope = float(W(np.array(eps0))) / eps0
    mean_abs_cos = {1: 2.0, 2: 4.0, 3: 2.0 * math.pi}[d]
    patch = slope * mean_abs_cos * float(w2.deriv(xi)) * eps0 ** (2.0 - alpha) / (2.0 - alpha)

    pts = [geometric_points(eps0, 2.0 * xi), graded_around(xi, eps0, 2.0 * xi)]
    for c in (lam, abs(xi - lam), xi + lam):
        if eps0 < c < 2.0 * xi:
            pts.append(graded_around(c, eps0, 2.0 * xi, levels=6))
    pts = np.concatenate(pts)

    def jump(z1):
        return np.abs(w2.inc(xi, np.abs(xi - z1) - xi))

    if d == 1:
        def f(s):
            return W(s) * (jump(s) + jump(-s)) / s ** (1.0 + alpha)
    else:
        def inner(s, th):
            return jump(s * np.cos(th))

        def cos_breaks(s):
            return np.stack([np.zeros_like(s), xi / s, (xi - lam) / s, (xi + lam) / s], axis=1)

        def theta_scale(s):
            return np.full_like(s, math.pi)

        def f(z):
            shape = z.shape
            z = z.ravel()
            phi = _angular_integral(z, inner, cos_breaks, theta_scale, d)
            return (W(z) * phi / z ** (1.0 + alpha)).reshape(shape)

    body = adaptive_quad(f, pts, rtol=rtol)
    return QuadResult(2.0 * ca * (body.value + patch), 2.0 * ca * (body.error + 1e-6 * abs(patch)),
                      body.n_intervals)


# -- Riesz-type integrals -----------------------------------------------------------

def riesz_integrals(xi: float, m: Moc, alpha: float, rtol: float = 1e-11) -> tuple[QuadResult, QuadResult]:
    """(I1, I2) = (int_0^xi w(e) e^{alpha-2} de, xi int_xi^inf w(e) e^{alpha-3} de), 1 < alpha < 2."""
    lam = _check(xi, m, alpha)
    if not 1.0 < alpha < 2.0:
        raise ValueError("the Riesz bound needs 1 < alpha < 2")
    eps0 = 1e-12 * min(xi, lam)
    patch = m.delta / lam * eps0**alpha / alpha

    def f1(eta):
        return m(eta) * eta ** (alpha - 2.0)

    pts = [geometric_points(eps0, xi)]
    if eps0 < lam < xi:
        pts.append([lam])
    I1 = adaptive_quad(f1, np.concatenate(pts), rtol=rtol)
    I1 = QuadResult(I1.value + patch, I1.error, I1.n_intervals)

    T = TAIL_FACTOR * max(xi, lam)

    def f2(eta):
        return m(eta) * eta ** (alpha - 3.0)

    pts = [geometric_points(xi, T)]
    if xi < lam:
        pts.append([lam])
    body = adaptive_quad(f2, np.concatenate(pts), rtol=rtol)
    tail = _log_tail(0.75 * m.delta - 0.5 * m.delta * m.log_lam, 0.5 * m.delta, T, 2.0 - alpha)
    I2 = QuadResult(xi * (body.value + tail), xi * body.error, body.n_intervals)
    return I1, I2


def riesz_integrals_closed_form(xi, m: Moc, alpha: float):
    """Exact (I1, I2) for the two-branch modulus; vectorised in xi."""
    xi = np.asarray(xi, dtype=float)
    lam, dl, mu = m.lam, m.delta, m.mu
    a = alpha
    s = xi / lam
    q = 2.0 - a
    pp = a - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.log(np.maximum(s, 1e-300))
        # I1 in units of delta * lam^(alpha-1)
        i1_in = np.minimum(s, 1.0) ** a / a - np.minimum(s, 1.0) ** (a + mu) / (4.0 * (a + mu))
        i1_full_in = 1.0 / a - 1.0 / (4.0 * (a + mu))
        sp = np.maximum(s, 1.0) ** pp
        i1_out = 0.75 * (sp - 1.0) / pp + 0.5 * (sp * np.maximum(ls, 0.0) / pp - (sp - 1.0) / pp**2)
        I1 = np.where(s <= 1.0, i1_in, i1_full_in + i1_out)
        # tail integral int_s^inf wbar(t) t^(a-3) dt for s >= 1
        sq = np.maximum(s, 1.0) ** (-q)
        tail_out = 0.75 * sq / q + 0.5 * sq * (np.maximum(ls, 0.0) / q + 1.0 / q**2)
        tail_one = 0.75 / q + 0.5 / q**2
        smin = np.minimum(s, 1.0)
        i2_in = (1.0 - smin**pp) / pp - (1.0 - smin ** (a + mu - 1.0)) / (4.0 * (a + mu - 1.0)) + tail_one
        I2 = s * np.where(s <= 1.0, i2_in, tail_out)
    unit = dl * lam**pp
    return unit * I1, unit * I2


def riesz_moc_bound(xi: float, m2: Moc, alpha: float, F0_norm: float, rho_bar: float,
                    C4t: float, C0: float) -> QuadResult:
    """C4t (I1 + I2) + C0 rho_bar |F0| xi, with I1, I2 by adaptive quadrature."""
    if not 1.0 < alpha < 2.0:
        raise ValueError("the Riesz bound needs 1 < alpha < 2")
    I1, I2 = riesz_integrals(xi, m2, alpha)
    lin = C0 * rho_bar * F0_norm * xi
    return QuadResult(C4t * (I1.value + I2.value) + lin, C4t * (I1.error + I2.error), 0)


def riesz_weight(m2: Moc, alpha: float, F0_norm: float, rho_bar: float, C4t: float, C0: float):
    """Density-increment majorant eta -> C4t (I1+I2)(eta) + C0 rho_bar |F0| eta (closed form)."""

    def W(eta):
        I1, I2 = riesz_integrals_closed_form(eta, m2, alpha)
        return C4t * (I1 + I2) + C0 * rho_bar * F0_norm * np.asarray(eta, float)

    return W
