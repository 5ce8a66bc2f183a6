"""Double-precision reference values for the d = 2 integrals (scipy.integrate).

Plain nested adaptive quadrature of the defining polar integrals; slower
and less accurate than the production routines, but independent of them.
"""
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma


def omega(m, x):
    lam = math.exp(m.log_lam)
    s = x / lam
    if s <= 1:
        return m.delta * (s - s ** (1 + m.mu) / 4)
    return m.delta * (0.75 + 0.5 * math.log(s))


def laplacian_2d(m, x):
    """Delta of the radial function w(|z|) at |z| = x, from the closed-form derivatives."""
    lam = math.exp(m.log_lam)
    s = x / lam
    if s <= 1:
        d1 = m.delta / lam * (1 - (1 + m.mu) * s**m.mu / 4)
        d2 = -m.delta / lam**2 * (1 + m.mu) * m.mu * s ** (m.mu - 1) / 4
    else:
        d1, d2 = m.delta / (2 * x), -m.delta / (2 * x * x)
    return d2 + d1 / x


def c_alpha(alpha, d):
    return 2**alpha * gamma((d + alpha) / 2) / (math.pi ** (d / 2) * abs(gamma(-alpha / 2)))


def _theta_kinks(xi, s, lam):
    c = (xi * xi + s * s - lam * lam) / (2 * xi * s)
    return [math.acos(c)] if -1 < c < 1 else []


def A_2d(xi, m, alpha):
    """c_alpha p.v. int_{R^2} [w(|xi e1 - z|) - w(xi)] |z|^{-2-alpha} dz, symmetrised in z."""
    lam = math.exp(m.log_lam)
    w_xi = omega(m, xi)

    def ring(s):
        def g(th):
            a = math.hypot(xi - s * math.cos(th), s * math.sin(th))
            b = math.hypot(xi + s * math.cos(th), s * math.sin(th))
            return 0.5 * (omega(m, a) + omega(m, b)) - w_xi
        pts = sorted(set(_theta_kinks(xi, s, lam) + [math.pi - t for t in _theta_kinks(xi, s, lam)]))
        v, _ = quad(g, 0, math.pi, points=pts or None, limit=400, epsabs=0, epsrel=1e-11)
        return 2 * v * s ** (-1 - alpha)

    # below c the ring average is w(xi) + s^2/4 Delta w + O(s^4); larger c keeps
    # the roundoff of the symmetrised integrand away from the s^(-1-alpha) weight
    c = 1e-3 * min(xi, abs(xi - lam))
    brk = sorted({xi, abs(xi - lam), xi + lam, lam})
    edges = [c] + [b for b in brk if b > c] + [1e3 * max(xi, lam)]
    total = 2 * math.pi / 4 * laplacian_2d(m, xi) * c ** (2 - alpha) / (2 - alpha)
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(ring, a, b, limit=400, epsabs=0, epsrel=1e-10)[0]
    total += quad(ring, edges[-1], np.inf, limit=400, epsabs=0, epsrel=1e-10)[0]
    return c_alpha(alpha, 2) * total
