"""Vectorised globally adaptive Gauss-Kronrod (7/15) quadrature.

The integrand is called once per refinement sweep on all pending nodes, so a
numpy-vectorised integrand costs a handful of array evaluations rather than
one Python call per node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 15-point Kronrod nodes (non-negative half) and weights, with the embedded
# 7-point Gauss weights on the odd-indexed nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
W_GAUSS = np.zeros(15)
_gauss_idx = np.array([1, 3, 5, 7, 9, 11, 13])
W_GAUSS[_gauss_idx] = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_intervals: int

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(self.value + other.value, self.error + other.error,
                          self.n_intervals + other.n_intervals)

    def scale(self, c: float) -> "QuadResult":
        return QuadResult(c * self.value, abs(c) * self.error, self.n_intervals)


def _rule(f, a: np.ndarray, b: np.ndarray):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    y = np.asarray(f(x), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand returned a non-finite value")
    k = half * (y @ W_KRONROD)
    g = half * (y @ W_GAUSS)
    return k, np.abs(k - g)


def adaptive_quad(f, breakpoints, rtol: float = 1e-10, atol: float = 0.0,
                  max_intervals: int = 200_000) -> QuadResult:
    """Integrate ``f`` over [breakpoints[0], breakpoints[-1]].

    Interior breakpoints seed the initial partition (place them at kinks and
    use geometric spacing toward integrable singularities).  Refinement bisects
    every interval whose error estimate exceeds its equal share of the target.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        return QuadResult(0.0, 0.0, 0)
    a, b = pts[:-1], pts[1:]
    k, e = _rule(f, a, b)
    done_val = 0.0
    done_err = 0.0
    n_done = 0
    while True:
        total = done_val + float(np.sum(k))
        err = done_err + float(np.sum(e))
        tol = max(atol, rtol * abs(total))
        if err <= tol:
            return QuadResult(total, err, n_done + a.size)
        if n_done + a.size > max_intervals:
            raise QuadratureError(
                f"no convergence after {n_done + a.size} intervals: estimate {total:.6e}, error {err:.3e}"
            )
        share = tol / max(a.size, 1)
        split = e > 0.5 * share
        if not np.any(split):
            split = e >= np.max(e)
        keep = ~split
        done_val += float(np.sum(k[keep]))
        done_err += float(np.sum(e[keep]))
        n_done += int(np.count_nonzero(keep))
        a_s, b_s = a[split], b[split]
        m = 0.5 * (a_s + b_s)
        a = np.concatenate([a_s, m])
        b = np.concatenate([m, b_s])
        k, e = _rule(f, a, b)


def geometric_points(lo: float, hi: float, ratio: float = 2.0) -> np.ndarray:
    """Points lo, lo*r, lo*r^2, ... up to hi (both included), lo > 0."""
    if not (lo > 0 and hi > lo):
        return np.array([lo, hi]) if hi > lo else np.array([lo])
    n = int(np.ceil(np.log(hi / lo) / np.log(ratio)))
    return np.unique(np.concatenate([lo * ratio ** np.arange(n), [hi]]))


def graded_around(center: float, lo: float, hi: float, levels: int = 12) -> np.ndarray:
    """Points clustering geometrically at ``center`` from both sides inside (lo, hi)."""
    out = [center]
    for side, limit in ((-1.0, lo), (1.0, hi)):
        width = abs(limit - center)
        if width <= 0:
            continue
        out.extend(center + side * width * 0.5 ** np.arange(1, levels + 1))
    pts = np.asarray(out)
    return pts[(pts >= lo) & (pts <= hi)]


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)
