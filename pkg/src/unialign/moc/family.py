"""The two-branch modulus-of-continuity family and the coupled (rho, u) pair.

    omega(xi) = delta * (s - s**(1+mu) / 4)        s = xi / lam <= 1
    omega(xi) = delta * (3/4 + log(s) / 2)          s > 1

Scales can be astronomically small (lam ~ exp(-1e4) is routine for the
parameter selector), so a Moc carries ``log_lam`` and every evaluation goes
through log-space when the ratio xi / lam is not representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..grid import ScalarField, gradient_sup


@dataclass(frozen=True)
class Moc:
    delta: float
    mu: float
    log_lam: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not np.isfinite(self.log_lam):
            raise ValueError("lambda must be positive and finite")

    @classmethod
    def with_lambda(cls, delta: float, mu: float, lam: float) -> "Moc":
        if not lam > 0:
            raise ValueError("lambda must be positive")
        return cls(float(delta), float(mu), math.log(lam))

    @property
    def lam(self) -> float:
        """lambda itself; 0.0 when it underflows (use ``log_lam`` then)."""
        return math.exp(self.log_lam)

    def scaled(self, delta: float) -> "Moc":
        return Moc(float(delta), self.mu, self.log_lam)

    # -- pointwise values ----------------------------------------------------
    def __call__(self, xi):
        return moc_eval(self, xi)

    def deriv(self, xi):
        xi = np.asarray(xi, dtype=float)
        lam = self.lam
        s = xi / lam
        p = 1.0 + self.mu
        with np.errstate(over="ignore", divide="ignore"):
            inner = self.delta / lam * (1.0 - p * s**self.mu / 4.0)
            outer = self.delta / (2.0 * xi)
        return np.where(s <= 1.0, inner, outer)

    def deriv2(self, xi):
        xi = np.asarray(xi, dtype=float)
        lam = self.lam
        s = xi / lam
        p = 1.0 + self.mu
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            inner = -self.delta / lam**2 * p * self.mu * s ** (self.mu - 1.0) / 4.0
            outer = -self.delta / (2.0 * xi**2)
        return np.where(s <= 1.0, inner, outer)

    # -- accurate differences -------------------------------------------------
    def inc(self, base, h):
        """omega(base + h) - omega(base) without cancellation (base > 0, base + h >= 0)."""
        base = np.asarray(base, dtype=float)
        h = np.asarray(h, dtype=float)
        lam = self.lam
        end = base + h
        b_in = base <= lam
        e_in = end <= lam
        same = b_in == e_in
        out_same = np.where(b_in, self._inc_power(base, h), self._inc_log(base, h))
        # straddling the kink: split the increment at lam
        to_lam = (lam - base)
        from_lam = (base - lam) + h
        first = np.where(b_in, self._inc_power(base, to_lam), self._inc_log(base, to_lam))
        second = np.where(e_in, self._inc_power(lam, from_lam), self._inc_log(lam, from_lam))
        return np.where(same, out_same, first + second)

    def _inc_power(self, base, h):
        lam = self.lam
        p = 1.0 + self.mu
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            sb = base / lam
            t = h / np.where(base > 0, base, 1.0)
            powdiff = np.where(
                base > 0,
                sb**p * np.expm1(p * np.log1p(np.maximum(t, -1.0))),
                np.abs(h / lam) ** p,
            )
            val = self.delta * (h / lam - powdiff / 4.0)
        return np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)

    def _inc_log(self, base, h):
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 0.5 * self.delta * np.log1p(h / base)
        return np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)

    def second_diff(self, xi, h):
        """2 omega(xi) - omega(xi + h) - omega(xi - h) for 0 <= h <= xi, >= 0 by concavity."""
        xi = np.asarray(xi, dtype=float)
        h = np.asarray(h, dtype=float)
        lam = self.lam
        t = h / xi
        p = 1.0 + self.mu
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_branch = -0.5 * self.delta * np.log1p(-(t**2))
            series = np.zeros_like(t)
            t2 = t**2
            term = np.ones_like(t)
            for k in range(1, 9):
                term = term * t2
                series = series + _binom(p, 2 * k) * term
            pw = np.where(
                t < 1e-2,
                2.0 * series,
                np.expm1(p * np.log1p(t)) + np.expm1(p * np.log1p(-np.minimum(t, 1.0))),
            )
            power_branch = 0.25 * self.delta * (xi / lam) ** p * pw
            generic = -self.inc(xi, h) - self.inc(xi, -h)
        lo_in = (xi + h) <= lam
        hi_out = (xi - h) > lam
        return np.where(lo_in, power_branch, np.where(hi_out, log_branch, generic))


def _binom(p: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= (p - j) / (j + 1)
    return out


def moc_eval(m: Moc, xi):
    """omega(xi) for xi > 0; scalar in, scalar out."""
    arr = np.asarray(xi, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("xi must be positive")
    with np.errstate(divide="ignore"):
        log_s = np.log(arr) - m.log_lam
    with np.errstate(over="ignore"):
        s = np.exp(np.minimum(log_s, 0.0))
    inner = m.delta * (s - s ** (1.0 + m.mu) / 4.0)
    outer = m.delta * (0.75 + 0.5 * log_s)
    out = np.where(log_s <= 0.0, inner, outer)
    return float(out) if np.ndim(xi) == 0 else out


@dataclass(frozen=True)
class MocPair:
    """omega1 (density) and omega2 (velocity) with delta1 = kappa*delta2."""

    omega1: Moc
    omega2: Moc
    kappa: float
    c0: float = 0.0
    rho_bar: float = float("nan")
    V0: float = float("nan")

    def __post_init__(self):
        if self.omega1.log_lam != self.omega2.log_lam or self.omega1.mu != self.omega2.mu:
            raise ValueError("omega1 and omega2 must share lambda and mu")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0, 1]")
        if not math.isclose(self.omega1.delta, self.kappa * self.omega2.delta, rel_tol=1e-12):
            raise ValueError("delta1 must equal kappa*delta2")
        if self.c0 < 0:
            raise ValueError("c0 must be nonnegative")

    @classmethod
    def build(cls, delta2: float, kappa: float, mu: float, log_lam: float, c0: float = 0.0,
              rho_bar: float = float("nan"), V0: float = float("nan")) -> "MocPair":
        w2 = Moc(float(delta2), float(mu), float(log_lam))
        w1 = Moc(float(kappa) * float(delta2), float(mu), float(log_lam))
        return cls(w1, w2, float(kappa), float(c0), float(rho_bar), float(V0))

    @property
    def log_lam(self) -> float:
        return self.omega1.log_lam

    @property
    def mu(self) -> float:
        return self.omega1.mu

    @property
    def log_Xi1(self) -> float:
        return self.log_lam + 2.0 * self.rho_bar / self.omega1.delta - 1.5

    @property
    def log_Xi2(self) -> float:
        return self.log_lam + 2.0 * self.V0 / self.omega2.delta - 1.5

    @property
    def Xi1(self) -> float:
        return math.exp(min(self.log_Xi1, 700.0))

    @property
    def Xi2(self) -> float:
        return math.exp(min(self.log_Xi2, 700.0))

    def omega2_at(self, t: float) -> Moc:
        """The decayed velocity modulus exp(-c0 t) * omega2."""
        return self.omega2.scaled(self.omega2.delta * math.exp(-self.c0 * t))

    def as_dict(self) -> dict:
        return {
            "delta1": self.omega1.delta,
            "delta2": self.omega2.delta,
            "kappa": self.kappa,
            "mu": self.mu,
            "log_lambda": self.log_lam,
            "lambda": self.omega1.lam,
            "c0": self.c0,
            "rho_bar": self.rho_bar,
            "V0": self.V0,
            "log_Xi1": self.log_Xi1,
            "log_Xi2": self.log_Xi2,
        }


def admissible_lambda(f: ScalarField, delta: float) -> float:
    """Largest lambda for which f obeys omega_lambda^{delta,mu} by the data lemma.

    Returns ``inf`` for constant f.  The bound is applied to f as given; pass a
    recentred field (f - (max+min)/2) when only increments matter.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    sup = f.sup()
    grad = gradient_sup(f)
    if grad <= 1e-14 * max(sup, 1.0):
        return math.inf
    return 2.0 * sup / grad * math.exp(-4.0 * sup / delta)


def log_admissible_lambda(f: ScalarField, delta: float) -> float:
    sup = f.sup()
    grad = gradient_sup(f)
    if grad <= 1e-14 * max(sup, 1.0):
        return math.inf
    return math.log(2.0 * sup / grad) - 4.0 * sup / delta
