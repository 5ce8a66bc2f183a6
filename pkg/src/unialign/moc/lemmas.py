"""Quadrature-versus-closed-form checks of the modulus-of-continuity estimates.

Each estimate has the form ``value(xi) <= C * shape(xi)`` (or ``>=`` for the
dissipation lower bound) with a constant C that is only known to exist.  We
fit C as an envelope over a sweep, then verify the inequality on parameter
combinations that were not used for fitting.

Estimate ids:

``dissipation``        D(xi) >= C1 * shape                         (all alpha)
``drift``              A(xi) <= C2 * shape                         (all alpha)
``cross``              K-bar(xi) <= C3 * shape on (0, Xi2]         (all alpha)
``cross_subcritical``  K-bar with the Riesz majorant <= C4 * shape (1 < alpha < 2)
``riesz``              Riesz integrals <= 2/((alpha-1)(2-alpha)) w2(xi) xi^(alpha-1),
                       xi > lambda, no fitted constant             (1 < alpha < 2)
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .family import Moc, MocPair
from .integrals import (A_quadrature, K_bar_quadrature, dissipation_D_quadrature,
                        riesz_integrals_closed_form, riesz_moc_bound, riesz_weight)
from .quadrature import QuadratureError

LEMMAS = ("dissipation", "drift", "cross", "cross_subcritical", "riesz")
N_XI = 48
VERIFY_N_XI = 64
SPAN = 1e3
DEFAULT_SIGMA = 0.75
CSV_COLUMNS = ("lemma", "alpha", "d", "delta1", "delta2", "mu", "lambda", "xi", "quad_value",
               "bound_value", "margin", "quad_err", "pass")


class ScalingError(RuntimeError):
    """A quadrature/shape ratio was infinite, zero or NaN."""

    def __init__(self, lemma: str, xi: float, ratio: float):
        self.lemma, self.xi, self.ratio = lemma, xi, ratio
        super().__init__(f"{lemma}: degenerate ratio {ratio!r} at xi = {xi:.6g}")


def regime_mu(alpha: float, sigma: float = DEFAULT_SIGMA) -> float:
    """mu used in each regime: (sigma-1+alpha)/2 below 1, 1/2 at 1, alpha/2 above."""
    if alpha < 1.0:
        if not 1.0 - alpha < sigma < 1.0:
            raise ValueError("sigma must lie in (1 - alpha, 1)")
        return 0.5 * (sigma - 1.0 + alpha)
    if alpha == 1.0:
        return 0.5
    return 0.5 * alpha


def lemmas_for(alpha: float) -> tuple[str, ...]:
    if alpha > 1.0:
        return LEMMAS
    return ("dissipation", "drift", "cross")


@dataclass(frozen=True)
class SweepPoint:
    """One (delta2, lambda, mu, kappa) combination.  delta1 = kappa * delta2.

    V0 defaults to the value that puts Xi2 at ``SPAN * lambda`` so the cross
    estimate covers the whole outer part of the xi grid.
    """

    delta: float
    lam: float
    mu: float
    kappa: float = 0.3
    rho_bar: float = 1.5
    F0_norm: float = 1.0

    @property
    def V0(self) -> float:
        return 0.5 * self.delta * (math.log(SPAN) + 1.5)

    def moc(self) -> Moc:
        return Moc.with_lambda(self.delta, self.mu, self.lam)

    def pair(self) -> MocPair:
        return MocPair.build(self.delta, self.kappa, self.mu, math.log(self.lam),
                             rho_bar=self.rho_bar, V0=self.V0)

    def doubled(self) -> "SweepPoint":
        return replace(self, delta=2.0 * self.delta)


def fit_points(alpha: float) -> tuple[SweepPoint, ...]:
    mu = regime_mu(alpha)
    return (SweepPoint(1.0, 1.0, mu), SweepPoint(0.25, 0.05, 0.5 * mu, kappa=0.5))


def verify_point(alpha: float) -> SweepPoint:
    return SweepPoint(0.6, 0.003, regime_mu(alpha), kappa=0.2)


def xi_grid(lam: float, n: int = N_XI, span: float = SPAN) -> np.ndarray:
    """Log-spaced xi in [lam/span, lam*span]; an even n never lands on xi = lam."""
    e = math.log10(span)
    return lam * np.logspace(-e, e, n)


@dataclass(frozen=True)
class EmpiricalConstants:
    alpha: float
    d: int
    C1: float
    C2: float
    C3: float
    C4: float = float("nan")
    C4t: float = float("nan")
    C0: float = float("nan")
    provenance: str = ""

    def __post_init__(self):
        for name in ("C1", "C2", "C3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if self.alpha > 1.0:
            for name in ("C4", "C4t", "C0"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v > 0):
                    raise ValueError(f"{name} must be finite and positive for alpha > 1, got {v}")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalConstants":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


# -- closed-form shapes (constant normalised out) ------------------------------------

def dissipation_shape(xi, m: Moc, alpha: float):
    xi = np.asarray(xi, float)
    mu, lam, dl = m.mu, m.lam, m.delta
    inner = mu * (mu + 1.0) * 2.0 ** (alpha - 1.0) / (4.0 * (2.0 - alpha)) * dl * lam ** (-1.0 - mu) \
        * xi ** (1.0 + mu - alpha)
    outer = 2.0 ** (alpha - 1.0) / alpha * m(xi) * xi ** (-alpha)
    return np.where(xi <= lam, inner, outer)


def drift_shape(xi, m: Moc, alpha: float):
    xi = np.asarray(xi, float)
    lam = m.lam
    return np.where(xi <= lam, m.delta * lam ** (-m.mu) * xi ** (m.mu - alpha), m.delta * xi ** (-alpha))


def cross_shape(xi, pair: MocPair, alpha: float):
    xi = np.asarray(xi, float)
    w1, w2 = pair.omega1, pair.omega2
    lam = w1.lam
    inner = w1.delta * w2.delta * lam ** -2.0 * xi ** (2.0 - alpha)
    if alpha > 1.0:
        lead = w2.delta * (xi / lam) ** (alpha - 1.0) + pair.V0
    else:
        lead = w2.delta + pair.V0
    outer = lead * w1(xi) * xi ** (-alpha)
    return np.where(xi <= lam, inner, outer)


def cross_subcritical_shape(xi, pair: MocPair, alpha: float, F0_norm: float):
    w2 = pair.omega2
    lam = w2.lam
    wx = w2(np.asarray(xi, float))
    return pair.rho_bar * F0_norm * wx * lam ** (1.0 - alpha) + pair.V0 * wx / lam


def riesz_shape(xi, m: Moc, alpha: float):
    xi = np.asarray(xi, float)
    return 2.0 / ((alpha - 1.0) * (2.0 - alpha)) * m(xi) * xi ** (alpha - 1.0)


# -- quadrature sweeps ---------------------------------------------------------------

@dataclass
class SweepValues:
    xi: np.ndarray
    value: np.ndarray
    error: np.ndarray
    shape: np.ndarray
    failures: list = field(default_factory=list)


def _collect(fn, xis):
    vals, errs, fails = [], [], []
    for x in xis:
        try:
            r = fn(float(x))
            vals.append(r.value)
            errs.append(r.error)
        except QuadratureError as exc:
            vals.append(float("nan"))
            errs.append(float("inf"))
            fails.append({"xi": float(x), "error": str(exc)})
    return np.asarray(vals), np.asarray(errs), fails


def lemma_domain(lemma: str, xi: np.ndarray, point: SweepPoint) -> np.ndarray:
    """Mask of xi values where an estimate is claimed."""
    lam = point.lam
    if lemma == "cross":
        return xi <= point.pair().Xi2 * (1 + 1e-12)
    if lemma == "cross_subcritical":
        return (xi > lam) & (xi <= point.pair().Xi2 * (1 + 1e-12))
    if lemma == "riesz":
        return xi > lam
    return np.ones(xi.shape, bool)


def estimate_functions(lemma: str, alpha: float, d: int, point: SweepPoint,
                       consts: EmpiricalConstants | None = None, part: str | None = None):
    """(quadrature xi -> QuadResult, shape xi -> array) for one estimate.

    For ``cross_subcritical`` the density majorant is linear in its two
    pieces; ``part="F"`` keeps only the C0 rho_bar |F0| eta piece and compares
    with the rho_bar |F0| term of the shape, ``part="V"`` keeps the Riesz piece
    and compares with the V0 term.  ``part=None`` is the full estimate.
    """
    if lemma not in LEMMAS:
        raise ValueError(f"unknown estimate {lemma!r}; choose from {LEMMAS}")
    if lemma in ("cross_subcritical", "riesz") and not 1.0 < alpha < 2.0:
        raise ValueError(f"{lemma} needs 1 < alpha < 2")
    m = point.moc()
    if lemma == "dissipation":
        return (lambda x: dissipation_D_quadrature(x, m, alpha)), (lambda x: dissipation_shape(x, m, alpha))
    if lemma == "drift":
        return (lambda x: A_quadrature(x, m, alpha, d)), (lambda x: drift_shape(x, m, alpha))
    if lemma == "cross":
        pair = point.pair()
        return (lambda x: K_bar_quadrature(x, pair, alpha, d)), (lambda x: cross_shape(x, pair, alpha))
    if lemma == "cross_subcritical":
        if consts is None:
            raise ValueError("cross_subcritical needs fitted C4t and C0")
        pair = point.pair()
        c4t = 0.0 if part == "F" else consts.C4t
        c0 = 0.0 if part == "V" else consts.C0
        W = riesz_weight(m, alpha, point.F0_norm, point.rho_bar, c4t, c0)
        F_term = 0.0 if part == "V" else 1.0
        V_term = 0.0 if part == "F" else 1.0
        w2 = pair.omega2

        def shape(x):
            wx = w2(np.asarray(x, float))
            return (F_term * point.rho_bar * point.F0_norm * wx * point.lam ** (1.0 - alpha)
                    + V_term * pair.V0 * wx / point.lam)

        return (lambda x: K_bar_quadrature(x, pair, alpha, d, weight=W)), shape
    # the constants C4t and C0 enter both sides identically; unit C4t and zero
    # C0 keep the check constant-free when none are fitted
    c4t = 1.0 if consts is None else consts.C4t
    c0 = 0.0 if consts is None else consts.C0

    def shape(x):
        x = np.asarray(x, float)
        return c4t * riesz_shape(x, m, alpha) + c0 * point.rho_bar * point.F0_norm * x

    return (lambda x: riesz_moc_bound(x, m, alpha, point.F0_norm, point.rho_bar, c4t, c0)), shape


def sweep_values(lemma: str, alpha: float, d: int, point: SweepPoint, xi=None,
                 consts: EmpiricalConstants | None = None, part: str | None = None) -> SweepValues:
    """Quadrature values and normalised shapes of one estimate over xi."""
    fn, shape_fn = estimate_functions(lemma, alpha, d, point, consts, part)
    xi = xi_grid(point.lam) if xi is None else np.asarray(xi, float)
    xi = xi[lemma_domain(lemma, xi, point)]
    vals, errs, fails = _collect(fn, xi)
    return SweepValues(xi, vals, errs, np.asarray(shape_fn(xi), float), fails)


def _ratio(lemma, fn, shape_fn, x):
    r = fn(x)
    s = float(shape_fn(np.array(x)))
    if lemma == "dissipation":
        return (r.value - r.error) / s
    return (r.value + r.error) / s


def envelope_constant(lemma: str, sv: SweepValues, fn=None, shape_fn=None) -> tuple[float, float]:
    """(constant, xi attaining it) with quadrature error folded in.

    The grid extreme is polished by a bounded scalar search in log xi between
    its neighbours when the quadrature callables are supplied, so the constant
    is the envelope over the continuum of the swept range, not only its nodes.
    """
    lower = lemma == "dissipation"
    ratio = ((sv.value - sv.error) if lower else (sv.value + sv.error)) / sv.shape
    bad = ~np.isfinite(ratio) | ((ratio <= 0) if lower else False)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise ScalingError(lemma, float(sv.xi[j]), float(ratio[j]))
    i = int(np.argmin(ratio) if lower else np.argmax(ratio))
    c, at = float(ratio[i]), float(sv.xi[i])
    if fn is not None and sv.xi.size > 2:
        lo = math.log(sv.xi[max(i - 1, 0)])
        hi = math.log(sv.xi[min(i + 1, sv.xi.size - 1)])
        sign = 1.0 if lower else -1.0

        def objective(t):
            try:
                return sign * _ratio(lemma, fn, shape_fn, math.exp(t))
            except QuadratureError:
                return math.inf
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
        if np.isfinite(res.fun) and res.fun < sign * c:
            c, at = float(sign * res.fun), math.exp(float(res.x))
    if not c > 0:
        # an upper-envelope constant for an estimate whose quadrature is never
        # positive; any positive constant works, report the smallest scale
        c = float(np.max(np.abs(sv.error / sv.shape))) or np.finfo(float).tiny
    return c, at


def _fit_one(lemma, alpha, d, point, consts=None, part=None):
    fn, shape_fn = estimate_functions(lemma, alpha, d, point, consts, part)
    sv = sweep_values(lemma, alpha, d, point, consts=consts, part=part)
    return envelope_constant(lemma, sv, fn, shape_fn)


# -- spectral fits of the Riesz-lemma constants -------------------------------------

def _kernel_l1(alpha: float, d: int, n: int) -> float:
    from ..grid import make_grid

    grid = make_grid(d, n)
    k = grid.kmag
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(k > 0, 1j * grid.wavenumbers[0] * k ** (-alpha), 0.0)
    kernel = np.fft.ifftn(sym).real / grid.cell_volume
    return float(np.sum(np.abs(kernel)) * grid.cell_volume)


def fit_C0(alpha: float, d: int, n: int | None = None) -> float:
    """L1 norm of the periodic kernel of d1 Lambda^-alpha, from its Fourier series.

    The lattice sum misses the integrable singularity at the origin and
    converges slowly in n, so three doublings are Aitken-extrapolated.  An
    explicit ``n`` returns the raw lattice value.
    """
    if n is not None:
        return _kernel_l1(alpha, d, n)
    base = 2**12 if d == 1 else 512
    c1, c2, c3 = (_kernel_l1(alpha, d, base * 2**j) for j in range(3))
    d1, d2 = c2 - c1, c3 - c2
    if not (d1 > 0 and d2 > 0 and d1 > d2):
        return c3
    return c3 + d2 * d2 / (d1 - d2)


def fit_C4t(alpha: float, d: int, lams=(0.05, 0.1), deltas=(1.0,), n: int | None = None) -> tuple[float, float]:
    """sup over cusp test data u = w2(|x - c|) of |increment of d1 Lambda^-alpha u| / (I1 + I2).

    Returns (C4t, xi attaining it).
    """
    from ..grid import ScalarField, make_grid
    from .scan import max_increments, shift_set

    if not 1.0 < alpha < 2.0:
        raise ValueError("the Riesz constant needs 1 < alpha < 2")
    n = n or (2**14 if d == 1 else 256)
    grid = make_grid(d, n)
    mu = regime_mu(alpha)
    shifts = shift_set(grid)
    best, at = 0.0, float("nan")
    sym = None
    for lam in lams:
        for dl in deltas:
            m = Moc.with_lambda(dl, mu, lam)
            c = 0.5 * grid.length
            dist2 = sum(np.minimum(np.abs(x - c), grid.length - np.abs(x - c)) ** 2 for x in grid.coords)
            r = np.sqrt(dist2)
            u = np.where(r > 0, m(np.maximum(r, 1e-300)), 0.0)
            if sym is None:
                k = grid.kmag
                with np.errstate(divide="ignore", invalid="ignore"):
                    sym = np.where(k > 0, 1j * grid.wavenumbers[0] * k ** (-alpha), 0.0)
            rho = np.fft.ifftn(sym * np.fft.fftn(u)).real
            f = ScalarField(grid, rho)
            M = np.maximum(max_increments(f, shifts), max_increments(ScalarField(grid, -rho), shifts))
            I1, I2 = riesz_integrals_closed_form(shifts.lengths, m, alpha)
            ratio = M / (I1 + I2)
            i = int(np.argmax(ratio))
            if ratio[i] > best:
                best, at = float(ratio[i]), float(shifts.lengths[i])
    return best, at


# -- fitting and verification ---------------------------------------------------------

def fit_empirical_constants(alpha: float, d: int, points=None, C4t: float | None = None,
                            C0: float | None = None) -> EmpiricalConstants:
    """Envelope constants over the given sweep points (``fit_points(alpha)`` by default)."""
    points = tuple(points or fit_points(alpha))
    found = {}
    for lemma, key in (("dissipation", "C1"), ("drift", "C2"), ("cross", "C3")):
        cs = [_fit_one(lemma, alpha, d, p)[0] for p in points]
        found[key] = min(cs) if lemma == "dissipation" else max(cs)
    extra = {}
    if alpha > 1.0:
        c4t = fit_C4t(alpha, d)[0] if C4t is None else C4t
        c0 = fit_C0(alpha, d) if C0 is None else C0
        partial = EmpiricalConstants(alpha, d, found["C1"], found["C2"], found["C3"], 1.0, c4t, c0)
        cs = [_fit_one("cross_subcritical", alpha, d, p, partial, part)[0]
              for p in points for part in ("F", "V")]
        extra = {"C4": max(cs), "C4t": c4t, "C0": c0}
    desc = "; ".join(f"delta={p.delta:g} lambda={p.lam:g} mu={p.mu:g} kappa={p.kappa:g}" for p in points)
    return EmpiricalConstants(alpha, d, found["C1"], found["C2"], found["C3"],
                              provenance=f"{N_XI} log-spaced xi in [lambda/{SPAN:g}, {SPAN:g} lambda]"
                                         f" plus local refinement; {desc}",
                              **extra)


@dataclass
class LemmaReport:
    lemma: str
    alpha: float
    d: int
    delta1: float
    delta2: float
    mu: float
    lam: float
    xi: np.ndarray
    quad_value: np.ndarray
    bound_value: np.ndarray
    margin: np.ndarray
    quad_err: np.ndarray
    passed: bool
    failures: list = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return int(np.count_nonzero(~(self.margin >= -self.quad_err)))

    def rows(self):
        for i in range(self.xi.size):
            yield {
                "lemma": self.lemma, "alpha": self.alpha, "d": self.d, "delta1": self.delta1,
                "delta2": self.delta2, "mu": self.mu, "lambda": self.lam, "xi": float(self.xi[i]),
                "quad_value": float(self.quad_value[i]), "bound_value": float(self.bound_value[i]),
                "margin": float(self.margin[i]), "quad_err": float(self.quad_err[i]),
                "pass": bool(self.margin[i] >= -self.quad_err[i]),
            }

    def as_dict(self) -> dict:
        return {
            "lemma": self.lemma, "alpha": self.alpha, "d": self.d,
            "params": {"delta1": self.delta1, "delta2": self.delta2, "mu": self.mu, "lambda": self.lam},
            "xi_grid": self.xi.tolist(), "quad_value": self.quad_value.tolist(),
            "bound_value": self.bound_value.tolist(), "margin": self.margin.tolist(),
            "quad_err": self.quad_err.tolist(), "pass": self.passed,
            "n_violations": self.n_violations, "failures": self.failures,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.as_dict(), indent=2, allow_nan=True))
        return path


def write_reports_csv(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rep in reports:
            for row in rep.rows():
                w.writerow(row)
    return path


def verify_lemma(lemma: str, alpha: float, d: int, point: SweepPoint, consts: EmpiricalConstants,
                 xi=None) -> LemmaReport:
    """Check one estimate at every xi; margin >= -quad_err everywhere means pass."""
    sv = sweep_values(lemma, alpha, d, point, xi=xi, consts=consts)
    if lemma == "dissipation":
        bound = consts.C1 * sv.shape
        margin = sv.value - bound
    elif lemma == "drift":
        bound = consts.C2 * sv.shape
        margin = bound - sv.value
    elif lemma == "cross":
        bound = consts.C3 * sv.shape
        margin = bound - sv.value
    elif lemma == "cross_subcritical":
        bound = consts.C4 * sv.shape
        margin = bound - sv.value
    else:
        bound = sv.shape
        margin = bound - sv.value
    ok = bool(np.all(margin >= -sv.error)) and not sv.failures and sv.xi.size > 0
    return LemmaReport(lemma, alpha, d, point.kappa * point.delta, point.delta, point.mu, point.lam,
                       sv.xi, sv.value, bound, margin, sv.error, ok, sv.failures)


def domain_grid(lemma: str, point: SweepPoint, n: int = VERIFY_N_XI, span: float = SPAN) -> np.ndarray:
    """n log-spaced xi inside the estimate's domain, clipped to [lam/span, lam*span].

    Endpoints are excluded so no point sits on the kink xi = lam.
    """
    lam = point.lam
    lo = lam if lemma in ("cross_subcritical", "riesz") else lam / span
    hi = min(lam * span, point.pair().Xi2) if lemma in ("cross", "cross_subcritical") else lam * span
    if not hi > lo:
        raise ValueError(f"{lemma}: empty domain ({lo:g}, {hi:g}]")
    full = np.geomspace(lo, hi, n + 2)[1:-1]
    if lemma not in ("cross_subcritical", "riesz"):
        full = full[np.abs(full / lam - 1.0) > 1e-9]
    return full


def verify_all(alpha: float, d: int, consts: EmpiricalConstants, point: SweepPoint | None = None,
               xi=None, n_xi: int = VERIFY_N_XI, span: float = SPAN) -> list[LemmaReport]:
    """Every estimate for this alpha; without ``xi`` each gets n_xi points in its own domain."""
    point = point or verify_point(alpha)
    return [verify_lemma(lem, alpha, d, point, consts,
                         xi=domain_grid(lem, point, n_xi, span) if xi is None else xi)
            for lem in lemmas_for(alpha)]


def linearity_check(alpha: float, d: int, consts: EmpiricalConstants, rtol: float = 0.01) -> dict:
    """Refit on the sweep with every delta doubled; constants must agree to ``rtol``."""
    doubled = tuple(p.doubled() for p in fit_points(alpha))
    again = fit_empirical_constants(alpha, d, doubled, C4t=consts.C4t if alpha > 1 else None,
                                    C0=consts.C0 if alpha > 1 else None)
    names = ("C1", "C2", "C3") + (("C4",) if alpha > 1 else ())
    rel = {k: abs(getattr(again, k) - getattr(consts, k)) / abs(getattr(consts, k)) for k in names}
    return {"refit": again.as_dict(), "rel_change": rel, "pass": all(v <= rtol for v in rel.values())}
