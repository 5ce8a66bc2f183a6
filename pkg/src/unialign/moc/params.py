"""Choice of (delta1, delta2, kappa, lambda, mu) that makes every breakthrough
inequality strictly negative, plus a closed-loop certificate.

At a breakthrough separation xi the time derivative of the touching increment
is bounded by  -(dissipation) + (sum of positive terms).  After dividing by the
dissipation lower bound, each positive term becomes a ratio; the choice is
certified when, for each of the four inequalities

    rho_inner  (0 < xi <= lambda)          rho_outer  (lambda < xi <= Xi1)
    u_inner    (0 < xi <= lambda)          u_outer    (lambda < xi <= Xi2)

the ratios sum to at most 1/2 at every xi (a factor-two margin).

Budget: terms that do not depend on lambda get at most 1/4 (split evenly
between those driven by delta2 and those driven by kappa), and lambda is then
shrunk by bisection in log-space until the lambda-dependent rest fits in the
remaining 1/4.  Every lambda-dependent ratio is c * lambda^p * g(s) with p > 0
at fixed s = xi/lambda, so the total is monotone in lambda.

All work is in log lambda; lambda ~ exp(-1e4) is routine.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .family import MocPair
from .lemmas import EmpiricalConstants

MARGIN = 0.5
N_S = 1500
MIN_LOG_LAMBDA = -1e7


class Regime(str, enum.Enum):
    Subcritical = "Subcritical"
    Critical = "Critical"
    Supercritical = "Supercritical"

    @classmethod
    def for_alpha(cls, alpha: float) -> "Regime":
        if alpha > 1.0:
            return cls.Subcritical
        if alpha == 1.0:
            return cls.Critical
        return cls.Supercritical


@dataclass(frozen=True)
class SelectionInputs:
    rho_lower: float
    rho_upper: float
    V0: float
    F0_norm: float
    gradF0_norm: float
    H0_norm: float
    c0: float
    sigma: float | None = None
    u_Csigma: float | None = None
    # optional data bounds: half-oscillation and Lipschitz constant of rho0
    # and u0; when given, lambda is also capped so the data obey the moduli
    rho_half_osc: float | None = None
    rho_lip: float | None = None
    u_half_osc: float | None = None
    u_lip: float | None = None

    def __post_init__(self):
        if not 0 < self.rho_lower <= self.rho_upper:
            raise ValueError("need 0 < rho_lower <= rho_upper")
        for name in ("V0", "F0_norm", "gradF0_norm", "H0_norm", "c0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.V0 > 0:
            raise ValueError("V0 must be positive (constant velocity needs no modulus)")

    def as_dict(self) -> dict:
        return asdict(self)


class InfeasibleError(RuntimeError):
    """No admissible parameters; ``binding`` names the inequality and term."""

    def __init__(self, binding: str, detail: str, report: dict | None = None):
        self.binding = binding
        self.detail = detail
        self.report = report or {}
        super().__init__(f"infeasible: {binding}: {detail}")

    def as_dict(self) -> dict:
        return {"status": "infeasible", "binding": self.binding, "detail": self.detail, **self.report}


@dataclass
class Certificate:
    worst: dict           # inequality -> worst total ratio over xi
    worst_term: dict      # inequality -> (term, its ratio at the worst xi)
    worst_log_s: dict     # inequality -> log(xi/lambda) at the worst point
    passed: bool

    def as_dict(self) -> dict:
        return {"worst": self.worst, "worst_term": self.worst_term, "worst_log_s": self.worst_log_s,
                "pass": self.passed, "threshold": MARGIN}


@dataclass
class ParameterChoice:
    regime: Regime
    alpha: float
    pair: MocPair
    inputs: SelectionInputs
    consts: EmpiricalConstants
    certificate: Certificate
    notes: list = field(default_factory=list)

    @property
    def delta1(self) -> float:
        return self.pair.omega1.delta

    @property
    def delta2(self) -> float:
        return self.pair.omega2.delta

    @property
    def kappa(self) -> float:
        return self.pair.kappa

    @property
    def mu(self) -> float:
        return self.pair.mu

    @property
    def log_lam(self) -> float:
        return self.pair.log_lam

    def as_dict(self) -> dict:
        return {"regime": self.regime.value, "alpha": self.alpha, **self.pair.as_dict(),
                "inputs": self.inputs.as_dict(), "constants": self.consts.as_dict(),
                "certificate": self.certificate.as_dict(), "notes": self.notes}


def regime_mu(regime: Regime, alpha: float, sigma: float | None = None) -> float:
    if regime is Regime.Subcritical:
        return 0.5 * alpha
    if regime is Regime.Critical:
        return 0.5
    return 0.5 * (sigma - 1.0 + alpha)


def dissipation_coefficients(alpha: float, mu: float, C1: float, rho_lower: float) -> tuple[float, float]:
    """rho_lower * C1 * (inner, outer) prefactors of the dissipation lower bound."""
    inner = C1 * rho_lower * mu * (mu + 1.0) * 2.0 ** (alpha - 1.0) / (4.0 * (2.0 - alpha))
    outer = C1 * rho_lower * 2.0 ** (alpha - 1.0) / alpha
    return inner, outer


# -- the ratio terms ------------------------------------------------------------------

def _exp(x):
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(np.minimum(x, 700.0))


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def ratio_terms(regime: Regime, alpha: float, inp: SelectionInputs, consts: EmpiricalConstants,
                delta2: float, kappa: float, mu: float, log_lam: float, n_s: int = N_S) -> dict:
    """inequality -> (log s grid, {term: ratio array}) with every ratio divided by its dissipation.

    Evaluated exactly in s = xi/lambda, which keeps astronomically small
    lambda representable.
    """
    a = alpha
    delta1 = kappa * delta2
    Din, Dout = dissipation_coefficients(a, mu, consts.C1, inp.rho_lower)
    C2, C3 = consts.C2, consts.C3
    rb, F0, gF0, H0, c0, V0 = (inp.rho_upper, inp.F0_norm, inp.gradF0_norm, inp.H0_norm,
                               inp.c0, inp.V0)
    sup = regime is Regime.Supercritical
    usig = inp.u_Csigma if sup else None
    sig = inp.sigma if sup else None
    LL = log_lam

    log_E1 = 2.0 * rb / delta1 - 1.5
    log_E2 = 2.0 * V0 / delta2 - 1.5
    t_in = np.concatenate([np.linspace(-40.0, -5.0, 50), np.linspace(-5.0, 0.0, n_s)])

    def outer_grid(logE):
        if logE <= 0:
            return np.zeros(0)
        return np.unique(np.concatenate([np.linspace(1e-9, min(logE, 10.0), n_s // 2),
                                         np.linspace(0.0, logE, n_s)[1:]]))

    out = {}
    # -- inner region, s in (0, 1]
    s = _exp(t_in)
    w_in = s - s ** (1.0 + mu) / 4.0          # omega / delta
    dw_in = 1.0 - (1.0 + mu) * s**mu / 4.0    # lambda * omega' / delta
    if sup:
        incr_log = math.log(usig) + sig * (LL + t_in)
    else:
        incr_log = math.log(delta2) + np.log(w_in)
    u_in = _exp(incr_log + np.log(dw_in) + (a - 1.0) * LL + (a - 1.0 - mu) * t_in)

    H_log = _safe_log(rb**3 * H0) - _safe_log(c0) if H0 > 0 else -math.inf
    if H0 > 0 and c0 <= 0:
        H_log = math.inf
    rho_in = {
        "drift": C2 * delta1 * (1.0 - s**mu / 4.0),
        "F0": _exp(_safe_log(rb * F0) + a * LL + np.log(s ** (a - mu) - s**a / 4.0)),
        "gradF0": _exp(_safe_log(rb**2 * gF0) - math.log(delta1) + (1.0 + a) * LL + (a - mu) * t_in),
        "H0": _exp(H_log - math.log(kappa) + a * LL + (a - mu) * t_in),
        "u_increment": u_in,
    }
    out["rho_inner"] = (t_in, {k: v / Din for k, v in rho_in.items()})
    u_inn = {
        "u_increment": u_in,
        "decay": _exp(_safe_log(c0) + a * LL + np.log(s ** (a - mu) - s**a / 4.0)),
        "cross": C3 * delta1 * s ** (1.0 - mu),
        "drift": C2 * delta1 * (1.0 - s**mu / 4.0),
    }
    out["u_inner"] = (t_in, {k: v / Din for k, v in u_inn.items()})

    # -- rho outer, lambda < xi <= Xi1
    t1 = outer_grid(log_E1)
    w1 = delta1 * (0.75 + 0.5 * t1)
    lx = LL + t1                                 # log xi
    if sup:
        u_o = _exp(math.log(usig) + (sig - 1.0 + a) * lx) * (0.5 * delta1) / w1
    else:
        u_o = delta2 * (0.75 + 0.5 * t1) * 0.5 * _exp((a - 1.0) * lx) * delta1 / w1
    rho_out = {
        "drift": np.full_like(t1, C2 * delta1),
        "F0": _exp(_safe_log(rb * F0) + a * lx),
        "gradF0": _exp(_safe_log(rb**2 * gF0) + (1.0 + a) * lx) / w1,
        "H0": _exp(H_log + math.log(delta2) - LL + (1.0 + a) * lx) / w1,
        "u_increment": u_o,
    }
    out["rho_outer"] = (t1, {k: v / Dout for k, v in rho_out.items()})

    # -- u outer, lambda < xi <= Xi2
    t2 = outer_grid(log_E2)
    lx = LL + t2
    w2 = delta2 * (0.75 + 0.5 * t2)
    if sup:
        u_o = _exp(math.log(usig) + (sig - 1.0 + a) * lx) * (0.5 * delta2) / w2
    else:
        u_o = 0.5 * delta2 * _exp((a - 1.0) * lx)
    if a > 1.0:
        cross = consts.C4 * (_exp(_safe_log(rb * F0) + (1.0 - a) * LL + a * lx)
                             + _exp(math.log(V0) - LL + a * lx))
    else:
        cross = np.full_like(t2, C3 * (delta2 + V0) * kappa)
    u_out = {
        "u_increment": u_o,
        "decay": _exp(_safe_log(c0) + a * lx),
        "cross": cross,
        "drift": np.full_like(t2, C2 * delta2 * kappa),
    }
    out["u_outer"] = (t2, {k: v / Dout for k, v in u_out.items()})
    return out


def certify(regime: Regime, alpha: float, inp: SelectionInputs, consts: EmpiricalConstants,
            pair: MocPair, n_s: int = N_S) -> Certificate:
    """Evaluate every inequality on a dense xi grid; pass iff each total ratio <= 1/2."""
    terms = ratio_terms(regime, alpha, inp, consts, pair.omega2.delta, pair.kappa, pair.mu,
                        pair.log_lam, n_s)
    worst, worst_term, worst_s = {}, {}, {}
    ok = True
    for name, (t, parts) in terms.items():
        if t.size == 0:
            worst[name], worst_term[name], worst_s[name] = 0.0, ("none", 0.0), float("nan")
            continue
        total = sum(parts.values())
        i = int(np.argmax(np.where(np.isfinite(total), total, np.inf)))
        worst[name] = float(total[i])
        top = max(parts, key=lambda k: parts[k][i])
        worst_term[name] = (top, float(parts[top][i]))
        worst_s[name] = float(t[i])
        ok = ok and bool(np.isfinite(total[i]) and total[i] <= MARGIN)
    return Certificate(worst, worst_term, worst_s, ok)


def _data_cap(inp: SelectionInputs, delta1: float, delta2: float) -> float:
    cap = math.inf
    for half, lip, dl in ((inp.rho_half_osc, inp.rho_lip, delta1), (inp.u_half_osc, inp.u_lip, delta2)):
        if half is None or lip is None or lip <= 0 or half <= 0:
            continue
        cap = min(cap, math.log(2.0 * half / lip) - 4.0 * half / dl)
    return cap


def select_parameters(regime, alpha: float, inputs: SelectionInputs, consts: EmpiricalConstants,
                      min_log_lam: float = MIN_LOG_LAMBDA, n_s: int = N_S) -> ParameterChoice:
    """(delta1, delta2, kappa, lambda, mu) with every inequality at half its dissipation."""
    regime = Regime(regime)
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    if Regime.for_alpha(alpha) is not regime:
        raise ValueError(f"alpha = {alpha} is not in the {regime.value} regime")
    inp = inputs
    if regime is Regime.Supercritical:
        if inp.sigma is None or not 1.0 - alpha < inp.sigma < 1.0:
            raise ValueError("the supercritical regime needs sigma in (1 - alpha, 1)")
        if inp.u_Csigma is None or not (math.isfinite(inp.u_Csigma) and inp.u_Csigma > 0):
            raise ValueError("the supercritical regime needs a finite positive u_Csigma")
    if inp.H0_norm > 0 and inp.c0 <= 0:
        raise InfeasibleError("rho_inner:H0", "the H0 term needs a positive decay rate c0")

    mu = regime_mu(regime, alpha, inp.sigma)
    Din, Dout = dissipation_coefficients(alpha, mu, consts.C1, inp.rho_lower)
    C2, C3, V0 = consts.C2, consts.C3, inp.V0
    notes = []
    if regime is Regime.Subcritical:
        kappa = 1.0
        delta2 = min(Din / (4.0 * (C2 + C3)), Dout / (4.0 * C2))
        notes.append("kappa = 1; delta closes the lambda-free drift and cross terms at 1/4")
    else:
        delta2 = min(Din, Dout) / 8.0
        kappa = min(1.0, Din / (8.0 * C2 * delta2), Din / (8.0 * (C2 + C3) * delta2),
                    Dout / (8.0 * (C3 * (delta2 + V0) + C2 * delta2)))
        notes.append("delta2 closes the u-increment term at 1/8; kappa closes the cross term at 1/8")
    delta1 = kappa * delta2

    cap = math.log(0.5) - (2.0 * inp.rho_upper / delta1 + 2.0 * V0 / delta2)
    data_cap = _data_cap(inp, delta1, delta2)
    if data_cap < cap:
        notes.append("lambda capped so the initial data obey the moduli")
    hi = min(cap, data_cap)

    def build(log_lam):
        return MocPair.build(delta2, kappa, mu, log_lam, c0=inp.c0, rho_bar=inp.rho_upper, V0=V0)

    def cert(log_lam):
        return certify(regime, alpha, inp, consts, build(log_lam), n_s)

    c_hi = cert(hi)
    if c_hi.passed:
        return ParameterChoice(regime, alpha, build(hi), inp, consts, c_hi, notes)
    lo = min_log_lam
    c_lo = cert(lo)
    if not c_lo.passed:
        name = max(c_lo.worst, key=lambda k: c_lo.worst[k])
        term = c_lo.worst_term[name][0]
        raise InfeasibleError(f"{name}:{term}",
                              f"total ratio {c_lo.worst[name]:.4g} > {MARGIN} even at log lambda = {lo:g}",
                              {"certificate": c_lo.as_dict(), "delta2": delta2, "kappa": kappa, "mu": mu})
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cert(mid).passed:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * max(1.0, abs(lo)):
            break
    pair = build(lo)
    return ParameterChoice(regime, alpha, pair, inp, consts, cert(lo), notes)
