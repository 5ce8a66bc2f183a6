"""Monitors for the a-priori bounds, flocking fits and the regularity criterion."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import AuxiliaryFields, FlowState
from .grid import ScalarField, gradient_sup, spectral_sup, translate_x1
from .moc.family import MocPair
from .moc.scan import holder_seminorm, scan_breakthrough, shift_set

# tolerances of the monitored bounds
MASS_TOL = 1e-9
MOMENTUM_TOL = 1e-7
G_MASS_TOL = 1e-9
F_MAX_TOL = 1e-6
V_SLACK = 1e-8
RHO_FLOOR_FRACTION = 0.5


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: float
    G_integral: float
    G_abs_integral: float
    rho_min: float
    rho_max: float
    F_sup: float
    G_sup: float
    V: float
    u_dev: float
    lip_rho: float
    lip_u: float
    holder_u_sigma: float
    moc_margin_rho: float = float("nan")
    moc_margin_u: float = float("nan")
    events: list = field(default_factory=list)

    def __post_init__(self):
        if self.V < 0:
            raise ValueError("V must be nonnegative")
        if self.rho_min > self.rho_max:
            raise ValueError("rho_min exceeds rho_max")

    @property
    def u_bar(self) -> float:
        return self.momentum / self.mass

    def row(self) -> dict:
        d = asdict(self)
        d["events"] = ";".join(str(e.get("event", e)) if isinstance(e, dict) else str(e) for e in self.events)
        return d


CSV_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


def record(state: FlowState, aux: AuxiliaryFields, pair: MocPair | None = None,
           sigma: float = 0.5) -> DiagnosticsRecord:
    """Every monitored quantity of one state.

    ``pair`` enables the breakthrough scans (rho against omega1, u against
    exp(-c0 t) omega2); without it the margins are NaN.
    """
    grid = state.grid
    rho, u = state.rho.physical, state.u.physical
    mass = grid.integrate(rho)
    momentum = grid.integrate(rho * u)
    u_bar = momentum / mass
    shifts = shift_set(grid)
    rec = DiagnosticsRecord(
        t=float(state.t),
        mass=mass,
        momentum=momentum,
        G_integral=grid.integrate(aux.G.physical),
        G_abs_integral=grid.integrate(np.abs(aux.G.physical)),
        rho_min=float(np.min(rho)),
        rho_max=float(np.max(rho)),
        F_sup=spectral_sup(aux.F),
        G_sup=spectral_sup(aux.G),
        V=float(np.max(u) - np.min(u)),
        u_dev=float(np.max(np.abs(u - u_bar))),
        lip_rho=gradient_sup(state.rho),
        lip_u=gradient_sup(state.u),
        holder_u_sigma=holder_seminorm(state.u, sigma, shifts),
    )
    if pair is not None:
        rec.moc_margin_rho = scan_breakthrough(state.rho, pair.omega1, 1.0, shifts).margin
        decay = math.exp(-pair.c0 * state.t)
        rec.moc_margin_u = scan_breakthrough(state.u, pair.omega2, decay, shifts).margin
    bad = [k for k, v in asdict(rec).items() if isinstance(v, float) and k not in
           ("moc_margin_rho", "moc_margin_u") and not math.isfinite(v)]
    if bad:
        rec.events.append({"event": "blowup", "t": rec.t, "detail": f"non-finite {', '.join(bad)}"})
    return rec


def write_csv(series, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rec in series:
            w.writerow(rec.row())
    return path


def read_csv(path) -> list[DiagnosticsRecord]:
    out = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            kw = {k: float(v) for k, v in row.items() if k != "events"}
            ev = [{"event": e} for e in row.get("events", "").split(";") if e]
            out.append(DiagnosticsRecord(events=ev, **kw))
    return out


# -- a-priori bound checks -------------------------------------------------------------

def check_apriori(series, initial: DiagnosticsRecord | None = None, frozen_density: bool = False) -> list[dict]:
    """Violations of the monitored bounds along ``series``.

    Each violation is {"monitor", "t", "detail"}.  Momentum drift is measured
    relative to max(|P0|, int rho |u| dx at t = 0) so zero-momentum data are
    still meaningful; the G-mass drift is relative to int |G0| dx.
    """
    series = list(series)
    if not series:
        raise ValueError("empty diagnostics series")
    r0 = initial or series[0]
    out = []

    def flag(monitor, rec, detail):
        out.append({"monitor": monitor, "t": rec.t, "detail": detail})

    p_scale = max(abs(r0.momentum), r0.mass * r0.u_dev, 1e-300)
    g_scale = max(r0.G_abs_integral, r0.mass * 1e-300)
    floor = min((r.rho_min for r in series if r.t <= r0.t + 1.0), default=r0.rho_min)
    prev_V = r0.V
    for rec in series:
        for e in rec.events:
            kind = e.get("event", "event") if isinstance(e, dict) else str(e)
            flag("lip_u" if kind == "blowup" else kind, rec, f"event {kind} recorded")
        dm = abs(rec.mass - r0.mass) / abs(r0.mass)
        if dm > MASS_TOL:
            flag("mass", rec, f"relative mass drift {dm:.3e} > {MASS_TOL:g}")
        dp = abs(rec.momentum - r0.momentum) / p_scale
        if not frozen_density and dp > MOMENTUM_TOL:
            flag("momentum", rec, f"relative momentum drift {dp:.3e} > {MOMENTUM_TOL:g}")
        dg = abs(rec.G_integral - r0.G_integral) / g_scale if r0.G_abs_integral > 0 else abs(rec.G_integral)
        if dg > G_MASS_TOL and not frozen_density:
            flag("G_mass", rec, f"G mass drift {dg:.3e} > {G_MASS_TOL:g}")
        if not frozen_density:
            if rec.F_sup > r0.F_sup * (1.0 + F_MAX_TOL) + 1e-300:
                flag("F_sup", rec, f"sup|F| = {rec.F_sup:.10g} exceeds sup|F0| = {r0.F_sup:.10g}")
            if rec.G_sup > rec.rho_max * r0.F_sup * (1.0 + F_MAX_TOL) + 1e-300:
                flag("G_sup", rec, f"sup|G| = {rec.G_sup:.6g} > rho_max sup|F0| = {rec.rho_max * r0.F_sup:.6g}")
        if rec.V > prev_V + V_SLACK * max(1.0, r0.V):
            flag("V", rec, f"V increased from {prev_V:.10g} to {rec.V:.10g}")
        prev_V = min(prev_V, rec.V)
        if rec.rho_min < RHO_FLOOR_FRACTION * floor:
            flag("rho_min", rec, f"min rho {rec.rho_min:.4g} fell below half the early floor {floor:.4g}")
    return out


# -- flocking ---------------------------------------------------------------------------

def decay_envelope_rate(series) -> float:
    """Largest c with V(t) <= V(t0) exp(-c (t - t0)) at every recorded t."""
    series = list(series)
    r0 = series[0]
    rates = [-math.log(r.V / r0.V) / (r.t - r0.t) for r in series[1:]
             if r.t > r0.t and r.V > 0 and r0.V > 0]
    return max(0.0, min(rates)) if rates else 0.0


def holder_norm(f: ScalarField, beta: float) -> float:
    """Discrete C^beta norm: sup|f| + Hölder seminorm over the lattice shift set."""
    return f.sup() + holder_seminorm(f, beta)


@dataclass
class FlockReport:
    u_bar: float
    decay_rate_fit: float
    r_squared: float
    e_foldings: float
    envelope_rate: float
    beta: float
    times: list
    profile_residual: list
    status: str

    @property
    def residual_decreasing(self) -> bool:
        r = self.profile_residual
        return all(b <= a + 1e-8 for a, b in zip(r, r[1:]))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["residual_decreasing"] = self.residual_decreasing
        return d


def fit_flocking(series, states=(), beta: float = 0.5) -> FlockReport:
    """Exponential decay fit of |u - u_bar|_inf and the co-moving profile residual.

    ``states`` are (t, rho) pairs, e.g. read back from snapshots; each rho is
    shifted by -u_bar t along e1 and compared in C^beta with the last one.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    series = list(series)
    u_bar = series[0].u_bar
    t = np.array([r.t for r in series])
    dev = np.array([r.u_dev for r in series])
    pos = dev > 0
    e_fold = float(math.log(dev[0] / dev[pos][-1])) if pos.any() and dev[0] > 0 else 0.0
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    sel = half & pos
    slope, r2 = float("nan"), float("nan")
    if np.count_nonzero(sel) >= 3:
        x, y = t[sel], np.log(dev[sel])
        A = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope = float(coef[0])
        resid = y - A @ coef
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    if not pos.any() or dev[0] == 0:
        status = "aligned"
    elif e_fold >= 3.0:
        status = "flocking"
    else:
        status = "inconclusive"

    times, resid = [], []
    states = list(states)
    if states:
        shifted = [(ts, translate_x1(rho, u_bar * ts)) for ts, rho in states]
        final = shifted[-1][1]
        for ts, prof in shifted:
            diff = ScalarField(final.grid, prof.physical - final.physical)
            times.append(float(ts))
            resid.append(holder_norm(diff, beta))
    return FlockReport(u_bar, -slope if math.isfinite(slope) else float("nan"), r2, e_fold,
                       decay_envelope_rate(series), beta, times, resid, status)


# -- regularity-criterion monitor ------------------------------------------------------------

def criterion_bound_shape(holder_u: float, sigma: float, alpha: float) -> float:
    """1 + |u|_{C^sigma}^(1/(sigma - 1 + alpha))."""
    p = sigma - 1.0 + alpha
    if not p > 0:
        raise ValueError("need sigma > 1 - alpha")
    return 1.0 + holder_u ** (1.0 / p)


def criterion_monitor(series, sigma: float, alpha: float, factor: float = 2.0) -> dict:
    """Track lip_rho against C * shape(sup_{s<=t} |u(s)|_{C^sigma}).

    C is fitted at the first record.  The bound controls the density gradient
    through the Hölder norm accumulated up to time t, so the shape uses the
    running maximum rather than the instantaneous value.
    """
    series = list(series)
    r0 = series[0]
    C = r0.lip_rho / criterion_bound_shape(r0.holder_u_sigma, sigma, alpha)
    running = np.maximum.accumulate([r.holder_u_sigma for r in series])
    ratios = [r.lip_rho / (C * criterion_bound_shape(h, sigma, alpha)) for r, h in zip(series, running)]
    worst = int(np.argmax(ratios))
    return {"C": C, "max_ratio": float(ratios[worst]), "t_max_ratio": series[worst].t,
            "max_holder": float(running[-1]), "factor": factor,
            "pass": bool(ratios[worst] <= factor)}


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float))
    return path
