"""Right-hand side, auxiliary fields and time stepping for the uni-directional
Euler-alignment system

    rho_t + d1(rho u) = 0,
    u_t + u d1 u = -Lambda^alpha(rho u) + (Lambda^alpha rho) u.

The velocity equation is evaluated in the equivalent form

    u_t = -u G - Lambda^alpha(rho u),   G = d1 u - Lambda^alpha rho,

with the dealiased flux rho*u shared between both equations.  This makes the
discrete G satisfy G_t + d1(u G) = 0 exactly (up to roundoff), so the
conservation of G is inherited by the scheme rather than approximated.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import ScalarField, TorusGrid, _check_alpha, _check_same_grid

EPS_VELOCITY = 1e-12
C_STAB = 2.0


class Scheme(str, enum.Enum):
    ExplicitRK4 = "ExplicitRK4"
    ImexCN = "ImexCN"


class NumericalEvent(Exception):
    """A run-terminating numerical event (blow-up, vacuum, instability)."""

    kind = "numerical"

    def __init__(self, t: float, detail: str = "", **data):
        self.t = float(t)
        self.detail = detail
        self.data = data
        super().__init__(f"{self.kind} at t={self.t:.6g}: {detail}")

    def as_dict(self) -> dict:
        return {"event": self.kind, "t": self.t, "detail": self.detail, **self.data}


class BlowUpEvent(NumericalEvent):
    kind = "blowup"


class VacuumEvent(NumericalEvent):
    kind = "vacuum"


class InstabilityEvent(NumericalEvent):
    kind = "instability"


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    scheme: Scheme = Scheme.ExplicitRK4
    cfl: float = 0.5
    dealias: bool = True
    frozen_density: bool = False
    t_end: float = 10.0
    output_stride: int = 50
    blowup_threshold: float = 1e4

    def __post_init__(self):
        _check_alpha(self.alpha)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")


@dataclass(frozen=True)
class FlowState:
    rho: ScalarField
    u: ScalarField
    t: float = 0.0

    def __post_init__(self):
        _check_same_grid(self.rho, self.u)

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid

    @classmethod
    def from_arrays(cls, grid: TorusGrid, rho, u, t: float = 0.0) -> "FlowState":
        return cls(ScalarField(grid, np.asarray(rho, float)), ScalarField(grid, np.asarray(u, float)), t)


@dataclass(frozen=True)
class AuxiliaryFields:
    G: ScalarField
    F: ScalarField
    H: ScalarField


@dataclass
class _Operators:
    """Spectral symbols reused by every RHS evaluation for one (grid, alpha)."""

    grid: TorusGrid
    alpha: float
    dealias: bool
    ik1: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ik1 = 1j * self.grid.wavenumbers[0]
        self.lam = self.grid.frac_symbol(self.alpha)
        self.mask = self.grid.dealias_mask if self.dealias else np.ones(self.grid.shape, bool)

    def product_hat(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.mask * np.fft.fftn(a * b)

    def rhs(self, rho: np.ndarray, u: np.ndarray, frozen: bool):
        u_hat = np.fft.fftn(u)
        rho_hat = np.fft.fftn(rho)
        G = np.fft.ifftn(self.ik1 * u_hat - self.lam * rho_hat).real
        m_hat = self.product_hat(rho, u)
        ug_hat = self.product_hat(u, G)
        du = np.fft.ifftn(-ug_hat - self.lam * m_hat).real
        if frozen:
            drho = np.zeros_like(rho)
        else:
            drho = np.fft.ifftn(-self.ik1 * m_hat).real
        return drho, du


_OPS_CACHE: dict = {}


def _ops(grid: TorusGrid, alpha: float, dealias: bool) -> _Operators:
    key = (grid, float(alpha), bool(dealias))
    ops = _OPS_CACHE.get(key)
    if ops is None:
        if len(_OPS_CACHE) > 32:
            _OPS_CACHE.clear()
        ops = _OPS_CACHE[key] = _Operators(grid, float(alpha), bool(dealias))
    return ops


def alignment_force(rho: ScalarField, u: ScalarField, alpha: float, dealias: bool = False) -> ScalarField:
    """Commutator form -Lambda^alpha(rho u) + (Lambda^alpha rho) u."""
    grid = _check_same_grid(rho, u)
    _check_alpha(alpha)
    ops = _ops(grid, alpha, dealias)
    r, v = rho.physical, u.physical
    lam_rho = np.fft.ifftn(ops.lam * np.fft.fftn(r)).real
    out = -np.fft.ifftn(ops.lam * ops.product_hat(r, v)).real
    if dealias:
        out = out + np.fft.ifftn(ops.product_hat(lam_rho, v)).real
    else:
        out = out + lam_rho * v
    return ScalarField(grid, out)


def rhs(state: FlowState, cfg: SolverConfig) -> tuple[ScalarField, ScalarField]:
    ops = _ops(state.grid, cfg.alpha, cfg.dealias)
    drho, du = ops.rhs(state.rho.physical, state.u.physical, cfg.frozen_density)
    if not (np.all(np.isfinite(drho)) and np.all(np.isfinite(du))):
        raise BlowUpEvent(state.t, "non-finite value in right-hand side")
    return ScalarField(state.grid, drho), ScalarField(state.grid, du)


def stable_dt(state: FlowState, cfg: SolverConfig) -> float:
    dx = state.grid.dx
    umax = float(np.max(np.abs(state.u.physical)))
    rmax = float(np.max(np.abs(state.rho.physical)))
    adv = dx / (umax + EPS_VELOCITY)
    diss = dx**cfg.alpha / (C_STAB * max(rmax, EPS_VELOCITY))
    return cfg.cfl * min(adv, diss)


def _rk4(ops: _Operators, rho, u, dt, frozen):
    k1r, k1u = ops.rhs(rho, u, frozen)
    k2r, k2u = ops.rhs(rho + 0.5 * dt * k1r, u + 0.5 * dt * k1u, frozen)
    k3r, k3u = ops.rhs(rho + 0.5 * dt * k2r, u + 0.5 * dt * k2u, frozen)
    k4r, k4u = ops.rhs(rho + dt * k3r, u + dt * k3u, frozen)
    rho_new = rho + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
    u_new = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    return rho_new, u_new


def _imex_cn(ops: _Operators, rho, u, dt, frozen):
    # Crank-Nicolson on L = -rho_mean |k|^alpha, Heun on the remainder N = f - L u
    rho_mean = float(np.mean(rho))
    L = -rho_mean * ops.lam
    plus = 1.0 + 0.5 * dt * L
    minus_inv = 1.0 / (1.0 - 0.5 * dt * L)

    def split(r, v):
        dr, dv = ops.rhs(r, v, frozen)
        v_hat = np.fft.fftn(v)
        n_hat = np.fft.fftn(dv) - L * v_hat
        return dr, n_hat, v_hat

    dr0, n0, u_hat = split(rho, u)
    u_star = np.fft.ifftn(minus_inv * (plus * u_hat + dt * n0)).real
    rho_star = rho + dt * dr0
    dr1, n1, _ = split(rho_star, u_star)
    u_new = np.fft.ifftn(minus_inv * (plus * u_hat + 0.5 * dt * (n0 + n1))).real
    rho_new = rho + 0.5 * dt * (dr0 + dr1)
    return rho_new, u_new


def step(state: FlowState, cfg: SolverConfig, dt: float) -> FlowState:
    ops = _ops(state.grid, cfg.alpha, cfg.dealias)
    rho, u = state.rho.physical, state.u.physical
    if cfg.scheme is Scheme.ExplicitRK4:
        rho_new, u_new = _rk4(ops, rho, u, dt, cfg.frozen_density)
    else:
        rho_new, u_new = _imex_cn(ops, rho, u, dt, cfg.frozen_density)
    t_new = state.t + dt
    if not (np.all(np.isfinite(rho_new)) and np.all(np.isfinite(u_new))):
        raise BlowUpEvent(t_new, "non-finite state after step")
    old = float(np.max(np.abs(u)))
    new = float(np.max(np.abs(u_new)))
    if old > 1e-300 and new > 10.0 * old:
        raise InstabilityEvent(t_new, f"sup|u| grew from {old:.3e} to {new:.3e} in one step")
    return FlowState(ScalarField(state.grid, rho_new), ScalarField(state.grid, u_new), t_new)


def gradient_norms(state: FlowState) -> tuple[float, float]:
    """(sup|grad rho|, sup|grad u|) computed spectrally."""
    from .grid import gradient_sup

    return gradient_sup(state.rho), gradient_sup(state.u)


def check_blowup(state: FlowState, cfg: SolverConfig) -> tuple[float, float]:
    """Raise BlowUpEvent if the gradient sum exceeds the configured threshold."""
    lip_rho, lip_u = gradient_norms(state)
    total = lip_rho + lip_u
    if not np.isfinite(total) or total > cfg.blowup_threshold:
        raise BlowUpEvent(
            state.t,
            f"|grad rho| + |grad u| = {total:.4e} exceeds {cfg.blowup_threshold:g}",
            lip_rho=lip_rho,
            lip_u=lip_u,
        )
    return lip_rho, lip_u


def check_vacuum(state: FlowState) -> None:
    rmin = float(np.min(state.rho.physical))
    if not rmin > 0:
        raise VacuumEvent(state.t, f"min rho = {rmin:.4e}", rho_min=rmin)


def extract_auxiliary(state: FlowState, alpha: float) -> AuxiliaryFields:
    _check_alpha(alpha)
    check_vacuum(state)
    grid = state.grid
    ops = _ops(grid, alpha, False)
    rho = state.rho.physical
    G = np.fft.ifftn(ops.ik1 * state.u.spectral - ops.lam * state.rho.spectral).real
    F = G / rho
    H = np.fft.ifftn(ops.ik1 * np.fft.fftn(F)).real / rho
    return AuxiliaryFields(ScalarField(grid, G), ScalarField(grid, F), ScalarField(grid, H))


def advance(state: FlowState, cfg: SolverConfig, t_target: float, dt_max: float | None = None,
            on_step=None) -> tuple[FlowState, int]:
    """Step with the CFL time step until ``t_target`` is hit exactly.

    ``on_step(state)`` is called after every accepted step; blow-up and
    vacuum checks run on every step.  Returns the final state and step count.
    """
    nsteps = 0
    while state.t < t_target - 1e-14 * max(1.0, abs(t_target)):
        dt = stable_dt(state, cfg)
        if dt_max is not None:
            dt = min(dt, dt_max)
        dt = min(dt, t_target - state.t)
        state = step(state, cfg, dt)
        nsteps += 1
        check_blowup(state, cfg)
        if not cfg.frozen_density:
            check_vacuum(state)
        if on_step is not None:
            on_step(state)
    state = replace(state, t=float(t_target)) if abs(state.t - t_target) < 1e-12 else state
    return state, nsteps


def integrate_fixed(state: FlowState, cfg: SolverConfig, t_end: float, nsteps: int) -> FlowState:
    """``nsteps`` equal steps to ``t_end``, no CFL control; for convergence studies."""
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    dt = (t_end - state.t) / nsteps
    for _ in range(nsteps):
        state = step(state, cfg, dt)
    return state


def self_convergence_slopes(state: FlowState, cfg: SolverConfig, t_end: float, steps=(20, 40, 80, 160, 320)):
    """Observed orders log2(e_k / e_{k+1}) with e_k = |u_{N_k} - u_{N_{k+1}}|_inf."""
    sols = [integrate_fixed(state, cfg, t_end, n).u.physical for n in steps]
    errs = [float(np.max(np.abs(a - b))) for a, b in zip(sols, sols[1:])]
    slopes = [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]
    return errs, slopes
