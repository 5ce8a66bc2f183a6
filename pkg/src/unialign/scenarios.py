"""Scenario configuration (INI files) and the initial-data library."""
from __future__ import annotations

import configparser
import enum
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import FlowState, Scheme, SolverConfig
from .grid import ScalarField, TorusGrid, dealias, inv_dx1_lambda, make_grid

VACUUM_FRACTION = 0.1


class Scenario(str, enum.Enum):
    Generic = "Generic"
    GZero = "GZero"
    FrozenBurgers = "FrozenBurgers"
    ShearFlock = "ShearFlock"
    CriticalDemo = "CriticalDemo"
    SupercriticalCriterion = "SupercriticalCriterion"


@dataclass(frozen=True)
class DataConfig:
    """Initial-data knobs.

    rho_amp and u_amp are sup-norms of the perturbations; ``modes`` is the
    highest integer wavenumber used; ``profile`` selects "random" band-limited
    data or the deterministic "sine" profile rho_mean + rho_amp cos(x1),
    u_amp sin(x1).
    """

    rho_mean: float = 1.0
    rho_amp: float = 0.3
    u_amp: float = 0.5
    modes: int = 4
    profile: str = "random"

    def __post_init__(self):
        if not self.rho_mean > 0:
            raise ValueError("rho_mean must be positive")
        if self.rho_amp < 0 or self.u_amp < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.profile not in ("random", "sine"):
            raise ValueError("profile must be 'random' or 'sine'")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    dim: int = 1
    n: int = 512
    length: float = 2.0 * math.pi
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(alpha=1.0))
    data: DataConfig = field(default_factory=DataConfig)
    sigma: float = 0.5
    seed: int = 0
    output_dir: str = "runs/out"
    moc: bool = True
    snapshots: bool = True
    constants_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        sc, a = self.scenario, self.solver.alpha
        if sc is Scenario.ShearFlock and self.dim != 2:
            raise ValueError("ShearFlock needs dim = 2")
        if sc is Scenario.SupercriticalCriterion:
            if not 0.0 < a < 1.0:
                raise ValueError("SupercriticalCriterion needs alpha in (0, 1)")
        if sc is Scenario.CriticalDemo and a != 1.0:
            raise ValueError("CriticalDemo needs alpha = 1")
        if sc is Scenario.FrozenBurgers and not self.solver.frozen_density:
            object.__setattr__(self, "solver", replace(self.solver, frozen_density=True))
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError("sigma must lie in (0, 1]")
        if sc is Scenario.SupercriticalCriterion and not 1.0 - a < self.sigma < 1.0:
            raise ValueError("SupercriticalCriterion needs sigma in (1 - alpha, 1)")

    @property
    def grid(self) -> TorusGrid:
        return make_grid(self.dim, self.n, self.length)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["solver"]["scheme"] = self.solver.scheme.value
        return d


# -- INI ingestion -------------------------------------------------------------------

_SECTIONS = {
    "scenario": {"name": str, "seed": int, "sigma": float},
    "grid": {"dim": int, "n": int, "length": float},
    "solver": {"alpha": float, "scheme": str, "cfl": float, "dealias": bool, "t_end": float,
               "output_stride": int, "blowup_threshold": float, "frozen_density": bool},
    "data": {"rho_mean": float, "rho_amp": float, "u_amp": float, "modes": int, "profile": str},
    "moc": {"enabled": bool, "constants": str},
    "output": {"dir": str, "snapshots": bool},
}


def _get(cp, section, key, typ):
    if typ is bool:
        return cp.getboolean(section, key)
    if typ is int:
        return cp.getint(section, key)
    if typ is float:
        v = cp.get(section, key).strip().lower()
        return 2.0 * math.pi if v in ("2pi", "2*pi") else float(v)
    return cp.get(section, key).strip()


def load_config(path) -> ScenarioConfig:
    """Read an INI file; unknown sections or keys are errors, missing keys take defaults."""
    path = Path(path)
    cp = configparser.ConfigParser()
    with path.open() as fh:
        cp.read_file(fh)
    return config_from_parser(cp, source=str(path))


def config_from_parser(cp: configparser.ConfigParser, source: str = "<config>") -> ScenarioConfig:
    vals: dict = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ValueError(f"{source}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SECTIONS[sec]:
                raise ValueError(f"{source}: unknown key '{key}' in [{sec}]")
            vals[(sec, key)] = _get(cp, sec, key, _SECTIONS[sec][key])
    if ("scenario", "name") not in vals:
        raise ValueError(f"{source}: [scenario] name is required")

    def pick(sec, keys):
        return {k: vals[(sec, k)] for k in keys if (sec, k) in vals}

    solver_kw = pick("solver", _SECTIONS["solver"])
    if "scheme" in solver_kw:
        solver_kw["scheme"] = Scheme(solver_kw["scheme"])
    solver = SolverConfig(**{"alpha": 1.0, **solver_kw})
    data = DataConfig(**pick("data", _SECTIONS["data"]))
    kw = dict(scenario=vals[("scenario", "name")], solver=solver, data=data)
    kw.update(pick("grid", _SECTIONS["grid"]))
    if ("scenario", "seed") in vals:
        kw["seed"] = vals[("scenario", "seed")]
    if ("scenario", "sigma") in vals:
        kw["sigma"] = vals[("scenario", "sigma")]
    if ("moc", "enabled") in vals:
        kw["moc"] = vals[("moc", "enabled")]
    if ("moc", "constants") in vals:
        kw["constants_file"] = vals[("moc", "constants")]
    if ("output", "dir") in vals:
        kw["output_dir"] = vals[("output", "dir")]
    if ("output", "snapshots") in vals:
        kw["snapshots"] = vals[("output", "snapshots")]
    return ScenarioConfig(**kw)


# -- initial data -------------------------------------------------------------------

def _rng(seed: int, stream: int) -> np.random.Generator:
    # counter-based generator: identical streams on every platform
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _wavevectors(dim: int, modes: int, restrict_k1: bool, only_x2: bool):
    rng1 = range(-modes, modes + 1)
    vecs = []
    if dim == 1:
        vecs = [(k,) for k in range(1, modes + 1)]
    else:
        for k1 in rng1:
            for k2 in rng1:
                if (k1, k2) <= (0, 0):
                    continue  # one of each +-k pair, no mean
                if only_x2 and k1 != 0:
                    continue
                if restrict_k1 and k1 == 0:
                    continue
                vecs.append((k1, k2) + (0,) * (dim - 2))
    return np.asarray(vecs, dtype=float)


def random_field(grid: TorusGrid, amp: float, modes: int, seed: int, stream: int,
                 restrict_k1: bool = False, only_x2: bool = False) -> np.ndarray:
    """Mean-free band-limited field with sup-norm ``amp`` and 1/|k|^2 spectrum."""
    if amp == 0:
        return np.zeros(grid.shape)
    ks = _wavevectors(grid.dim, modes, restrict_k1, only_x2)
    rng = _rng(seed, stream)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(ks))
    weights = rng.uniform(0.5, 1.0, size=len(ks)) / np.sum(ks**2, axis=1)
    scale = 2.0 * math.pi / grid.length
    out = np.zeros(grid.shape)
    for k, ph, w in zip(ks, phases, weights):
        arg = sum(scale * k[i] * grid.coords[i] for i in range(grid.dim))
        out += w * np.cos(arg + ph)
    return amp * out / np.max(np.abs(out))


def _sine(grid: TorusGrid, amp: float, kind: str, only_x2: bool = False) -> np.ndarray:
    x = grid.coords[1] if only_x2 else grid.coords[0]
    s = 2.0 * math.pi / grid.length
    return amp * (np.cos(s * x) if kind == "cos" else np.sin(s * x))


class VacuumDataError(ValueError):
    pass


def build_initial_data(cfg: ScenarioConfig) -> FlowState:
    grid = cfg.grid
    dc = cfg.data
    sc = cfg.scenario
    only_x2 = sc is Scenario.ShearFlock
    restrict = sc is Scenario.GZero
    if sc is Scenario.FrozenBurgers:
        rho = np.full(grid.shape, dc.rho_mean)
    elif dc.profile == "sine":
        rho = dc.rho_mean + _sine(grid, dc.rho_amp, "cos", only_x2)
    else:
        rho = dc.rho_mean + random_field(grid, dc.rho_amp, dc.modes, cfg.seed, 1, restrict, only_x2)
    rho = dealias(ScalarField(grid, rho)).physical
    if np.min(rho) < VACUUM_FRACTION * dc.rho_mean:
        raise VacuumDataError(
            f"min rho0 = {np.min(rho):.4g} is below {VACUUM_FRACTION} * rho_mean; reduce rho_amp")
    rho_f = ScalarField(grid, rho)
    if sc is Scenario.GZero:
        u = inv_dx1_lambda(rho_f, cfg.solver.alpha)
    elif dc.profile == "sine":
        u = dealias(ScalarField(grid, _sine(grid, dc.u_amp, "sin", only_x2)))
    else:
        u = dealias(ScalarField(grid, random_field(grid, dc.u_amp, dc.modes, cfg.seed, 2,
                                                   False, only_x2)))
    return FlowState(rho_f, ScalarField(grid, u.physical), 0.0)
