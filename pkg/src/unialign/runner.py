"""Run orchestration, persistence and the report bundle.

A run integrates to t_end, keeping every ``output_stride``-th state.  The MOC
parameters need the run's own extrema (density bounds, decay rate), so the
selection and the breakthrough scans happen in a second pass over the kept
states.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import FlowState, NumericalEvent, advance, check_vacuum, extract_auxiliary
from .diagnostics import (check_apriori, decay_envelope_rate, dump_json,
                          fit_flocking, read_csv, record, write_csv)
from .grid import gradient_sup, read_snapshot, spectral_sup, write_snapshot
from .moc.lemmas import EmpiricalConstants, fit_empirical_constants
from .moc.params import InfeasibleError, ParameterChoice, Regime, SelectionInputs, select_parameters
from .moc.scan import scan_breakthrough, shift_set
from .scenarios import ScenarioConfig, build_initial_data

MANIFEST = "manifest.json"
DIAGNOSTICS = "diagnostics.csv"
EVENTS = "events.jsonl"
SNAPSHOT_DIR = "snapshots"
REQUIRED = (MANIFEST, DIAGNOSTICS, EVENTS)


class MissingArtifactsError(FileNotFoundError):
    def __init__(self, run_dir, missing):
        self.missing = list(missing)
        super().__init__(f"{run_dir}: missing artifacts: {', '.join(self.missing)}")


@dataclass
class RunArtifacts:
    run_dir: Path
    config: ScenarioConfig
    status: str
    status_detail: dict
    records: list
    states: list
    choice: ParameterChoice | None = None
    moc_info: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)

    @property
    def final_state(self) -> FlowState:
        return self.states[-1]

    @property
    def exit_code(self) -> int:
        if self.status == "completed":
            return 0
        if self.status == "moc_breakthrough":
            return 3
        return 2


def load_constants(path) -> EmpiricalConstants:
    return EmpiricalConstants.from_dict(json.loads(Path(path).read_text()))


def selection_inputs(records, state0: FlowState, alpha: float, sigma: float | None) -> SelectionInputs:
    """Inputs of the parameter selector from the initial data and the run's extrema."""
    aux0 = extract_auxiliary(state0, alpha)
    r0 = records[0]
    rho0, u0 = state0.rho.physical, state0.u.physical
    supercritical = alpha < 1.0
    return SelectionInputs(
        rho_lower=min(r.rho_min for r in records),
        rho_upper=max(r.rho_max for r in records),
        V0=r0.V,
        F0_norm=r0.F_sup,
        gradF0_norm=gradient_sup(aux0.F),
        H0_norm=spectral_sup(aux0.H),
        c0=decay_envelope_rate(records),
        sigma=sigma if supercritical else None,
        u_Csigma=max(r.holder_u_sigma for r in records) if supercritical else None,
        rho_half_osc=0.5 * float(np.max(rho0) - np.min(rho0)),
        rho_lip=r0.lip_rho,
        u_half_osc=0.5 * float(np.max(u0) - np.min(u0)),
        u_lip=r0.lip_u,
    )


def _moc_pass(cfg: ScenarioConfig, records, states, consts) -> tuple[ParameterChoice | None, dict]:
    alpha = cfg.solver.alpha
    regime = Regime.for_alpha(alpha)
    try:
        inp = selection_inputs(records, states[0], alpha, cfg.sigma)
        choice = select_parameters(regime, alpha, inp, consts)
    except InfeasibleError as exc:
        return None, exc.as_dict()
    except ValueError as exc:
        return None, {"status": "not_applicable", "detail": str(exc)}
    pair = choice.pair
    shifts = shift_set(states[0].grid)
    worst = None
    for rec, st in zip(records, states):
        sr = scan_breakthrough(st.rho, pair.omega1, 1.0, shifts)
        su = scan_breakthrough(st.u, pair.omega2, math.exp(-pair.c0 * st.t), shifts)
        rec.moc_margin_rho, rec.moc_margin_u = sr.margin, su.margin
        for which, res in (("rho", sr), ("u", su)):
            if not res.passed and worst is None:
                worst = {"t": st.t, "which": which, "xi": res.argmin_distance, "margin": res.margin}
    info = {"status": "selected", **choice.as_dict()}
    if worst is not None:
        info["breakthrough"] = worst
    return choice, info


def run(cfg: ScenarioConfig, run_dir=None, consts: EmpiricalConstants | None = None) -> RunArtifacts:
    run_dir = Path(run_dir or cfg.output_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / SNAPSHOT_DIR).mkdir(exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create run directory {run_dir}: {exc}") from exc
    solver = cfg.solver
    state = build_initial_data(cfg)
    states = [state]
    snaps = []
    events = []

    def snap(st: FlowState, idx: int):
        if cfg.snapshots:
            p = run_dir / SNAPSHOT_DIR / f"snap_{idx:06d}.ual"
            write_snapshot(p, {"rho": st.rho, "u": st.u}, st.t)
            snaps.append(p.name)

    snap(state, 0)
    counter = {"steps": 0}

    def on_step(st: FlowState):
        counter["steps"] += 1
        if counter["steps"] % solver.output_stride == 0:
            states.append(st)
            snap(st, counter["steps"])

    status, detail = "completed", {}
    try:
        final, _ = advance(state, solver, solver.t_end, on_step=on_step)
        if states[-1] is not final:
            states.append(final)
            snap(final, counter["steps"])
    except NumericalEvent as ev:
        status, detail = ev.kind, ev.as_dict()
        events.append(ev.as_dict())
        last = states[-1]
        if cfg.snapshots:
            # keep the last good state as the final snapshot
            snap(last, counter["steps"])

    sigma = cfg.sigma
    records = []
    for st in states:
        if solver.frozen_density:
            aux = _frozen_aux(st, solver.alpha)
        else:
            check_vacuum(st)
            aux = extract_auxiliary(st, solver.alpha)
        records.append(record(st, aux, None, sigma))

    choice, moc_info = None, {}
    if cfg.moc and not solver.frozen_density:
        if consts is None:
            consts = (load_constants(cfg.constants_file) if cfg.constants_file
                      else fit_empirical_constants(solver.alpha, cfg.dim))
        dump_json(consts.as_dict(), run_dir / "constants.json")
        choice, moc_info = _moc_pass(cfg, records, states, consts)
        dump_json(moc_info, run_dir / "moc.json")
        if "breakthrough" in moc_info and status == "completed":
            status, detail = "moc_breakthrough", moc_info["breakthrough"]
            events.append({"event": "moc_breakthrough", **moc_info["breakthrough"]})

    write_csv(records, run_dir / DIAGNOSTICS)
    with (run_dir / EVENTS).open("w") as fh:
        for e in events:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    manifest = {
        "version": __version__,
        "config": cfg.as_dict(),
        "grid": {"dim": cfg.dim, "n_per_dim": cfg.n, "length": cfg.length},
        "scenario": cfg.scenario.value,
        "seed": cfg.seed,
        "status": status,
        "status_detail": detail,
        "n_steps": counter["steps"],
        "snapshots": snaps,
        "moc": {k: moc_info[k] for k in ("status", "delta1", "delta2", "kappa", "mu", "log_lambda")
                if k in moc_info},
    }
    dump_json(manifest, run_dir / MANIFEST)
    return RunArtifacts(run_dir, cfg, status, detail, records, states, choice, moc_info, snaps)


def _frozen_aux(state: FlowState, alpha: float):
    # with frozen density the G, F, H fields carry no conservation law; they
    # are still reported for completeness
    return extract_auxiliary(state, alpha)


# -- report ---------------------------------------------------------------------------------

def _load_states(run_dir: Path, names) -> list:
    out = []
    for name in names:
        header, fields = read_snapshot(run_dir / SNAPSHOT_DIR / name)
        out.append((header["time"], fields["rho"]))
    return out


def report(run_dir) -> dict:
    """Plot-ready CSVs and summary.json under ``run_dir/report``; returns the summary."""
    run_dir = Path(run_dir)
    if not (run_dir / MANIFEST).exists():
        raise MissingArtifactsError(run_dir, [MANIFEST])
    manifest = json.loads((run_dir / MANIFEST).read_text())
    out = run_dir / "report"
    out.mkdir(exist_ok=True)
    if manifest.get("kind") == "lemmas":
        missing = [f for f in ("lemma_reports.json", "lemma_sweep.csv") if not (run_dir / f).exists()]
        if missing:
            raise MissingArtifactsError(run_dir, missing)
        reports = json.loads((run_dir / "lemma_reports.json").read_text())
        summary = {"kind": "lemmas", "lemma_reports": [
            {k: r[k] for k in ("lemma", "alpha", "d", "params", "pass", "n_violations")} for r in reports]}
        _margin_csv(run_dir / "lemma_sweep.csv", out / "lemma_margins.csv")
        dump_json(summary, out / "summary.json")
        return summary

    missing = [f for f in REQUIRED if not (run_dir / f).exists()]
    snaps = manifest.get("snapshots", [])
    missing += [f"{SNAPSHOT_DIR}/{s}" for s in snaps if not (run_dir / SNAPSHOT_DIR / s).exists()]
    if missing:
        raise MissingArtifactsError(run_dir, missing)
    records = read_csv(run_dir / DIAGNOSTICS)
    frozen = manifest["config"]["solver"]["frozen_density"]
    with (out / "timeseries.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "V", "u_dev", "moc_margin_rho", "moc_margin_u", "lip_rho", "lip_u",
                    "holder_u_sigma"])
        for r in records:
            w.writerow([r.t, r.V, r.u_dev, r.moc_margin_rho, r.moc_margin_u, r.lip_rho, r.lip_u,
                        r.holder_u_sigma])
    summary = {
        "kind": "run",
        "scenario": manifest["scenario"],
        "status": manifest["status"],
        "status_detail": manifest["status_detail"],
        "t_final": records[-1].t,
        "final_lip_u": records[-1].lip_u,
        "final_lip_rho": records[-1].lip_rho,
        "violations": check_apriori(records, frozen_density=frozen),
        "moc": manifest.get("moc", {}),
    }
    if manifest["status"] == "blowup":
        summary["blowup_time"] = manifest["status_detail"].get("t")
        # the halting state itself is not kept; its gradient is in the event
        summary["final_lip_u"] = manifest["status_detail"].get("lip_u", summary["final_lip_u"])
    if len(records) >= 3:
        fl = fit_flocking(records, _load_states(run_dir, snaps) if snaps else ())
        summary["flocking"] = fl.as_dict()
        summary["fitted_decay_rate"] = fl.decay_rate_fit
        if fl.times:
            with (out / "profile_residual.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "residual"])
                w.writerows(zip(fl.times, fl.profile_residual))
    dump_json(summary, out / "summary.json")
    return summary


def _margin_csv(src: Path, dst: Path):
    with src.open() as fi, dst.open("w", newline="") as fo:
        r = csv.DictReader(fi)
        w = csv.writer(fo)
        w.writerow(["lemma", "alpha", "d", "xi", "margin", "quad_err", "pass"])
        for row in r:
            w.writerow([row["lemma"], row["alpha"], row["d"], row["xi"], row["margin"], row["quad_err"],
                        row["pass"]])
