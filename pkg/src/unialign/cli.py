"""Command-line entry point.

Exit codes: 0 completed/pass, 1 usage or I/O error, 2 numerical event,
3 lemma violation, MOC breakthrough or infeasible parameter selection.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .diagnostics import dump_json
from .moc.params import Regime

EXIT_OK, EXIT_USAGE, EXIT_EVENT, EXIT_VIOLATION = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"unialign: {msg}", file=sys.stderr)


# -- run ------------------------------------------------------------------------------

def _run_one(path: str, out: str | None) -> tuple[str, int, str]:
    from .runner import run
    from .scenarios import load_config

    cfg = load_config(path)
    art = run(cfg, out)
    return str(art.run_dir), art.exit_code, art.status


def cmd_run(args) -> int:
    if args.out and len(args.configs) > 1:
        _err("--out needs a single config")
        return EXIT_USAGE
    try:
        if args.jobs > 1 and len(args.configs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_one, args.configs, [None] * len(args.configs)))
        else:
            results = [_run_one(c, args.out) for c in args.configs]
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    for run_dir, _, status in results:
        print(f"{run_dir}: {status}")
    return max(code for _, code, _ in results)


# -- verify-lemmas ---------------------------------------------------------------------

def _load_sweep(path, alpha):
    """Sweep file: JSON {"points": [{delta, lam, mu, kappa}, ...], "n_xi": int, "span": float}."""
    from .moc.lemmas import SPAN, VERIFY_N_XI, SweepPoint, regime_mu, verify_point

    if path is None:
        return [verify_point(alpha)], VERIFY_N_XI, SPAN
    spec = json.loads(Path(path).read_text())
    unknown = set(spec) - {"points", "n_xi", "span"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    pts = []
    for p in spec.get("points", []):
        p = dict(p)
        p.setdefault("mu", regime_mu(alpha))
        pts.append(SweepPoint(**p))
    n_xi = int(spec.get("n_xi", VERIFY_N_XI))
    if n_xi < 40:
        raise ValueError(f"{path}: n_xi must be at least 40")
    return pts or [verify_point(alpha)], n_xi, float(spec.get("span", SPAN))


def cmd_verify_lemmas(args) -> int:
    from .moc.lemmas import fit_empirical_constants, linearity_check, verify_all, write_reports_csv
    from .runner import load_constants

    try:
        points, n_xi, span = _load_sweep(args.sweep, args.alpha)
        consts = (load_constants(args.constants) if args.constants
                  else fit_empirical_constants(args.alpha, args.dim))
    except (OSError, ValueError, TypeError, KeyError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    if (consts.alpha, consts.d) != (args.alpha, args.dim):
        _err(f"constants are for alpha={consts.alpha}, d={consts.d}")
        return EXIT_USAGE
    reports = []
    for p in points:
        reports += verify_all(args.alpha, args.dim, consts, p, n_xi=n_xi, span=span)
    lin = None if args.no_linearity else linearity_check(args.alpha, args.dim, consts)
    ok = all(r.passed for r in reports) and (lin is None or lin["pass"])
    for r in reports:
        print(f"{r.lemma:18s} alpha={r.alpha:g} d={r.d} lambda={r.lam:.3g} "
              f"{'PASS' if r.passed else 'FAIL'} violations={r.n_violations} "
              f"min margin={float(r.margin.min()):.3e}")
    if lin is not None:
        print("delta-linearity " + ("PASS" if lin["pass"] else "FAIL") + " "
              + " ".join(f"{k}={v:.2e}" for k, v in lin["rel_change"].items()))
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            dump_json(consts.as_dict(), out / "constants.json")
            (out / "lemma_reports.json").write_text(json.dumps([r.as_dict() for r in reports], indent=2))
            write_reports_csv(reports, out / "lemma_sweep.csv")
            dump_json({"kind": "lemmas", "version": __version__, "alpha": args.alpha, "d": args.dim,
                       "n_xi": n_xi, "span": span, "pass": ok, "linearity": lin},
                      out / "manifest.json")
        except OSError as exc:
            _err(str(exc))
            return EXIT_USAGE
    return EXIT_OK if ok else EXIT_VIOLATION


# -- select-params ---------------------------------------------------------------------

def _parse_inputs(pairs) -> dict:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got '{item}'")
        out[key.strip()] = float(val)
    return out


def cmd_select_params(args) -> int:
    from .moc.lemmas import fit_empirical_constants
    from .moc.params import InfeasibleError, SelectionInputs, select_parameters
    from .runner import load_constants

    try:
        regime = Regime(args.regime)
        kv = _parse_inputs(args.inputs)
        alpha = kv.pop("alpha", None)
        if args.constants:
            consts = load_constants(args.constants)
            alpha = consts.alpha if alpha is None else alpha
        else:
            if alpha is None:
                raise ValueError("alpha=... is required without --constants")
            consts = fit_empirical_constants(alpha, args.dim)
        inputs = SelectionInputs(**kv)
        choice = select_parameters(regime, alpha, inputs, consts)
    except InfeasibleError as exc:
        print(json.dumps(exc.as_dict(), indent=2, default=float))
        return EXIT_VIOLATION
    except (OSError, ValueError, TypeError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(json.dumps(choice.as_dict(), indent=2, default=float))
    return EXIT_OK if choice.certificate.passed else EXIT_VIOLATION


# -- report ------------------------------------------------------------------------------

def cmd_report(args) -> int:
    from .runner import report

    try:
        summary = report(args.run_dir)
    except (OSError, ValueError, KeyError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unialign", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one or more scenario configs")
    r.add_argument("configs", nargs="+")
    r.add_argument("--out", help="run directory (overrides [output] dir; single config only)")
    r.add_argument("--jobs", type=int, default=1, help="parallel processes for several configs")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-lemmas", help="fit and verify the estimate envelopes")
    v.add_argument("--alpha", type=float, required=True)
    v.add_argument("--dim", type=int, choices=(1, 2), required=True)
    v.add_argument("--sweep", help="JSON sweep file")
    v.add_argument("--constants", help="constants.json to verify instead of refitting")
    v.add_argument("--out", help="directory for lemma_reports.json, lemma_sweep.csv, manifest.json")
    v.add_argument("--no-linearity", action="store_true", help="skip the doubled-delta refit")
    v.set_defaults(func=cmd_verify_lemmas)

    s = sub.add_parser("select-params", help="choose MOC parameters for given data bounds")
    s.add_argument("regime", choices=[x.value for x in Regime])
    s.add_argument("inputs", nargs="*", help="key=value: alpha, rho_lower, rho_upper, V0, F0_norm, ...")
    s.add_argument("--constants", help="constants.json from verify-lemmas or a run")
    s.add_argument("--dim", type=int, choices=(1, 2), default=1)
    s.set_defaults(func=cmd_select_params)

    rp = sub.add_parser("report", help="emit plot-ready CSVs and summary.json for a run directory")
    rp.add_argument("run_dir")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
