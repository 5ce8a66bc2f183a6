"""Critical run with MOC margins and flocking fit; prints the decay summary."""
import argparse
import json
from pathlib import Path

from unialign.runner import report, run
from unialign.scenarios import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "critical_demo.ini"))
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    art = run(load_config(args.config), args.out)
    s = report(art.run_dir)
    margins = [(r.t, r.moc_margin_rho, r.moc_margin_u) for r in art.records]
    print(f"status: {art.status}, run dir {art.run_dir}")
    print(f"min margin rho {min(m[1] for m in margins):.4g}, u {min(m[2] for m in margins):.4g}")
    print(json.dumps(s.get("flocking", {}), indent=2, default=float))
    raise SystemExit(art.exit_code)


if __name__ == "__main__":
    main()
