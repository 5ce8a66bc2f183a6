"""Fit and verify the estimate envelopes for every alpha and dimension.

Writes one verify-lemmas bundle per (alpha, d) under --out and prints a table.
"""
import argparse
import time
from pathlib import Path

from unialign.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 1.0, 1.5])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--out", default="runs/lemmas")
    args = ap.parse_args()
    worst = 0
    for alpha in args.alphas:
        for d in args.dims:
            t0 = time.perf_counter()
            out = Path(args.out) / f"alpha{alpha:g}_d{d}"
            code = cli(["verify-lemmas", "--alpha", str(alpha), "--dim", str(d), "--out", str(out)])
            print(f"# alpha={alpha:g} d={d}: exit {code} in {time.perf_counter() - t0:.1f} s")
            worst = max(worst, code)
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
