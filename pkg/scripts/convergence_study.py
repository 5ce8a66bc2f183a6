"""Temporal self-convergence of both schemes on frozen-density fractal Burgers."""
import argparse

import numpy as np

from unialign.core import FlowState, Scheme, SolverConfig, self_convergence_slopes
from unialign.grid import make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--steps", type=int, nargs="+", default=[20, 40, 80, 160, 320])
    args = ap.parse_args()
    g = make_grid(1, args.n)
    x = g.coords[0]
    state = FlowState.from_arrays(g, np.ones(args.n), 0.5 * np.sin(x) + 0.2 * np.cos(2 * x))
    for scheme in Scheme:
        cfg = SolverConfig(alpha=args.alpha, scheme=scheme, frozen_density=True)
        errs, slopes = self_convergence_slopes(state, cfg, args.t_end, args.steps)
        print(f"{scheme.value:12s} errors " + " ".join(f"{e:.3e}" for e in errs))
        print(f"{'':12s} slopes " + " ".join(f"{s:.3f}" for s in slopes))


if __name__ == "__main__":
    main()
