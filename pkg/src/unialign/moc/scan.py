"""Discrete breakthrough scans and Hölder seminorms over lattice shifts.

On the periodic lattice, max over x of f(x + s) - f(x) for a fixed integer
shift s is an exact two-point scan at separation |s| (torus distance), so the
scan is O(N * #shifts) rather than O(N^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..grid import ScalarField, TorusGrid
from .family import Moc

N_RANDOM_SHIFTS = 64
DEFAULT_SEED = 20240607


@dataclass(frozen=True)
class ShiftSet:
    """Integer lattice shifts and their torus lengths."""

    shifts: np.ndarray      # (K, d) integers
    lengths: np.ndarray     # (K,)


@dataclass(frozen=True)
class ScanResult:
    margin: float
    argmin_shift: tuple
    argmin_distance: float
    passed: bool
    n_shifts: int

    def as_dict(self) -> dict:
        return {"margin": self.margin, "argmin_shift": list(self.argmin_shift),
                "argmin_distance": self.argmin_distance, "pass": self.passed,
                "n_shifts": self.n_shifts}


@lru_cache(maxsize=16)
def shift_set(grid: TorusGrid, n_random: int = N_RANDOM_SHIFTS, seed: int = DEFAULT_SEED) -> ShiftSet:
    """All nonzero coordinate-axis shifts plus ``n_random`` random lattice shifts."""
    d, n = grid.dim, grid.n
    rows = []
    for axis in range(d):
        for j in range(1, n):
            v = [0] * d
            v[axis] = j
            rows.append(v)
    if d > 1 and n_random > 0:
        rng = np.random.Generator(np.random.Philox(key=seed))
        extra = rng.integers(0, n, size=(n_random, d))
        extra = extra[np.count_nonzero(extra, axis=1) > 1]
        rows.extend(extra.tolist())
    shifts = np.unique(np.asarray(rows, dtype=np.int64), axis=0)
    wrapped = np.minimum(shifts, n - shifts)
    lengths = np.sqrt(np.sum(wrapped.astype(float) ** 2, axis=1)) * grid.dx
    return ShiftSet(shifts, lengths)


def max_increments(f: ScalarField, shifts: ShiftSet) -> np.ndarray:
    """M(s) = max_x f(x + s) - f(x) for every shift in the set."""
    v = f.physical
    d = v.ndim
    out = np.empty(len(shifts.lengths))
    for i, s in enumerate(shifts.shifts):
        moved = np.roll(v, shift=tuple(-int(k) for k in s), axis=tuple(range(d)))
        out[i] = float(np.max(moved - v))
    return out


def scan_breakthrough(f: ScalarField, m: Moc, decay_factor: float = 1.0,
                      shifts: ShiftSet | None = None) -> ScanResult:
    """Worst margin min_s [decay * omega(|s|) - M(s)] over the shift set."""
    if shifts is None:
        shifts = shift_set(f.grid)
    M = max_increments(f, shifts)
    allowed = decay_factor * np.asarray(m(shifts.lengths), dtype=float)
    margins = allowed - M
    i = int(np.argmin(margins))
    return ScanResult(float(margins[i]), tuple(int(k) for k in shifts.shifts[i]),
                      float(shifts.lengths[i]), bool(margins[i] > 0), int(margins.size))


def holder_seminorm(f: ScalarField, sigma: float, shifts: ShiftSet | None = None) -> float:
    """max over the shift set of max_x |f(x+s) - f(x)| / |s|^sigma."""
    if not 0.0 < sigma <= 1.0:
        raise ValueError("sigma must lie in (0, 1]")
    if shifts is None:
        shifts = shift_set(f.grid)
    # |f(x+s)-f(x)| maxes over x are covered by s and -s; M(-s) = max_x f(x)-f(x+s)
    g = ScalarField(f.grid, -f.physical)
    M = np.maximum(max_increments(f, shifts), max_increments(g, shifts))
    return float(np.max(M / shifts.lengths**sigma))
