"""Periodic torus discretization and Fourier-multiplier operators.

Fields live on a uniform lattice of ``n`` points per dimension over a box of
side ``length`` (default 2*pi, so wavenumbers are integers).  All operators are
pure: they take a :class:`ScalarField` and return a new one.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi

# k1 = 0 modes of Lambda^alpha rho must vanish to this relative level for
# inv_dx1_lambda to be well defined.
ADMISSIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    n: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n % 2:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError("n must be at least 8")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of physical coordinates, ``coords[i]`` is x_{i+1}."""
        return tuple(np.meshgrid(*([self.nodes] * self.dim), indexing="ij"))

    @cached_property
    def int_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, broadcastable against the field shape."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        out = []
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.n
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        scale = TWO_PI / self.length
        return tuple(scale * k for k in self.int_wavenumbers)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavenumbers))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.n / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for k in self.int_wavenumbers:
            mask = mask & (np.abs(k) <= cut)
        return mask

    def frac_symbol(self, alpha: float) -> np.ndarray:
        """|k|^alpha with the mean mode mapped to zero (also for alpha < 0)."""
        with np.errstate(divide="ignore"):
            sym = np.where(self.kmag > 0, self.kmag ** float(alpha), 0.0)
        return sym

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(coeffs).real

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def mean(self, values: np.ndarray) -> float:
        return float(np.mean(values))


def make_grid(dim: int, n: int, length: float = TWO_PI) -> TorusGrid:
    return TorusGrid(int(dim), int(n), float(length))


@dataclass(frozen=True)
class ScalarField:
    """One real field on a grid, held either in physical or spectral form."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)
    representation: str = "physical"

    def __post_init__(self):
        if self.representation not in ("physical", "spectral"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if np.shape(self.values) != self.grid.shape:
            raise ValueError(
                f"values shape {np.shape(self.values)} does not match grid {self.grid.shape}"
            )

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "ScalarField":
        return cls(grid, np.asarray(func(*grid.coords), dtype=float) * np.ones(grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def physical(self) -> np.ndarray:
        if self.representation == "physical":
            return self.values
        return self.grid.ifft(self.values)

    @property
    def spectral(self) -> np.ndarray:
        if self.representation == "spectral":
            return self.values
        return self.grid.fft(self.values)

    def to_physical(self) -> "ScalarField":
        return ScalarField(self.grid, self.physical, "physical")

    def to_spectral(self) -> "ScalarField":
        return ScalarField(self.grid, self.spectral, "spectral")

    def sup(self) -> float:
        return float(np.max(np.abs(self.physical)))

    def integral(self) -> float:
        return self.grid.integrate(self.physical)


def _check_same_grid(*fields: ScalarField) -> TorusGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    return grid


def apply_multiplier(f: ScalarField, symbol: np.ndarray) -> ScalarField:
    return ScalarField(f.grid, f.grid.ifft(symbol * f.spectral))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")


def fractional_laplacian(f: ScalarField, alpha: float) -> ScalarField:
    _check_alpha(alpha)
    return apply_multiplier(f, f.grid.frac_symbol(alpha))


def partial_x1(f: ScalarField) -> ScalarField:
    return apply_multiplier(f, 1j * f.grid.wavenumbers[0])


def gradient(f: ScalarField) -> list[ScalarField]:
    coeffs = f.spectral
    return [ScalarField(f.grid, f.grid.ifft(1j * k * coeffs)) for k in f.grid.wavenumbers]


def gradient_sup(f: ScalarField) -> float:
    """sup_x |grad f(x)| with the Euclidean norm."""
    sq = sum(g.physical**2 for g in gradient(f))
    return float(np.sqrt(np.max(sq)))


def inv_dx1_lambda(rho: ScalarField, alpha: float) -> ScalarField:
    """Solve d/dx1 u = Lambda^alpha rho for mean-free u.

    Raises ``ValueError`` when Lambda^alpha rho carries energy on k1 = 0
    modes, in which case no such u exists.
    """
    _check_alpha(alpha)
    grid = rho.grid
    lam_hat = grid.frac_symbol(alpha) * rho.spectral
    k1 = grid.wavenumbers[0]
    scale = max(float(np.max(np.abs(lam_hat))), np.finfo(float).tiny)
    bad = (k1 == 0) & (grid.kmag > 0)
    if np.any(np.abs(lam_hat[bad]) > ADMISSIBILITY_TOL * scale):
        raise ValueError(
            "Lambda^alpha rho has nonzero k1 = 0 modes; G0 = 0 data is not achievable"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        u_hat = np.where(k1 != 0, lam_hat / (1j * k1), 0.0)
    return ScalarField(grid, grid.ifft(u_hat))


def dealias(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.ifft(f.grid.dealias_mask * f.spectral))


def translate_x1(f: ScalarField, shift: float) -> ScalarField:
    """Return g(x) = f(x + shift*e1) by spectral phase shift."""
    k1 = f.grid.wavenumbers[0]
    return apply_multiplier(f, np.exp(1j * k1 * shift))


# -- snapshot container ------------------------------------------------------
#
# layout: 8-byte magic, uint64 (LE) header length, UTF-8 JSON header, then the
# raw little-endian float64 payload of each field in row-major order.  Spectral
# payloads interleave real and imaginary parts.

SNAPSHOT_MAGIC = b"UALSNAP1"


def write_snapshot(path, fields: dict[str, ScalarField], time: float = 0.0, extra=None) -> Path:
    path = Path(path)
    names = list(fields)
    grid = _check_same_grid(*fields.values())
    reps = {fields[k].representation for k in names}
    if len(reps) != 1:
        raise ValueError("all fields in one snapshot must share a representation")
    rep = reps.pop()
    header = {
        "dim": grid.dim,
        "n_per_dim": grid.n,
        "length": grid.length,
        "representation": rep,
        "time": float(time),
        "fields": names,
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            vals = fields[name].values
            if rep == "spectral":
                vals = np.stack([vals.real, vals.imag], axis=-1)
            fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[dict, dict[str, ScalarField]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    grid = make_grid(header["dim"], header["n_per_dim"], header["length"])
    rep = header["representation"]
    per = int(np.prod(grid.shape)) * (2 if rep == "spectral" else 1)
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != per * len(header["fields"]):
        raise ValueError(f"{path}: payload size does not match header")
    fields = {}
    for i, name in enumerate(header["fields"]):
        chunk = data[i * per : (i + 1) * per]
        if rep == "spectral":
            chunk = chunk.reshape(grid.shape + (2,))
            vals = chunk[..., 0] + 1j * chunk[..., 1]
        else:
            vals = chunk.reshape(grid.shape).copy()
        fields[name] = ScalarField(grid, vals, rep)
    return header, fields


def _trig_coeffs_1d(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and wavenumbers of the real trigonometric interpolant."""
    grid = f.grid
    c = f.spectral / grid.n
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n) * (TWO_PI / grid.length)
    nyq = grid.n // 2
    # split the Nyquist mode evenly between +k and -k so the interpolant is real
    c = np.concatenate([c, [0.5 * c[nyq]]])
    c[nyq] *= 0.5
    k = np.concatenate([k, [-k[nyq]]])
    return c, k


def _trig_eval_1d(c: np.ndarray, k: np.ndarray, x: float, order: int = 0) -> float:
    return float(np.real(np.sum(c * (1j * k) ** order * np.exp(1j * k * x))))


def spectral_sup(f: ScalarField, refine: int = 4) -> float:
    """sup |f| of the trigonometric interpolant, not just of the nodal values.

    In 1-D the largest nodal extrema are polished by Newton iteration on the
    interpolant; in higher dimension the field is zero-padded by ``refine``.
    """
    grid = f.grid
    vals = f.physical
    best = float(np.max(np.abs(vals)))
    if grid.dim == 1:
        c, k = _trig_coeffs_1d(f)
        a = np.abs(vals)
        peaks = np.flatnonzero((a >= np.roll(a, 1)) & (a >= np.roll(a, -1)))
        peaks = peaks[np.argsort(a[peaks])[::-1][:4]]
        for j in peaks:
            x = x0 = grid.nodes[j]
            for _ in range(30):
                d1 = _trig_eval_1d(c, k, x, 1)
                d2 = _trig_eval_1d(c, k, x, 2)
                if d2 == 0:
                    break
                x = float(np.clip(x - d1 / d2, x0 - grid.dx, x0 + grid.dx))
                if abs(d1 / d2) < 1e-14 * grid.length:
                    break
            best = max(best, abs(_trig_eval_1d(c, k, x)))
        return best
    m = grid.n * refine
    padded = np.zeros((m,) * grid.dim, dtype=complex)
    lo = grid.n // 2
    idx = np.r_[0:lo, m - lo : m]
    padded[np.ix_(*([idx] * grid.dim))] = f.spectral
    fine = np.fft.ifftn(padded).real * refine**grid.dim
    return max(best, float(np.max(np.abs(fine))))
