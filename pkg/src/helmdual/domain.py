"""Problem description, periodic grids, discrete fields and coefficients.

Everything downstream works on a periodic box [0, L)^N sampled on a uniform
lattice.  The box stands in for R^N: dual ground states oscillate with decay,
so a sufficiently large box approximates the whole-space problem.  All norms
and integrals use midpoint quadrature (uniform weights dx^N), which is
spectrally consistent with FFT convolution on the same lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Union

import numpy as np

__all__ = [
    "ProblemSpec",
    "Grid",
    "Field",
    "CoefficientField",
    "DualPair",
    "PrimalPair",
    "build_grid",
    "lp_norm",
    "sample_coefficients",
    "save_field",
    "load_field",
]

VALIDITY_MODES = ("strict", "radial", "override")


@dataclass(frozen=True)
class ProblemSpec:
    """Scalar parameters of the coupled system: dimension, exponent, frequencies.

    The admissible exponent range depends on ``validity_mode``:

    * ``strict``   -- 2(N+1)/(N-1) < p < 2*, the range where the resolvent
      bound holds for general data,
    * ``radial``   -- 2N/(N-1) < p < 2*, sufficient for radial data,
    * ``override`` -- only 2 < p < 2*; experiments outside the theory's range
      are explicitly labeled as such.
    """

    N: int
    p: float
    mu: float
    nu: float
    validity_mode: str = "strict"

    def __post_init__(self):
        if self.N not in (2, 3):
            raise ValueError(f"dimension N must be 2 or 3, got {self.N}")
        if self.validity_mode not in VALIDITY_MODES:
            raise ValueError(
                f"validity_mode must be one of {VALIDITY_MODES}, got {self.validity_mode!r}"
            )
        if not (self.mu > 0 and self.nu > 0):
            raise ValueError(f"frequencies must be positive, got mu={self.mu}, nu={self.nu}")
        p, N = self.p, self.N
        p_crit = 2 * N / (N - 2) if N >= 3 else math.inf
        if not (2.0 < p < p_crit):
            raise ValueError(f"exponent p must satisfy 2 < p < {p_crit}, got {p}")
        if self.validity_mode == "strict" and not p > 2 * (N + 1) / (N - 1):
            raise ValueError(
                f"strict mode requires p > {2 * (N + 1) / (N - 1)} for N={N}, got {p}; "
                "use validity_mode='radial' or 'override' to opt out"
            )
        if self.validity_mode == "radial" and not p > 2 * N / (N - 1):
            raise ValueError(
                f"radial mode requires p > {2 * N / (N - 1)} for N={N}, got {p}"
            )

    @property
    def p_dual(self) -> float:
        """Conjugate exponent p' = p/(p-1), so 1/p + 1/p' = 1."""
        return self.p / (self.p - 1.0)


def _is_fft_friendly(n: int) -> bool:
    # only factors 2, 3, 5 so the FFT stays O(n log n)
    for f in (2, 3, 5):
        while n % f == 0:
            n //= f
    return n == 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on the box [0, L)^N.

    Frequencies are 2*pi/L times signed integer offsets in [-n/2, n/2).
    """

    N: int
    n_per_dim: int
    box_length: float

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.N

    @property
    def shape(self) -> tuple:
        return (self.n_per_dim,) * self.N

    @property
    def size(self) -> int:
        return self.n_per_dim**self.N

    def axis(self) -> np.ndarray:
        """Sample coordinates along one axis."""
        return np.arange(self.n_per_dim) * self.spacing

    def meshgrid(self) -> tuple:
        ax = self.axis()
        return np.meshgrid(*([ax] * self.N), indexing="ij")

    def freq_axis(self) -> np.ndarray:
        """Signed frequencies 2*pi*k/L along one axis, in FFT order."""
        return _freqs_1d(self.n_per_dim, self.box_length)

    def xi_sq(self) -> np.ndarray:
        """|xi|^2 on the full frequency lattice (FFT layout)."""
        return _xi_sq_full(self)

    def xi_sq_rfft(self) -> np.ndarray:
        """|xi|^2 on the half-spectrum lattice used by rfftn."""
        return _xi_sq_rfft(self)

    def rfft_weights(self) -> np.ndarray:
        """Multiplicities folding the rfftn half spectrum back to the full one."""
        return _rfft_weights(self)


def build_grid(N: int, n_per_dim: int, box_length: float) -> Grid:
    """Construct a periodic grid, validating lattice-friendliness of n_per_dim."""
    if N not in (2, 3):
        raise ValueError(f"dimension N must be 2 or 3, got {N}")
    if n_per_dim < 8 or not _is_fft_friendly(n_per_dim):
        raise ValueError(
            f"n_per_dim must be >= 8 with only factors 2, 3, 5, got {n_per_dim}"
        )
    if not box_length > 0:
        raise ValueError(f"box_length must be positive, got {box_length}")
    return Grid(N=N, n_per_dim=n_per_dim, box_length=float(box_length))


@lru_cache(maxsize=32)
def _freqs_1d(n: int, L: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)


@lru_cache(maxsize=32)
def _xi_sq_full_cached(N: int, n: int, L: float) -> np.ndarray:
    xi = _freqs_1d(n, L)
    grids = np.meshgrid(*([xi] * N), indexing="ij")
    return sum(g**2 for g in grids)


def _xi_sq_full(grid: Grid) -> np.ndarray:
    return _xi_sq_full_cached(grid.N, grid.n_per_dim, grid.box_length)


@lru_cache(maxsize=32)
def _xi_sq_rfft_cached(N: int, n: int, L: float) -> np.ndarray:
    xi = _freqs_1d(n, L)
    xi_half = xi[: n // 2 + 1].copy()
    xi_half[-1] = abs(xi_half[-1])  # rfft keeps +Nyquist
    axes = [xi] * (N - 1) + [xi_half]
    grids = np.meshgrid(*axes, indexing="ij")
    return sum(g**2 for g in grids)


def _xi_sq_rfft(grid: Grid) -> np.ndarray:
    return _xi_sq_rfft_cached(grid.N, grid.n_per_dim, grid.box_length)


@lru_cache(maxsize=32)
def _rfft_weights_cached(N: int, n: int) -> np.ndarray:
    w_last = np.full(n // 2 + 1, 2.0)
    w_last[0] = 1.0
    if n % 2 == 0:
        w_last[-1] = 1.0
    shape = (1,) * (N - 1) + (n // 2 + 1,)
    return np.broadcast_to(w_last.reshape(shape), (n,) * (N - 1) + (n // 2 + 1,))


def _rfft_weights(grid: Grid) -> np.ndarray:
    return _rfft_weights_cached(grid.N, grid.n_per_dim)


class Field:
    """A real scalar function sampled on a grid.

    Values must stay finite; every public operation validates this so NaN/Inf
    never propagates silently into the solver.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.grid = grid
        self.values = values

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    def __repr__(self):
        return f"Field(grid={self.grid}, min={self.values.min():.3g}, max={self.values.max():.3g})"


def lp_norm(f: Field, q: float) -> float:
    """Discrete L^q norm (sum |f|^q dx^N)^(1/q) on the periodic box."""
    if q < 1:
        raise ValueError(f"norm exponent must satisfy q >= 1, got {q}")
    s = float(np.sum(np.abs(f.values) ** q)) * f.grid.cell_volume
    return s ** (1.0 / q)


def _pair_base(first: Field, second: Field):
    if first.grid != second.grid:
        raise ValueError("pair components must live on the same grid")


@dataclass
class DualPair:
    """(ubar, vbar): a pair of fields in the dual space L^{p'}."""

    first: Field
    second: Field

    def __post_init__(self):
        _pair_base(self.first, self.second)

    @property
    def grid(self) -> Grid:
        return self.first.grid


@dataclass
class PrimalPair:
    """(u, v): a pair of fields in the primal space L^p."""

    first: Field
    second: Field

    def __post_init__(self):
        _pair_base(self.first, self.second)

    @property
    def grid(self) -> Grid:
        return self.first.grid


CoefficientSpec = Union[float, int, Callable[..., np.ndarray]]


@dataclass
class CoefficientField:
    """Sampled periodic coefficients a(x) > 0 and 0 <= b(x) <= p-1.

    Cached bounds are the min/max of the samples.  The box must cover an
    integer number of unit cells so one period of Z^N-periodic data fits.
    """

    a: Field
    b: Field
    p: float
    a_minus: float
    a_plus: float
    b_minus: float
    b_plus: float

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @property
    def constant(self) -> bool:
        return self.a_minus == self.a_plus and self.b_minus == self.b_plus


def _sample_one(spec: CoefficientSpec, grid: Grid, name: str) -> Field:
    if isinstance(spec, (int, float)):
        return Field.constant(grid, float(spec))
    if callable(spec):
        if abs(grid.box_length - round(grid.box_length)) > 1e-9:
            raise ValueError(
                f"profile coefficient {name!r} needs an integer box_length "
                f"(one period of unit-cell data), got {grid.box_length}"
            )
        vals = np.asarray(spec(*grid.meshgrid()), dtype=np.float64)
        if vals.shape != grid.shape:
            raise ValueError(f"coefficient profile {name!r} returned shape {vals.shape}")
        return Field(grid, vals)
    raise TypeError(f"coefficient {name!r} must be a number or a callable profile")


def _worst_location(grid: Grid, values: np.ndarray, mask: np.ndarray) -> str:
    idx = np.unravel_index(np.argmax(mask), grid.shape)
    x = tuple(float(i) * grid.spacing for i in idx)
    return f"value {values[idx]:.6g} at grid index {idx} (x = {x})"

def sample_coefficients(spec_a: CoefficientSpec, spec_b: CoefficientSpec,
                        grid: Grid, p: float) -> CoefficientField:
    """Sample coefficient profiles onto the grid and cache their bounds.

    Raises with the offending value and location when a <= 0 anywhere or b
    leaves [0, p-1].
    """
    a = _sample_one(spec_a, grid, "a")
    b = _sample_one(spec_b, grid, "b")
    bad_a = a.values <= 0
    if bad_a.any():
        raise ValueError("coefficient a must be positive everywhere: "
                         + _worst_location(grid, a.values, bad_a))
    bad_b_low = b.values < 0
    if bad_b_low.any():
        raise ValueError("coefficient b must be nonnegative: "
                         + _worst_location(grid, b.values, bad_b_low))
    bad_b_high = b.values > p - 1
    if bad_b_high.any():
        raise ValueError(f"coefficient b exceeds p-1 = {p - 1:.6g}: "
                         + _worst_location(grid, b.values, bad_b_high))
    return CoefficientField(
        a=a, b=b, p=float(p),
        a_minus=float(a.values.min()), a_plus=float(a.values.max()),
        b_minus=float(b.values.min()), b_plus=float(b.values.max()),
    )


def save_field(field: Field, path_base) -> None:
    """Write a field snapshot: raw little-endian doubles plus a JSON sidecar."""
    base = Path(path_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    with open(base.with_suffix(".f64"), "wb") as fh:
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    sidecar = {
        "N": field.grid.N,
        "n_per_dim": field.grid.n_per_dim,
        "box_length": field.grid.box_length,
    }
    with open(base.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(path_base) -> Field:
    """Read a field snapshot written by :func:`save_field`."""
    base = Path(path_base)
    with open(base.with_suffix(".json")) as fh:
        meta = json.load(fh)
    grid = Grid(N=int(meta["N"]), n_per_dim=int(meta["n_per_dim"]),
                box_length=float(meta["box_length"]))
    raw = np.fromfile(base.with_suffix(".f64"), dtype="<f8")
    if raw.size != grid.size:
        raise ValueError(f"snapshot holds {raw.size} values, grid expects {grid.size}")
    return Field(grid, raw.reshape(grid.shape))
