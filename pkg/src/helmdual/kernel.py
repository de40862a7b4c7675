"""Real Helmholtz kernel, its lattice Fourier symbol and fast periodic convolution.

The resolvent of -Laplace - lambda on R^N, regularized by a small absorption
eps > 0, acts in Fourier space as division by |xi|^2 - lambda - i eps.  Real
solutions only need the real part of the kernel, whose symbol is

    symbol(xi) = (|xi|^2 - lambda) / ((|xi|^2 - lambda)^2 + eps^2),

converging for eps -> 0 to the principal value 1/(|xi|^2 - lambda).  On the
periodic lattice we realize the convolution u -> Psi_lambda * u exactly as
symbol multiplication.  The real-space kernel

    Psi_lambda(r) = cos(sqrt(lambda) r) / (4 pi r)          (N = 3)
    Psi_lambda(r) = -Y_0(sqrt(lambda) r) / 4                (N = 2)

is provided for validation and positivity checks only: truncated real-space
sums decay like r^{-(N-1)/2} and converge far too slowly to compete with the
spectral route.

The absorption default mimics the vanishing-regularization limit while
keeping the symbol bounded on the lattice: eps is half the median spacing of
the |xi|^2 values adjacent to the resonant shell |xi|^2 = lambda.  A strict
eps = 0 run requires that no lattice point sits within the shell guard
1e-9 * lambda of the shell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .domain import Field, Grid

__all__ = [
    "KernelSpec",
    "SHELL_GUARD",
    "bessel_j0",
    "bessel_y0",
    "psi_realspace",
    "kernel_symbol",
    "convolve",
    "quadratic_form",
    "default_epsilon",
    "resolve_epsilon",
    "shell_distance",
    "suggest_box_length",
]

SHELL_GUARD = 1e-9  # relative width of the forbidden band around |xi|^2 = lambda

_EULER_GAMMA = 0.5772156649015328606
_BESSEL_SWITCH = 13.0  # series below, Hankel asymptotics above; validated to 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel parameters: dimension, frequency lambda > 0, absorption eps >= 0.

    ``epsilon=None`` means "resolve the default against the grid at use time".
    """

    N: int
    lam: float
    epsilon: float | None = None

    def __post_init__(self):
        if self.N not in (2, 3):
            raise ValueError(f"dimension N must be 2 or 3, got {self.N}")
        if not self.lam > 0:
            raise ValueError(f"frequency lambda must be positive, got {self.lam}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError(f"absorption epsilon must be >= 0, got {self.epsilon}")


# ---------------------------------------------------------------------------
# Bessel functions J0, Y0 (needed for the 2-D kernel)
# ---------------------------------------------------------------------------

def _j0_series(z2q):
    """J0 via its ascending series in z^2/4; accurate below the switch point."""
    out = np.ones_like(z2q)
    term = np.ones_like(z2q)
    for k in range(1, 40):
        term = term * (-z2q) / (k * k)
        out = out + term
        if not np.any(np.abs(term) > 1e-20 * np.abs(out)):
            break
    return out


def _y0_series(z, z2q, j0):
    """Y0 = (2/pi)[(ln(z/2) + gamma) J0 + sum_k (-1)^{k+1} H_k (z^2/4)^k / k!^2]."""
    acc = np.zeros_like(z2q)
    term = np.ones_like(z2q)
    harmonic = 0.0
    for k in range(1, 40):
        term = term * (-z2q) / (k * k)
        harmonic += 1.0 / k
        acc = acc - harmonic * term
        if not np.any(np.abs(harmonic * term) > 1e-20 * np.maximum(np.abs(acc), 1.0)):
            break
    return (2.0 / np.pi) * ((np.log(z / 2.0) + _EULER_GAMMA) * j0 + acc)


def _hankel0_asymptotic(z):
    """H0^(1)(z) ~ sqrt(2/(pi z)) e^{i(z - pi/4)} sum_k i^k a_k z^{-k}.

    The coefficients follow a_k = -a_{k-1} (2k-1)^2 / (8k); truncation at 26
    terms sits at the optimal point for z near the switch and keeps the
    absolute error below 1e-11 there, falling off rapidly for larger z.
    """
    acc = np.ones_like(z, dtype=np.complex128)
    a_k = 1.0
    zinv = 1.0 / z
    ipow = 1.0 + 0.0j
    term = np.ones_like(z)
    for k in range(1, 27):
        a_k = -a_k * (2 * k - 1) ** 2 / (8.0 * k)
        ipow *= 1j
        term = term * zinv
        acc = acc + ipow * a_k * term
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * (z - np.pi / 4.0)) * acc


def bessel_j0(z):
    """Bessel function of the first kind, order zero."""
    z = np.abs(np.asarray(z, dtype=np.float64))
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    small = z <= _BESSEL_SWITCH
    if small.any():
        out[small] = _j0_series(z[small] ** 2 / 4.0)
    if (~small).any():
        out[~small] = _hankel0_asymptotic(z[~small]).real
    return float(out[0]) if scalar else out


def bessel_y0(z):
    """Bessel function of the second kind, order zero; requires z > 0."""
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z <= 0):
        raise ValueError("Y0 requires z > 0")
    out = np.empty_like(z)
    small = z <= _BESSEL_SWITCH
    if small.any():
        zs = z[small]
        z2q = zs**2 / 4.0
        out[small] = _y0_series(zs, z2q, _j0_series(z2q))
    if (~small).any():
        out[~small] = _hankel0_asymptotic(z[~small]).imag
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# real-space kernel
# ---------------------------------------------------------------------------

def psi_realspace(spec: KernelSpec, r):
    """Real part of the outgoing Helmholtz kernel at radius r > 0.

    Satisfies the rescaling identity
    psi(lambda, r) = lambda^{(N-2)/2} psi(1, sqrt(lambda) r).
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("kernel radius must be positive (singular at the origin)")
    root = math.sqrt(spec.lam)
    if spec.N == 3:
        out = np.cos(root * r) / (4.0 * np.pi * r)
    else:
        out = -0.25 * bessel_y0(root * r)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# lattice symbol and spectral convolution
# ---------------------------------------------------------------------------

def default_epsilon(grid: Grid, lam: float) -> float:
    """Half the median spacing of |xi|^2 values adjacent to the shell."""
    levels = np.unique(grid.xi_sq())
    idx = int(np.searchsorted(levels, lam))
    lo = max(idx - 8, 0)
    window = levels[lo : idx + 8]
    gaps = np.diff(window)
    gaps = gaps[gaps > 0]
    if gaps.size == 0:  # degenerate tiny lattice; fall back to global spacing
        gaps = np.diff(levels)
        gaps = gaps[gaps > 0]
    return 0.5 * float(np.median(gaps))


def resolve_epsilon(spec: KernelSpec, grid: Grid) -> KernelSpec:
    """Fill in the default absorption for this grid when epsilon is unset."""
    if spec.epsilon is not None:
        return spec
    return replace(spec, epsilon=default_epsilon(grid, spec.lam))


def shell_distance(grid: Grid, lam: float) -> float:
    """Minimum |  |xi|^2 - lambda | over the frequency lattice."""
    return float(np.abs(grid.xi_sq() - lam).min())


def suggest_box_length(grid: Grid, lam: float) -> float:
    """Search near the current box for one whose lattice clears the shell guard.

    Used by the command line when a strict eps = 0 run trips the guard.
    """
    best_L, best_d = grid.box_length, shell_distance(grid, lam)
    for k in range(1, 41):
        for sgn in (1.0, -1.0):
            L = grid.box_length * (1.0 + sgn * 0.005 * k)
            d = shell_distance(Grid(grid.N, grid.n_per_dim, L), lam)
            if d > 10 * SHELL_GUARD * lam and d > best_d:
                return L
    return best_L


def _symbol_values(xi_sq, lam: float, eps: float):
    d = xi_sq - lam
    if eps == 0.0:
        if np.any(np.abs(d) < SHELL_GUARD * lam):
            raise ValueError(
                "eps = 0 with a lattice frequency inside the shell guard "
                f"|  |xi|^2 - lambda | < {SHELL_GUARD:g} * lambda; "
                "adjust the box length or use eps > 0"
            )
        return 1.0 / d
    return d / (d * d + eps * eps)


def kernel_symbol(spec: KernelSpec, xi_sq):
    """Re[ 1/(|xi|^2 - lambda - i eps) ] at the given squared frequencies.

    For eps = 0 the principal-value symbol 1/(|xi|^2 - lambda) is returned,
    rejecting evaluation inside the shell guard.
    """
    if spec.epsilon is None:
        raise ValueError("epsilon unset; call resolve_epsilon(spec, grid) first")
    xi_sq = np.asarray(xi_sq, dtype=np.float64)
    out = _symbol_values(xi_sq, spec.lam, spec.epsilon)
    return out if out.ndim else float(out)


def convolve(f: Field, spec: KernelSpec) -> Field:
    """Psi_lambda * f on the periodic lattice via symbol multiplication.

    Linear in f; the output is exactly real because the symbol is real and
    even and the transform is the half-spectrum rfft.
    """
    spec = resolve_epsilon(spec, f.grid)
    sym = _symbol_values(f.grid.xi_sq_rfft(), spec.lam, spec.epsilon)
    fh = np.fft.rfftn(f.values)
    axes = tuple(range(f.grid.N))
    return Field(f.grid, np.fft.irfftn(sym * fh, s=f.grid.shape, axes=axes))


def quadratic_form(f: Field, g: Field, spec: KernelSpec) -> float:
    """int f (Psi_lambda * g) dx, evaluated as a lattice sum in Fourier space.

    Symmetric in (f, g); can be negative, the kernel is oscillatory.
    """
    if f.grid != g.grid:
        raise ValueError("quadratic form requires both fields on the same grid")
    spec = resolve_epsilon(spec, f.grid)
    grid = f.grid
    sym = _symbol_values(grid.xi_sq_rfft(), spec.lam, spec.epsilon)
    fh = np.fft.rfftn(f.values)
    gh = np.fft.rfftn(g.values)
    w = grid.rfft_weights()
    acc = np.sum(w * sym * (fh.real * gh.real + fh.imag * gh.imag))
    return float(acc) * grid.cell_volume / grid.size
