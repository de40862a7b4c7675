"""Dual energy, scale-invariant quotients, and the rescaling calculus.

The dual energy of a pair (ubar, vbar) in L^{p'} x L^{p'} is

    J(ubar, vbar) = int h(x, ubar, vbar) dx
                    - 1/2 [ Q_mu(ubar, ubar) + Q_nu(vbar, vbar) ]

where Q_lam(f, g) = int f (Psi_lam * g) dx is the oscillatory kernel form.
Its mountain-pass level equals the infimum of the scale-invariant quotient

    F(ubar, vbar) = (p-2)/(2p) * [ (p' int h)^{1/p'}
                                   / (Q_mu + Q_nu)_+^{1/2} ]^{2p/(p-2)}

with F := +inf for the zero pair and whenever the denominator is
nonpositive.  The scalar analogues E_mu (coefficient-weighted) and D_lam
(unit coefficient) follow the same pattern with int a^{1-p'} |ubar|^{p'} as
numerator.  All quadrature matches the midpoint rule of the domain module,
so the algebraic identities (Euler identity, directional derivative along
the pair) hold to roundoff rather than to discretization order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel, legendre
from .domain import CoefficientField, DualPair, Field, Grid, ProblemSpec

__all__ = [
    "EnergyBreakdown",
    "kernel_pair",
    "eval_J",
    "eval_Jprime_along_self",
    "grad_J",
    "eval_F",
    "eval_E",
    "eval_D",
    "rescale_z",
    "d_lambda_scaling",
    "h_integral",
    "quotient_level",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Pieces of the dual energy at one pair: conjugate integral, kernel forms,
    the energy J itself and the quotient F."""

    h_integral: float
    quad_mu: float
    quad_nu: float
    J_value: float
    F_value: float


def kernel_pair(spec: ProblemSpec, grid: Grid,
                eps_mu: float | None = None,
                eps_nu: float | None = None):
    """Resolved kernel specifications for the two frequencies on this grid."""
    k_mu = kernel.resolve_epsilon(kernel.KernelSpec(spec.N, spec.mu, eps_mu), grid)
    k_nu = kernel.resolve_epsilon(kernel.KernelSpec(spec.N, spec.nu, eps_nu), grid)
    return k_mu, k_nu


def h_integral(pair: DualPair, coeffs: CoefficientField) -> float:
    """int h(x, ubar, vbar) dx with the midpoint quadrature of the grid."""
    vals = legendre._h_values(
        coeffs.a.values, coeffs.b.values, coeffs.p,
        pair.first.values, pair.second.values,
    )
    return float(np.sum(vals)) * pair.grid.cell_volume


def quotient_level(num: float, den: float, p: float) -> float:
    """(p-2)/(2p) * [num^{1/p'} / den^{1/2}]^{2p/(p-2)}, +inf on a bad denominator."""
    if den <= 0.0 or num <= 0.0:
        return math.inf
    pd = p / (p - 1.0)
    return (p - 2.0) / (2.0 * p) * (num ** (1.0 / pd) / math.sqrt(den)) ** (2.0 * p / (p - 2.0))


def _check_pair(pair: DualPair, coeffs: CoefficientField):
    if pair.grid != coeffs.grid:
        raise ValueError("pair and coefficients must live on the same grid")


def eval_J(pair: DualPair, coeffs: CoefficientField, spec: ProblemSpec,
           kspecs=None) -> EnergyBreakdown:
    """Dual energy J and its breakdown at the given pair."""
    _check_pair(pair, coeffs)
    k_mu, k_nu = kspecs if kspecs is not None else kernel_pair(spec, pair.grid)
    hints = h_integral(pair, coeffs)
    q_mu = kernel.quadratic_form(pair.first, pair.first, k_mu)
    q_nu = kernel.quadratic_form(pair.second, pair.second, k_nu)
    num = spec.p_dual * hints
    j = hints - 0.5 * (q_mu + q_nu)
    zero = not (np.any(pair.first.values) or np.any(pair.second.values))
    f = math.inf if zero else quotient_level(num, q_mu + q_nu, spec.p)
    return EnergyBreakdown(h_integral=hints, quad_mu=q_mu, quad_nu=q_nu,
                           J_value=j, F_value=f)


def eval_Jprime_along_self(pair: DualPair, coeffs: CoefficientField,
                           spec: ProblemSpec, kspecs=None) -> float:
    """Directional derivative of J at the pair along itself:
    p' int h - (Q_mu + Q_nu).  Vanishes at critical points."""
    bd = eval_J(pair, coeffs, spec, kspecs)
    return spec.p_dual * bd.h_integral - (bd.quad_mu + bd.quad_nu)


def grad_J(pair: DualPair, coeffs: CoefficientField, spec: ProblemSpec,
           kspecs=None) -> DualPair:
    """L^2 representation of J': the residual of the dual system.

    Zero exactly at solutions of the dual equations
    grad_sbar h = Psi_mu * ubar, grad_tbar h = Psi_nu * vbar.
    """
    _check_pair(pair, coeffs)
    k_mu, k_nu = kspecs if kspecs is not None else kernel_pair(spec, pair.grid)
    hs, ht = legendre._grad_h_values(
        coeffs.a.values, coeffs.b.values, coeffs.p,
        pair.first.values, pair.second.values,
    )
    ru = hs - kernel.convolve(pair.first, k_mu).values
    rv = ht - kernel.convolve(pair.second, k_nu).values
    return DualPair(Field(pair.grid, ru), Field(pair.grid, rv))


def eval_F(pair: DualPair, coeffs: CoefficientField, spec: ProblemSpec,
           kspecs=None) -> float:
    """Scale-invariant quotient F; +inf for the zero pair or a nonpositive
    kernel form (the quotient's denominator takes the positive part)."""
    return eval_J(pair, coeffs, spec, kspecs).F_value


def eval_E(u_bar: Field, coeffs: CoefficientField, mu: float,
           kspec=None) -> float:
    """Scalar quotient E_mu with numerator (int a^{1-p'} |ubar|^{p'})^{1/p'}."""
    if u_bar.grid != coeffs.grid:
        raise ValueError("field and coefficients must live on the same grid")
    p = coeffs.p
    pd = p / (p - 1.0)
    if kspec is None:
        kspec = kernel.resolve_epsilon(kernel.KernelSpec(u_bar.grid.N, mu), u_bar.grid)
    num = float(np.sum(coeffs.a.values ** (1.0 - pd) * np.abs(u_bar.values) ** pd))
    num *= u_bar.grid.cell_volume
    if num == 0.0:
        return math.inf
    den = kernel.quadratic_form(u_bar, u_bar, kspec)
    return quotient_level(num, den, p)


def eval_D(w_bar: Field, lam: float, p: float, kspec=None) -> float:
    """Unit-coefficient scalar quotient D_lam, the object with the exact
    frequency-scaling law d_lam = lam^{p/(p-2) - N/2} d_1."""
    if kspec is None:
        kspec = kernel.resolve_epsilon(kernel.KernelSpec(w_bar.grid.N, lam), w_bar.grid)
    pd = p / (p - 1.0)
    num = float(np.sum(np.abs(w_bar.values) ** pd)) * w_bar.grid.cell_volume
    if num == 0.0:
        return math.inf
    den = kernel.quadratic_form(w_bar, w_bar, kspec)
    return quotient_level(num, den, p)


def d_lambda_scaling(lam: float, p: float, N: int) -> float:
    """Exact level ratio d_lam / d_1 = lam^{p/(p-2) - N/2}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return lam ** (p / (p - 2.0) - N / 2.0)


# ---------------------------------------------------------------------------
# spectral rescaling z -> lam^{(N+2)/4} z(sqrt(lam) x) on the same box
# ---------------------------------------------------------------------------

def _axis_eval_matrix(n: int, alpha: float) -> np.ndarray:
    """Matrix evaluating the 1-D trigonometric interpolant at alpha * x_j.

    The Nyquist bin (even n) is split between +n/2 and -n/2, i.e. evaluated
    as a cosine, which keeps real inputs real.
    """
    j = np.arange(n)
    k = np.fft.fftfreq(n, d=1.0 / n)  # signed integer frequencies
    phase = np.exp(2j * np.pi * alpha * np.outer(j, k) / n)
    if n % 2 == 0:
        ny = n // 2
        phase[:, ny] = np.cos(2.0 * np.pi * alpha * j * ny / n)
    return phase / n


def rescale_z(z: Field, lam: float) -> Field:
    """lam^{(N+2)/4} z(sqrt(lam) x), realized by evaluating the trigonometric
    interpolant of z at the scaled lattice points of the same box.

    Wrap-around replaces decay outside the box, so the result is only as good
    as the field's decay; fields whose spectrum would be pushed past the
    Nyquist frequency are rejected.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    grid = z.grid
    n = grid.n_per_dim
    if lam == 1.0:
        return z.copy()
    alpha = math.sqrt(lam)
    zhat = np.fft.fftn(z.values)
    if alpha > 1.0:
        # reject only when a non-negligible fraction of the spectral mass
        # would land past the Nyquist frequency after scaling
        power = np.abs(zhat) ** 2
        ks = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        alias = np.zeros(grid.shape, dtype=bool)
        for ax in range(grid.N):
            shape = [1] * grid.N
            shape[ax] = n
            alias |= alpha * ks.reshape(shape) >= n / 2
        frac = float(power[alias].sum()) / float(power.sum())
        if frac > 1e-12:
            raise ValueError(
                f"rescaling by sqrt(lambda) = {alpha:.4g} aliases a fraction "
                f"{frac:.2e} of the spectral mass past the Nyquist frequency"
            )
    T = _axis_eval_matrix(n, alpha)
    out = zhat
    for ax in range(grid.N):
        out = np.moveaxis(np.tensordot(T, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    out = out.real * lam ** ((grid.N + 2.0) / 4.0)
    return Field(grid, out)
