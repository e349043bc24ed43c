"""Initial data for the fully nonlinear equation from quasilinear data.

A solution ``u`` of ``box u = A_l A_n m[mu, d] d_l d_mu u d_n d_d u`` gives a
solution ``v = A_i d_i u`` of ``box v = A_l d_l (m[mu, d] d_mu v d_d v)``.
The functions here build ``(u(0), d_t u(0))`` from ``(v(0), d_t v(0))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, PeriodicGrid, spatial_derivatives
from .nullform import NullFormTensor, QuasiNullForm, lift_quasi, prototype_tensor, symmetrize

log = logging.getLogger(__name__)

__all__ = [
    "QuasilinearIVP",
    "FullyNonlinearIVP",
    "WrongCaseError",
    "DegenerateOperatorError",
    "transform_case_a",
    "transform_case_b",
    "transform_prototype",
    "reconstruct_v",
    "line_integral",
    "solve_chi",
    "chi_rhs",
    "apply_chi_operator",
    "inverse_laplacian",
]


class WrongCaseError(ValueError):
    pass


class DegenerateOperatorError(ValueError):
    pass


@dataclass(frozen=True)
class QuasilinearIVP:
    form: QuasiNullForm
    v0: GridField
    v1: GridField

    def __post_init__(self):
        if self.v0.grid != self.v1.grid:
            raise ValueError("v0 and v1 live on different grids")

    @property
    def grid(self) -> PeriodicGrid:
        return self.v0.grid


@dataclass(frozen=True)
class FullyNonlinearIVP:
    tensor: NullFormTensor
    phi: GridField
    psi: GridField
    warnings: tuple[str, ...] = ()
    removed_mean: float = 0.0

    def __post_init__(self):
        if not self.tensor.symmetric_flag:
            raise ValueError("tensor must be symmetrized")
        if self.phi.grid != self.psi.grid:
            raise ValueError("phi and psi live on different grids")

    @property
    def grid(self) -> PeriodicGrid:
        return self.phi.grid


def _outer_fraction(grid: PeriodicGrid, f: np.ndarray) -> float:
    peak = float(np.max(np.abs(f)))
    if peak == 0.0:
        return 0.0
    x1, x2 = grid.coords
    outer = (np.abs(x1) > grid.half_width / 2) | (np.abs(x2) > grid.half_width / 2)
    return float(np.max(np.abs(f[outer]), initial=0.0)) / peak


def line_integral(f: np.ndarray, grid: PeriodicGrid, slope: float) -> np.ndarray:
    """``F(x) = int_{-L}^{x1} f(s, x2 + slope*(s - x1)) ds`` at every grid point.

    Samples along each slanted line sit on the grid columns ``s = x1_k``; the
    ``x2`` offset for column ``k`` of target row ``m`` depends only on
    ``m - k`` and is applied as an exact Fourier shift in ``x2``. Points that
    leave the box in ``x2`` contribute zero. The trapezoid sum is corrected
    at the right endpoint with Euler-Maclaurin terms through ``h^6``,
    whose directional derivatives are evaluated spectrally at the grid point
    itself; the left endpoint is assumed to lie outside the support.
    """
    n, h, L = grid.n, grid.h, grid.half_width
    x2 = grid.axis
    k2 = np.fft.rfftfreq(n, d=h) * 2 * np.pi
    fh = np.fft.rfft(f, axis=1)
    out = np.zeros_like(f)
    for d in range(n):
        offset = slope * h * d
        if d == 0:
            shifted = f
        else:
            shifted = np.fft.irfft(fh * np.exp(-1j * k2 * offset)[None, :], n=n, axis=1)
            src = x2 - offset
            shifted = shifted * ((src >= -L) & (src < L))[None, :]
        out[d:, :] += shifted[: n - d, :]
        # left endpoint (column 0) carries half weight
        out[d, :] -= 0.5 * shifted[0, :]
    out -= 0.5 * f
    out *= h
    # Euler-Maclaurin: -B_2k/(2k)! h^2k f^(2k-1)(x1) for k = 1, 2, 3
    deriv = f
    for k, coef in enumerate((-1.0 / 12.0, 1.0 / 720.0, -1.0 / 30240.0), start=1):
        for _ in range(2 if k > 1 else 1):
            d1, d2 = spatial_derivatives(deriv, grid, order=1)
            deriv = d1 + slope * d2
        out += coef * h ** (2 * k) * deriv
    # the integral starts at -L, so row 0 is exactly zero
    out[0, :] = 0.0
    return out


def transform_case_a(ivp: QuasilinearIVP) -> FullyNonlinearIVP:
    """``A_0 = 0``: integrate the data along the lines ``A_1 dx2 = A_2 dx1``."""
    a0, a1, a2 = ivp.form.a
    if a0 != 0.0:
        raise WrongCaseError("case a requires A0 = 0")
    if a1 == 0.0:
        raise ValueError("case a requires A1 != 0 (rotate coordinates first)")
    grid = ivp.grid
    slope = a2 / a1
    warnings = []
    for name, f in (("v0", ivp.v0.values), ("v1", ivp.v1.values)):
        if _outer_fraction(grid, f) > 1e-8:
            warnings.append(f"{name} is not supported inside the inner half of the box")
    phi = line_integral(ivp.v0.values, grid, slope) / a1
    psi = line_integral(ivp.v1.values, grid, slope) / a1
    for name, f in (("phi", phi), ("psi", psi)):
        peak = float(np.max(np.abs(f)))
        edge = float(np.max(np.abs(f[-1, :])))
        if peak > 0 and edge > 1e-6 * peak:
            warnings.append(f"{name}: total line integral does not vanish (edge/peak = {edge / peak:.2e})")
    for w in warnings:
        log.warning(w)
    tensor = symmetrize(lift_quasi(ivp.form))
    return FullyNonlinearIVP(tensor, GridField(grid, phi), GridField(grid, psi), tuple(warnings))


def inverse_laplacian(rhs: np.ndarray, grid: PeriodicGrid) -> tuple[np.ndarray, float]:
    """Zero-mean solution of ``-Laplacian phi = rhs - mean(rhs)``; returns ``(phi, mean)``."""
    return _invert(rhs, grid, -grid.laplacian_symbol)


def _invert(rhs: np.ndarray, grid: PeriodicGrid, symbol: np.ndarray) -> tuple[np.ndarray, float]:
    rh = grid.fft(rhs)
    mean = float(rh[0, 0].real) / rhs.size
    safe = symbol.copy()
    safe[0, 0] = 1.0
    sol = rh / safe
    sol[0, 0] = 0.0
    return grid.ifft(sol), mean


def _chi_symbol(a, grid: PeriodicGrid) -> np.ndarray:
    a0, a1, a2 = a
    k1, k2 = grid._k
    return a0**2 * (k1**2 + k2**2) - (a1 * k1 + a2 * k2) ** 2


def chi_rhs(ivp: QuasilinearIVP, vt0: GridField) -> np.ndarray:
    a0, a1, a2 = ivp.form.a
    grid = ivp.grid
    v1d, v2d = spatial_derivatives(ivp.v0.values, grid, order=1)
    dv = (vt0.values, v1d, v2d)
    quad = sum(ivp.form.m[i, j] * dv[i] * dv[j] for i in range(3) for j in range(3) if ivp.form.m[i, j] != 0)
    return -a0 * vt0.values + a1 * v1d + a2 * v2d + a0**2 * quad


def apply_chi_operator(chi: np.ndarray, a, grid: PeriodicGrid) -> np.ndarray:
    """Forward operator ``(A1 d1 + A2 d2)^2 chi - A0^2 Laplacian chi``."""
    return grid.ifft(_chi_symbol(a, grid) * grid.fft(chi))


def solve_chi(rhs: np.ndarray, a, grid: PeriodicGrid) -> tuple[np.ndarray, float]:
    a0, a1, a2 = a
    if a0 == 0.0:
        raise WrongCaseError("case b requires A0 != 0")
    if a1**2 + a2**2 >= a0**2:
        raise DegenerateOperatorError(
            "operator (A1 d1 + A2 d2)^2 - A0^2 Laplacian is not elliptic for A1^2 + A2^2 >= A0^2")
    return _invert(rhs, grid, _chi_symbol(a, grid))


def transform_case_b(ivp: QuasilinearIVP, vt0: GridField | None = None) -> FullyNonlinearIVP:
    """``A_0 != 0``: ``phi = chi``, ``psi = (v0 - A1 d1 chi - A2 d2 chi) / A0``.

    ``vt0`` is the time derivative of ``v`` entering the elliptic right-hand
    side; it defaults to ``v1``.
    """
    a0, a1, a2 = ivp.form.a
    if a0 == 0.0:
        raise WrongCaseError("case b requires A0 != 0")
    vt0 = ivp.v1 if vt0 is None else vt0
    grid = ivp.grid
    rhs = chi_rhs(ivp, vt0)
    chi, mean = solve_chi(rhs, ivp.form.a, grid)
    c1, c2 = spatial_derivatives(chi, grid, order=1)
    psi = (ivp.v0.values - a1 * c1 - a2 * c2) / a0
    warnings = _mean_warning(mean, rhs)
    tensor = symmetrize(lift_quasi(ivp.form))
    return FullyNonlinearIVP(tensor, GridField(grid, chi), GridField(grid, psi), warnings, mean)


def _mean_warning(mean: float, rhs: np.ndarray) -> tuple[str, ...]:
    # roundoff-level means are not worth reporting
    if abs(mean) <= 1e-12 * float(np.max(np.abs(rhs), initial=0.0)):
        return ()
    msg = f"removed nonzero mean {mean:.3e} from the elliptic right-hand side"
    log.info(msg)
    return (msg,)


def prototype_rhs(v0: GridField, v1: GridField) -> np.ndarray:
    g1, g2 = spatial_derivatives(v0)
    return v1.values**2 - (g1**2 + g2**2) - v1.values


def transform_prototype(v0: GridField, v1: GridField) -> FullyNonlinearIVP:
    """Data for ``box u = |d_t^2 u|^2 - |d_t grad u|^2`` from ``box v = d_t(|d_t v|^2 - |grad v|^2)``."""
    if v0.grid != v1.grid:
        raise ValueError("v0 and v1 live on different grids")
    rhs = prototype_rhs(v0, v1)
    phi, mean = inverse_laplacian(rhs, v0.grid)
    return FullyNonlinearIVP(symmetrize(prototype_tensor()), GridField(v0.grid, phi), v0,
                             _mean_warning(mean, rhs), mean)


def reconstruct_v(u: GridField, ut: GridField, form: QuasiNullForm) -> GridField:
    """``v = A0 d_t u + A1 d1 u + A2 d2 u``."""
    if u.grid != ut.grid:
        raise ValueError("u and ut live on different grids")
    a0, a1, a2 = form.a
    d1, d2 = spatial_derivatives(u)
    return GridField(u.grid, a0 * ut.values + a1 * d1 + a2 * d2)
