"""Vector-field energies, ghost-weight energy and weighted decay monitors.

All Klainerman fields are first-order operators ``Gamma = c(t, x) . d + z``
whose coefficients ``c`` are affine in ``(t, x)``, so ``d Gamma u`` follows
in closed form from ``u``, its gradient and its space-time Hessian. Nothing
here differentiates a coefficient-weighted field spectrally, which would
suffer from the jump of ``x`` across the periodic boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, PeriodicGrid, spatial_derivatives
from .nullform import NullFormTensor, quadratic_form_6
from .solver import WaveState, hessian

__all__ = [
    "GAMMA_FIELDS",
    "VectorFieldBasis",
    "Jet",
    "EnergyReport",
    "DecayFit",
    "jet",
    "apply_gamma",
    "energy",
    "ghost_energy",
    "ghost_oversampling",
    "ks_ratio",
    "good_derivative_check",
    "good_derivative_identity_error",
    "lemma31_ratio",
    "fit_growth",
    "hk_lambda_norm",
    "energy_report",
]

GAMMA_FIELDS = ("dt", "d1", "d2", "omega", "L1", "L2", "S")


@dataclass(frozen=True)
class VectorFieldBasis:
    """The seven commuting fields; ``S`` is the shifted scaling ``t d_t + r d_r - 2``."""

    names: tuple[str, ...] = GAMMA_FIELDS

    def __post_init__(self):
        if tuple(self.names) != GAMMA_FIELDS:
            raise ValueError(f"basis must be exactly {GAMMA_FIELDS}")

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True)
class Jet:
    """``u`` with its space-time gradient and Hessian at one time (index 0 = t)."""

    grid: PeriodicGrid
    t: float
    u: np.ndarray
    du: tuple[np.ndarray, np.ndarray, np.ndarray]
    ddu: tuple[tuple[np.ndarray, ...], ...]


def jet(state: WaveState, w) -> Jet:
    w = np.asarray(w.values if isinstance(w, GridField) else w, float)
    h = hessian(state, w)
    u1, u2 = spatial_derivatives(state.u, state.grid, order=1)
    ddu = (
        (h.tt, h.t1, h.t2),
        (h.t1, h.x11, h.x12),
        (h.t2, h.x12, h.x22),
    )
    return Jet(state.grid, state.t, state.u, (state.ut, u1, u2), ddu)


def _field_coefficients(name: str, t: float, grid: PeriodicGrid):
    """``(coef, dcoef, z)`` with ``Gamma = sum_c coef[c] d_c + z``.

    ``dcoef[b][c] = d_b coef[c]`` is constant for every field.
    """
    x1, x2 = grid.coords
    zero = np.zeros((3, 3))
    if name == "dt":
        return (1.0, 0.0, 0.0), zero, 0.0
    if name == "d1":
        return (0.0, 1.0, 0.0), zero, 0.0
    if name == "d2":
        return (0.0, 0.0, 1.0), zero, 0.0
    if name == "omega":
        d = np.zeros((3, 3))
        d[1, 2] = 1.0
        d[2, 1] = -1.0
        return (0.0, -x2, x1), d, 0.0
    if name in ("L1", "L2"):
        i = 1 if name == "L1" else 2
        xi = x1 if i == 1 else x2
        coef = [xi, 0.0, 0.0]
        coef[i] = t
        d = np.zeros((3, 3))
        d[0, i] = 1.0
        d[i, 0] = 1.0
        return tuple(coef), d, 0.0
    if name == "S":
        return (t, x1, x2), np.eye(3), -2.0
    raise ValueError(f"unknown vector field {name!r}")


def _apply_value(name: str, t: float, grid: PeriodicGrid, v, dv) -> np.ndarray:
    coef, _, z = _field_coefficients(name, t, grid)
    out = z * v
    for c in range(3):
        if np.any(coef[c]):
            out = out + coef[c] * dv[c]
    return out


def _apply_with_gradient(name: str, j: Jet):
    coef, dcoef, z = _field_coefficients(name, j.t, j.grid)
    value = _apply_value(name, j.t, j.grid, j.u, j.du)
    grad = []
    for b in range(3):
        g = z * j.du[b]
        for c in range(3):
            if dcoef[b, c]:
                g = g + dcoef[b, c] * j.du[c]
            if np.any(coef[c]):
                g = g + coef[c] * j.ddu[b][c]
        grad.append(np.asarray(g, float) * np.ones(j.grid.shape))
    return np.asarray(value, float) * np.ones(j.grid.shape), tuple(grad)


def apply_gamma(state: WaveState, w, field_id: str) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """``Gamma u`` and its space-time gradient ``(d_t, d_1, d_2) Gamma u``."""
    return _apply_with_gradient(field_id, jet(state, w))


def _all_gammas(j: Jet) -> dict:
    return {name: _apply_with_gradient(name, j) for name in GAMMA_FIELDS}


def _sq(grad) -> np.ndarray:
    return grad[0] ** 2 + grad[1] ** 2 + grad[2] ** 2


def energy(state: WaveState, w=None, order: int = 1, fields=GAMMA_FIELDS) -> float:
    """Generalized energy ``E_order``; ``w`` is only needed for ``order=2``."""
    g = state.grid
    u1, u2 = spatial_derivatives(state.u, g, order=1)
    e1 = 0.5 * g.integrate(state.ut**2 + u1**2 + u2**2)
    if order == 1:
        return e1
    if order != 2:
        raise ValueError("only orders 1 and 2 are supported")
    if w is None:
        raise ValueError("order 2 needs d_t^2 u")
    j = jet(state, w)
    extra = sum(g.integrate(_sq(_apply_with_gradient(name, j)[1])) for name in fields)
    return e1 + 0.5 * extra


def _omega(grid: PeriodicGrid, d1: np.ndarray, d2: np.ndarray):
    """Unit radial direction; the center cell takes the local gradient direction."""
    x1, x2 = grid.coords
    r = grid.radius
    with np.errstate(invalid="ignore", divide="ignore"):
        w1 = np.where(r > 0, x1 / r, 0.0)
        w2 = np.where(r > 0, x2 / r, 0.0)
    c = grid.center_index
    gnorm = math.hypot(d1[c], d2[c])
    if gnorm > 0:
        w1[c], w2[c] = d1[c] / gnorm, d2[c] / gnorm
    else:
        w1[c], w2[c] = 1.0, 0.0
    return w1, w2


def ghost_oversampling(grid: PeriodicGrid) -> int:
    """Refinement factor for ghost quadratures: fine grid of at least 512 points."""
    factor = 1
    while grid.n * factor < 512:
        factor *= 2
    return factor


def ghost_energy(state: WaveState, oversample: int | None = None) -> tuple[float, float]:
    """``(1/2 int e^q |du|^2, sum_i int e^q/(1+s^2) |(w_i d_t + d_i) u|^2)`` with ``q = arctan(r - t)``.

    The first is the ghost-weighted energy, the second the flux ``G``; for
    the linear equation ``d/dt weighted = -G/2``. The weight has a kink at
    ``r = 0`` and across the periodic boundary, so both integrals are taken
    on a spectrally refined copy of the fields.
    """
    g = state.grid
    m = ghost_oversampling(g) if oversample is None else oversample
    u1, u2 = spatial_derivatives(state.u, g, order=1)
    fine = g.refined(m)
    ut, u1, u2 = (g.refine(f, m) for f in (state.ut, u1, u2))
    sigma = fine.radius - state.t
    eq = np.exp(np.arctan(sigma))
    weighted = 0.5 * fine.integrate(eq * (ut**2 + u1**2 + u2**2))
    w1, w2 = _omega(fine, u1, u2)
    flux = fine.integrate(eq / (1 + sigma**2) * ((w1 * ut + u1) ** 2 + (w2 * ut + u2) ** 2))
    return weighted, flux


def _off_center(grid: PeriodicGrid) -> np.ndarray:
    mask = np.ones(grid.shape, bool)
    mask[grid.center_index] = False
    return mask


def ks_ratio(state: WaveState, w) -> float:
    """Weighted sup of ``u`` over ``sum_{|a| <= 2} ||Gamma^a u||_{L2}``.

    Second-order terms ``Gamma_i Gamma_j u`` (``i <= j``, ``Gamma_j`` applied
    first) only need the gradient of ``Gamma_j u``, which is available in
    closed form, so no third time derivative enters.
    """
    g = state.grid
    j = jet(state, w)
    first = _all_gammas(j)
    total = g.l2_norm(state.u)
    for name in GAMMA_FIELDS:
        total += g.l2_norm(first[name][0])
    for a, outer in enumerate(GAMMA_FIELDS):
        for inner in GAMMA_FIELDS[a:]:
            v, dv = first[inner]
            total += g.l2_norm(_apply_value(outer, state.t, g, v, dv))
    if total == 0.0:
        return 0.0
    r = g.radius
    weight = ((1 + (state.t + r) ** 2) * (1 + (state.t - r) ** 2)) ** 0.25
    num = float(np.max((weight * np.abs(state.u))[_off_center(g)]))
    return num / total


def _floor_divide(num: np.ndarray, den: np.ndarray, mask: np.ndarray) -> float:
    den = den[mask]
    num = num[mask]
    peak = float(np.max(den, initial=0.0))
    if peak == 0.0:
        return 0.0
    return float(np.max(num / np.maximum(den, 1e-12 * peak)))


def good_derivative_check(state: WaveState, region: np.ndarray | None = None, reduce: str = "sup") -> float:
    """``sup |(t + r)(d_t + d_r) u| / sum_Gamma |Gamma u|``, scaling taken unshifted.

    ``(t + r)(d_t + d_r) = S + w_1 L_1 + w_2 L_2`` with ``S = t d_t + r d_r``,
    so the ratio cannot exceed 1 away from rounding. ``region`` optionally
    restricts the evaluation to a boolean mask. With ``reduce="l2"`` the
    result is the ratio of the L2 norms of numerator and denominator over
    that region instead of the pointwise supremum.
    """
    if reduce not in ("sup", "l2"):
        raise ValueError("reduce must be 'sup' or 'l2'")
    g = state.grid
    t = state.t
    u1, u2 = spatial_derivatives(state.u, g, order=1)
    du = (state.ut, u1, u2)
    w1, w2 = _omega(g, u1, u2)
    r = g.radius
    num = np.abs((t + r) * (state.ut + w1 * u1 + w2 * u2))
    den = np.zeros(g.shape)
    for name in GAMMA_FIELDS:
        val = _apply_value(name, t, g, state.u, du)
        if name == "S":
            val = val + 2.0 * state.u
        den = den + np.abs(val)
    mask = _off_center(g) if region is None else _off_center(g) & region
    if reduce == "l2":
        den_norm = math.sqrt(float(np.sum(den[mask] ** 2)))
        return math.sqrt(float(np.sum(num[mask] ** 2))) / den_norm if den_norm > 0 else 0.0
    return _floor_divide(num, den, mask)


def good_derivative_identity_error(state: WaveState) -> float:
    """Max relative mismatch of ``(t + r)(d_t + d_r) u = S~u + 2u + w.L u``."""
    g = state.grid
    t = state.t
    u1, u2 = spatial_derivatives(state.u, g, order=1)
    du = (state.ut, u1, u2)
    w1, w2 = _omega(g, u1, u2)
    lhs = (t + g.radius) * (state.ut + w1 * u1 + w2 * u2)
    rhs = (_apply_value("S", t, g, state.u, du) + 2 * state.u
           + w1 * _apply_value("L1", t, g, state.u, du) + w2 * _apply_value("L2", t, g, state.u, du))
    mask = _off_center(g)
    scale = max(float(np.max(np.abs(lhs[mask]))), 1e-300)
    return float(np.max(np.abs(lhs - rhs)[mask])) / scale


def _pointwise_nonlinearity(j: Jet, tensor: NullFormTensor) -> np.ndarray:
    q = quadratic_form_6(tensor)
    slots = (j.ddu[0][0], j.ddu[0][1], j.ddu[0][2], j.ddu[1][1], j.ddu[1][2], j.ddu[2][2])
    out = np.zeros(j.grid.shape)
    for p in range(6):
        for r in range(6):
            if q[p, r]:
                out += q[p, r] * slots[p] * slots[r]
    return out


def lemma31_ratio(state: WaveState, w, tensor: NullFormTensor, gamma_grads: dict | None = None) -> float:
    """``sup_{r >= <t>/2} r |N(d^2 u, d^2 u)| / (sum_Gamma |d Gamma u| + |d u|)^2``."""
    g = state.grid
    j = jet(state, w)
    if gamma_grads is None:
        gamma_grads = {name: grad for name, (_, grad) in _all_gammas(j).items()}
    den = np.sqrt(_sq(j.du))
    for grad in gamma_grads.values():
        den = den + np.sqrt(_sq(grad))
    r = g.radius
    num = r * np.abs(_pointwise_nonlinearity(j, tensor))
    region = r >= 0.5 * math.sqrt(1 + state.t**2)
    return _floor_divide(num, den**2, region)


@dataclass(frozen=True)
class DecayFit:
    gamma_hat: float
    t_window: tuple[float, float]
    residual: float
    samples: int = 0


def fit_growth(series, t_min: float | None = None, t_max: float | None = None) -> DecayFit:
    """Least-squares slope of ``log E`` against ``log t``."""
    data = np.asarray(list(series), dtype=float).reshape(-1, 2)
    t, e = data[:, 0], data[:, 1]
    keep = np.ones(t.shape, bool)
    if t_min is not None:
        keep &= t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    t, e = t[keep], e[keep]
    if t.size < 8:
        raise ValueError(f"need at least 8 samples, got {t.size}")
    if np.any(t < 1):
        raise ValueError("fit window must start at t >= 1")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("energies must be positive and finite")
    x, y = np.log(t), np.log(e)
    (slope, icpt), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return DecayFit(float(slope), (float(t[0]), float(t[-1])), residual, int(t.size))


def hk_lambda_norm(phi: GridField, psi: GridField, k: int = 1) -> float:
    """``sum_{|a| <= k-1} (||grad Lambda^a phi|| + ||Lambda^a psi||)`` with ``Lambda = {d1, d2, r d_r, Omega}``."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    g = phi.grid
    p1, p2 = spatial_derivatives(phi)
    norm = math.sqrt(g.l2_norm(p1) ** 2 + g.l2_norm(p2) ** 2) + g.l2_norm(psi.values)
    if k == 1:
        return norm
    x1, x2 = g.coords
    p11, p12, p22 = spatial_derivatives(phi, order=2)
    s1, s2 = spatial_derivatives(psi)
    grads = {
        "d1": (p11, p12),
        "d2": (p12, p22),
        "rdr": (p1 + x1 * p11 + x2 * p12, p2 + x1 * p12 + x2 * p22),
        "omega": (-x2 * p11 + x1 * p12 + p2, -x2 * p12 - p1 + x1 * p22),
    }
    values = {"d1": s1, "d2": s2, "rdr": x1 * s1 + x2 * s2, "omega": -x2 * s1 + x1 * s2}
    for key in grads:
        ga, gb = grads[key]
        norm += math.sqrt(g.l2_norm(ga) ** 2 + g.l2_norm(gb) ** 2) + g.l2_norm(values[key])
    return norm


@dataclass(frozen=True)
class EnergyReport:
    t: float
    e1: float
    e2: float
    ghost_e: float
    ghost_g: float
    ks_ratio: float
    good_deriv_ratio: float
    lemma31_ratio: float
    picard_max_iters: int

    def __post_init__(self):
        for name in ("e1", "e2", "ghost_e", "ghost_g", "ks_ratio", "good_deriv_ratio", "lemma31_ratio"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def row(self) -> tuple:
        return (self.t, self.e1, self.e2, self.ghost_e, self.ghost_g, self.ks_ratio,
                self.good_deriv_ratio, self.lemma31_ratio, self.picard_max_iters)


def energy_report(state: WaveState, w, tensor: NullFormTensor, picard_iters: int = 0) -> EnergyReport:
    g = state.grid
    j = jet(state, w)
    gammas = _all_gammas(j)
    e1 = 0.5 * g.integrate(_sq(j.du))
    e2 = e1 + 0.5 * sum(g.integrate(_sq(grad)) for _, grad in gammas.values())
    weighted, flux = ghost_energy(state)
    return EnergyReport(
        t=state.t,
        e1=e1,
        e2=e2,
        ghost_e=weighted,
        ghost_g=flux,
        ks_ratio=ks_ratio(state, w),
        good_deriv_ratio=good_derivative_check(state),
        lemma31_ratio=lemma31_ratio(state, w, tensor, {k: v[1] for k, v in gammas.items()}),
        picard_max_iters=int(picard_iters),
    )
