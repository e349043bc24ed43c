"""Pseudo-spectral time integration of ``box u = N(d^2 u, d^2 u)`` on a periodic grid.

The equation is implicit in ``w = d_t^2 u``: the right-hand side contains
``w`` through the ``tt`` slot of the Hessian. Because the nonlinearity is
quadratic and pointwise, ``w`` solves a scalar quadratic at every grid point,
which is handled by Picard iteration started from the linear value ``Laplacian u``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .grid import GridField, PeriodicGrid
from .nullform import NullFormTensor, quadratic_form_6

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "WaveState",
    "HessianField",
    "NonConvergence",
    "PicardResult",
    "Snapshot",
    "picard_solve",
    "solve_utt",
    "hessian",
    "step",
    "evolve",
]


class NonConvergence(RuntimeError):
    """Pointwise solve for ``d_t^2 u`` failed; used as the blow-up signal."""

    def __init__(self, t: float, index: tuple[int, int], point: tuple[float, float],
                 residual: float, iterations: int):
        self.t = t
        self.index = index
        self.point = point
        self.residual = residual
        self.iterations = iterations
        self.log: list = []
        super().__init__(
            f"Picard iteration did not converge at t={t:.6g} after {iterations} iterations; "
            f"worst point x=({point[0]:.4g}, {point[1]:.4g}) residual={residual:.3e}"
        )


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    picard_tol: float = 1e-10
    picard_max: int = 50
    dealias: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max < 1:
            raise ValueError("picard_max must be at least 1")


@dataclass(frozen=True)
class WaveState:
    grid: PeriodicGrid
    t: float
    u: np.ndarray
    ut: np.ndarray

    def __post_init__(self):
        for name in ("u", "ut"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {v.shape}, grid is {self.grid.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite values")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "t", float(self.t))
        if self.t < 0:
            raise ValueError("time must be nonnegative")

    @classmethod
    def from_fields(cls, u: GridField, ut: GridField, t: float = 0.0) -> "WaveState":
        if u.grid != ut.grid:
            raise ValueError("u and ut live on different grids")
        return cls(u.grid, t, u.values, ut.values)

    @classmethod
    def zeros(cls, grid: PeriodicGrid, t: float = 0.0) -> "WaveState":
        return cls(grid, t, np.zeros(grid.shape), np.zeros(grid.shape))


@dataclass(frozen=True)
class HessianField:
    tt: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    x11: np.ndarray
    x12: np.ndarray
    x22: np.ndarray

    def slots(self) -> tuple[np.ndarray, ...]:
        return (self.tt, self.t1, self.t2, self.x11, self.x12, self.x22)

    def matrix(self) -> np.ndarray:
        """Pointwise 3x3 Hessian, shape ``(3, 3, n, n)``."""
        return np.array([
            [self.tt, self.t1, self.t2],
            [self.t1, self.x11, self.x12],
            [self.t2, self.x12, self.x22],
        ])


@dataclass
class _Derivs:
    lap: np.ndarray
    ut1: np.ndarray
    ut2: np.ndarray
    u11: np.ndarray
    u12: np.ndarray
    u22: np.ndarray


def _derivs(state: WaveState) -> _Derivs:
    g = state.grid
    uh = g.fft(state.u)
    uth = g.fft(state.ut)
    ik1, ik2 = g.ik
    m1, m2 = g.minus_k2
    u11 = g.ifft(m1 * uh)
    u22 = g.ifft(m2 * uh)
    return _Derivs(
        lap=u11 + u22,
        ut1=g.ifft(ik1 * uth),
        ut2=g.ifft(ik2 * uth),
        u11=u11,
        u12=g.ifft(ik1 * ik2 * uh),
        u22=u22,
    )


def hessian(state: WaveState, w: np.ndarray) -> HessianField:
    d = _derivs(state)
    return HessianField(np.asarray(w, float), d.ut1, d.ut2, d.u11, d.u12, d.u22)


@dataclass(frozen=True)
class PicardResult:
    w: np.ndarray
    iterations: int
    contraction: float


def _coefficients(q: np.ndarray, d: _Derivs):
    """Split ``h Q h`` into ``a w^2 + b w + c`` with ``w`` the tt slot."""
    rest = (d.ut1, d.ut2, d.u11, d.u12, d.u22)
    b = 2.0 * sum(q[0, r + 1] * f for r, f in enumerate(rest) if q[0, r + 1] != 0.0)
    c = 0.0
    for p, fp in enumerate(rest):
        for r, fr in enumerate(rest):
            if q[p + 1, r + 1] != 0.0:
                c = c + q[p + 1, r + 1] * fp * fr
    return q[0, 0], b, c


def _picard(state: WaveState, q: np.ndarray, cfg: SolverConfig, d: _Derivs | None = None) -> PicardResult:
    d = _derivs(state) if d is None else d
    a, b, c = _coefficients(q, d)
    base = d.lap + c
    w = d.lap
    change = np.zeros_like(w)
    for it in range(1, cfg.picard_max + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            w_next = base + (a * w + b) * w
        with np.errstate(invalid="ignore"):
            change = np.abs(w_next - w)
        if not np.all(np.isfinite(w_next)):
            break
        scale = float(np.max(np.abs(w_next)))
        if float(np.max(change)) <= cfg.picard_tol * scale:
            contraction = float(np.max(np.abs(2.0 * a * w_next + b))) if q.any() else 0.0
            return PicardResult(w_next, it, contraction)
        w = w_next
    change = np.where(np.isfinite(change), change, np.inf)
    idx = np.unravel_index(int(np.argmax(change)), change.shape)
    x1, x2 = state.grid.coords
    raise NonConvergence(state.t, (int(idx[0]), int(idx[1])),
                         (float(x1[idx]), float(x2[idx])), float(change[idx]), cfg.picard_max)


def picard_solve(state: WaveState, n: NullFormTensor, cfg: SolverConfig) -> PicardResult:
    return _picard(state, quadratic_form_6(n), cfg)


def solve_utt(state: WaveState, n: NullFormTensor, cfg: SolverConfig) -> GridField:
    """Pointwise solution ``w`` of ``w = Laplacian u + N(H(w), H(w))``."""
    return GridField(state.grid, picard_solve(state, n, cfg).w)


class _Rhs:
    def __init__(self, grid: PeriodicGrid, n: NullFormTensor, cfg: SolverConfig):
        self.grid = grid
        self.q = quadratic_form_6(n)
        self.linear = not self.q.any()
        self.cfg = cfg
        self.iterations = 0
        self.contraction = 0.0

    def __call__(self, t: float, u: np.ndarray, ut: np.ndarray) -> np.ndarray:
        state = WaveState(self.grid, t, u, ut)
        d = _derivs(state)
        if self.linear:
            self.iterations = max(self.iterations, 1)
            return d.lap
        res = _picard(state, self.q, self.cfg, d)
        self.iterations = max(self.iterations, res.iterations)
        self.contraction = max(self.contraction, res.contraction)
        if self.cfg.dealias:
            return d.lap + self.grid.dealias(res.w - d.lap)
        return res.w


def _rk4(rhs: _Rhs, state: WaveState, dt: float) -> WaveState:
    t, u, v = state.t, state.u, state.ut
    k1u, k1v = v, rhs(t, u, v)
    k2u = v + 0.5 * dt * k1v
    k2v = rhs(t + 0.5 * dt, u + 0.5 * dt * k1u, k2u)
    k3u = v + 0.5 * dt * k2v
    k3v = rhs(t + 0.5 * dt, u + 0.5 * dt * k2u, k3u)
    k4u = v + dt * k3v
    k4v = rhs(t + dt, u + dt * k3u, k4u)
    u_new = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return WaveState(state.grid, t + dt, u_new, v_new)


def _check_dt(dt: float, grid: PeriodicGrid) -> None:
    if dt > 0.5 * grid.h * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} exceeds the stability bound 0.5*h={0.5 * grid.h:.4g}")


def step(state: WaveState, n: NullFormTensor, cfg: SolverConfig, dt: float | None = None) -> WaveState:
    """Advance one classical fourth-order Runge-Kutta step."""
    dt = cfg.dt if dt is None else dt
    _check_dt(dt, state.grid)
    return _rk4(_Rhs(state.grid, n, cfg), state, dt)


@dataclass(frozen=True)
class Snapshot:
    step: int
    state: WaveState
    picard_iterations: int
    contraction: float = 0.0


def evolve(
    ivp,
    cfg: SolverConfig,
    t_end: float,
    observer: Callable[[Snapshot], Any] | None = None,
    report_every: int = 1,
) -> tuple[WaveState, list]:
    """Integrate from ``t = 0`` to ``t_end``.

    ``observer`` is called with a :class:`Snapshot` at step 0, every
    ``report_every`` steps and at the final step; its non-``None`` return
    values form the returned log. On :class:`NonConvergence` the partial log
    is attached to the exception as ``exc.log``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if report_every < 1:
        raise ValueError("report_every must be at least 1")
    state = WaveState.from_fields(ivp.phi, ivp.psi)
    _check_dt(cfg.dt, state.grid)
    rhs = _Rhs(state.grid, ivp.tensor, cfg)
    nsteps = max(1, math.ceil(t_end / cfg.dt - 1e-9))
    records: list = []

    def observe(k: int, s: WaveState) -> None:
        if observer is None:
            return
        out = observer(Snapshot(k, s, rhs.iterations, rhs.contraction))
        rhs.iterations = 0
        rhs.contraction = 0.0
        if out is not None:
            records.append(out)

    observe(0, state)
    warned = False
    for k in range(1, nsteps + 1):
        dt = min(cfg.dt, t_end - state.t) if k == nsteps else cfg.dt
        try:
            state = _rk4(rhs, state, dt)
        except NonConvergence as exc:
            exc.log = records
            raise
        if rhs.contraction > 0.5 and not warned:
            log.warning("Picard contraction factor %.3g > 0.5 at t=%.4g; root selection may be ambiguous",
                        rhs.contraction, state.t)
            warned = True
        if k % report_every == 0 or k == nsteps:
            observe(k, state)
    return state, records
