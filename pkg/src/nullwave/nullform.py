"""Coefficient algebra for quadratic null forms in 2+1 dimensions.

A fully nonlinear quadratic term is stored as a rank-4 array ``N[a, b, m, n]``
over space-time indices ``0 = t, 1 = x1, 2 = x2`` and acts on a pair of
space-time Hessians as ``sum N[a, b, m, n] h[a, b] k[m, n]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NullFormTensor",
    "QuasiNullForm",
    "ConeDirection",
    "FrameSplit",
    "MINKOWSKI",
    "prototype_tensor",
    "symmetrize",
    "contract",
    "null_symbol",
    "is_null",
    "is_null_quasi",
    "lift_quasi",
    "frame_decompose",
    "quadratic_form_6",
]

MINKOWSKI = np.diag([1.0, -1.0, -1.0])


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NullFormTensor:
    coeffs: np.ndarray
    symmetric_flag: bool = False

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (3, 3, 3, 3):
            raise ValueError(f"coefficient array must have shape (3, 3, 3, 3), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls) -> "NullFormTensor":
        return cls(np.zeros((3, 3, 3, 3)), symmetric_flag=True)

    @classmethod
    def from_entries(cls, entries: dict) -> "NullFormTensor":
        c = np.zeros((3, 3, 3, 3))
        for idx, val in entries.items():
            c[idx] = val
        return cls(c)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def has_pair_symmetry(self, atol: float = 0.0) -> bool:
        c = self.coeffs
        return bool(
            np.allclose(c, c.transpose(1, 0, 2, 3), rtol=0, atol=atol)
            and np.allclose(c, c.transpose(0, 1, 3, 2), rtol=0, atol=atol)
        )

    def __eq__(self, other):
        if not isinstance(other, NullFormTensor):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


@dataclass(frozen=True)
class QuasiNullForm:
    """Quasilinear nonlinearity ``A_l d_l (m[mu, delta] d_mu v d_delta v)``."""

    a: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a)
        m = _frozen(self.m)
        if a.shape != (3,) or m.shape != (3, 3):
            raise ValueError("expected a 3-vector and a 3x3 matrix")
        if not np.allclose(m, m.T, rtol=0, atol=1e-14 * max(1.0, float(np.abs(m).max()))):
            raise ValueError("quasilinear form matrix must be symmetric")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "m", m)

    @property
    def degenerate(self) -> bool:
        return not np.any(self.a)


@dataclass(frozen=True)
class ConeDirection:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))

    @property
    def vector(self) -> np.ndarray:
        return np.array([1.0, math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class FrameSplit:
    dminus: float
    good: np.ndarray = field(repr=True)
    omega: np.ndarray = field(repr=False, default=None)

    @property
    def y_minus(self) -> np.ndarray:
        return np.array([1.0, -self.omega[0], -self.omega[1]])

    def reconstruct(self) -> np.ndarray:
        return self.y_minus * self.dminus + self.good


def prototype_tensor() -> NullFormTensor:
    """Tensor of ``|d_t^2 u|^2 - |d_t grad u|^2``."""
    return NullFormTensor.from_entries({(0, 0, 0, 0): 1.0, (0, 1, 0, 1): -1.0, (0, 2, 0, 2): -1.0})


def symmetrize(n: NullFormTensor) -> NullFormTensor:
    """Average over swapping ``a <-> b`` and ``m <-> n``.

    Summed in two commutative stages so both pair symmetries hold bit-exactly
    and a second application returns the input unchanged.
    """
    c = n.coeffs
    p = c + c.transpose(1, 0, 2, 3)
    s = 0.25 * (p + p.transpose(0, 1, 3, 2))
    return NullFormTensor(s, symmetric_flag=True)


def contract(n: NullFormTensor, h, k) -> float:
    return float(np.einsum("abmn,ab,mn->", n.coeffs, np.asarray(h, float), np.asarray(k, float)))


def _symbol_samples(coeffs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    x = np.stack([np.ones_like(thetas), np.cos(thetas), np.sin(thetas)], axis=-1)
    return np.einsum("abmn,ka,kb,km,kn->k", coeffs, x, x, x, x)


def null_symbol(n: NullFormTensor, d: ConeDirection | float) -> float:
    theta = d.theta if isinstance(d, ConeDirection) else float(d)
    return float(_symbol_samples(n.coeffs, np.array([theta]))[0])


def _fourier_vanishes(samples: np.ndarray, bound: float) -> bool:
    coeffs = np.fft.rfft(samples) / samples.size
    return bool(np.all(np.abs(coeffs) <= bound))


def is_null(n: NullFormTensor, tol: float = 1e-10) -> bool:
    """Whether the quartic symbol vanishes on the light cone.

    The symbol restricted to ``X = (1, cos t, sin t)`` is a trigonometric
    polynomial of degree at most 4, so its 16-point DFT determines it exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    thetas = 2 * np.pi * np.arange(16) / 16
    return _fourier_vanishes(_symbol_samples(n.coeffs, thetas), tol * n.scale)


def is_null_quasi(q: QuasiNullForm, tol: float = 1e-10) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    thetas = 2 * np.pi * np.arange(8) / 8
    x = np.stack([np.ones(8), np.cos(thetas), np.sin(thetas)], axis=-1)
    samples = np.einsum("md,km,kd->k", q.m, x, x)
    return _fourier_vanishes(samples, tol * float(np.max(np.abs(q.m))))


def lift_quasi(q: QuasiNullForm) -> NullFormTensor:
    """Fully nonlinear tensor ``T[a, b, g, d] = A_a A_g m[b, d]``.

    Not symmetric in general; pass through :func:`symmetrize` before solving.
    """
    t = np.einsum("a,g,bd->abgd", q.a, q.a, q.m)
    return NullFormTensor(t, symmetric_flag=not np.any(q.a))


def frame_decompose(grad, omega) -> FrameSplit:
    """Split a space-time gradient into the bad derivative ``D^-`` and a remainder."""
    g = np.asarray(grad, dtype=float)
    w = np.asarray(omega, dtype=float)
    if abs(math.hypot(w[0], w[1]) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit vector")
    dminus = 0.5 * (g[0] - w[0] * g[1] - w[1] * g[2])
    y_minus = np.array([1.0, -w[0], -w[1]])
    good = g - y_minus * dminus
    return FrameSplit(dminus=float(dminus), good=good, omega=w)


# Hessian storage order used by the solver: (tt, t1, t2, 11, 12, 22).
HESSIAN_SLOTS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def quadratic_form_6(n: NullFormTensor) -> np.ndarray:
    """Matrix ``Q`` with ``contract(n, H, H) = h @ Q @ h`` for the six Hessian slots."""
    s = symmetrize(n).coeffs
    q = np.zeros((6, 6))
    for p, (a, b) in enumerate(HESSIAN_SLOTS):
        mult_p = 1.0 if a == b else 2.0
        for r, (m, k) in enumerate(HESSIAN_SLOTS):
            mult_r = 1.0 if m == k else 2.0
            q[p, r] = mult_p * mult_r * s[a, b, m, k]
    return 0.5 * (q + q.T)
