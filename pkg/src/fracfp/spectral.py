"""Dirichlet sine basis on (0, L) and the operators built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "SpectralBasis",
    "SpectralField",
    "ForcingModel",
    "PolynomialForcing",
    "FunctionForcing",
    "build_basis",
    "project",
    "sobolev_norms",
    "h1_norm",
    "h2_norm",
    "domain_constants",
    "advection_matrix",
]


@dataclass(frozen=True)
class SpectralBasis:
    """First ``m`` eigenpairs of ``-d^2/dx^2`` with Dirichlet conditions.

    ``w_k(x) = sqrt(2/L) sin(k pi x / L)`` and ``lambda_k = (k pi / L)**2``.
    Quadrature is composite Gauss-Legendre, fine enough to integrate
    products of modes up to index ``2m`` against low-degree polynomials
    to rounding error.
    """

    L: float
    m: int
    lam: np.ndarray = field(init=False, repr=False, compare=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)
    wq: np.ndarray = field(init=False, repr=False, compare=False)
    modes: np.ndarray = field(init=False, repr=False, compare=False)
    dmodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"domain length must be positive, got {self.L!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"number of modes must be a positive integer, got {self.m!r}")
        L, m = float(self.L), int(self.m)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "m", m)
        k = np.arange(1, m + 1)
        freq = k * math.pi / L
        panels = 2 * m + 8
        gx, gw = np.polynomial.legendre.leggauss(12)
        edges = np.linspace(0.0, L, panels + 1)
        half = 0.5 * np.diff(edges)
        x = (edges[:-1, None] + half[:, None] * (gx + 1.0)).ravel()
        wq = (half[:, None] * gw).ravel()
        amp = math.sqrt(2.0 / L)
        modes = amp * np.sin(np.outer(freq, x))
        dmodes = amp * freq[:, None] * np.cos(np.outer(freq, x))
        for name, val in [("lam", freq**2), ("x", x), ("wq", wq),
                          ("modes", modes), ("dmodes", dmodes)]:
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def reconstruct(self, coeffs, x=None):
        """Evaluate ``sum_k coeffs[k] w_k`` at ``x`` (default: quadrature nodes)."""
        coeffs = np.asarray(coeffs, dtype=float)
        if x is None:
            return coeffs @ self.modes
        x = np.asarray(x, dtype=float)
        freq = np.sqrt(self.lam)
        return coeffs @ (math.sqrt(2.0 / self.L) * np.sin(np.outer(freq, x)))


@dataclass(frozen=True)
class SpectralField:
    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.m,):
            raise ValueError(f"expected {self.basis.m} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)


def build_basis(L: float, m: int) -> SpectralBasis:
    return SpectralBasis(L, m)


def project(basis: SpectralBasis, f: Callable) -> SpectralField:
    """L2 projection onto span{w_1..w_m}: ``coeffs_k = <f, w_k>``."""
    vals = np.asarray(f(basis.x), dtype=float) * np.ones_like(basis.x)
    return SpectralField(basis, basis.modes @ (basis.wq * vals))


def sobolev_norms(field: SpectralField):
    """Return ``(||v||, |v|_{H^1}, ||Delta v||)`` computed from coefficients."""
    d2 = field.coeffs**2
    lam = field.basis.lam
    return (
        math.sqrt(d2.sum()),
        math.sqrt((lam * d2).sum()),
        math.sqrt((lam**2 * d2).sum()),
    )


def h1_norm(field: SpectralField) -> float:
    l2, h1, _ = sobolev_norms(field)
    return math.hypot(l2, h1)


def h2_norm(field: SpectralField) -> float:
    l2, h1, lap = sobolev_norms(field)
    return math.sqrt(l2**2 + h1**2 + lap**2)


def domain_constants(basis: SpectralBasis):
    """Poincare constant ``C_P`` and elliptic regularity constant ``C_R``.

    With ``lambda_1`` the smallest eigenvalue, ``||v||^2 <= C_P ||v'||^2`` and
    ``sum (1 + lam + lam^2) d^2 <= C_R^2 sum lam^2 d^2``.
    """
    lam1 = float(basis.lam[0])
    return 1.0 / lam1, math.sqrt(1.0 / lam1**2 + 1.0 / lam1 + 1.0)


# ---------------------------------------------------------------------------
# Forcing


class ForcingModel:
    """Velocity field ``F(t, x)`` and its time derivatives.

    Subclasses implement :meth:`value` and :meth:`divergence` for time
    derivative orders 0, 1 and 2. Norm constants are estimated by sampling
    ``[0, T] x [0, L]`` unless ``declared`` supplies them (keys ``sup``,
    ``w1``, ``sup_t``, ``w1_t``).
    """

    #: degree in t when F is polynomial in time, else None
    time_degree: int | None = None

    def __init__(self, declared: dict | None = None):
        self.declared = dict(declared or {})

    def value(self, t, x, order=0):
        raise NotImplementedError

    def divergence(self, t, x, order=0):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def norms(self, T: float, L: float, samples: int = 401) -> dict:
        """``sup = ||F||_inf``, ``w1 = ||F||_{1,inf}``, and the same for F'."""
        out = {}
        if not {"sup", "w1", "sup_t", "w1_t"} <= self.declared.keys():
            t = np.linspace(0.0, T, samples)[:, None]
            x = np.linspace(0.0, L, samples)[None, :]
            for order, suffix in [(0, ""), (1, "_t")]:
                val = np.max(np.abs(self.value(t, x, order) * np.ones((samples, samples))))
                div = np.max(np.abs(self.divergence(t, x, order) * np.ones((samples, samples))))
                out["sup" + suffix] = float(val)
                out["w1" + suffix] = float(val + div)
        out.update(self.declared)
        return out


class PolynomialForcing(ForcingModel):
    """``F(t, x) = sum_{i, j} coeffs[i][j] t**i x**j`` (time degree <= 2 in
    practice, but any degree works). Time derivatives are exact."""

    def __init__(self, coeffs, declared: dict | None = None):
        super().__init__(declared)
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.coeffs = c
        self.time_degree = c.shape[0] - 1

    @classmethod
    def zero(cls):
        return cls([[0.0]])

    @classmethod
    def constant(cls, c: float):
        return cls([[float(c)]])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def value(self, t, x, order=0):
        P = np.polynomial.polynomial
        return P.polyval2d(*np.broadcast_arrays(t, x), P.polyder(self.coeffs, order, axis=0))

    def divergence(self, t, x, order=0):
        P = np.polynomial.polynomial
        c = P.polyder(P.polyder(self.coeffs, order, axis=0), 1, axis=1)
        return P.polyval2d(*np.broadcast_arrays(t, x), c)

    def time_slices(self):
        """Spatial profiles ``c_i(x)`` with ``F = sum_i c_i(x) t**i``, as
        ``(value, derivative)`` callable pairs."""
        P = np.polynomial.polynomial
        out = []
        for row in self.coeffs:
            out.append((lambda x, r=row: P.polyval(x, r),
                        lambda x, r=row: P.polyval(x, P.polyder(r))))
        return out


class FunctionForcing(ForcingModel):
    """Forcing given by callables.

    ``funcs`` maps ``(order, kind)`` to ``f(t, x)`` where ``kind`` is
    ``"value"`` or ``"div"`` and ``order`` in {0, 1, 2}. Missing entries are
    treated as zero.
    """

    def __init__(self, funcs: dict, declared: dict | None = None):
        super().__init__(declared)
        self.funcs = dict(funcs)

    def _eval(self, key, t, x):
        f = self.funcs.get(key)
        return 0.0 * np.asarray(t) * np.asarray(x) if f is None else f(t, x)

    def value(self, t, x, order=0):
        return self._eval((order, "value"), t, x)

    def divergence(self, t, x, order=0):
        return self._eval((order, "div"), t, x)


def _advection_from_profile(basis, val, div):
    # A[j, k] = <(F w_k)', w_j> = <F' w_k + F w_k', w_j>
    wj = basis.modes * basis.wq
    return wj @ (div[None, :] * basis.modes + val[None, :] * basis.dmodes).T


def advection_matrix(basis: SpectralBasis, F: ForcingModel, t: float,
                     derivative_order: int = 0) -> np.ndarray:
    """Galerkin matrix of ``v -> Pi_m (F^{(q)}(t) v)_x``.

    Entry ``[j, k]`` is ``<(F^{(q)}(t) w_k)_x, w_j>``; ``q`` is the time
    derivative order (0, 1 or 2).
    """
    if derivative_order not in (0, 1, 2):
        raise ValueError("derivative_order must be 0, 1 or 2")
    if F is None or F.is_zero:
        return np.zeros((basis.m, basis.m))
    x = basis.x
    val = np.broadcast_to(F.value(t, x, derivative_order), x.shape)
    div = np.broadcast_to(F.divergence(t, x, derivative_order), x.shape)
    return _advection_from_profile(basis, val, div)


def advection_time_basis(basis: SpectralBasis, F: PolynomialForcing):
    """Matrices ``A_i`` with ``advection_matrix(t) = sum_i t**i A_i``."""
    return np.array([
        _advection_from_profile(basis, val(basis.x) * np.ones_like(basis.x),
                                der(basis.x) * np.ones_like(basis.x))
        for val, der in F.time_slices()
    ])
