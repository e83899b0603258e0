"""Fractional-calculus kernels on graded time meshes.

Everything here works on piecewise-linear data: a discrete function is the
vector of its nodal values, and fractional integrals of it are computed by
product integration, i.e. the kernel ``omega_beta(t - s)`` is integrated
exactly against the hat functions of each panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "FracOrder",
    "TimeMesh",
    "DiscreteFn",
    "omega",
    "mittag_leffler",
    "log_mittag_leffler",
    "product_weights",
    "product_weights_at",
    "l1_weights",
    "frac_integral",
    "rl_derivative",
    "gronwall_bound",
    "rho_alpha",
    "weighted_norm_L2alpha",
    "kernel_integral",
]

# Gauss-Legendre rule used for panel moments when cancellation would
# spoil the closed form (relative panel width delta <= _DELTA_SWITCH).
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_DELTA_SWITCH = 0.5
_GL4_NODES, _GL4_WEIGHTS = np.polynomial.legendre.leggauss(5)
_DELTA_NARROW = 0.05

# Double-precision series for negative arguments is used while the
# cancellation factor exp(|z|**(1/alpha)) stays below exp(_ML_SERIES_RADIUS).
_ML_SERIES_RADIUS = 3.0
_ML_OVERFLOW = 700.0


@dataclass(frozen=True)
class FracOrder:
    """Fractional order ``alpha`` in the open interval (0, 1)."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not 0.0 < a < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {a!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def classical_regime(self) -> bool:
        return self.alpha > 0.5

    def __float__(self):
        return self.alpha


def _as_alpha(alpha) -> float:
    return alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)


@dataclass(frozen=True)
class TimeMesh:
    """Graded mesh ``t_n = T (n / N)**r`` for ``n = 0..N``.

    ``r = 1`` is the uniform mesh; ``r > 1`` clusters nodes at ``t = 0``.
    """

    T: float
    N: int
    r: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.r >= 1:
            raise ValueError(f"grading exponent must be >= 1, got {self.r!r}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "r", float(self.r))
        t = self.T * (np.arange(self.N + 1) / self.N) ** self.r
        t[-1] = self.T
        t.setflags(write=False)
        object.__setattr__(self, "nodes", t)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self):
        return self.N + 1


@dataclass(frozen=True)
class DiscreteFn:
    """Nodal samples of a (possibly vector valued) function on a mesh."""

    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != len(self.mesh):
            raise ValueError(
                f"expected {len(self.mesh)} nodal values, got {v.shape[0]}"
            )
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.mesh.nodes


def omega(beta: float, t):
    """Kernel ``t**(beta - 1) / Gamma(beta)``."""
    if not beta > 0:
        raise ValueError(f"omega requires beta > 0, got {beta!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("omega is only defined for t >= 0")
    if beta < 1 and np.any(t == 0):
        raise ValueError(f"omega_{beta} is singular at t = 0")
    out = t ** (beta - 1.0) / special.gamma(beta)
    return out.item() if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Mittag-Leffler function


def _ml_series(alpha, z):
    """Power series, summed in log space so large positive z cannot overflow
    intermediate terms."""
    z = np.asarray(z, dtype=float)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    kmax = int(2.0 * zmax ** (1.0 / alpha) / alpha + 60) if zmax > 0 else 1
    k = np.arange(kmax + 1)
    logabs = np.where(
        z[..., None] == 0,
        np.where(k == 0, 0.0, -np.inf),
        k * np.log(np.abs(np.where(z == 0, 1.0, z)))[..., None],
    ) - special.gammaln(alpha * k + 1.0)
    sign = np.where((z[..., None] < 0) & (k % 2 == 1), -1.0, 1.0)
    return np.sum(sign * np.exp(logabs), axis=-1)


def _ml_negative_integral(alpha, x):
    """E_alpha(-x) for 0 < alpha < 1 and x > 0 from its spectral
    representation ``int_0^inf exp(-r s) K(r) dr`` with ``s = x**(1/alpha)``."""
    s = x ** (1.0 / alpha)
    sa, ca = math.sin(alpha * math.pi), math.cos(alpha * math.pi)

    def smooth(r):
        ra = r**alpha
        return sa / math.pi / (ra * ra + 2.0 * ra * ca + 1.0) * math.exp(-r * s)

    split = (-ca) ** (1.0 / alpha) if ca < 0 else 1.0
    # r**(alpha - 1) is handled by the algebraic weight on the first piece
    head, _ = integrate.quad(
        smooth, 0.0, split, weight="alg", wvar=(alpha - 1.0, 0.0),
        epsabs=0.0, epsrel=1e-13, limit=400,
    )
    tail, _ = integrate.quad(
        lambda r: r ** (alpha - 1.0) * smooth(r), split, np.inf,
        epsabs=0.0, epsrel=1e-13, limit=400,
    )
    return head + tail


def _ml_negative_mp(alpha, z):
    import mpmath

    loss = abs(z) ** (1.0 / alpha) / math.log(10.0)
    # the result itself can be as small as exp(-|z|), so budget twice the loss
    with mpmath.workdps(int(30 + 2 * loss)):
        zz = mpmath.mpf(z)
        total, term_k, k = mpmath.mpf(0), mpmath.mpf(1), 0
        tiny = mpmath.mpf(10) ** (-(25 + loss))
        while True:
            term_k = zz**k / mpmath.gamma(alpha * k + 1)
            total += term_k
            if k > 10 and abs(term_k) < tiny and alpha * k > abs(z) ** (1 / alpha):
                break
            k += 1
        return float(total)


def mittag_leffler(alpha: float, z):
    """One-parameter Mittag-Leffler function ``sum z**k / Gamma(alpha k + 1)``.

    Parameters
    ----------
    alpha : float
        Order in (0, 2].
    z : float or array_like
        Real argument(s).

    Returns
    -------
    float or ndarray

    Raises
    ------
    OverflowError
        If ``z**(1/alpha)`` is too large for the result to be representable.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"Mittag-Leffler order must lie in (0, 2], got {alpha!r}")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    scale = np.abs(z) ** (1.0 / alpha)
    if np.any((z > 0) & (scale > _ML_OVERFLOW)):
        raise OverflowError(f"E_{alpha}(z) overflows for z = {z.max()!r}")
    out = np.empty_like(z)
    easy = (z >= 0) | (scale <= _ML_SERIES_RADIUS)
    if np.any(easy):
        out[easy] = _ml_series(alpha, z[easy])
    for idx in zip(*np.nonzero(~easy)):
        zi = float(z[idx])
        if alpha < 1.0:
            out[idx] = _ml_negative_integral(alpha, -zi)
        else:
            out[idx] = _ml_negative_mp(alpha, zi)
    return out.item() if scalar else out


def log_mittag_leffler(alpha: float, x: float) -> float:
    """Natural log of ``E_alpha(x)`` for ``x >= 0``, including arguments
    where the value itself overflows.

    Past the overflow threshold the leading exponential term of the
    large-argument expansion, ``exp(x**(1/alpha)) / alpha``, is used; the
    algebraic remainder is below double precision relative to it there.
    """
    x = float(x)
    if x < 0:
        raise ValueError("log_mittag_leffler needs a nonnegative argument")
    if x == 0.0 or math.log(x) / alpha <= math.log(_ML_OVERFLOW):
        return math.log(mittag_leffler(alpha, x))
    if math.log(x) / alpha >= 709.0:
        return math.inf
    return x ** (1.0 / alpha) - math.log(alpha)


# ---------------------------------------------------------------------------
# Product integration


def _gauss_m1(beta, delta, nodes, weights):
    d = delta[:, None]
    u = 0.5 * d * (nodes + 1.0)
    return 0.5 * delta * np.sum(weights * (1.0 - u) ** (beta - 1.0) * u, axis=1)


def _panel_moments(beta, delta, first=True):
    """Return ``M0 = int_0^delta (1-u)**(beta-1) du`` and
    ``M1 = int_0^delta (1-u)**(beta-1) u du`` for an array of delta in (0, 1].

    M0 has a cancellation-free closed form. M1 uses it only for wide panels;
    narrow ones go through Gauss-Legendre, with fewer points when delta is
    small enough that the integrand is nearly polynomial.
    """
    delta = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore"):
        m0 = -np.expm1(beta * np.log1p(-delta)) / beta
    if not first:
        return m0, None
    m1 = np.empty_like(delta)
    tiny = delta <= _DELTA_NARROW
    mid = ~tiny & (delta <= _DELTA_SWITCH)
    big = delta > _DELTA_SWITCH
    if np.any(tiny):
        m1[tiny] = _gauss_m1(beta, delta[tiny], _GL4_NODES, _GL4_WEIGHTS)
    if np.any(mid):
        m1[mid] = _gauss_m1(beta, delta[mid], _GL_NODES, _GL_WEIGHTS)
    if np.any(big):
        d = delta[big]
        with np.errstate(divide="ignore"):
            n0 = -np.expm1((beta + 1.0) * np.log1p(-d)) / (beta + 1.0)
        m1[big] = m0[big] - n0
    return m0, m1


def _panel_geometry(mesh, rows):
    t = mesh.nodes
    h = mesh.steps
    n = rows[:, None]
    j = np.arange(1, mesh.N + 1)[None, :]
    active = j <= n
    b = np.where(active, t[rows][:, None] - t[j - 1], 1.0)
    delta = np.where(active, h[None, :] / b, 0.5)
    return b, np.clip(delta, 0.0, 1.0), active


@lru_cache(maxsize=16)
def product_weights(mesh: TimeMesh, beta: float) -> np.ndarray:
    """Lower-triangular matrix ``W`` with ``(J^beta f)(t_n) = W[n] @ f``.

    ``f`` is interpolated piecewise linearly between nodes and the kernel
    is integrated exactly on each panel.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    N = mesh.N
    W = np.zeros((N + 1, N + 1))
    scale = 1.0 / special.gamma(beta)
    for start in range(1, N + 1, 256):
        rows = np.arange(start, min(start + 256, N + 1))
        b, delta, active = _panel_geometry(mesh, rows)
        m0, m1 = _panel_moments(beta, delta)
        pref = np.where(active, b**beta * scale, 0.0)
        right = pref * m1 / delta
        left = pref * m0 - right
        W[rows, 1:] += right
        W[rows, :-1] += left
    W.setflags(write=False)
    return W


def product_weights_at(mesh: TimeMesh, beta: float, tau) -> np.ndarray:
    """Matrix ``P`` with ``(J^beta f)(tau_i) = P[i] @ f`` for points
    ``tau_i`` in ``(0, T]`` that need not be nodes.

    ``f`` is the piecewise-linear interpolant of its nodal values; panels
    entirely left of ``tau_i`` use the same moments as
    :func:`product_weights`, the panel containing ``tau_i`` is integrated
    in closed form over its left part.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    t, h, N = mesh.nodes, mesh.steps, mesh.N
    if np.any(tau <= 0) or np.any(tau > t[-1] * (1 + 1e-14)):
        raise ValueError("evaluation points must lie in (0, T]")
    # panel p holds tau: t[p-1] < tau <= t[p]
    p = np.clip(np.searchsorted(t, tau, side="left"), 1, N)
    P = np.zeros((tau.size, N + 1))
    scale = 1.0 / special.gamma(beta)
    j = np.arange(1, N + 1)[None, :]
    full = j < p[:, None]
    b = np.where(full, tau[:, None] - t[j - 1], 1.0)
    delta = np.clip(np.where(full, h[None, :] / b, 0.5), 0.0, 1.0)
    m0, m1 = _panel_moments(beta, delta)
    pref = np.where(full, b**beta * scale, 0.0)
    right = pref * m1 / delta
    P[:, 1:] += right
    P[:, :-1] += pref * m0 - right
    # partial panel [t[p-1], tau]
    bp = tau - t[p - 1]
    hp = h[p - 1]
    w0 = bp**beta / special.gamma(beta + 1)
    w1 = bp ** (beta + 1) / (hp * special.gamma(beta + 2))
    rows = np.arange(tau.size)
    P[rows, p - 1] += w0 - w1
    P[rows, p] += w1
    return P


@lru_cache(maxsize=16)
def l1_weights(mesh: TimeMesh, alpha: float) -> np.ndarray:
    """Matrix ``D`` with ``D[n] @ f = J^alpha(f')(t_n)`` for piecewise-linear f.

    This is the L1 discretisation of the Riemann-Liouville derivative of
    ``f - f(0)``; it is exact on piecewise-linear functions.
    """
    N = mesh.N
    h = mesh.steps
    D = np.zeros((N + 1, N + 1))
    scale = 1.0 / special.gamma(alpha)
    for start in range(1, N + 1, 256):
        rows = np.arange(start, min(start + 256, N + 1))
        b, delta, active = _panel_geometry(mesh, rows)
        m0, _ = _panel_moments(alpha, delta, first=False)
        # slope coefficient int_panel omega_alpha(t_n - s) ds / h_j
        c = np.where(active, b**alpha * scale * m0 / h[None, :], 0.0)
        D[rows, 1:] += c
        D[rows, :-1] -= c
    D.setflags(write=False)
    return D


def frac_integral(beta: float, f: DiscreteFn) -> DiscreteFn:
    """Riemann-Liouville integral ``J^beta f`` at every mesh node."""
    W = product_weights(f.mesh, float(beta))
    return DiscreteFn(f.mesh, W @ f.values)


def rl_derivative(alpha, f: DiscreteFn, f0=None) -> DiscreteFn:
    """Riemann-Liouville derivative of order ``1 - alpha``.

    The initial value is split off, ``f = f0 + (f - f0)``, so the singular
    part ``f0 * omega_alpha(t)`` is exact and only the remainder goes
    through the L1 weights. Node 0 is ``inf`` wherever ``f0 != 0``.
    """
    a = _as_alpha(alpha)
    vals = f.values
    if f0 is None:
        f0 = vals[0]
    f0 = np.asarray(f0, dtype=float)
    D = l1_weights(f.mesh, a)
    out = D @ vals
    t = f.mesh.nodes
    sing = np.zeros_like(t)
    sing[1:] = omega(a, t[1:])
    shape = (-1,) + (1,) * (vals.ndim - 1)
    out = out + sing.reshape(shape) * f0
    out[0] = np.where(f0 != 0, np.inf, 0.0)
    return DiscreteFn(f.mesh, out)


def kernel_integral(mesh: TimeMesh, beta: float) -> np.ndarray:
    """Weights ``q`` with ``int_0^T omega_beta(t) f(t) dt = q @ f`` for
    piecewise-linear f (the weakly singular weight sits at t = 0)."""
    t = mesh.nodes
    h = mesh.steps
    b = t[1:]
    delta = h / b
    m0, m1 = _panel_moments(beta, delta)
    pref = b**beta / special.gamma(beta)
    q = np.zeros(mesh.N + 1)
    q[:-1] += pref * m1 / delta
    q[1:] += pref * (m0 - m1 / delta)
    return q


# ---------------------------------------------------------------------------


def gronwall_bound(beta: float, a: float, b: float, t: float) -> float:
    """Fractional Gronwall bound ``a * E_beta(b * t**beta)`` for constant
    non-negative ``a`` and ``b``."""
    if a < 0 or b < 0 or t < 0:
        raise ValueError("gronwall_bound needs a, b, t >= 0")
    return a * mittag_leffler(beta, b * t**beta)


def rho_alpha(alpha) -> float:
    r"""Coercivity constant

    .. math:: \rho_\alpha = \pi^{1-\alpha} \frac{(1-\alpha)^{1-\alpha}}
              {(2-\alpha)^{2-\alpha}} \sin(\pi\alpha/2).
    """
    a = _as_alpha(alpha)
    if not 0.0 < a < 1.0:
        raise ValueError(f"rho_alpha needs 0 < alpha < 1, got {a!r}")
    return (
        math.pi ** (1 - a)
        * (1 - a) ** (1 - a)
        / (2 - a) ** (2 - a)
        * math.sin(0.5 * math.pi * a)
    )


def weighted_norm_L2alpha(alpha, normsq: DiscreteFn) -> float:
    """``max_n sqrt(J^alpha(||v||^2)(t_n))`` from samples of ``||v(t_n)||^2``.

    ``alpha = 1`` is accepted and gives the plain L2(0, T) norm.
    """
    a = _as_alpha(alpha)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {a!r}")
    vals = np.asarray(normsq.values, dtype=float)
    if np.any(vals < 0):
        raise ValueError("squared norms must be non-negative")
    J = product_weights(normsq.mesh, a) @ vals
    return float(np.sqrt(max(np.max(J), 0.0)))
