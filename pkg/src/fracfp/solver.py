"""Time stepping for the spectral Galerkin system.

The semi-discrete problem for the coefficient vector ``u(t)`` (length m) is

    u' + B(t) D^{1-alpha} u = g(t),    u(0) = u0,

with ``B(t) = kappa * diag(lambda) + A(t)`` and ``A(t)`` the advection
matrix. Two independent discretisations are provided:

* :func:`solve_vie` collocates the integrated form
  ``u + B(t) J^alpha u - int_0^t B'(s) J^alpha u(s) ds = G(t)``
  with piecewise-linear ``u`` and exact product-integration weights.
* :func:`solve_direct` applies a backward difference to ``u'`` and the L1
  formula to the fractional derivative, splitting off ``u0`` so that the
  ``omega_alpha`` singularity is integrated analytically.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .frac_core import (
    FracOrder,
    TimeMesh,
    l1_weights,
    omega,
    product_weights,
)
from .spectral import (
    ForcingModel,
    PolynomialForcing,
    SpectralBasis,
    SpectralField,
    advection_matrix,
    advection_time_basis,
    h2_norm,
)

__all__ = [
    "ProblemSpec",
    "Trajectory",
    "SingularStepError",
    "assemble_B",
    "assemble_G",
    "solve_vie",
    "solve_direct",
    "solve",
    "differentiate_trajectory",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

log = logging.getLogger(__name__)

MAX_MODES = 256

_GAUSS3_X, _GAUSS3_W = np.polynomial.legendre.leggauss(3)


class SingularStepError(np.linalg.LinAlgError):
    """Raised when the linear system of a time step cannot be solved."""

    def __init__(self, node: int, cond: float):
        super().__init__(f"step matrix singular at node {node} (condition estimate {cond:.3e})")
        self.node = node
        self.cond = cond


@dataclass(eq=False)
class ProblemSpec:
    """Galerkin form of the time-fractional Fokker-Planck problem on (0, L).

    Parameters
    ----------
    alpha : FracOrder or float
    kappa : float
        Diffusion coefficient, > 0.
    basis : SpectralBasis
    T : float
        Final time.
    F : ForcingModel, optional
        Velocity field; zero by default.
    u0 : array_like, optional
        Coefficients of the projected initial value; zero by default.
    g : callable, optional
        ``g(t)`` for a 1-D array ``t`` returns the projected source as an
        array of shape ``(len(t), m)``.
    g_prime : callable, optional
        Time derivative of ``g`` with the same calling convention.
    u0_h2 : float, optional
        ``||u0||_{H^2}`` of the continuous initial value. Defaults to the
        spectral norm of the projected coefficients.
    """

    alpha: FracOrder | float
    kappa: float
    basis: SpectralBasis
    T: float
    F: ForcingModel = field(default_factory=PolynomialForcing.zero)
    u0: np.ndarray | None = None
    g: Callable | None = None
    g_prime: Callable | None = None
    u0_h2: float | None = None
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.alpha, FracOrder):
            self.alpha = FracOrder(self.alpha)
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if self.basis.m > MAX_MODES:
            raise ValueError(f"at most {MAX_MODES} modes are supported, got {self.basis.m}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        m = self.basis.m
        u0 = np.zeros(m) if self.u0 is None else np.asarray(self.u0, dtype=float)
        if isinstance(self.u0, SpectralField):
            u0 = self.u0.coeffs
        if u0.shape != (m,) or not np.all(np.isfinite(u0)):
            raise ValueError(f"u0 must be {m} finite coefficients")
        self.u0 = u0
        if self.u0_h2 is None:
            self.u0_h2 = h2_norm(SpectralField(self.basis, u0))
        self._adv_basis = None
        if isinstance(self.F, PolynomialForcing) and not self.F.is_zero:
            self._adv_basis = advection_time_basis(self.basis, self.F)

    @property
    def a(self) -> float:
        return self.alpha.alpha

    @property
    def m(self) -> int:
        return self.basis.m

    def source(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.g is None:
            return np.zeros((t.size, self.m))
        return np.asarray(self.g(t), dtype=float).reshape(t.size, self.m)

    def source_prime(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.g is None:
            return np.zeros((t.size, self.m))
        if self.g_prime is None:
            raise ValueError("problem has no time derivative of the source")
        return np.asarray(self.g_prime(t), dtype=float).reshape(t.size, self.m)

    def advection(self, t: float, order: int = 0) -> np.ndarray:
        if self.F is None or self.F.is_zero:
            return np.zeros((self.m, self.m))
        if self._adv_basis is not None:
            k = np.arange(len(self._adv_basis))
            # d^order/dt^order of t**k
            fac = special.poch(k - order + 1, order)
            powers = np.where(k >= order, float(t) ** np.maximum(k - order, 0), 0.0)
            return np.tensordot(fac * powers, self._adv_basis, axes=1)
        return advection_matrix(self.basis, self.F, t, order)

    def with_data(self, **changes) -> "ProblemSpec":
        """Copy with some fields replaced (e.g. a new ``u0`` or ``g``)."""
        kw = dict(alpha=self.alpha, kappa=self.kappa, basis=self.basis, T=self.T,
                  F=self.F, u0=self.u0, g=self.g, g_prime=self.g_prime,
                  u0_h2=None if "u0" in changes else self.u0_h2, name=self.name)
        kw.update(changes)
        return ProblemSpec(**kw)


@dataclass
class Trajectory:
    """Coefficient vectors of ``u_m`` at every mesh node."""

    mesh: TimeMesh
    coeffs: np.ndarray
    scheme: str
    basis: SpectralBasis | None = None
    alpha: float | None = None

    @property
    def t(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def v(self) -> np.ndarray:
        """``u_m(t) - u_m(0)``."""
        return self.coeffs - self.coeffs[0]

    def state(self, n: int) -> SpectralField:
        return SpectralField(self.basis, self.coeffs[n])


def assemble_B(problem: ProblemSpec, t: float) -> np.ndarray:
    """``B(t) = kappa * diag(lambda) + A(t)``."""
    return problem.kappa * np.diag(problem.basis.lam) + problem.advection(t, 0)


def _panel_source_integrals(problem, mesh):
    t = mesh.nodes
    h = mesh.steps
    tq = t[:-1, None] + 0.5 * h[:, None] * (_GAUSS3_X + 1.0)
    gq = problem.source(tq.ravel()).reshape(mesh.N, 3, problem.m)
    return 0.5 * h[:, None] * np.einsum("q,nqm->nm", _GAUSS3_W, gq)


def assemble_G(problem: ProblemSpec, mesh: TimeMesh) -> np.ndarray:
    """``G(t_n) = u0 + int_0^{t_n} g`` with 3-point Gauss per panel."""
    G = np.empty((mesh.N + 1, problem.m))
    G[0] = problem.u0
    if problem.g is None:
        G[1:] = problem.u0
        return G
    G[1:] = problem.u0 + np.cumsum(_panel_source_integrals(problem, mesh), axis=0)
    return G


def _step_solve(M, rhs, n):
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        raise SingularStepError(n, np.inf) from None
    if not np.all(np.isfinite(x)):
        raise SingularStepError(n, float(np.linalg.cond(M)))
    return x


def _check_step(M, n):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularStepError(n, float(cond))


def _hat_integrals_Bprime(problem, t0, t1):
    """``int B'(s) phi(s) ds`` over [t0, t1] for the left and right hats."""
    h = t1 - t0
    s = t0 + 0.5 * h * (_GAUSS3_X + 1.0)
    P0 = np.zeros((problem.m, problem.m))
    P1 = np.zeros_like(P0)
    for x, w, si in zip(_GAUSS3_X, _GAUSS3_W, s):
        Bp = problem.advection(si, 1)
        right = 0.5 * (x + 1.0)
        P0 += 0.5 * h * w * (1.0 - right) * Bp
        P1 += 0.5 * h * w * right * Bp
    return P0, P1


def solve_vie(problem: ProblemSpec, mesh: TimeMesh, G: np.ndarray | None = None,
              *, memory: bool = True, return_history: bool = False):
    """Piecewise-linear collocation of the Volterra form at the mesh nodes.

    Parameters
    ----------
    problem : ProblemSpec
    mesh : TimeMesh
        Must end at ``problem.T``.
    G : ndarray, optional
        Right-hand side at the nodes, shape ``(N + 1, m)``. Defaults to
        :func:`assemble_G`; passing it lets the z-equation reuse the solver.
    memory : bool
        Keep the ``int_0^t B'(s) J^alpha u(s) ds`` term. With ``False`` the
        solver treats ``u + B(t) J^alpha u = G`` instead.
    return_history : bool
        Also return ``J^alpha u`` at the nodes.

    Returns
    -------
    Trajectory
    """
    _check_mesh(problem, mesh)
    a = problem.a
    m = problem.m
    N = mesh.N
    t = mesh.nodes
    if G is None:
        G = assemble_G(problem, mesh)
    Wt = product_weights(mesh, a)
    varying = problem.F is not None and not problem.F.is_zero and _time_dependent(problem.F)
    keep = varying and memory
    U = np.zeros((N + 1, m))
    JU = np.zeros((N + 1, m))
    U[0] = G[0]
    Q = np.zeros(m)
    eye = np.eye(m)
    B = assemble_B(problem, t[0])
    for n in range(1, N + 1):
        if varying:
            B = assemble_B(problem, t[n])
        K = B
        if keep:
            P0, P1 = _hat_integrals_Bprime(problem, t[n - 1], t[n])
            K = B - P1
        hist = Wt[n, :n] @ U[:n]
        w = Wt[n, n]
        M = eye + w * K
        rhs = G[n] - K @ hist + Q
        if keep:
            rhs += P0 @ JU[n - 1]
        if n == 1:
            _check_step(M, n)
        U[n] = _step_solve(M, rhs, n)
        JU[n] = hist + w * U[n]
        if keep:
            Q = Q + P0 @ JU[n - 1] + P1 @ JU[n]
    traj = Trajectory(mesh, U, "vie", problem.basis, a)
    if return_history:
        return traj, JU
    return traj


def solve_direct(problem: ProblemSpec, mesh: TimeMesh, G: np.ndarray | None = None):
    """Backward difference for ``u'`` plus L1 weights for the fractional
    derivative, one dense solve per step.

    The step equation integrated over ``[t_{n-1}, t_n]`` reads

        u_n - u_{n-1} + h_n B(t_n) [u0 * avg(omega_alpha) + L1(u)_n] = G_n - G_{n-1},

    where ``avg(omega_alpha)`` is the exact panel mean of the singular
    kernel and ``L1(u)_n`` is the discrete ``J^alpha(u')(t_n)``.
    """
    _check_mesh(problem, mesh)
    a = problem.a
    m = problem.m
    N = mesh.N
    t = mesh.nodes
    h = mesh.steps
    if G is None:
        G = assemble_G(problem, mesh)
    D = l1_weights(mesh, a)
    om = omega(a + 1.0, t)
    sing = np.diff(om) / h
    varying = problem.F is not None and not problem.F.is_zero and _time_dependent(problem.F)
    U = np.zeros((N + 1, m))
    U[0] = G[0]
    u0 = U[0]
    eye = np.eye(m)
    B = assemble_B(problem, t[0])
    for n in range(1, N + 1):
        if varying:
            B = assemble_B(problem, t[n])
        hist = D[n, :n] @ U[:n]
        M = eye + h[n - 1] * D[n, n] * B
        rhs = U[n - 1] + (G[n] - G[n - 1]) - h[n - 1] * (B @ (sing[n - 1] * u0 + hist))
        if n == 1:
            _check_step(M, n)
        U[n] = _step_solve(M, rhs, n)
    return Trajectory(mesh, U, "direct", problem.basis, a)


def solve(problem: ProblemSpec, mesh: TimeMesh, scheme: str = "vie", **kw):
    if scheme == "vie":
        return solve_vie(problem, mesh, **kw)
    if scheme == "direct":
        return solve_direct(problem, mesh, **kw)
    raise ValueError(f"unknown scheme {scheme!r}; expected 'vie' or 'direct'")


def _time_dependent(F: ForcingModel) -> bool:
    if isinstance(F, PolynomialForcing):
        return F.time_degree > 0 and bool(np.any(F.coeffs[1:]))
    return True


def _check_mesh(problem, mesh):
    if abs(mesh.T - problem.T) > 1e-12 * problem.T:
        raise ValueError(f"mesh horizon {mesh.T} does not match problem T = {problem.T}")


# ---------------------------------------------------------------------------


def differentiate_trajectory(traj: Trajectory, q: int = 1):
    """Nodal time derivatives of order ``q`` by difference quotients.

    Interior nodes use the three-point stencil of the nonuniform mesh; the
    end nodes use one-sided first-order formulas.

    Returns
    -------
    deriv : ndarray, shape (N + 1, m)
    z : ndarray, shape (N + 1, m)
        ``t_n * u'(t_n)``; only returned for ``q = 1``.
    """
    if q not in (1, 2):
        raise ValueError("only q = 1 or q = 2 is supported")
    N = traj.mesh.N
    if q == 2 and N < 16:
        raise ValueError("second derivatives need a mesh with at least 16 intervals")
    u = traj.coeffs
    t = traj.mesh.nodes
    h = np.diff(t)[:, None]
    h1, h2 = h[:-1], h[1:]
    um, uc, up = u[:-2], u[1:-1], u[2:]
    out = np.empty_like(u)
    if q == 1:
        out[1:-1] = (-h2 / (h1 * (h1 + h2)) * um + (h2 - h1) / (h1 * h2) * uc
                     + h1 / (h2 * (h1 + h2)) * up)
        out[0] = (u[1] - u[0]) / h[0]
        out[-1] = (u[-1] - u[-2]) / h[-1]
        return out, t[:, None] * out
    out[1:-1] = 2.0 * (um / (h1 * (h1 + h2)) - uc / (h1 * h2) + up / (h2 * (h1 + h2)))
    out[0] = out[1]
    out[-1] = out[-2]
    return out


# ---------------------------------------------------------------------------
# CSV export


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else str(float(x))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Header ``t, d_1, ..., d_m`` followed by one row per node, with values
    printed to 17 significant digits."""
    m = traj.coeffs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"d_{k}" for k in range(1, m + 1)])
        for tn, row in zip(traj.t, traj.coeffs):
            w.writerow([f"{tn:.17g}"] + [f"{x:.17g}" for x in row])


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`; returns ``(t, coeffs)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]
