"""Oracles, manufactured solutions, residuals and power-law rate fits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .frac_core import (
    TimeMesh,
    l1_weights,
    mittag_leffler,
    omega,
    product_weights,
    product_weights_at,
)
from .solver import (
    ProblemSpec,
    Trajectory,
    assemble_B,
    assemble_G,
    differentiate_trajectory,
    _time_dependent,
    solve,
    solve_vie,
)

__all__ = [
    "mode_oracle",
    "ManufacturedSolution",
    "manufactured_source",
    "ConvergenceTable",
    "convergence_study",
    "RateFit",
    "fit_rate",
    "RegularityConfig",
    "RegularityResult",
    "check_regularity_rates",
    "ZReport",
    "z_consistency_check",
    "fractional_identity_residual",
    "mild_residual",
    "f_bound_instrument",
    "LemmaCheck",
    "discrete_lemma_checks",
]

_G3X, _G3W = np.polynomial.legendre.leggauss(3)


def mode_oracle(alpha: float, kappa: float, lam: float, t):
    """``E_alpha(-kappa lam t^alpha)``: one Galerkin mode with F = 0, g = 0."""
    if not lam > 0:
        raise ValueError(f"eigenvalue must be positive, got {lam!r}")
    t = np.asarray(t, dtype=float)
    return mittag_leffler(alpha, -kappa * lam * t**alpha)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass
class ManufacturedSolution:
    """``u(t) = t**sigma w_k`` with the source that produces it."""

    problem: ProblemSpec
    sigma: float
    k: int

    def exact(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, self.problem.m))
        out[:, self.k - 1] = t**self.sigma
        return out


def manufactured_source(problem: ProblemSpec, sigma: float, k: int = 1) -> ManufacturedSolution:
    """Source ``g`` for which ``u = t**sigma w_k`` solves the Galerkin system.

    ``g = u' + B(t) D^{1-alpha} u`` with
    ``D^{1-alpha} t**sigma = Gamma(sigma+1)/Gamma(sigma+alpha) t**(sigma+alpha-1)``.
    The returned problem has ``u0 = 0`` and ``g``, ``g'`` attached.
    """
    a = problem.a
    if sigma < a:
        raise ValueError(f"manufactured exponent sigma = {sigma} must be at least alpha = {a}")
    if not 1 <= k <= problem.m:
        raise ValueError(f"mode index must lie in 1..{problem.m}")
    m = problem.m
    e = np.zeros(m)
    e[k - 1] = 1.0
    ratio = special.gamma(sigma + 1) / special.gamma(sigma + a)
    p = sigma + a - 1

    def g(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, m))
        with np.errstate(divide="ignore"):
            out[:, k - 1] = sigma * np.where(t > 0, t ** (sigma - 1), float(sigma == 1))
        for i, ti in enumerate(t):
            if ti > 0 or p == 0:
                out[i] += ratio * ti**p * (assemble_B(problem, ti) @ e)
        return out

    def g_prime(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, m))
        for i, ti in enumerate(t):
            if ti <= 0:
                continue
            out[i, k - 1] = sigma * (sigma - 1) * ti ** (sigma - 2)
            Be = assemble_B(problem, ti) @ e
            Ape = problem.advection(ti, 1) @ e
            out[i] += ratio * (p * ti ** (p - 1) * Be + ti**p * Ape)
        return out

    mp = problem.with_data(u0=np.zeros(m), g=g, g_prime=g_prime, u0_h2=0.0,
                           name=f"{problem.name}-t^{sigma}w{k}")
    return ManufacturedSolution(mp, float(sigma), int(k))


@dataclass
class ConvergenceTable:
    N: np.ndarray
    error: np.ndarray
    order: np.ndarray  # order[i] compares N[i] and N[i+1]; last entry nan
    scheme: str = "vie"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "error", "order"])
            for n, e, o in zip(self.N, self.error, self.order):
                w.writerow([int(n), f"{e:.17g}", f"{o:.17g}"])


def convergence_study(problem: ProblemSpec, exact: Callable, N_list: Sequence[int],
                      scheme: str = "vie", r: float | None = None) -> ConvergenceTable:
    """Max-node L2 error against ``exact(t)`` for each N, with observed
    orders ``log2(e_N / e_{2N})`` between consecutive levels."""
    N_list = [int(n) for n in N_list]
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing with at least 3 entries")
    r = 2.0 / problem.a if r is None else r
    errs = []
    for N in N_list:
        mesh = TimeMesh(problem.T, N, r)
        traj = solve(problem, mesh, scheme)
        diff = traj.coeffs - exact(mesh.nodes)
        errs.append(float(np.sqrt((diff**2).sum(axis=1)).max()))
    errs = np.array(errs)
    ns = np.array(N_list, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        order = np.log(errs[:-1] / errs[1:]) / np.log(ns[1:] / ns[:-1])
    return ConvergenceTable(np.array(N_list), errs, np.append(order, np.nan), scheme)


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    max_residual: float
    window: tuple
    n_samples: int = 0
    label: str = ""


def fit_rate(t, values, window=None, label: str = "") -> RateFit:
    """Least-squares fit of ``log value = exponent log t + intercept``
    over the samples with ``t`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = (t.min(), t.max())
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 5:
        raise ValueError(f"need at least 5 samples inside window {window}, got {int(sel.sum())}")
    if np.any(v[sel] <= 0) or np.any(t[sel] <= 0):
        raise ValueError("rate fitting needs positive times and values")
    x, y = np.log(t[sel]), np.log(v[sel])
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.max(np.abs(y - (slope * x + icpt))))
    return RateFit(float(slope), float(icpt), res, (float(lo), float(hi)), int(sel.sum()), label)


@dataclass
class RegularityConfig:
    """Settings for the early-time rate checks.

    ``eta`` and ``M`` describe a source with ``||g^(j)(t)|| <= M t^(eta-1-j)``;
    when ``eta`` is given the expected exponents include the source term.
    ``window`` is relative to ``T`` unless ``absolute`` is set.
    """

    q: int = 1
    eta: float | None = None
    M: float = 0.0
    window: tuple = (1e-3, 1e-1)
    absolute: bool = False
    tol: float = 0.1

    def __post_init__(self):
        if self.q not in (0, 1, 2):
            raise ValueError("q must be 0, 1 or 2")
        if self.eta is not None and not self.eta > 0.5:
            raise ValueError("eta must exceed 1/2")
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        lo, hi = self.window
        if not lo < hi:
            raise ValueError("window must satisfy lo < hi")


@dataclass
class RegularityResult:
    fits: list
    expected: dict
    passed: dict
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "exponent", "intercept", "max_residual", "t_lo", "t_hi",
                        "expected_min", "pass"])
            for f in self.fits:
                w.writerow([f.label, f"{f.exponent:.17g}", f"{f.intercept:.17g}",
                            f"{f.max_residual:.17g}", f"{f.window[0]:.17g}", f"{f.window[1]:.17g}",
                            f"{self.expected[f.label]:.17g}", str(self.passed[f.label]).lower()])


def check_regularity_rates(traj: Trajectory, config: RegularityConfig,
                           alpha: float | None = None) -> RegularityResult:
    """Fit the early-time slopes of ``||u^(q)(t)||`` and ``||Lap u^(q)(t)||``.

    The check passes when ``t^q ||u^(q)||`` decays no slower than
    ``t^(1/2)`` and ``t^q ||Lap u^(q)||`` no slower than ``t^(1/2 - alpha)``,
    each within ``config.tol`` in the exponent. With ``config.eta`` set and
    zero initial data the targets become ``t^eta`` and ``t^(eta - alpha)``.
    ``q = 0`` only asks that ``||u||`` stay bounded.
    """
    a = alpha if alpha is not None else traj.alpha
    if a is None:
        raise ValueError("alpha is required")
    if not a > 0.5:
        raise ValueError("regularity rates need 1/2 < alpha < 1")
    T = traj.mesh.T
    lo, hi = config.window
    if not config.absolute:
        lo, hi = lo * T, hi * T
    if lo <= 0:
        raise ValueError("rate window must stay away from t = 0")
    if hi > T:
        raise ValueError("rate window must lie inside (0, T]")
    q = config.q
    lam = traj.basis.lam
    t = traj.t
    if q == 0:
        d = traj.coeffs
    elif q == 1:
        d, _ = differentiate_trajectory(traj, 1)
    else:
        d = differentiate_trajectory(traj, 2)
    plain = np.sqrt((d**2).sum(axis=1))
    lap = np.sqrt((lam**2 * d**2).sum(axis=1))
    f1 = fit_rate(t, plain, (lo, hi), label=f"u^({q})")
    f2 = fit_rate(t, lap, (lo, hi), label=f"lap u^({q})")
    zero_u0 = not np.any(traj.coeffs[0])
    if q == 0:
        expected = {f1.label: 0.0, f2.label: 0.0}
    elif config.eta is not None and zero_u0:
        expected = {f1.label: config.eta, f2.label: config.eta - a}
    elif config.eta is not None:
        expected = {f1.label: min(0.5, config.eta), f2.label: min(0.5, config.eta) - a}
    else:
        expected = {f1.label: 0.5, f2.label: 0.5 - a}
    passed = {f.label: bool(q + f.exponent >= expected[f.label] - config.tol) for f in (f1, f2)}
    info = {"improved_u_exponent": min(a, config.eta) if config.eta is not None else a,
            "measured_scaled_u_exponent": q + f1.exponent,
            "measured_scaled_lap_exponent": q + f2.exponent}
    return RegularityResult([f1, f2], expected, passed, info)


# ---------------------------------------------------------------------------
# z = t u'


def fractional_identity_residual(mesh: TimeMesh, u: np.ndarray, alpha: float,
                                 t_min: float | None = None) -> float:
    """Discrete check of ``t D^{2-alpha} u = D^{1-alpha} z + (alpha-1) D^{1-alpha} u``
    with ``z = t u'``.

    ``u`` holds nodal values, shape ``(N + 1,)`` or ``(N + 1, m)``. All
    derivatives are difference quotients of nodal data; the result is the
    max-node difference over interior nodes with ``t >= t_min`` (default
    ``1e-3 T``), relative to the largest right-hand side there. Nodes
    closer to 0 are skipped because a nonzero ``u(0)`` makes the
    difference quotients of ``omega_alpha`` inaccurate on the first panels
    whatever the mesh size.
    """
    u = np.asarray(u, dtype=float)
    vec = u.ndim == 1
    if vec:
        u = u[:, None]
    t = mesh.nodes
    D = l1_weights(mesh, alpha)
    u0 = u[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        sing = omega(alpha, np.where(t > 0, t, np.nan))[:, None] * u0
    frac_u = D @ (u - u0) + np.nan_to_num(sing, nan=0.0)
    traj = Trajectory(mesh, u, "data")
    du, z = differentiate_trajectory(traj, 1)
    frac_z = D @ z
    fu = Trajectory(mesh, frac_u, "data")
    dfu, _ = differentiate_trajectory(fu, 1)
    lhs = t[:, None] * dfu
    rhs = frac_z + (alpha - 1) * frac_u
    t_min = 1e-3 * mesh.T if t_min is None else t_min
    inner = np.zeros(t.size, dtype=bool)
    inner[2:-1] = True
    inner &= t >= t_min
    err = np.sqrt(((lhs - rhs)[inner] ** 2).sum(axis=1)).max()
    scale = np.sqrt((rhs[inner] ** 2).sum(axis=1)).max()
    return float(err / scale) if scale > 0 else float(err)


@dataclass
class ZReport:
    residual: float
    z_solved: np.ndarray
    z_from_u: np.ndarray
    identity_residual: float
    source_l2: float


def z_consistency_check(traj: Trajectory, problem: ProblemSpec) -> ZReport:
    """Solve the equation satisfied by ``z = t u'`` and compare with the
    difference-quotient ``t_n u'(t_n)`` of the trajectory.

    Integrated in time, the z-equation reads ``z + B(t) J^alpha z = S(t)``
    with ``S(t) = t g(t) - alpha B(t) J^alpha u(t)``, the running integral
    of ``g + t g' - alpha (B D^{1-alpha} u + B' J^alpha u)``. ``S`` is
    assembled from the u-trajectory and fed to the collocation solver with
    zero initial data and no memory term.
    """
    mesh = traj.mesh
    t = mesh.nodes
    a = problem.a
    U = traj.coeffs
    JU = product_weights(mesh, a) @ U
    S = t[:, None] * problem.source(t)
    for n in range(mesh.N + 1):
        S[n] -= a * (assemble_B(problem, t[n]) @ JU[n])
    zprob = problem.with_data(u0=np.zeros(problem.m), u0_h2=0.0)
    S[0] = 0.0
    zt = solve_vie(zprob, mesh, G=S, memory=False)
    _, z_fd = differentiate_trajectory(traj, 1)
    diff = np.sqrt(((zt.coeffs - z_fd) ** 2).sum(axis=1))
    res = float(diff.max())
    ident = fractional_identity_residual(mesh, U, a)

    # size of the differentiated source, from nodes 1..N
    D = l1_weights(mesh, a)
    frac_u = D @ (U - U[0])
    gbar = []
    for n in range(1, mesh.N + 1):
        fu = frac_u[n] + omega(a, t[n]) * U[0]
        Bn = assemble_B(problem, t[n])
        val = problem.source(t[n])[0] - a * (Bn @ fu + problem.advection(t[n], 1) @ JU[n])
        if problem.g is not None and problem.g_prime is not None:
            val = val + t[n] * problem.source_prime(t[n])[0]
        gbar.append((val**2).sum())
    source_l2 = float(np.sqrt(np.trapezoid(gbar, t[1:])))
    return ZReport(res, zt.coeffs, z_fd, ident, source_l2)


# ---------------------------------------------------------------------------
# residuals and instruments


def mild_residual(traj: Trajectory, problem: ProblemSpec) -> float:
    """``L2(0, T)`` norm of ``u + B(t) J^alpha u - int_0^t B'(s) J^alpha u ds - G``.

    Evaluated at panel midpoints so the collocation equations themselves
    do not force it to vanish: ``u`` is interpolated, ``J^alpha u`` is
    integrated exactly for the piecewise-linear ``u``, the memory integral
    and ``G`` use 3-point Gauss on each panel.
    """
    mesh = traj.mesh
    t, h = mesh.nodes, mesh.steps
    a = problem.a
    U = traj.coeffs
    mid = 0.5 * (t[1:] + t[:-1])
    Wn = product_weights(mesh, a) @ U
    Wm = product_weights_at(mesh, a, mid) @ U
    Um = 0.5 * (U[1:] + U[:-1])
    G = assemble_G(problem, mesh)
    m = problem.m

    def gauss(fun, lo, hi):
        s = lo + 0.5 * (hi - lo) * (_G3X + 1.0)
        return 0.5 * (hi - lo) * sum(w * fun(x) for w, x in zip(_G3W, s))

    def W_lin(n, s):
        # linear interpolation of nodal J^alpha u inside panel n
        th = (s - t[n - 1]) / h[n - 1]
        return (1 - th) * Wn[n - 1] + th * Wn[n]

    dynamic = not problem.F.is_zero and _time_dependent(problem.F)
    res2 = 0.0
    Q = np.zeros(m)
    for n in range(1, mesh.N + 1):
        tm = mid[n - 1]
        if problem.g is not None:
            Gm = G[n - 1] + gauss(lambda s: problem.source(s)[0], t[n - 1], tm)
        else:
            Gm = G[n - 1]
        Qm = Q
        if dynamic:
            Qm = Q + gauss(lambda s: problem.advection(s, 1) @ W_lin(n, s), t[n - 1], tm)
            Q = Q + gauss(lambda s: problem.advection(s, 1) @ W_lin(n, s), t[n - 1], t[n])
        R = Um[n - 1] + assemble_B(problem, tm) @ Wm[n - 1] - Qm - Gm
        res2 += h[n - 1] * (R**2).sum()
    return float(math.sqrt(res2))


def f_bound_instrument(traj: Trajectory, problem: ProblemSpec) -> dict:
    """Weighted norms of ``f = g - A(t) D^{1-alpha} u`` (the source seen by a
    pure subdiffusion problem).

    Returns ``{"q0": int_0^T ||f||^2, "q1": int_0^T t^2 ||f'||^2}`` from
    nodes ``1..N``; the weakly singular start contributes through
    ``D^{1-alpha} u = omega_alpha u0 + D^{1-alpha} v``.
    """
    mesh = traj.mesh
    t = mesh.nodes
    a = problem.a
    U = traj.coeffs
    frac = l1_weights(mesh, a) @ (U - U[0])
    f = np.zeros_like(U)
    for n in range(1, mesh.N + 1):
        fu = frac[n] + omega(a, t[n]) * U[0]
        f[n] = problem.source(t[n])[0] - problem.advection(t[n], 0) @ fu
    ts = t[1:]
    fs = f[1:]
    q0 = float(np.trapezoid((fs**2).sum(axis=1), ts))
    df = np.gradient(fs, ts, axis=0)
    q1 = float(np.trapezoid(ts**2 * (df**2).sum(axis=1), ts))
    return {"q0": q0, "q1": q1}


# ---------------------------------------------------------------------------
# discrete versions of the fractional-calculus inequalities


@dataclass(frozen=True)
class LemmaCheck:
    """An inequality ``larger >= smaller`` evaluated on a mesh."""

    name: str
    larger: float
    smaller: float

    @property
    def defect(self) -> float:
        """Relative amount by which the inequality fails (0 when it holds)."""
        scale = max(abs(self.smaller), abs(self.larger), 1e-300)
        return max(0.0, (self.smaller - self.larger) / scale)


def discrete_lemma_checks(mesh: TimeMesh, v, alpha: float, beta: float | None = None):
    """Evaluate the fractional-calculus inequalities for nodal samples ``v``.

    ``v`` has shape ``(N + 1,)`` or ``(N + 1, d)``; the second axis plays
    the role of space. Time integrals use the trapezoidal rule and fractional
    integrals use product integration, so each inequality holds up to a
    discretization defect that vanishes under refinement. The coercivity
    check against ``rho_alpha`` is included only when ``v(0) = 0``; the
    positivity checks only when ``alpha > 1/2``.

    Returns
    -------
    list of LemmaCheck
    """
    from .frac_core import rho_alpha

    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != mesh.N + 1:
        raise ValueError("v must have one row per mesh node")
    beta = alpha if beta is None else beta
    t, T = mesh.nodes, mesh.T
    trap = lambda f: float(np.trapezoid(f, t))  # noqa: E731
    sq = lambda x: (x**2).sum(axis=1)  # noqa: E731
    Ja = product_weights(mesh, alpha) @ v
    pair = (Ja * v).sum(axis=1)
    out = []
    if alpha > 0.5:
        out.append(LemmaCheck("positivity", float((product_weights(mesh, alpha) @ pair)[-1]),
                              0.5 * float(sq(Ja)[-1])))
        out.append(LemmaCheck("positivity_integrated", trap(pair),
                              0.5 * float((product_weights(mesh, 1 - alpha) @ sq(Ja))[-1])))
    Jh = product_weights(mesh, alpha / 2) @ v
    out.append(LemmaCheck("coercivity_cos", trap(pair),
                          math.cos(alpha * math.pi / 2) * trap(sq(Jh))))
    Jb = product_weights(mesh, beta) @ v
    JbT = float(sq(Jb)[-1])
    out.append(LemmaCheck("minkowski", float(omega(beta + 1, T))
                          * float((product_weights(mesh, beta) @ sq(v))[-1]), JbT))
    out.append(LemmaCheck("jbeta_sup", T**beta / special.gamma(beta + 1)
                          * float(np.sqrt(sq(v).max())), math.sqrt(JbT)))
    if beta > 0.5:
        out.append(LemmaCheck("jbeta_l2", T ** (beta - 0.5)
                              / (special.gamma(beta) * math.sqrt(2 * beta - 1))
                              * math.sqrt(trap(sq(v))), math.sqrt(JbT)))
    if not np.any(v[0]):
        Dv = l1_weights(mesh, alpha) @ v
        out.append(LemmaCheck("coercivity_rho", trap((Dv * v).sum(axis=1)),
                              rho_alpha(alpha) * T ** (alpha - 1) * trap(sq(v))))
    return out
