"""Named problem presets: the single-mode oracle and the test corpus."""

from __future__ import annotations

import math

import numpy as np

from .spectral import PolynomialForcing, build_basis, project
from .solver import ProblemSpec

__all__ = [
    "CORPUS_ALPHAS",
    "FORCING_FAMILIES",
    "forcing_family",
    "initial_value",
    "source_preset",
    "oracle_problem",
    "corpus_problem",
    "corpus",
]

CORPUS_ALPHAS = (0.6, 0.75, 0.9)
FORCING_FAMILIES = ("zero", "constant", "spacetime")


def forcing_family(name: str, L: float = math.pi, c: float = 1.0) -> PolynomialForcing:
    """``zero``: F = 0; ``constant``: F = c;
    ``spacetime``: F = (1 + t)(1/2 + x/L) + t^2/2."""
    if name == "zero":
        return PolynomialForcing.zero()
    if name == "constant":
        return PolynomialForcing.constant(c)
    if name == "spacetime":
        return PolynomialForcing([[0.5, 1.0 / L], [0.5, 1.0 / L], [0.5, 0.0]])
    raise ValueError(f"unknown forcing family {name!r}; expected one of {FORCING_FAMILIES}")


def initial_value(name: str, basis):
    """Return ``(coefficients, ||u0||_{H^2})`` of a named initial value.

    ``mode1`` is the first eigenfunction; ``bump`` is ``x (L - x)``, whose
    H^2 norm is evaluated in closed form; ``zero`` is zero.
    """
    m, L = basis.m, basis.L
    if name == "zero":
        return np.zeros(m), 0.0
    if name == "mode1":
        c = np.zeros(m)
        c[0] = 1.0
        lam = basis.lam[0]
        return c, math.sqrt(1 + lam + lam**2)
    if name == "bump":
        c = project(basis, lambda x: x * (L - x)).coeffs
        return c, math.sqrt(L**5 / 30 + L**3 / 3 + 4 * L)
    raise ValueError(f"unknown initial value preset {name!r}")


def source_preset(name: str, m: int):
    """Return ``(g, g_prime)`` callables for a named source, or ``(None, None)``.

    ``smooth``: ``g = (1 + t) w_1 + (t^2 / 2) w_3`` (needs m >= 3).
    """
    if name == "zero":
        return None, None
    if name == "smooth":
        if m < 3:
            raise ValueError("the smooth source needs at least 3 modes")

        def g(t):
            out = np.zeros((np.size(t), m))
            out[:, 0] = 1 + t
            out[:, 2] = 0.5 * t**2
            return out

        def gp(t):
            out = np.zeros((np.size(t), m))
            out[:, 0] = 1.0
            out[:, 2] = t
            return out

        return g, gp
    raise ValueError(f"unknown source preset {name!r}")


def oracle_problem(alpha, m: int = 16, L: float = math.pi, kappa: float = 1.0,
                   T: float = 1.0) -> ProblemSpec:
    """F = 0, g = 0, u0 = w_1: mode one decays like E_alpha(-kappa lambda_1 t^alpha)."""
    basis = build_basis(L, m)
    u0, nrm = initial_value("mode1", basis)
    return ProblemSpec(alpha, kappa, basis, T, u0=u0, u0_h2=nrm, name=f"oracle-a{alpha}")


def corpus_problem(alpha, forcing: str, m: int = 16, L: float = math.pi,
                   kappa: float = 1.0, T: float = 1.0) -> ProblemSpec:
    """Corpus member: u0 = x (L - x), smooth source, forcing from a family."""
    basis = build_basis(L, m)
    u0, nrm = initial_value("bump", basis)
    g, gp = source_preset("smooth", m)
    return ProblemSpec(alpha, kappa, basis, T, F=forcing_family(forcing, L), u0=u0,
                       g=g, g_prime=gp, u0_h2=nrm, name=f"{forcing}-a{alpha}")


def corpus(m: int = 16):
    """All nine (alpha, forcing) corpus problems."""
    return [corpus_problem(a, f, m) for a in CORPUS_ALPHAS for f in FORCING_FAMILIES]
