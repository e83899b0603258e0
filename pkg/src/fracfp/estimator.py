"""scikit-learn style front end for the solvers."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_scalar

from .frac_core import TimeMesh
from .solver import ProblemSpec, solve

__all__ = ["FractionalFokkerPlanck", "check_problem"]


def check_problem(problem) -> ProblemSpec:
    """Validate that ``problem`` is a :class:`ProblemSpec`."""
    if not isinstance(problem, ProblemSpec):
        raise TypeError(f"expected a ProblemSpec, got {type(problem).__name__}")
    return problem


class FractionalFokkerPlanck(BaseEstimator):
    """Solve a Galerkin problem on a graded mesh and evaluate the result.

    Parameters
    ----------
    n_steps : int
        Number of time intervals N.
    grading : float or None
        Mesh exponent r; ``None`` means ``2 / alpha``.
    scheme : {"vie", "direct"}
    alpha, kappa : float or None
        Override the problem's values when given.

    Attributes
    ----------
    trajectory_ : Trajectory
    mesh_ : TimeMesh
    problem_ : ProblemSpec
    """

    def __init__(self, n_steps=2048, grading=None, scheme="vie", alpha=None, kappa=None):
        self.n_steps = n_steps
        self.grading = grading
        self.scheme = scheme
        self.alpha = alpha
        self.kappa = kappa

    def _validate_params(self):
        check_scalar(self.n_steps, "n_steps", numbers.Integral, min_val=1)
        if self.grading is not None:
            check_scalar(self.grading, "grading", numbers.Real, min_val=1.0)
        if self.scheme not in ("vie", "direct"):
            raise ValueError(f"scheme must be 'vie' or 'direct', got {self.scheme!r}")
        if self.alpha is not None:
            check_scalar(self.alpha, "alpha", numbers.Real, min_val=0.0, max_val=1.0,
                         include_boundaries="neither")
        if self.kappa is not None:
            check_scalar(self.kappa, "kappa", numbers.Real, min_val=0.0,
                         include_boundaries="neither")

    def fit(self, problem, y=None):
        self._validate_params()
        problem = check_problem(problem)
        changes = {}
        if self.alpha is not None:
            changes["alpha"] = float(self.alpha)
        if self.kappa is not None:
            changes["kappa"] = float(self.kappa)
        if changes:
            problem = problem.with_data(**changes)
        r = 2.0 / problem.a if self.grading is None else float(self.grading)
        self.mesh_ = TimeMesh(problem.T, int(self.n_steps), r)
        self.problem_ = problem
        self.trajectory_ = solve(problem, self.mesh_, self.scheme)
        return self

    def predict(self, t):
        """Galerkin coefficients at times ``t``, shape ``(len(t), m)``;
        linear interpolation between mesh nodes."""
        check_is_fitted(self, "trajectory_")
        t = check_array(np.atleast_1d(np.asarray(t, dtype=float)), ensure_2d=False)
        if np.any(t < 0) or np.any(t > self.mesh_.T * (1 + 1e-12)):
            raise ValueError(f"times must lie in [0, {self.mesh_.T}]")
        nodes = self.mesh_.nodes
        U = self.trajectory_.coeffs
        return np.column_stack([np.interp(t, nodes, U[:, k]) for k in range(U.shape[1])])

    def evaluate(self, t, x):
        """Field values ``u(t_i, x_j)``, shape ``(len(t), len(x))``."""
        coeffs = self.predict(t)
        x = check_array(np.atleast_1d(np.asarray(x, dtype=float)), ensure_2d=False)
        return np.vstack([self.problem_.basis.reconstruct(c, x) for c in coeffs])
