"""scikit-learn style wrapper around a single free boundary solve.

``fit`` solves the problem (the data arguments are ignored, the problem
is the model), ``predict`` evaluates the computed ``u`` at given ``x``.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .fbf import formulate, normalize
from .kellerbox import DEFAULT_NEWTON as BOX_NEWTON
from .kellerbox import BoxMesh, solve_box
from .problems import builtin
from .shoot import DEFAULT_NEWTON as SHOOT_NEWTON
from .shoot import default_guess, solve_shoot
from .sweep import default_solver

__all__ = ["FreeBoundarySolver"]


class FreeBoundarySolver(BaseEstimator):
    """Solve a built-in problem on ``[0, x_eps]`` and interpolate the result.

    Parameters
    ----------
    problem : str
        Built-in problem name.
    params : dict, optional
        Problem parameters; defaults apply where the problem has them.
    eps : float
        Value imposed on the controlled derivative at the free boundary.
    solver : {"shoot", "box"}, optional
        Defaults to the problem's usual solver.
    grid : int
        Number of box intervals.
    guess : array-like, optional
        Starting unknowns for shooting (missing derivatives, then x_eps).
    newton_tol, max_iters : optional
        Overrides for the Newton options.

    Attributes
    ----------
    x_eps_ : float
    missing_ic_ : dict
    grid_ : SolutionGrid
    n_iter_ : int
    """

    def __init__(
        self,
        problem="linear_exp",
        params=None,
        eps=1e-3,
        solver=None,
        grid=1000,
        guess=None,
        newton_tol=None,
        max_iters=None,
    ):
        self.problem = problem
        self.params = params
        self.eps = eps
        self.solver = solver
        self.grid = grid
        self.guess = guess
        self.newton_tol = newton_tol
        self.max_iters = max_iters

    def fit(self, X=None, y=None):
        spec, _ = builtin(self.problem, self.params)
        solver = self.solver or default_solver(spec)
        if solver not in ("shoot", "box"):
            raise ValueError(f"solver must be 'shoot' or 'box', got {solver!r}")
        opts = SHOOT_NEWTON if solver == "shoot" else BOX_NEWTON
        overrides = {}
        if self.newton_tol is not None:
            overrides["residual_tol"] = self.newton_tol
        if self.max_iters is not None:
            overrides["max_iters"] = self.max_iters
        opts = dataclasses.replace(opts, **overrides)
        nb = normalize(formulate(spec, self.eps))
        if solver == "shoot":
            guess = self.guess if self.guess is not None else default_guess(spec, self.eps)
            grid = solve_shoot(nb, guess, opts)
        else:
            grid = solve_box(nb, BoxMesh(self.grid + 1), None, opts)
        self.grid_ = grid
        self.x_eps_ = grid.x_eps
        self.missing_ic_ = dict(grid.missing_ic)
        self.n_iter_ = grid.iterations
        self._interp = grid.interpolant(0)
        return self

    def predict(self, X):
        """``u`` at the points in ``X`` (shape ``(n,)`` or ``(n, 1)``)."""
        check_is_fitted(self, "grid_")
        X = np.asarray(X, dtype=float)
        flat = X.ndim == 1
        X = check_array(X.reshape(-1, 1) if flat else X)
        if X.shape[1] != 1:
            raise ValueError("X must hold one coordinate per sample")
        x = X[:, 0]
        if np.any(x < 0) or np.any(x > self.x_eps_):
            raise ValueError(f"x must lie in [0, x_eps_] = [0, {self.x_eps_!r}]")
        return self._interp(x)
