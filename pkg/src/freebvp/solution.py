from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

__all__ = ["SolutionGrid"]


@dataclass
class SolutionGrid:
    """Result of one free-boundary solve.

    ``mesh`` lives on the normalized interval [0, 1]; ``states`` holds one row
    ``(u, u', ..., u^(n-1))`` per mesh node, in x-units.
    """

    mesh: np.ndarray
    states: np.ndarray
    x_eps: float
    eps: float
    missing_ic: dict
    residual_norm: float
    iterations: int
    solver_tag: str
    monotone_ok: Optional[bool] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.x_eps > 0:
            raise ValueError("x_eps must be positive")
        mesh = np.asarray(self.mesh, dtype=float)
        if mesh[0] != 0.0 or mesh[-1] != 1.0 or np.any(np.diff(mesh) <= 0):
            raise ValueError("mesh must increase strictly from 0 to 1")

    @property
    def x(self):
        return self.mesh * self.x_eps

    @property
    def order(self):
        return self.states.shape[1]

    def derivative(self, k=0):
        return self.states[:, k]

    @property
    def terminal(self):
        return self.states[-1]

    def interpolant(self, deriv=0):
        """Piecewise cubic Hermite interpolant of ``d^deriv u`` in x.

        Uses the next derivative as the slope, so ``deriv`` must be at most
        ``order - 2``.
        """
        if not 0 <= deriv <= self.order - 2:
            raise ValueError(f"deriv must lie in [0, {self.order - 2}]")
        return CubicHermiteSpline(
            self.x, self.states[:, deriv], self.states[:, deriv + 1]
        )

    def unknowns(self, unknown_left_indices):
        return np.array([self.missing_ic[k] for k in unknown_left_indices] + [self.x_eps])
