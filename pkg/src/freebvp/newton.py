"""Damped Newton iteration shared by the shooting and box solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import FreeBoundaryCollapse, MaxIterationsExceeded, NewtonStagnation

log = logging.getLogger(__name__)

__all__ = ["NewtonOptions", "NewtonResult", "damped_newton"]

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))

# stagnation: over this many iterations the residual must shrink by this factor
_STALL_WINDOW = 5
_STALL_FACTOR = 0.99


@dataclass(frozen=True)
class NewtonOptions:
    residual_tol: float = 1e-10
    max_iters: int = 50
    fd_step_scale: float = _SQRT_EPS
    max_halvings: int = 30

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iterations: int
    history: list


def _norm(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def damped_newton(fun, jac_solve, x0, opts: NewtonOptions, admissible=None):
    """Solve ``fun(x) = 0`` by Newton steps with step halving.

    ``jac_solve(x, r)`` returns the full Newton correction ``-J(x)^{-1} r``.
    A trial point is accepted only if it is admissible and strictly lowers
    the max-norm of the residual.  ``fun`` may return ``inf`` entries to
    signal a diverged evaluation; those trials are simply halved away.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    norm = _norm(r)
    history = [norm]
    it = 0
    while norm > opts.residual_tol:
        if it >= opts.max_iters:
            raise MaxIterationsExceeded(
                f"no convergence in {opts.max_iters} iterations (residual {norm:.3e})"
            )
        dx = jac_solve(x, r)
        lam = 1.0
        collapsed = 0
        for _ in range(opts.max_halvings + 1):
            xt = x + lam * dx
            if admissible is not None and not admissible(xt):
                collapsed += 1
                lam *= 0.5
                continue
            rt = np.asarray(fun(xt), dtype=float)
            nt = _norm(rt)
            if np.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
        else:
            if collapsed == opts.max_halvings + 1:
                raise FreeBoundaryCollapse(
                    "every damped Newton step drives x_eps <= 0; "
                    "check the initial guess and the sign of eps"
                )
            raise NewtonStagnation(
                f"line search failed after {opts.max_halvings} halvings "
                f"(residual {norm:.3e})"
            )
        x, r, norm = xt, rt, nt
        it += 1
        history.append(norm)
        log.debug("newton it=%d lambda=%.3g residual=%.3e", it, lam, norm)
        if len(history) > _STALL_WINDOW and norm > opts.residual_tol:
            if norm > _STALL_FACTOR * history[-1 - _STALL_WINDOW]:
                raise NewtonStagnation(
                    f"residual fell by less than {1 - _STALL_FACTOR:.0%} over "
                    f"{_STALL_WINDOW} iterations (residual {norm:.3e})"
                )
    return NewtonResult(x, r, norm, it, history)
