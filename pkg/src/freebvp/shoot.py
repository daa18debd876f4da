"""Shooting solver for the normalized free BVP.

Unknowns are the missing initial derivatives (ascending index) followed by
``x_eps``.  The Jacobian columns for the initial derivatives are forward
differences taken on one batched integration that shares its step sequence;
the ``x_eps`` column uses the exact identity d y(x_eps)/d x_eps = F(x_eps, y),
which stays accurate even when eps is tiny and the residual barely moves.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import IntegrationDiverged, SingularSystem, StepLimitExceeded
from .fbf import NormalizedBvp, monotone_diagnostic
from .integrate import IvpOptions, integrate
from .newton import NewtonOptions, damped_newton
from .problems import builtin, reduce_to_first_order
from .solution import SolutionGrid

__all__ = [
    "shooting_residual",
    "solve_shoot",
    "shooting_jacobian",
    "default_guess",
    "SolutionGrid",
    "NewtonOptions",
    "IvpOptions",
]

# Tight enough that the eps-condition is met to 0.1% at eps = 1e-9.
DEFAULT_NEWTON = NewtonOptions(residual_tol=1e-12)

# A full correction may at most double x_eps.  Far-out trial domains cost
# thousands of integration steps each and are rejected by the line search
# anyway; the cap keeps the Newton direction and only shortens it.
_MAX_X_EPS_GROWTH = 1.0

# coarse starting points used when no closed form is available
_COARSE_GUESSES = {
    "engine": (1.0, 10.0),
    "sakiadis": (-0.5, 5.0),
    "pile": (1.0, -0.5, 8.0),
}
_CLOSED_FORM = ("linear_exp", "nonautonomous_exp", "tanh")


def default_guess(spec, eps):
    """Starting unknowns for a cold solve of a built-in problem.

    Closed-form benchmarks start from the exact free-boundary values moved by
    5% (missing derivatives) and 10% (x_eps).
    """
    if spec.name in _CLOSED_FORM:
        _, exact = builtin(spec.name, dict(spec.params))
        missing = [
            1.05 * float(exact.u_fbf_exact(0.0, eps, deriv=k))
            for k in spec.unknown_left_indices
        ]
        return np.array(missing + [1.1 * exact.x_eps_exact(eps)])
    if spec.name in _COARSE_GUESSES:
        return np.array(_COARSE_GUESSES[spec.name], dtype=float)
    raise ValueError(f"no default guess for problem {spec.name!r}; pass one explicitly")


def _trajectory(nb, unknowns, ivp):
    unknowns = np.asarray(unknowns, dtype=float)
    if not unknowns[-1] > 0:
        raise ValueError("x_eps component of the unknowns must be positive")
    return integrate(nb.eval_aug, nb.initial_state(unknowns), (0.0, 1.0), ivp)


def shooting_residual(nb: NormalizedBvp, unknowns, ivp=None, full_output=False):
    """Terminal-condition residuals after integrating from ``unknowns``.

    A diverged integration yields a vector of ``inf``; with ``full_output``
    the return is ``(residual, info)`` where ``info`` carries ``diverged``
    and, when available, the ``trajectory``.
    """
    ivp = ivp or IvpOptions()
    k = len(nb.free.right_conditions)
    try:
        traj = _trajectory(nb, unknowns, ivp)
    except (IntegrationDiverged, StepLimitExceeded) as exc:
        res = np.full(k, np.inf)
        info = {"diverged": True, "trajectory": None, "reason": str(exc)}
    else:
        res = nb.right_residual(traj.final)
        info = {"diverged": False, "trajectory": traj}
    return (res, info) if full_output else res


def _perturbed_batch(nb, x, fd_scale):
    m = len(nb.free.unknown_left_indices)
    steps = fd_scale * np.maximum(1.0, np.abs(x[:m]))
    batch = np.repeat(x[:, None], m + 1, axis=1)
    batch[np.arange(m), np.arange(1, m + 1)] += steps
    return batch, steps


def _jacobian_from_batch(nb, x, Y1, steps, fd_scale):
    n = nb.order
    m = len(steps)
    R = nb.right_residual(Y1)
    J = np.empty((R.shape[0], m + 1))
    J[:, :m] = (R[:, 1:] - R[:, :1]) / steps

    # x_eps column: d/dx_eps rho(y(x_eps), x_eps) = rho_y . F + rho_x
    y, x_eps = Y1[:n, 0], x[-1]
    F = reduce_to_first_order(nb.free.base).eval(x_eps, y)
    rho0 = nb.free.right_residual(y, x_eps)
    d = fd_scale * max(1.0, np.max(np.abs(y))) / max(np.max(np.abs(F)), 1e-300)
    dx = fd_scale * max(1.0, x_eps)
    J[:, m] = (nb.free.right_residual(y + d * F, x_eps) - rho0) / d
    J[:, m] += (nb.free.right_residual(y, x_eps + dx) - rho0) / dx
    return J


def shooting_jacobian(nb: NormalizedBvp, unknowns, ivp=None, fd_step_scale=None):
    """Return ``(residual, J)`` from one batched integration."""
    ivp = ivp or IvpOptions()
    fd = NewtonOptions().fd_step_scale if fd_step_scale is None else fd_step_scale
    x = np.asarray(unknowns, dtype=float)
    batch, steps = _perturbed_batch(nb, x, fd)
    Y1 = integrate(nb.eval_aug, nb.initial_state(batch), (0.0, 1.0), ivp).final
    return nb.right_residual(Y1[:, 0]), _jacobian_from_batch(nb, x, Y1, steps, fd)


def solve_shoot(
    nb: NormalizedBvp,
    guess,
    opts: NewtonOptions | None = None,
    ivp: IvpOptions | None = None,
) -> SolutionGrid:
    """Shoot on (missing initial derivatives, x_eps) with damped Newton."""
    opts = opts or DEFAULT_NEWTON
    ivp = ivp or IvpOptions()
    guess = np.asarray(guess, dtype=float)
    missing = nb.free.unknown_left_indices
    if guess.shape != (len(missing) + 1,):
        raise ValueError(
            f"guess must have {len(missing) + 1} entries (missing ICs then x_eps)"
        )
    if not guess[-1] > 0:
        raise ValueError("guessed x_eps must be positive")

    # Each residual evaluation integrates the forward-difference columns
    # alongside the base trajectory, so an accepted full step already
    # carries the Jacobian for the next iteration.
    cache = {}

    def fun(x):
        batch, steps = _perturbed_batch(nb, x, opts.fd_step_scale)
        try:
            traj = integrate(nb.eval_aug, nb.initial_state(batch), (0.0, 1.0), ivp)
        except (IntegrationDiverged, StepLimitExceeded):
            return np.full(len(nb.free.right_conditions), np.inf)
        cache.clear()
        cache[x.tobytes()] = (traj, steps)
        return nb.right_residual(traj.final[:, 0])

    def jac_solve(x, r):
        traj, steps = cache[x.tobytes()]
        J = _jacobian_from_batch(nb, x, traj.final, steps, opts.fd_step_scale)
        try:
            with warnings.catch_warnings():
                # exact zero pivots are reported below with their index
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(J, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularSystem(f"shooting Jacobian unusable: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0.0):
            pivot = int(np.flatnonzero(np.diag(lu[0]) == 0.0)[0])
            raise SingularSystem(f"singular shooting Jacobian at pivot {pivot}", pivot)
        dx = -scipy.linalg.lu_solve(lu, r)
        growth = dx[-1] / x[-1]
        if growth > _MAX_X_EPS_GROWTH:
            dx *= _MAX_X_EPS_GROWTH / growth
        return dx

    result = damped_newton(fun, jac_solve, guess, opts, admissible=lambda x: x[-1] > 0)
    traj, _ = cache[result.x.tobytes()]
    n = nb.order
    states = traj.y[:, :n, 0]
    return SolutionGrid(
        mesh=traj.t,
        states=states,
        x_eps=float(result.x[-1]),
        eps=nb.eps,
        missing_ic={k: float(v) for k, v in zip(missing, result.x[:-1])},
        residual_norm=result.residual_norm,
        iterations=result.iterations,
        solver_tag="shoot",
        monotone_ok=monotone_diagnostic(nb.free, states),
        diagnostics={"history": result.history, "ivp_steps": len(traj.t) - 1},
    )
