"""Explicit one-step IVP integrators for the shooting solver.

Two modes: classical RK4 on a uniform grid, and the Dormand-Prince 5(4)
embedded pair with a PI step-size controller.  States may carry a trailing
batch axis, shape ``(dim, m)``; a batch shares one step sequence, which keeps
finite-difference Jacobians of the shooting map free of step-selection noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationDiverged, StepLimitExceeded

__all__ = ["IvpOptions", "Trajectory", "integrate"]

_OVERFLOW = 1e150


@dataclass(frozen=True)
class IvpOptions:
    mode: str = "adaptive"
    step_count: int = 200
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_steps: int = 200_000

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"mode must be 'adaptive' or 'fixed', got {self.mode!r}")
        if self.step_count < 2:
            raise ValueError("step_count must be at least 2")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < self.step_count:
            raise ValueError("max_steps must be >= step_count")


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim) or (len(t), dim, m)
    rejected: int = 0

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        return zip(self.t, self.y)

    @property
    def final(self):
        return self.y[-1]


def integrate(sys, Y0, span, opts: IvpOptions | None = None) -> Trajectory:
    """Integrate ``dY/dt = sys(t, Y)`` from ``span[0]`` to ``span[1]``.

    Raises :class:`IntegrationDiverged` when the state overflows and
    :class:`StepLimitExceeded` when ``opts.max_steps`` is exhausted.
    """
    opts = opts or IvpOptions()
    t0, t1 = float(span[0]), float(span[1])
    if not t1 > t0:
        raise ValueError("span must satisfy t1 > t0")
    Y0 = np.array(Y0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if opts.mode == "fixed":
            return _rk4(sys, Y0, t0, t1, opts.step_count)
        return _dopri5(sys, Y0, t0, t1, opts)


def _blown(y):
    return not np.all(np.isfinite(y)) or np.max(np.abs(y)) > _OVERFLOW


def _rk4(f, y, t0, t1, steps):
    h = (t1 - t0) / steps
    ts = t0 + h * np.arange(steps + 1)
    ts[-1] = t1
    out = np.empty((steps + 1,) + y.shape)
    out[0] = y
    for i in range(steps):
        t = ts[i]
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _blown(y):
            raise IntegrationDiverged(ts[i + 1])
        out[i + 1] = y
    return Trajectory(ts, out)


# Dormand & Prince (1980) tableau; row s of _A builds the input of stage s.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
# 5th-order minus embedded 4th-order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_SAFETY = 0.9
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_MIN_FAC, _MAX_FAC = 0.2, 10.0


def _initial_step(f, t0, y0, f0, span, rtol, atol):
    sc = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    if not np.isfinite(d2):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _dopri5(f, y0, t0, t1, opts):
    rtol, atol = opts.rel_tol, opts.abs_tol
    shape = y0.shape
    span = t1 - t0

    # stages are stacked in K and combined with one matmul each
    if len(shape) == 1:
        g = f
    else:
        def g(t, y):
            return f(t, y.reshape(shape)).ravel()

    y = y0.ravel()
    K = np.empty((7, y.size))
    K[0] = g(t0, y)
    if _blown(K[0]):
        raise IntegrationDiverged(t0)
    h = _initial_step(g, t0, y, K[0], span, rtol, atol)
    h_min = 16 * np.finfo(float).eps * max(1.0, abs(t1))
    t = t0
    abs_y = np.abs(y)
    ts, ys = [t0], [y0]
    err_old = 1e-4
    rejected = 0
    just_rejected = False
    steps = 0
    while t < t1:
        if steps >= opts.max_steps:
            raise StepLimitExceeded(f"max_steps={opts.max_steps} reached at t={t:.6g}")
        last = t + h >= t1 or t1 - (t + h) < h_min
        if last:
            h = t1 - t
        hA = h * _A
        for s in range(1, 6):
            K[s] = g(t + _C[s] * h, y + hA[s, :s] @ K[:s])
        y_new = y + hA[6, :6] @ K[:6]
        K[6] = g(t + h, y_new)
        err_vec = (h * _E) @ K
        abs_new = np.abs(y_new)
        sc = atol + rtol * np.maximum(abs_y, abs_new)
        err = (np.abs(err_vec) / sc).max()
        steps += 1
        # nan/inf in y_new propagate into err
        if not err < np.inf or abs_new.max() > _OVERFLOW:
            # treat as a rejected step; persistent blow-up shrinks h to nothing
            rejected += 1
            just_rejected = True
            h *= _MIN_FAC
            if h < h_min:
                raise IntegrationDiverged(t)
            continue
        if err <= 1.0:
            err = max(err, 1e-10)
            fac = _SAFETY * err ** (-_ALPHA) * err_old**_BETA
            fac = min(_MAX_FAC, max(_MIN_FAC, fac))
            if just_rejected:
                fac = min(fac, 1.0)
            err_old = err
            t = t1 if last else t + h
            y = y_new
            abs_y = abs_new
            K[0] = K[6]
            ts.append(t)
            ys.append(y.reshape(shape))
            h *= fac
            just_rejected = False
        else:
            rejected += 1
            just_rejected = True
            h *= max(_MIN_FAC, _SAFETY * err ** (-_ALPHA))
            if h < h_min:
                raise IntegrationDiverged(t)
    return Trajectory(np.array(ts), np.array(ys), rejected)
