"""Free boundary formulation of a semi-infinite BVP.

The condition at infinity is moved to an unknown abscissa ``x_eps`` and one
more condition, the next derivative equal to ``eps``, closes the system.  The
free domain ``[0, x_eps]`` is then mapped onto ``[0, 1]`` by ``x = t * x_eps``
with ``x_eps`` carried as an extra constant state component.  Derivatives in
the state stay in x-units, so the boundary residuals read exactly as the
formulation writes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import ProblemSpec

__all__ = [
    "FreeBvp",
    "NormalizedBvp",
    "formulate",
    "normalize",
    "denormalize",
    "monotone_diagnostic",
]


@dataclass(frozen=True)
class PinnedValue:
    """Residual ``y[index] - value`` at the free boundary."""

    index: int
    value: float

    def __call__(self, y, x_eps, eps):
        return y[self.index] - self.value

    @property
    def label(self):
        return f"d{self.index}u(x_eps) - {self.value:g}"


@dataclass(frozen=True)
class PinnedEps:
    """Residual ``y[index] - eps``."""

    index: int

    def __call__(self, y, x_eps, eps):
        return y[self.index] - eps

    @property
    def label(self):
        return f"d{self.index}u(x_eps) - eps"


@dataclass(frozen=True)
class AbsSumEps:
    """Residual ``sum |y[i]| - eps`` over the trailing derivatives.

    Used when several conditions sit at infinity (the pile problem).  The
    kinks of ``|.|`` are left unsmoothed.
    """

    indices: tuple

    def __call__(self, y, x_eps, eps):
        total = 0.0
        for i in self.indices:
            total = total + np.abs(y[i])
        return total - eps

    @property
    def label(self):
        return " + ".join(f"|d{i}u(x_eps)|" for i in self.indices) + " - eps"


@dataclass(frozen=True)
class FreeBvp:
    base: ProblemSpec
    eps: float
    right_conditions: tuple
    left_known: tuple
    unknown_left_indices: tuple
    monitored_index: Optional[int] = None

    @property
    def order(self):
        return self.base.order

    def right_residual(self, y_right, x_eps):
        return np.array([rho(y_right, x_eps, self.eps) for rho in self.right_conditions])


def formulate(spec: ProblemSpec, eps: float) -> FreeBvp:
    """Build the free boundary restatement of ``spec`` for a given ``eps``.

    One asymptotic condition ``d^r u(inf) = u_inf`` becomes the pair
    ``d^r u(x_eps) = u_inf``, ``d^(r+1) u(x_eps) = eps`` (signed eps).  Several
    conditions are all imposed at ``x_eps`` and closed by requiring the sum of
    the absolute values of the remaining higher derivatives to equal ``eps``.
    """
    eps = float(eps)
    if eps == 0.0 or not np.isfinite(eps):
        raise ValueError("eps must be finite and nonzero (eps = 0 puts x_eps at infinity)")
    n = spec.order
    asym = spec.asymptotic_conditions
    r_max = max(k for k, _ in asym)
    if r_max >= n - 1:
        raise ValueError(
            f"asymptotic condition on derivative {r_max} leaves no higher "
            f"derivative for the eps condition (order {n})"
        )
    right = [PinnedValue(k, v) for k, v in asym]
    if len(asym) == 1:
        right.append(PinnedEps(r_max + 1))
        monitored = r_max + 1
    else:
        if eps < 0:
            raise ValueError("eps must be positive when it bounds a sum of absolute values")
        right.append(AbsSumEps(tuple(range(r_max + 1, n))))
        monitored = None
    fb = FreeBvp(
        base=spec,
        eps=eps,
        right_conditions=tuple(right),
        left_known=spec.left_conditions,
        unknown_left_indices=spec.unknown_left_indices,
        monitored_index=monitored,
    )
    assert len(fb.right_conditions) == len(fb.unknown_left_indices) + 1
    return fb


@dataclass(frozen=True)
class NormalizedBvp:
    """The free BVP on ``t in [0, 1]`` with state ``Y = (u, ..., u^(n-1), x_eps)``.

    Arrays of shape ``(n + 1,)`` or ``(n + 1, m)`` are accepted everywhere.
    """

    free: FreeBvp

    @property
    def order(self):
        return self.free.base.order

    @property
    def dim_aug(self):
        return self.order + 1

    @property
    def eps(self):
        return self.free.eps

    def eval_aug(self, t, Y):
        n = self.free.base.order
        x_eps = Y[n]
        out = np.empty_like(Y)
        out[: n - 1] = Y[1:n]
        out[n - 1] = -self.free.base.rhs(t * x_eps, Y[:n])
        out[:n] *= x_eps
        out[n] = 0.0
        return out

    __call__ = eval_aug

    def initial_state(self, unknowns):
        """Assemble ``Y(0)`` from the unknown vector (missing ICs, then x_eps)."""
        unknowns = np.asarray(unknowns, dtype=float)
        n = self.order
        Y0 = np.empty((n + 1,) + unknowns.shape[1:])
        for k, v in self.free.left_known:
            Y0[k] = v
        for j, k in enumerate(self.free.unknown_left_indices):
            Y0[k] = unknowns[j]
        Y0[n] = unknowns[-1]
        return Y0

    def unknowns_from_state(self, Y0):
        idx = list(self.free.unknown_left_indices) + [self.order]
        return np.asarray(Y0, dtype=float)[idx]

    def left_residual(self, Y0):
        return np.array([Y0[k] - v for k, v in self.free.left_known])

    def right_residual(self, Y1):
        n = self.order
        return np.array([rho(Y1[:n], Y1[n], self.eps) for rho in self.free.right_conditions])


def normalize(fb: FreeBvp) -> NormalizedBvp:
    return NormalizedBvp(fb)


def denormalize(nb: NormalizedBvp) -> FreeBvp:
    return nb.free


def monotone_diagnostic(fb: FreeBvp, states, atol=1e-12) -> Optional[bool]:
    """Check that the eps-controlled derivative approaches its limit monotonically.

    ``states`` has one row per mesh node.  Returns ``None`` when no single
    derivative is controlled by eps (several conditions at infinity).
    Increments below ``atol`` are treated as flat.
    """
    k = fb.monitored_index
    if k is None:
        return None
    d = np.diff(np.asarray(states)[:, k])
    d = d[np.abs(d) > atol]
    return bool(np.all(d > 0) or np.all(d < 0))


def physical_mesh(mesh, x_eps):
    return np.asarray(mesh) * x_eps
