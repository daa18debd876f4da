"""Semi-infinite BVP model and the registry of built-in problems.

A problem is a scalar ODE of order ``n``

    u^(n) + f(x, u, u', ..., u^(n-1)) = 0,     x in [0, inf)

with conditions on some derivatives at ``x = 0`` and on others at infinity.
``rhs`` returns ``f`` (note the sign) and must accept the derivative stack
either as a length-``n`` vector or as an ``(n, m)`` array of ``m`` states, so
the solvers can evaluate many points in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ProblemSpec",
    "FirstOrderSystem",
    "ClosedFormSolution",
    "reduce_to_first_order",
    "builtin",
    "BUILTIN_NAMES",
    "tanh_fbf_published",
    "tanh_x_eps_published",
]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    order: int
    rhs: Callable
    left_conditions: tuple
    asymptotic_conditions: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.order
        if int(n) != n or n < 2:
            raise ValueError(f"order must be an integer >= 2, got {n!r}")
        left = tuple((int(k), float(v)) for k, v in self.left_conditions)
        right = tuple((int(k), float(v)) for k, v in self.asymptotic_conditions)
        for k, _ in left + right:
            if not 0 <= k < n:
                raise ValueError(f"derivative index {k} out of range for order {n}")
        left_idx = [k for k, _ in left]
        if len(set(left_idx)) != len(left_idx):
            raise ValueError("duplicate derivative index in left_conditions")
        if not right:
            raise ValueError("at least one asymptotic condition is required")
        if len(left) + len(right) != n:
            raise ValueError(
                f"{len(left)} left + {len(right)} asymptotic conditions "
                f"do not match order {n}"
            )
        object.__setattr__(self, "left_conditions", left)
        object.__setattr__(self, "asymptotic_conditions", right)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def unknown_left_indices(self):
        known = {k for k, _ in self.left_conditions}
        return tuple(k for k in range(self.order) if k not in known)


@dataclass(frozen=True)
class FirstOrderSystem:
    """Companion-form system y' = F(x, y), y = (u, u', ..., u^(n-1))."""

    dim: int
    problem: ProblemSpec

    def eval(self, x, y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        out[:-1] = y[1:]
        out[-1] = -self.problem.rhs(x, y)
        return out

    __call__ = eval


def reduce_to_first_order(spec: ProblemSpec) -> FirstOrderSystem:
    return FirstOrderSystem(dim=spec.order, problem=spec)


@dataclass(frozen=True)
class ClosedFormSolution:
    """Exact solutions of a benchmark and of its free boundary formulation.

    ``u_exact(x, deriv=0)`` and ``u_fbf_exact(x, eps, deriv=0)`` return the
    requested derivative; ``internals(eps)`` exposes named constants.
    """

    u_exact: Callable
    u_fbf_exact: Optional[Callable] = None
    x_eps_exact: Optional[Callable] = None
    internals: Optional[Callable] = None


# -- closed forms -----------------------------------------------------------

def _exp_decay(x, P, deriv):
    # d^k/dx^k of (1 - exp(-P x))
    x = np.asarray(x, dtype=float)
    if deriv == 0:
        return -np.expm1(-P * x)
    return (-1.0) ** (deriv + 1) * P**deriv * np.exp(-P * x)


def _linear_closed_form(P):
    def u_exact(x, deriv=0):
        return _exp_decay(x, P, deriv)

    def u_fbf_exact(x, eps, deriv=0):
        return (P + eps) / P * _exp_decay(x, P, deriv)

    def x_eps_exact(eps):
        return -math.log(eps / (P + eps)) / P

    return ClosedFormSolution(u_exact, u_fbf_exact, x_eps_exact)


def _nonautonomous_closed_form(P):
    # u'' = -P^2 exp(-P x) integrates to u = 1 - exp(-P x) + c x on the free
    # domain; u(x_eps) = 1 and u'(x_eps) = eps give c = exp(-P x_eps)/x_eps
    # with x_eps the root of exp(-P x) (P + 1/x) = eps.
    def x_eps_exact(eps):
        if eps <= 0:
            raise ValueError("eps must be positive")

        def g(x):
            return -P * x + math.log(P + 1.0 / x) - math.log(eps)

        lo, hi = 1.0 / P, 1.0 / P
        while g(lo) <= 0:
            lo *= 0.5
        while g(hi) >= 0:
            hi *= 2.0
        return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def slope(eps):
        xe = x_eps_exact(eps)
        return math.exp(-P * xe) / xe

    def u_exact(x, deriv=0):
        return _exp_decay(x, P, deriv)

    def u_fbf_exact(x, eps, deriv=0):
        c = slope(eps)
        x = np.asarray(x, dtype=float)
        base = _exp_decay(x, P, deriv)
        if deriv == 0:
            return base + c * x
        if deriv == 1:
            return base + c
        return base

    return ClosedFormSolution(
        u_exact, u_fbf_exact, x_eps_exact, internals=lambda eps: {"c": slope(eps)}
    )


def _tanh_derivs(z, deriv):
    t = np.tanh(z)
    s2 = 1.0 - t * t
    if deriv == 0:
        return t
    if deriv == 1:
        return s2
    if deriv == 2:
        return -2.0 * t * s2
    if deriv == 3:
        return -2.0 * s2 * (1.0 - 3.0 * t * t)
    raise ValueError("derivatives above 3 are not tabulated")


def _tanh_C(eps, P):
    return (eps - math.sqrt(eps * eps + 4.0 * P * P)) / (2.0 * P)


def tanh_fbf_published(x, eps, P):
    """The free-boundary tanh profile in the form -tanh(Px)/C.

    Kept for comparison only: it meets both terminal conditions but does not
    satisfy u'' + 2Puu' = 0 unless eps = 0.
    """
    return -np.tanh(P * np.asarray(x, dtype=float)) / _tanh_C(eps, P)


def tanh_x_eps_published(eps, P):
    C = _tanh_C(eps, P)
    return math.log((1.0 - C) / (1.0 + C)) / (2.0 * P)


def _tanh_closed_form(P):
    # First integral u' + P u^2 = P + eps gives u = b tanh(b P x),
    # b = sqrt(1 + eps/P); b tanh(b P x_eps) = 1 fixes x_eps.
    def amplitude(eps):
        return math.sqrt(1.0 + eps / P)

    def u_exact(x, deriv=0):
        return P**deriv * _tanh_derivs(P * np.asarray(x, dtype=float), deriv)

    def u_fbf_exact(x, eps, deriv=0):
        b = amplitude(eps)
        k = b * P
        return b * k**deriv * _tanh_derivs(k * np.asarray(x, dtype=float), deriv)

    def x_eps_exact(eps):
        b = amplitude(eps)
        return math.atanh(1.0 / b) / (b * P)

    def internals(eps):
        return {"b": amplitude(eps), "C": _tanh_C(eps, P)}

    return ClosedFormSolution(u_exact, u_fbf_exact, x_eps_exact, internals)


# -- registry ---------------------------------------------------------------

def _require(params, names, positive=()):
    missing = [p for p in names if p not in params]
    if missing:
        raise ValueError(f"missing parameter(s): {', '.join(missing)}")
    for p in positive:
        if not params[p] > 0:
            raise ValueError(f"parameter {p} must be positive, got {params[p]!r}")


def _linear_exp(params):
    _require(params, ["P"], positive=["P"])
    P = float(params["P"])

    def rhs(x, y):
        return P * y[1]

    spec = ProblemSpec("linear_exp", 2, rhs, [(0, 0.0)], [(0, 1.0)], {"P": P})
    return spec, _linear_closed_form(P)


def _nonautonomous_exp(params):
    _require(params, ["P"], positive=["P"])
    P = float(params["P"])

    def rhs(x, y):
        return P * P * np.exp(-P * x) + 0.0 * y[0]

    spec = ProblemSpec("nonautonomous_exp", 2, rhs, [(0, 0.0)], [(0, 1.0)], {"P": P})
    return spec, _nonautonomous_closed_form(P)


def _tanh(params):
    _require(params, ["P"], positive=["P"])
    P = float(params["P"])

    def rhs(x, y):
        return 2.0 * P * y[0] * y[1]

    spec = ProblemSpec("tanh", 2, rhs, [(0, 0.0)], [(0, 1.0)], {"P": P})
    return spec, _tanh_closed_form(P)


def _engine(params):
    _require(params, ["P1", "P2"])
    P1, P2 = float(params["P1"]), float(params["P2"])
    if P1 < 0:
        raise ValueError("curvature parameter P1 must be non-negative")

    def rhs(x, y):
        return (0.5 * y[0] + P1) * y[2] / (1.0 + P1 * x)

    spec = ProblemSpec(
        "engine", 3, rhs, [(0, P2), (1, 0.0)], [(1, 1.0)], {"P1": P1, "P2": P2}
    )
    return spec, None


def _sakiadis(params):
    def rhs(x, y):
        return 0.5 * y[0] * y[2]

    spec = ProblemSpec("sakiadis", 3, rhs, [(0, 0.0), (1, 1.0)], [(1, 0.0)], {})
    return spec, None


def _pile(params):
    _require(params, ["P1", "P2", "P3"], positive=["P1", "P2"])
    P1, P2, P3 = (float(params[p]) for p in ("P1", "P2", "P3"))

    def rhs(x, y):
        return -P1 * np.expm1(-P2 * y[0])

    spec = ProblemSpec(
        "pile",
        4,
        rhs,
        [(2, 0.0), (3, P3)],
        [(0, 0.0), (1, 0.0)],
        {"P1": P1, "P2": P2, "P3": P3},
    )
    return spec, None


# name -> (factory, defaults, accepted parameter names)
_REGISTRY = {
    "linear_exp": (_linear_exp, {}, ("P",)),
    "nonautonomous_exp": (_nonautonomous_exp, {}, ("P",)),
    "tanh": (_tanh, {}, ("P",)),
    "engine": (_engine, {"P1": 2.0, "P2": 2.0}, ("P1", "P2")),
    "sakiadis": (_sakiadis, {}, ()),
    "pile": (_pile, {"P1": 1.0, "P2": 0.5, "P3": 0.5}, ("P1", "P2", "P3")),
}

BUILTIN_NAMES = tuple(_REGISTRY)


def _unknown(name):
    return f"unknown problem {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"


def parameter_names(name):
    if name not in _REGISTRY:
        raise ValueError(_unknown(name))
    return _REGISTRY[name][2]


def builtin(name: str, params: Optional[Mapping[str, float]] = None, **kwargs):
    """Return ``(spec, closed_form)`` for a named problem.

    Engine and pile parameters default to the published values; ``closed_form``
    is ``None`` for problems without an exact solution.

    >>> spec, exact = builtin("linear_exp", P=1.0)
    >>> float(exact.u_exact(0.0, deriv=1))
    1.0
    """
    if name not in _REGISTRY:
        raise ValueError(_unknown(name))
    factory, defaults, accepted = _REGISTRY[name]
    merged = dict(defaults)
    merged.update(params or {})
    merged.update(kwargs)
    unexpected = set(merged) - set(accepted)
    if unexpected:
        raise ValueError(f"{name} takes no parameter(s) {sorted(unexpected)}")
    return factory(merged)


def sample_states(closed, x, order, eps=None):
    """Stack u, u', ..., u^(order-1) of a closed form at points ``x``."""
    if eps is None:
        return np.stack([closed.u_exact(x, deriv=k) for k in range(order)])
    return np.stack([closed.u_fbf_exact(x, eps, deriv=k) for k in range(order)])
