import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from freebvp.problems import (
    BUILTIN_NAMES,
    ProblemSpec,
    builtin,
    reduce_to_first_order,
    sample_states,
    tanh_fbf_published,
)

from oracles import linear_x_eps, nonautonomous_x_eps, tanh_x_eps

CLOSED = ("linear_exp", "nonautonomous_exp", "tanh")

x, P, eps = sp.symbols("x P epsilon", positive=True)


def _symbolic(name):
    """Independent symbolic forms: (ode residual in u, u, u_fbf)."""
    if name == "linear_exp":
        ode = lambda u: sp.diff(u, x, 2) + P * sp.diff(u, x)
        u = 1 - sp.exp(-P * x)
        return ode, u, (P + eps) / P * u
    if name == "tanh":
        ode = lambda u: sp.diff(u, x, 2) + 2 * P * u * sp.diff(u, x)
        b = sp.sqrt(1 + eps / P)
        return ode, sp.tanh(P * x), b * sp.tanh(b * P * x)
    raise KeyError(name)


# -- reduction ------------------------------------------------------------

def test_reduction_linear_exp():
    spec, _ = builtin("linear_exp", P=1.0)
    sys = reduce_to_first_order(spec)
    assert sys.dim == 2
    np.testing.assert_allclose(sys.eval(0.3, [0.2, 0.7]), [0.7, -0.7])


def test_reduction_tanh_at_zero_state():
    spec, _ = builtin("tanh", P=1.0)
    np.testing.assert_array_equal(reduce_to_first_order(spec).eval(1.0, [0.0, 1.0]), [1.0, 0.0])


def test_reduction_pile():
    spec, _ = builtin("pile", P1=1.0, P2=0.5, P3=0.5)
    out = reduce_to_first_order(spec).eval(2.0, [0.0, 0.0, 0.0, 0.5])
    np.testing.assert_array_equal(out, [0.0, 0.0, 0.5, 0.0])


def test_reduction_accepts_batched_states():
    spec, _ = builtin("engine")
    y = np.random.default_rng(0).normal(size=(3, 7))
    sys = reduce_to_first_order(spec)
    batched = sys.eval(0.5, y)
    for j in range(7):
        np.testing.assert_allclose(batched[:, j], sys.eval(0.5, y[:, j]))


@pytest.mark.parametrize("name", CLOSED)
def test_closed_form_has_zero_defect_in_reduced_system(name):
    spec, closed = builtin(name, P=1.0)
    sys = reduce_to_first_order(spec)
    xs = np.linspace(0.0, 10.0, 100)
    Y = sample_states(closed, xs, spec.order)
    dY = np.stack([closed.u_exact(xs, deriv=k + 1) for k in range(spec.order)])
    assert np.max(np.abs(sys.eval(xs, Y) - dY)) <= 1e-12


# -- closed forms -----------------------------------------------------------

@pytest.mark.parametrize("name", ["linear_exp", "tanh"])
def test_closed_forms_solve_the_ode_symbolically(name):
    ode, u, u_fbf = _symbolic(name)
    assert sp.simplify(ode(u)) == 0
    assert sp.simplify(ode(u_fbf)) == 0
    assert u.subs(x, 0) == 0 and u_fbf.subs(x, 0) == 0


@pytest.mark.parametrize("name", ["linear_exp", "tanh"])
@pytest.mark.parametrize("Pv", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ev", [1e-1, 1e-2, 1e-3])
def test_package_closed_forms_match_symbolic(name, Pv, ev):
    _, u, u_fbf = _symbolic(name)
    _, closed = builtin(name, P=Pv)
    xs = np.linspace(0.0, closed.x_eps_exact(ev), 9)
    for k in range(3):
        f = sp.lambdify(x, sp.diff(u, x, k).subs(P, Pv), "numpy")
        g = sp.lambdify(x, sp.diff(u_fbf, x, k).subs({P: Pv, eps: ev}), "numpy")
        np.testing.assert_allclose(closed.u_exact(xs, deriv=k), f(xs) + 0 * xs, atol=1e-12 * Pv**k)
        np.testing.assert_allclose(closed.u_fbf_exact(xs, ev, deriv=k), g(xs) + 0 * xs,
                                   rtol=1e-12, atol=1e-12 * Pv**k)


@pytest.mark.parametrize("name", CLOSED)
@pytest.mark.parametrize("Pv", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ev", [1e-1, 1e-2, 1e-3])
def test_free_boundary_conditions_hold_at_x_eps(name, Pv, ev):
    _, closed = builtin(name, P=Pv)
    xe = closed.x_eps_exact(ev)
    assert closed.u_fbf_exact(xe, ev) == pytest.approx(1.0, abs=1e-13)
    assert closed.u_fbf_exact(xe, ev, deriv=1) == pytest.approx(ev, rel=1e-11)
    assert closed.u_fbf_exact(0.0, ev) == 0.0


@pytest.mark.parametrize("Pv", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ev", [1e-1, 1e-2, 1e-3])
def test_x_eps_against_high_precision_roots(Pv, ev):
    assert builtin("linear_exp", P=Pv)[1].x_eps_exact(ev) == pytest.approx(linear_x_eps(Pv, ev), rel=1e-14)
    assert builtin("tanh", P=Pv)[1].x_eps_exact(ev) == pytest.approx(tanh_x_eps(Pv, ev), rel=1e-13)
    assert builtin("nonautonomous_exp", P=Pv)[1].x_eps_exact(ev) == pytest.approx(
        nonautonomous_x_eps(Pv, ev), rel=1e-12)


def test_linear_exact_values():
    _, closed = builtin("linear_exp", P=1.0)
    assert float(closed.u_exact(0.0, deriv=1)) == 1.0
    assert closed.u_exact(2.0) == pytest.approx(1 - math.exp(-2.0), rel=1e-15)
    assert closed.x_eps_exact(0.1) == pytest.approx(math.log(11), rel=1e-15)
    assert round(closed.x_eps_exact(0.1), 6) == 2.397895


def test_tanh_exact_values():
    _, closed = builtin("tanh", P=1.0)
    assert closed.u_exact(0.0) == 0.0
    assert closed.internals(0.0)["C"] == -1.0
    assert closed.internals(0.0)["b"] == 1.0


@pytest.mark.parametrize("Pv", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ev", [1e-1, 1e-2, 1e-3])
def test_linear_error_identity(Pv, ev):
    _, closed = builtin("linear_exp", P=Pv)
    xs = np.linspace(0.0, closed.x_eps_exact(ev), 2001)
    diff = np.abs(closed.u_fbf_exact(xs, ev) - closed.u_exact(xs))
    assert np.max(diff) == pytest.approx(ev / (Pv + ev), abs=1e-12)
    assert np.argmax(diff) == len(xs) - 1


def test_published_tanh_form_is_not_a_solution():
    # the -tanh(Px)/C profile meets both end conditions yet leaves an O(eps) defect
    Pv, ev = 1.0, 1e-2
    C = (ev - math.sqrt(ev * ev + 4 * Pv * Pv)) / (2 * Pv)
    u = -sp.tanh(P * x) / C
    defect = sp.diff(u, x, 2) + 2 * P * u * sp.diff(u, x)
    f = sp.lambdify(x, defect.subs(P, Pv), "numpy")
    xs = np.linspace(0.1, 2.0, 20)
    assert np.max(np.abs(f(xs))) > 1e-3
    np.testing.assert_allclose(tanh_fbf_published(xs, ev, Pv), -np.tanh(Pv * xs) / C)


def test_linear_and_nonautonomous_share_the_original_solution():
    _, lin = builtin("linear_exp", P=2.0)
    _, non = builtin("nonautonomous_exp", P=2.0)
    xs = np.linspace(0, 8, 50)
    for k in range(3):
        np.testing.assert_array_equal(lin.u_exact(xs, deriv=k), non.u_exact(xs, deriv=k))


def test_nonautonomous_free_solution_differs_from_linear_one():
    # on the truncated domain the forcing stays exp(-Px), so u_fbf is not a rescaling
    _, lin = builtin("linear_exp", P=1.0)
    _, non = builtin("nonautonomous_exp", P=1.0)
    assert abs(lin.x_eps_exact(1e-2) - non.x_eps_exact(1e-2)) > 0.1
    spec, _ = builtin("nonautonomous_exp", P=1.0)
    sys = reduce_to_first_order(spec)
    xe = non.x_eps_exact(1e-2)
    xs = np.linspace(0, xe, 40)
    Y = sample_states(non, xs, 2, eps=1e-2)
    dY = np.stack([non.u_fbf_exact(xs, 1e-2, deriv=k + 1) for k in range(2)])
    assert np.max(np.abs(sys.eval(xs, Y) - dY)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(
    name=st.sampled_from(CLOSED),
    Pv=st.floats(0.1, 10.0),
    x0=st.floats(0.0, 1.0),
)
def test_free_solution_tends_to_original_as_eps_shrinks(name, Pv, x0):
    _, closed = builtin(name, P=Pv)
    xe = closed.x_eps_exact(1e-9)
    xs = x0 * xe
    assert closed.u_fbf_exact(xs, 1e-9) == pytest.approx(float(closed.u_exact(xs)), abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(CLOSED), Pv=st.floats(0.1, 10.0), le=st.floats(-6.0, -1.0))
def test_x_eps_grows_as_eps_shrinks(name, Pv, le):
    _, closed = builtin(name, P=Pv)
    e = 10.0**le
    assert closed.x_eps_exact(e / 2) > closed.x_eps_exact(e)


# -- registry and validation ------------------------------------------------

def test_registry_names():
    assert set(BUILTIN_NAMES) == {"linear_exp", "nonautonomous_exp", "tanh", "engine", "sakiadis", "pile"}


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_condition_counts_square_with_order(name):
    params = {"P": 1.0} if name in CLOSED else {}
    spec, closed = builtin(name, params)
    assert len(spec.left_conditions) + len(spec.asymptotic_conditions) == spec.order
    assert (closed is not None) == (name in CLOSED)


def test_defaults_for_engine_and_pile():
    assert dict(builtin("engine")[0].params) == {"P1": 2.0, "P2": 2.0}
    assert dict(builtin("pile")[0].params) == {"P1": 1.0, "P2": 0.5, "P3": 0.5}


def test_unknown_name_lists_valid_names():
    with pytest.raises(ValueError, match="valid names: linear_exp"):
        builtin("blasius")


def test_missing_parameter():
    with pytest.raises(ValueError, match="missing parameter"):
        builtin("tanh")


@pytest.mark.parametrize("name", ["linear_exp", "tanh", "nonautonomous_exp"])
@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_non_positive_P_rejected(name, bad):
    with pytest.raises(ValueError, match="positive"):
        builtin(name, P=bad)


def test_unexpected_parameter_rejected():
    with pytest.raises(ValueError, match="takes no parameter"):
        builtin("sakiadis", P=1.0)


def test_spec_is_immutable():
    spec, _ = builtin("engine")
    with pytest.raises(Exception):
        spec.order = 4
    with pytest.raises(TypeError):
        spec.params["P1"] = 3.0


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(order=1, left_conditions=[], asymptotic_conditions=[(0, 1.0)]), "order"),
        (dict(order=2, left_conditions=[(2, 0.0)], asymptotic_conditions=[(0, 1.0)]), "out of range"),
        (dict(order=3, left_conditions=[(0, 0.0), (0, 1.0)], asymptotic_conditions=[(1, 1.0)]), "duplicate"),
        (dict(order=3, left_conditions=[(0, 0.0)], asymptotic_conditions=[(1, 1.0)]), "do not match"),
        (dict(order=2, left_conditions=[(0, 0.0), (1, 0.0)], asymptotic_conditions=[]), "asymptotic"),
    ],
)
def test_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        ProblemSpec(name="custom", rhs=lambda x, y: 0.0 * y[0], **kwargs)
