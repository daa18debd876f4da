"""Acceptance suite: one marked group of tests per criterion.

The terminal summary (see conftest.py) prints a PASS/FAIL line for each
criterion number.
"""

import time

import numpy as np
import pytest

from freebvp.fbf import formulate, normalize
from freebvp.kellerbox import BoxMesh, refinement_study, solve_box
from freebvp.problems import BUILTIN_NAMES, builtin, tanh_fbf_published, tanh_x_eps_published
from freebvp.shoot import default_guess, solve_shoot
from freebvp.sweep import SweepReport, SweepRow, check_golden_rule, row_error, run_sweep

acceptance = pytest.mark.acceptance

P_GRID = (0.1, 1.0, 10.0)
EPS_GRID = (1e-1, 1e-2, 1e-3)


def _shoot_closed_forms(name):
    out = []
    for P in P_GRID:
        spec, _ = builtin(name, P=P)
        for eps in EPS_GRID:
            out.append((P, eps, solve_shoot(normalize(formulate(spec, eps)), default_guess(spec, eps))))
    return out


@acceptance(1, "linear closed form reproduced by shooting")
def test_linear_closed_form_reproduction():
    start = time.perf_counter()
    solved = _shoot_closed_forms("linear_exp")
    elapsed = time.perf_counter() - start
    for P, eps, g in solved:
        _, closed = builtin("linear_exp", P=P)
        assert np.max(np.abs(g.states[:, 0] - closed.u_fbf_exact(g.x, eps))) <= 1e-8
        assert abs(g.x_eps - (-np.log(eps / (P + eps)) / P)) <= 1e-8
    assert elapsed < 1.0, f"took {elapsed:.2f} s"


@acceptance(2, "tanh closed form (published C-form) reproduced by shooting")
def test_tanh_against_published_closed_form():
    # the C-form meets both end conditions but is not a solution of the ODE
    # for eps != 0, so this comparison is expected to fail; see the next test
    start = time.perf_counter()
    solved = _shoot_closed_forms("tanh")
    elapsed = time.perf_counter() - start
    worst_u = max(np.max(np.abs(g.states[:, 0] - tanh_fbf_published(g.x, eps, P))) for P, eps, g in solved)
    worst_x = max(abs(g.x_eps - tanh_x_eps_published(eps, P)) for P, eps, g in solved)
    assert elapsed < 1.0, f"took {elapsed:.2f} s"
    assert worst_u <= 1e-7, f"max nodal error {worst_u:.3e}"
    assert worst_x <= 1e-7, f"max x_eps error {worst_x:.3e}"


def test_tanh_against_exact_free_solution():
    for P, eps, g in _shoot_closed_forms("tanh"):
        _, closed = builtin("tanh", P=P)
        assert np.max(np.abs(g.states[:, 0] - closed.u_fbf_exact(g.x, eps))) <= 1e-7
        assert abs(g.x_eps - closed.x_eps_exact(eps)) <= 1e-7


@acceptance(3, "first-order convergence in eps on both closed forms")
def test_first_order_convergence():
    ladder = [1e-1, 1e-2, 1e-3, 1e-4]
    start = time.perf_counter()
    reports = {name: run_sweep(builtin(name, P=1.0)[0], ladder) for name in ("linear_exp", "tanh")}
    elapsed = time.perf_counter() - start
    for name, report in reports.items():
        slope = report.order_fit.slope
        assert 0.85 <= slope <= 1.15, f"{name}: slope {slope}"
    _, closed = builtin("linear_exp", P=1.0)
    for row in reports["linear_exp"].rows:
        assert abs(row_error(closed, row) - row.eps / (1.0 + row.eps)) <= 1e-10
    assert elapsed < 2.0, f"took {elapsed:.2f} s"


@acceptance(4, "engine table: d2u(0) and x_eps for eps 1e-6..1e-9")
def test_engine_table():
    expected_u2 = (1.441377749, 1.441372413, 1.441371875, 1.441371815)
    expected_x = (37.23, 45.62, 54.15, 62.75)
    start = time.perf_counter()
    report = run_sweep(builtin("engine", P1=2.0, P2=2.0)[0], [1e-6, 1e-7, 1e-8, 1e-9], solver="shoot")
    elapsed = time.perf_counter() - start
    assert all(r.ok for r in report.rows)
    for row, u2, xe in zip(report.rows, expected_u2, expected_x):
        assert abs(row.missing_ic[2] - u2) <= 5e-7, row
        assert abs(row.x_eps - xe) <= 0.01 * xe, row
    assert elapsed < 10.0, f"took {elapsed:.2f} s"


def _sakiadis_best():
    start = time.perf_counter()
    report = run_sweep(builtin("sakiadis")[0], [-1e-4, -1e-5, -1e-6], solver="shoot")
    return report.successful[-1], time.perf_counter() - start


@acceptance(5, "Sakiadis: wall gradient against both cited values, x_eps in [8, 12]")
def test_sakiadis_wall_gradient():
    best, elapsed = _sakiadis_best()
    assert best.eps == -1e-6
    assert abs(best.missing_ic[2] - (-0.443761)) <= 5e-5
    assert abs(best.missing_ic[2] - (-0.443747)) <= 5e-5
    assert elapsed < 5.0, f"took {elapsed:.2f} s"


@acceptance(5, "Sakiadis: wall gradient against both cited values, x_eps in [8, 12]")
def test_sakiadis_free_boundary_range():
    best, _ = _sakiadis_best()
    assert 8.0 <= best.x_eps <= 12.0, f"x_eps = {best.x_eps:.4f} at eps = {best.eps}"


@acceptance(6, "pile table on 1001 nodes")
def test_pile_table():
    u0 = (1.41566, 1.42148, 1.42154, 1.42154)
    u1 = (-0.805665, -0.808104, -0.808146, -0.808144)
    xs = (6.46, 8.84, 13.13, 17.75)
    start = time.perf_counter()
    report = run_sweep(builtin("pile", P1=1.0, P2=0.5, P3=0.5)[0], [1e-1, 1e-2, 1e-3, 1e-4],
                       solver="box", grid=1001)
    elapsed = time.perf_counter() - start
    assert all(r.ok for r in report.rows)
    for row, a, b, xe in zip(report.rows, u0, u1, xs):
        assert row.grid.mesh.size == 1001
        assert abs(row.missing_ic[0] - a) <= 2e-4, row
        assert abs(row.missing_ic[1] - b) <= 2e-4, row
        assert abs(row.x_eps - xe) <= 0.02 * xe, row
    assert report.golden_rule_ok
    assert elapsed < 30.0, f"took {elapsed:.2f} s"


@acceptance(7, "pile mesh refinement, M = 125, k = 0..7")
def test_pile_refinement():
    nb = normalize(formulate(builtin("pile")[0], 1e-4))
    start = time.perf_counter()
    study = refinement_study(nb, 125, 7)
    elapsed = time.perf_counter() - start
    rows = {r.node_count: r for r in study.rows}
    for nodes in (8001, 16001):
        assert abs(rows[nodes].missing_ic[0] - 1.421545) <= 2e-6
        assert abs(rows[nodes].missing_ic[1] - (-0.808148)) <= 2e-6
    assert abs(rows[2001].x_eps - 17.747988) <= 0.05
    assert elapsed < 120.0, f"took {elapsed:.2f} s"


@acceptance(8, "box scheme is second order in the mesh width")
@pytest.mark.parametrize("name", ["linear_exp", "tanh"])
def test_box_order(name):
    spec, closed = builtin(name, P=1.0)
    nb = normalize(formulate(spec, 1e-3))
    errors = []
    for J in (50, 100, 200, 400):
        g = solve_box(nb, BoxMesh(J + 1))
        errors.append(np.max(np.abs(g.states[:, 0] - closed.u_fbf_exact(g.x, 1e-3))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((orders >= 1.8) & (orders <= 2.2)), orders


@acceptance(9, "shooting and box agree on the engine problem at eps = 1e-6")
def test_cross_solver_agreement():
    spec, _ = builtin("engine")
    nb = normalize(formulate(spec, 1e-6))
    shot = solve_shoot(nb, default_guess(spec, 1e-6))
    boxed = refinement_study(nb, 500, 5).rows[-1]
    assert boxed.node_count == 16001
    assert abs(shot.missing_ic[2] - boxed.missing_ic[2]) <= 1e-6
    assert abs(shot.x_eps - boxed.x_eps) <= 1e-3 * shot.x_eps


@acceptance(10, "golden rule on every default ladder; synthetic violation flagged")
@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_golden_rule_default_ladders(name):
    params = {"P": 1.0} if name in ("linear_exp", "nonautonomous_exp", "tanh") else {}
    report = run_sweep(builtin(name, params)[0])
    assert all(r.ok for r in report.rows)
    ok, violations = check_golden_rule(report)
    assert ok, violations


@acceptance(10, "golden rule on every default ladder; synthetic violation flagged")
def test_golden_rule_flags_violation():
    report = SweepReport("synthetic", [SweepRow(eps=1e-2, x_eps=5.0), SweepRow(eps=1e-3, x_eps=4.0)])
    ok, violations = check_golden_rule(report)
    assert not ok and len(violations) == 1
