"""Epsilon continuation, golden-rule check and convergence-order fit."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SolverError
from .fbf import formulate, normalize
from .integrate import IvpOptions
from .kellerbox import DEFAULT_NEWTON as BOX_NEWTON
from .kellerbox import BoxMesh, solve_box
from .newton import NewtonOptions
from .problems import builtin
from .shoot import DEFAULT_NEWTON as SHOOT_NEWTON
from .shoot import default_guess, solve_shoot
from .solution import SolutionGrid

log = logging.getLogger(__name__)

__all__ = [
    "SweepRow",
    "SweepReport",
    "OrderFit",
    "run_sweep",
    "check_golden_rule",
    "estimate_order",
    "default_ladder",
    "default_solver",
    "digit_agreement",
]

SOLVERS = ("shoot", "box")


@dataclass
class SweepRow:
    eps: float
    x_eps: Optional[float] = None
    missing_ic: dict = field(default_factory=dict)
    residual_norm: Optional[float] = None
    iterations: Optional[int] = None
    solver_tag: Optional[str] = None
    grid: Optional[SolutionGrid] = field(default=None, repr=False)
    error: Optional[str] = None
    cold_iterations: Optional[int] = None

    @property
    def ok(self):
        return self.error is None and self.x_eps is not None


@dataclass
class OrderFit:
    slope: float
    L_fit: float
    points: list  # (eps, error) pairs used in the fit


@dataclass
class SweepReport:
    problem: str
    rows: list
    golden_rule_ok: bool = True
    violations: list = field(default_factory=list)
    order_fit: Optional[OrderFit] = None
    digits: dict = field(default_factory=dict)

    @property
    def successful(self):
        return [row for row in self.rows if row.ok]


def default_ladder(spec):
    """The decade ladder used when none is given."""
    last = {"engine": 9, "pile": 4}.get(spec.name, 6)
    sign = -1.0 if spec.name == "sakiadis" else 1.0
    return [sign * 10.0**-k for k in range(1, last + 1)]


def default_solver(spec):
    # shooting loses the pile's growing modes below eps ~ 1e-2
    return "box" if spec.name == "pile" else "shoot"


def _validate_ladder(eps_list):
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValueError("eps_list must not be empty")
    if any(e == 0 or not math.isfinite(e) for e in eps):
        raise ValueError("eps values must be finite and nonzero")
    if len({e > 0 for e in eps}) > 1:
        raise ValueError("eps_list mixes signs; a sweep runs toward zero from one side")
    mags = np.abs(eps)
    if np.any(np.diff(mags) >= 0):
        raise ValueError("eps_list must be strictly decreasing in magnitude")
    return eps


def _solve(spec, eps, solver, warm, newton, ivp, grid, guess):
    nb = normalize(formulate(spec, eps))
    if solver == "shoot":
        if warm is not None:
            start = warm.unknowns(nb.free.unknown_left_indices)
        elif guess is not None:
            start = guess
        else:
            start = default_guess(spec, eps)
        return solve_shoot(nb, start, newton, ivp)
    return solve_box(nb, BoxMesh(grid), warm if warm is not None else guess, newton)


def _row(eps, grid):
    return SweepRow(
        eps=eps,
        x_eps=grid.x_eps,
        missing_ic=dict(grid.missing_ic),
        residual_norm=grid.residual_norm,
        iterations=grid.iterations,
        solver_tag=grid.solver_tag,
        grid=grid,
    )


def run_sweep(
    spec,
    eps_list=None,
    solver=None,
    newton: NewtonOptions | None = None,
    ivp: IvpOptions | None = None,
    grid: int = 1001,
    guess=None,
    independent: bool = False,
    max_workers: int | None = None,
    compare_cold: bool = False,
) -> SweepReport:
    """Solve along ``eps_list``, each row warm-started from the last success.

    ``guess`` seeds the first row (unknown vector for shooting, profile pair
    or grid for the box scheme).  With ``independent`` every row starts cold
    and rows run concurrently.  ``compare_cold`` additionally re-solves each
    warm row from the cold default to record its iteration count.
    """
    eps_list = _validate_ladder(default_ladder(spec) if eps_list is None else eps_list)
    solver = solver or default_solver(spec)
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if newton is None:
        newton = SHOOT_NEWTON if solver == "shoot" else BOX_NEWTON

    def attempt(eps, warm):
        return _solve(spec, eps, solver, warm, newton, ivp, grid, guess)

    rows = []
    if independent:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(attempt, e, None) for e in eps_list]
        for eps, fut in zip(eps_list, futures):
            try:
                rows.append(_row(eps, fut.result()))
            except SolverError as exc:
                rows.append(SweepRow(eps=eps, solver_tag=solver, error=str(exc)))
    else:
        warm = None
        for i, eps in enumerate(eps_list):
            try:
                sol = attempt(eps, warm)
            except SolverError as exc:
                if warm is None:
                    raise type(exc)(
                        f"{spec.name} sweep failed on its first row eps={eps!r}: {exc}"
                    ) from exc
                log.warning("sweep row eps=%r failed: %s", eps, exc)
                rows.append(SweepRow(eps=eps, solver_tag=solver, error=str(exc)))
                continue
            row = _row(eps, sol)
            if compare_cold and warm is not None:
                try:
                    row.cold_iterations = attempt(eps, None).iterations
                except SolverError:
                    row.cold_iterations = None
            rows.append(row)
            warm = sol

    report = SweepReport(problem=spec.name, rows=rows)
    if len(report.successful) >= 2:
        report.golden_rule_ok, report.violations = check_golden_rule(report)
        report.digits = digit_agreement(report)
    if len(report.successful) >= 3:
        try:
            _, closed = builtin(spec.name, dict(spec.params))
        except ValueError:
            closed = None
        if closed is not None:
            report.order_fit = estimate_order(closed, report, newton.residual_tol)
    return report


def check_golden_rule(report: SweepReport):
    """Smaller ``|eps|`` must give a strictly larger ``x_eps``."""
    rows = sorted(report.successful, key=lambda r: -abs(r.eps))
    if len(rows) < 2:
        raise ValueError("the golden rule needs at least two successful rows")
    violations = [
        ((a.eps, a.x_eps), (b.eps, b.x_eps))
        for a, b in zip(rows, rows[1:])
        if not b.x_eps > a.x_eps
    ]
    return not violations, violations


def row_error(closed, row):
    """Max nodal distance between the computed ``u`` and the exact solution."""
    g = row.grid
    return float(np.max(np.abs(g.states[:, 0] - closed.u_exact(g.x))))


def estimate_order(closed, report: SweepReport, residual_tol=None):
    """Least-squares slope of ``log e`` against ``log |eps|``.

    Errors below ten times ``residual_tol`` are left out; with fewer than
    three usable points the fit is absent (``None``).
    """
    floor = 10.0 * (residual_tol if residual_tol is not None else 0.0)
    rows = report.successful
    if len(rows) < 3:
        raise ValueError("an order fit needs at least three successful rows")
    points = [(row.eps, row_error(closed, row)) for row in rows]
    used = [(e, err) for e, err in points if err > floor]
    if len(used) < 3:
        return None
    eps = np.abs([e for e, _ in used])
    err = np.array([v for _, v in used])
    slope = float(np.polyfit(np.log(eps), np.log(err), 1)[0])
    return OrderFit(slope=slope, L_fit=float(np.max(err / eps)), points=used)


def digit_agreement(report: SweepReport):
    """Matching significant digits of each missing value over the last two rows."""
    rows = report.successful
    if len(rows) < 2:
        return {}
    a, b = rows[-2], rows[-1]
    out = {}
    for k in b.missing_ic:
        va, vb = a.missing_ic[k], b.missing_ic[k]
        if va == vb:
            out[k] = 17
        elif vb == 0:
            out[k] = 0
        else:
            out[k] = int(max(0, min(17, math.floor(-math.log10(abs(va - vb) / abs(vb))))))
    return out
