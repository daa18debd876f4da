"""Keller box scheme for the normalized free BVP.

Unknowns are all nodal states plus ``x_eps``, ``Z = (Y_0, ..., Y_J, x_eps)``
with ``Y_j`` the ``n`` derivatives at ``t_j = j/J``.  On every interval the
scheme imposes

    Y_{j+1} - Y_j - h G(t_{j+1/2}, (Y_{j+1} + Y_j) / 2) = 0,

``G`` being the first ``n`` components of the augmented field, and the
boundary residuals close the system.  Interval rows are not divided by
``h`` so that they stay commensurate with the boundary rows under the
max-norm line search.  Rows are ordered left conditions,
intervals, right conditions, which makes the state block banded; the single
``x_eps`` column and the last right condition are eliminated by bordering.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    FreeBoundaryCollapse,
    MaxIterationsExceeded,
    NewtonStagnation,
    SingularSystem,
    SolverError,
)
from .fbf import NormalizedBvp, monotone_diagnostic
from .newton import NewtonOptions, damped_newton
from .problems import builtin
from .solution import SolutionGrid

log = logging.getLogger(__name__)

__all__ = [
    "BoxMesh",
    "RefinementStudy",
    "assemble_residual",
    "assemble_jacobian",
    "solve_box",
    "refinement_study",
    "default_profile",
    "pack",
    "DEFAULT_NEWTON",
]

# interval rows carry a factor h, so this is far below the truncation error
DEFAULT_NEWTON = NewtonOptions(residual_tol=1e-12)


@dataclass(frozen=True)
class BoxMesh:
    node_count: int

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 3:
            raise ValueError("a box mesh needs at least 3 nodes")

    @property
    def intervals(self):
        return self.node_count - 1

    @property
    def h(self):
        return 1.0 / self.intervals

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.node_count)


def pack(states, x_eps):
    """Flatten ``(J+1, n)`` nodal states and ``x_eps`` into the unknown vector."""
    return np.concatenate([np.asarray(states, dtype=float).ravel(), [float(x_eps)]])


def _unpack(nb, mesh, Z):
    n = nb.order
    Z = np.asarray(Z, dtype=float)
    expected = n * mesh.node_count + 1
    if Z.shape != (expected,):
        raise ValueError(f"Z must have {expected} entries, got {Z.shape}")
    return Z[:-1].reshape(mesh.node_count, n), Z[-1]


def _midpoints(mesh):
    t = mesh.nodes
    return 0.5 * (t[1:] + t[:-1])


def assemble_residual(nb: NormalizedBvp, mesh: BoxMesh, Z) -> np.ndarray:
    Y, x_eps = _unpack(nb, mesh, Z)
    n = nb.order
    Ym = 0.5 * (Y[1:] + Y[:-1])
    aug = np.vstack([Ym.T, np.full(mesh.intervals, x_eps)])
    G = nb.eval_aug(_midpoints(mesh), aug)[:n]
    interior = (Y[1:] - Y[:-1]) - mesh.h * G.T
    left = nb.left_residual(Y[0])
    right = nb.free.right_residual(Y[-1], x_eps)
    return np.concatenate([left, interior.ravel(), right])


def _fd_steps(v, scale):
    return scale * np.maximum(1.0, np.abs(v))


def assemble_jacobian(nb: NormalizedBvp, mesh: BoxMesh, Z, fd_step_scale=None):
    """Sparse Jacobian of :func:`assemble_residual` in COO triplet form.

    The companion rows are differentiated exactly; derivatives of the problem
    rhs and of the right conditions use forward differences.
    """
    fd = NewtonOptions().fd_step_scale if fd_step_scale is None else fd_step_scale
    Y, x_eps = _unpack(nb, mesh, Z)
    spec = nb.free.base
    n, J, h = nb.order, mesh.intervals, mesh.h
    N = n * (J + 1)
    nL = len(nb.free.left_known)
    tm = _midpoints(mesh)
    xm = tm * x_eps
    Ym = (0.5 * (Y[1:] + Y[:-1])).T  # (n, J)

    f0 = spec.rhs(xm, Ym) + np.zeros(J)
    # D[i, k, j] = d G_i / d Ybar_k on interval j
    D = np.zeros((n, n, J))
    for i in range(n - 1):
        D[i, i + 1] = x_eps
    for k in range(n):
        dk = _fd_steps(Ym[k], fd)
        Yp = Ym.copy()
        Yp[k] += dk
        D[n - 1, k] = -x_eps * (spec.rhs(xm, Yp) - f0) / dk
    dxm = _fd_steps(xm, fd)
    dfdx = (spec.rhs(xm + dxm, Ym) - f0) / dxm
    dG_dxe = np.empty((n, J))
    dG_dxe[: n - 1] = Ym[1:]
    dG_dxe[n - 1] = -f0 - x_eps * tm * dfdx

    rows, cols, vals = [], [], []
    # left conditions
    for q, (k, _) in enumerate(nb.free.left_known):
        rows.append([q])
        cols.append([k])
        vals.append([1.0])
    # interval blocks
    j = np.arange(J)
    for i in range(n):
        r = nL + j * n + i
        for k in range(n):
            half = -0.5 * h * D[i, k]
            diag = 1.0 if i == k else 0.0
            rows += [r, r]
            cols += [j * n + k, (j + 1) * n + k]
            vals += [half - diag, half + diag]
        rows.append(r)
        cols.append(np.full(J, N))
        vals.append(-h * dG_dxe[i])
    # right conditions
    yJ = Y[-1]
    rho0 = nb.free.right_residual(yJ, x_eps)
    base_row = nL + n * J
    for k in range(n):
        d = _fd_steps(yJ[k], fd)
        yp = yJ.copy()
        yp[k] += d
        col = (nb.free.right_residual(yp, x_eps) - rho0) / d
        rows.append(base_row + np.arange(len(rho0)))
        cols.append(np.full(len(rho0), J * n + k))
        vals.append(col)
    d = _fd_steps(x_eps, fd)
    rows.append(base_row + np.arange(len(rho0)))
    cols.append(np.full(len(rho0), N))
    vals.append((nb.free.right_residual(yJ, x_eps + d) - rho0) / d)

    rows = np.concatenate([np.atleast_1d(a) for a in rows])
    cols = np.concatenate([np.atleast_1d(a) for a in cols])
    vals = np.concatenate([np.atleast_1d(a) for a in vals])
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(N + 1, N + 1))


_PIVOT_RE = re.compile(r"diagonal (\d+)")


def _split(nb, jac):
    """Banded storage of the state block plus the border of ``jac``."""
    n = nb.order
    N = jac.shape[0] - 1
    nL = len(nb.free.left_known)
    lower, upper = nL + n - 1, 2 * n - 1 - nL
    r, c, v = jac.row, jac.col, jac.data
    block = (r < N) & (c < N)
    ab = np.zeros((lower + upper + 1, N))
    np.add.at(ab, (upper + r[block] - c[block], c[block]), v[block])
    border_col = np.zeros(N)
    m = (c == N) & (r < N)
    np.add.at(border_col, r[m], v[m])
    border_row = np.zeros(N)
    m = (r == N) & (c < N)
    np.add.at(border_row, c[m], v[m])
    corner = v[(r == N) & (c == N)].sum()
    return (lower, upper), ab, border_col, border_row, corner


def _bordered_solve(nb, jac, rhs):
    """Solve ``jac @ z = rhs`` by banded LU on the state block plus bordering."""
    bands, ab, border_col, border_row, corner = _split(nb, jac)
    N = len(border_col)
    sol = scipy.linalg.solve_banded(
        bands, ab, np.column_stack([rhs[:N], border_col]), check_finite=False
    )
    z1, z2 = sol[:, 0], sol[:, 1]
    schur = corner - border_row @ z2
    if schur == 0.0 or not np.isfinite(schur):
        raise SingularSystem("bordered system has a zero Schur complement", pivot=N)
    dx = (rhs[N] - border_row @ z1) / schur
    return np.concatenate([z1 - z2 * dx, [dx]])


def _locate(nb, mesh, pivot):
    if pivot is None:
        return ""
    n = nb.order
    if pivot < n * mesh.node_count:
        return f" (node {pivot // n}, component {pivot % n})"
    return " (x_eps)"


def _solve_linear(nb, mesh, jac, rhs, frozen=False):
    """Newton correction solve with a sparse LU fallback.

    With ``frozen`` the last row and the ``x_eps`` column are dropped, which
    is the linearization of the fixed-domain problem.
    """
    try:
        with np.errstate(all="ignore"):
            if frozen:
                bands, ab, *_ = _split(nb, jac)
                z = scipy.linalg.solve_banded(bands, ab, rhs, check_finite=False)
            else:
                z = _bordered_solve(nb, jac, rhs)
        if np.all(np.isfinite(z)):
            return z
        reason, pivot = "non-finite banded solution", None
    except (np.linalg.LinAlgError, SingularSystem) as exc:
        reason = str(exc)
        match = _PIVOT_RE.search(reason)
        pivot = int(match.group(1)) - 1 if match else getattr(exc, "pivot", None)
    log.debug("banded solve failed (%s); falling back to sparse LU", reason)
    A = jac.tocsc()
    if frozen:
        A = A[:-1, :-1]
    try:
        z = scipy.sparse.linalg.splu(A).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystem(
            f"singular box Jacobian at pivot {pivot}{_locate(nb, mesh, pivot)}: {exc}", pivot
        ) from exc
    if not np.all(np.isfinite(z)):
        raise SingularSystem(f"singular box Jacobian at pivot {pivot}{_locate(nb, mesh, pivot)}", pivot)
    return z


def default_profile(spec, eps):
    """Cold-start ``(profile, x_eps)`` for a built-in problem.

    ``profile(x)`` returns the ``(n, len(x))`` stack of derivatives.
    """
    name = spec.name
    if name in ("linear_exp", "nonautonomous_exp", "tanh"):
        _, exact = builtin(name, dict(spec.params))
        return (
            lambda x: np.stack([exact.u_exact(x, deriv=k) for k in range(spec.order)]),
            1.1 * exact.x_eps_exact(eps),
        )
    if name == "engine":
        P2 = spec.params["P2"]
        return (
            lambda x: np.stack([P2 + x + np.expm1(-x), -np.expm1(-x), np.exp(-x)]),
            10.0,
        )
    if name == "sakiadis":
        return (lambda x: np.stack([-np.expm1(-x), np.exp(-x), -np.exp(-x)]), 5.0)
    if name == "pile":
        # linear decay from 1 to 0 with divided-difference derivatives
        x_eps = 8.0

        def profile(x):
            z = np.zeros_like(x)
            return np.stack([1.0 - x / x_eps, z - 1.0 / x_eps, z, z])

        return profile, x_eps
    raise ValueError(f"no default profile for problem {spec.name!r}; pass init explicitly")


def _resample(states, x_old, mesh, x_new):
    """Map nodal states onto ``mesh`` scaled to ``x_new``; constant beyond ``x_old``."""
    old = np.linspace(0.0, x_old, len(states))
    x = mesh.nodes * x_new
    return np.column_stack([np.interp(x, old, states[:, k]) for k in range(states.shape[1])])


def _initial_vector(nb, mesh, init):
    if isinstance(init, SolutionGrid):
        states = np.column_stack(
            [np.interp(mesh.nodes, init.mesh, init.states[:, k]) for k in range(nb.order)]
        )
        return pack(states, init.x_eps)
    if init is None:
        init = default_profile(nb.free.base, nb.eps)
    profile, x_eps = init
    if not x_eps > 0:
        raise ValueError("initial x_eps must be positive")
    states = np.asarray(profile(mesh.nodes * x_eps), dtype=float).T
    return pack(states, x_eps)


class _BoxNewton:
    """Residual and correction callables for the free and frozen systems."""

    def __init__(self, nb, mesh, opts):
        self.nb, self.mesh, self.opts = nb, mesh, opts

    def residual(self, Z):
        with np.errstate(over="ignore", invalid="ignore"):
            r = assemble_residual(self.nb, self.mesh, Z)
        return np.where(np.isfinite(r), r, np.inf)

    def solve_free(self, Z0):
        def jac_solve(Z, r):
            jac = assemble_jacobian(self.nb, self.mesh, Z, self.opts.fd_step_scale)
            return -_solve_linear(self.nb, self.mesh, jac, r)

        return damped_newton(
            self.residual, jac_solve, Z0, self.opts, admissible=lambda Z: Z[-1] > 0
        )

    def solve_frozen(self, Z0):
        """Newton with ``x_eps`` held at ``Z0[-1]`` and the eps-row dropped."""
        x_eps = Z0[-1]

        def fun(S):
            return self.residual(np.append(S, x_eps))[:-1]

        def jac_solve(S, r):
            jac = assemble_jacobian(self.nb, self.mesh, np.append(S, x_eps), self.opts.fd_step_scale)
            return -_solve_linear(self.nb, self.mesh, jac, r, frozen=True)

        result = damped_newton(fun, jac_solve, Z0[:-1], self.opts)
        return np.append(result.x, x_eps), result.iterations

    def bracket(self, Z0, growth=0.05, max_steps=80):
        """Locate ``x_eps`` by frozen solves before the free iteration.

        The scan moves toward larger ``x_eps`` while the controlled quantity
        still exceeds ``|eps|`` and toward smaller ``x_eps`` otherwise; the
        first sign change of the eps-row is then narrowed with Brent's method.
        """
        n = self.nb.order
        side = np.sign(self.nb.eps)
        cache = {}
        its = 0

        def frozen_at(x_new, Z_from):
            nonlocal its
            states = _resample(Z_from[:-1].reshape(-1, n), Z_from[-1], self.mesh, x_new)
            Z, it = self.solve_frozen(pack(states, x_new))
            its += it
            cache[x_new] = Z
            return Z

        def rho(Z):
            return self.residual(Z)[-1] * side

        Z, its = self.solve_frozen(Z0)
        r0 = rho(Z)
        sign = np.sign(r0)
        if sign == 0:
            return Z, its
        x0 = Z[-1]
        lo_x, lo_Z = x0, Z
        for k in range(1, max_steps + 1):
            x_new = x0 * (1.0 + growth * k) if sign > 0 else x0 / (1.0 + growth * k)
            Z = frozen_at(x_new, lo_Z)
            if np.sign(rho(Z)) != sign:
                break
            lo_x, lo_Z = x_new, Z
        else:
            raise NewtonStagnation(
                f"eps-condition never changed sign while scanning x_eps from {x0:.6g}"
            )

        def f(x):
            return rho(frozen_at(x, lo_Z))

        try:
            root = scipy.optimize.brentq(f, lo_x, x_new, xtol=1e-9 * x0, maxiter=60)
        except (ValueError, RuntimeError, SolverError) as exc:
            log.debug("x_eps refinement stopped early (%s)", exc)
            return Z, its
        return cache.get(root, frozen_at(root, lo_Z)), its


def solve_box(
    nb: NormalizedBvp,
    mesh: BoxMesh | int,
    init=None,
    opts: NewtonOptions | None = None,
) -> SolutionGrid:
    """Damped Newton on the box equations.

    ``init`` is a :class:`SolutionGrid` (interpolated onto ``mesh``), a
    ``(profile, x_eps)`` pair, or ``None`` for the built-in cold start.

    A profile start is first relaxed with ``x_eps`` frozen.  If the free
    iteration then fails, ``x_eps`` is bracketed by a scan of frozen solves
    and Newton restarts from the bracketing profile.
    """
    if not isinstance(mesh, BoxMesh):
        mesh = BoxMesh(int(mesh))
    opts = opts or DEFAULT_NEWTON
    Z0 = _initial_vector(nb, mesh, init)
    box = _BoxNewton(nb, mesh, opts)
    pre_iters = 0
    strategy = "direct"
    if not isinstance(init, SolutionGrid):
        Z0, pre_iters = box.solve_frozen(Z0)
        strategy = "frozen"
    try:
        result = box.solve_free(Z0)
    except (NewtonStagnation, MaxIterationsExceeded, FreeBoundaryCollapse) as exc:
        log.debug("free box iteration failed (%s); bracketing x_eps", exc)
        Zb, scan_iters = box.bracket(Z0)
        pre_iters += scan_iters
        strategy = "bracket"
        result = box.solve_free(Zb)
    states, x_eps = _unpack(nb, mesh, result.x)
    return SolutionGrid(
        mesh=mesh.nodes,
        states=states.copy(),
        x_eps=float(x_eps),
        eps=nb.eps,
        missing_ic={k: float(states[0, k]) for k in nb.free.unknown_left_indices},
        residual_norm=result.residual_norm,
        iterations=result.iterations + pre_iters,
        solver_tag="box",
        monotone_ok=monotone_diagnostic(nb.free, states),
        diagnostics={
            "history": result.history,
            "node_count": mesh.node_count,
            "strategy": strategy,
            "setup_iterations": pre_iters,
            "free_iterations": result.iterations,
        },
    )


@dataclass
class RefinementRow:
    node_count: int
    missing_ic: dict
    x_eps: float
    terminal: np.ndarray
    residual_norm: float
    iterations: int
    grid: SolutionGrid = field(repr=False)


@dataclass
class RefinementStudy:
    M: int
    k_max: int
    rows: list

    @property
    def node_counts(self):
        return [row.node_count for row in self.rows]

    def settling(self, index):
        """Successive changes of ``missing_ic[index]`` between rows."""
        v = np.array([row.missing_ic[index] for row in self.rows])
        return np.abs(np.diff(v))


def refinement_study(
    nb: NormalizedBvp,
    M: int,
    k_max: int,
    opts: NewtonOptions | None = None,
    init=None,
) -> RefinementStudy:
    """Solve on ``2**k * M + 1`` nodes for ``k = 0..k_max``, warm-starting each row."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    rows = []
    prev = init
    for k in range(k_max + 1):
        mesh = BoxMesh(2**k * M + 1)
        try:
            grid = solve_box(nb, mesh, prev, opts)
        except SolverError as exc:
            raise type(exc)(f"refinement row k={k} ({mesh.node_count} nodes): {exc}") from exc
        rows.append(
            RefinementRow(
                node_count=mesh.node_count,
                missing_ic=dict(grid.missing_ic),
                x_eps=grid.x_eps,
                terminal=grid.terminal.copy(),
                residual_norm=grid.residual_norm,
                iterations=grid.iterations,
                grid=grid,
            )
        )
        prev = grid
    return RefinementStudy(M=M, k_max=k_max, rows=rows)

