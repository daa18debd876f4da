"""Reference values computed with routines independent of the package.

The frozen constants below were produced by the functions in this module;
``test_oracles.py`` regenerates them (marked slow) to keep the two in sync.
Shooting references use ``scipy.integrate.solve_ivp`` (DOP853) with
``scipy.optimize.fsolve`` on the physical interval; the pile reference uses
``scipy.integrate.solve_bvp`` on the stretched interval; closed-form free
boundaries are solved with mpmath at 40 digits.
"""

import mpmath
import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.optimize import fsolve

mpmath.mp.dps = 40


def engine_rhs(P1, P2):
    def f(x, y):
        return [y[1], y[2], -(0.5 * y[0] + P1) * y[2] / (1 + P1 * x)]

    return f


def sakiadis_rhs(x, y):
    return [y[1], y[2], -0.5 * y[0] * y[2]]


def _third_order_shoot(rhs, u0, du0, target_du, eps, guess):
    def residual(z):
        u2, x_eps = z
        sol = solve_ivp(rhs, (0, x_eps), [u0, du0, u2], method="DOP853",
                        rtol=1e-13, atol=1e-15)
        y = sol.y[:, -1]
        return [y[1] - target_du, y[2] - eps]

    z = fsolve(residual, guess, xtol=1e-14)
    return float(z[0]), float(z[1])


def engine_reference(eps, guess, P1=2.0, P2=2.0):
    return _third_order_shoot(engine_rhs(P1, P2), P2, 0.0, 1.0, eps, guess)


def sakiadis_reference(eps, guess):
    return _third_order_shoot(sakiadis_rhs, 0.0, 1.0, 0.0, eps, guess)


def pile_reference(eps, guess_x_eps, nodes=4001, P1=1.0, P2=0.5, P3=0.5):
    """solve_bvp on t in [0, 1] with x_eps as an unknown parameter.

    The sign pattern of (u'', u''') at the free boundary is read off a first
    solve and then fixed, turning the absolute values into a smooth condition.
    """
    t = np.linspace(0, 1, nodes)

    def fun(t, y, p):
        x_eps = p[0]
        return x_eps * np.vstack([y[1], y[2], y[3], P1 * np.expm1(-P2 * y[0])])

    def make_bc(s2, s3):
        def bc(ya, yb, p):
            return np.array([ya[2], ya[3] - P3, yb[0], yb[1], s2 * yb[2] + s3 * yb[3] - eps])
        return bc

    x0 = guess_x_eps
    y0 = np.vstack([np.exp(-t * x0 / 2), -0.5 * np.exp(-t * x0 / 2), 0 * t, 0 * t])
    sol = None
    for s2, s3 in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
        cand = solve_bvp(fun, make_bc(s2, s3), t, y0, p=[x0], tol=1e-10, max_nodes=10**6)
        if cand.success:
            yb = cand.sol(1.0)
            if np.sign(yb[2]) == s2 and np.sign(yb[3]) == s3:
                sol = cand
                break
    if sol is None:
        raise RuntimeError("no consistent sign pattern found")
    y0 = sol.sol(0.0)
    yb = sol.sol(1.0)
    return float(y0[0]), float(y0[1]), float(sol.p[0]), float(yb[2]), float(yb[3])


def linear_x_eps(P, eps):
    return float(mpmath.log(1 + mpmath.mpf(P) / mpmath.mpf(eps)) / P)


def tanh_x_eps(P, eps):
    P, eps = mpmath.mpf(P), mpmath.mpf(eps)
    b = mpmath.sqrt(1 + eps / P)
    return float(mpmath.atanh(1 / b) / (b * P))


def nonautonomous_x_eps(P, eps):
    P, eps = mpmath.mpf(P), mpmath.mpf(eps)
    f = lambda x: mpmath.exp(-P * x) * (P + 1 / x) - eps
    lo, hi = mpmath.mpf("1e-6") / P, (50 + mpmath.log(1 / eps)) / P
    for _ in range(80):  # f decreases in x; bisect, then polish
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
    return float(mpmath.findroot(f, (lo + hi) / 2))


# frozen outputs of the functions above
ENGINE = {  # eps -> (d2u(0), x_eps), P1 = P2 = 2
    1e-6: (1.4413777652316089, 37.21947034721884),
    1e-9: (1.4413718155196489, 62.746723501616394),
}
SAKIADIS = {  # eps -> (d2u(0), x_eps)
    -1e-4: (-0.44378419744687264, 11.810433594105547),
    -1e-6: (-0.44374867194953493, 17.506193187195908),
}
PILE = {  # eps -> (u(0), du(0), x_eps, d2u(x_eps), d3u(x_eps)), default parameters
    1e-1: (1.4156559568294518, -0.80566510547343, 6.462710860752557, -0.05916343918206944, -0.04083656081793055),
    1e-2: (1.4214832467107428, -0.8081048069870326, 8.842297397731613, -0.00440934452045919, 0.005590655479540811),
    1e-3: (1.4215438833849285, -0.8081478506077482, 13.129368876150258, 0.0008892832242955344, 0.00011071677570446552),
    1e-4: (1.421544732042361, -0.8081479281726974, 17.74797681959892, -7.0040324960081e-05, -2.995967503991899e-05),
}
ENGINE_GUESS = {1e-6: (1.44, 37.2), 1e-9: (1.44, 62.7)}
SAKIADIS_GUESS = {-1e-4: (-0.4438, 11.8), -1e-6: (-0.4437, 17.5)}
PILE_GUESS = {1e-1: 6.5, 1e-2: 8.8, 1e-3: 13.1, 1e-4: 17.7}
