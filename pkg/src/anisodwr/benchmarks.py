"""Benchmark problem definitions and derived-quantity post-processing.

The moving-hump case has a closed-form solution; its source term is derived
symbolically once per diffusion coefficient and compiled to vectorized
NumPy callables.  The Hemker case is the flow-past-a-cylinder transport
problem on the ring-plus-blocks geometry of `create_hemker_mesh`.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import BracketingError
from .fe_space import evaluate_field
from .goals import CombinedGoal, GoalFunctional
from .mesh import HEMKER_CIRCLE, HEMKER_INFLOW, HEMKER_WALL, create_hemker_mesh
from .problem import CdrProblem, zero_scalar

HUMP_R0 = 0.25
HUMP_CENTER = (0.5, 0.5)
HUMP_T = 0.5
HUMP_B = (2.0, 3.0)
HUMP_ALPHA = 1.0


@lru_cache(maxsize=8)
def _hump_symbolic(epsilon):
    import sympy as sp

    x1, x2, t = sp.symbols("x1 x2 t")
    r0 = sp.Rational(1, 4)
    c = sp.Rational(1, 2)
    u = (16 / sp.pi * sp.sin(sp.pi * t) * x1 * (1 - x1) * x2 * (1 - x2)
         * (sp.Rational(1, 2)
            + sp.atan(2 * epsilon ** sp.Rational(-1, 2)
                      * (r0 ** 2 - (x1 - c) ** 2 - (x2 - c) ** 2))))
    f = (sp.diff(u, t)
         - epsilon * (sp.diff(u, x1, 2) + sp.diff(u, x2, 2))
         + HUMP_B[0] * sp.diff(u, x1) + HUMP_B[1] * sp.diff(u, x2)
         + HUMP_ALPHA * u)
    u_fn = sp.lambdify((x1, x2, t), u, "numpy")
    f_fn = sp.lambdify((x1, x2, t), f, "numpy")
    return u_fn, f_fn


def moving_hump_problem(epsilon, cutoff=0.05):
    """(CdrProblem, exact solution u(x,t), CombinedGoal) for the hump with a
    circular interior layer on (0,1)^2 x (0, 0.5].

    Terminal-time point values at the two layer points are combined with unit
    weights; the cutoff radius of the mollifier is configurable.
    """
    u_fn, f_fn = _hump_symbolic(float(epsilon))

    def u_exact(x, t):
        x = np.atleast_2d(x)
        return np.asarray(u_fn(x[:, 0], x[:, 1], t), dtype=float)

    def f(x, t):
        x = np.atleast_2d(x)
        return np.asarray(f_fn(x[:, 0], x[:, 1], t), dtype=float)

    problem = CdrProblem(
        epsilon=float(epsilon), b=HUMP_B, alpha=HUMP_ALPHA, f=f,
        u0=lambda x: np.zeros(len(x)), T=HUMP_T,
        dirichlet={i: zero_scalar for i in (1, 2, 3, 4)})
    d = HUMP_R0 / np.sqrt(2.0)
    xe1 = (HUMP_CENTER[0] - d, HUMP_CENTER[1] - d)
    xe2 = (HUMP_CENTER[0] + d, HUMP_CENTER[1] + d)
    goal = CombinedGoal([
        GoalFunctional("terminal_point", center=xe1, cutoff=cutoff),
        GoalFunctional("terminal_point", center=xe2, cutoff=cutoff)])
    return problem, u_exact, goal


HEMKER_T = 9.0
HEMKER_XE1 = (4.0, 1.0)
HEMKER_XE2 = (-2.0 ** -0.5 - 1e-6, 2.0 ** -0.5 + 1e-6)
HEMKER_WALL_POINT = (-2.0 ** -0.5, 2.0 ** -0.5)


def hemker_problem(cutoff_e1=0.1, cutoff_e2=5e-7):
    """(CdrProblem, CombinedGoal) for the nonstationary flow-past-a-cylinder
    transport benchmark: u=1 on the circle, u=0 at inflow, Neumann elsewhere,
    time-integrated point values in the upper interior layer and inside the
    boundary layer."""
    problem = CdrProblem(
        epsilon=1e-6, b=(1.0, 0.0), alpha=0.0, f=0.0,
        u0=lambda x: np.zeros(len(x)), T=HEMKER_T,
        dirichlet={HEMKER_INFLOW: zero_scalar,
                   HEMKER_CIRCLE: lambda x, t: np.ones(len(x))},
        neumann={HEMKER_WALL: zero_scalar})
    goal = CombinedGoal([
        GoalFunctional("integrated_point", center=HEMKER_XE1, cutoff=cutoff_e1),
        GoalFunctional("integrated_point", center=HEMKER_XE2, cutoff=cutoff_e2)])
    return problem, goal


def manufactured_problem():
    """Smooth diffusion problem with a volume goal and known goal value:
    u = t x(1-x) y(1-y) on (0,1)^2 x (0, 0.5]."""

    def u_exact(x, t):
        x = np.atleast_2d(x)
        return t * x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1])

    def f(x, t):
        xx, yy = x[:, 0], x[:, 1]
        return xx * (1 - xx) * yy * (1 - yy) + 2 * t * (yy * (1 - yy) + xx * (1 - xx))

    problem = CdrProblem(epsilon=1.0, b=(0.0, 0.0), alpha=0.0, f=f,
                         u0=lambda x: np.zeros(len(x)), T=0.5,
                         dirichlet={i: zero_scalar for i in (1, 2, 3, 4)})
    goal = CombinedGoal([GoalFunctional("volume")])
    exact_goal = 0.5 ** 2 / 2.0 * (1.0 / 36.0)
    return problem, u_exact, goal, exact_goal


def extruded_problem():
    """1D-extruded case: solution and adjoint constant in direction 2.

    u = t x(1-x) with Dirichlet at x in {0,1} and homogeneous Neumann on the
    horizontal walls; the volume goal keeps the adjoint y-independent."""

    def f(x, t):
        return x[:, 0] * (1 - x[:, 0]) + 2 * t

    problem = CdrProblem(epsilon=1.0, b=(0.0, 0.0), alpha=0.0, f=f,
                         u0=lambda x: np.zeros(len(x)), T=0.5,
                         dirichlet={1: zero_scalar, 2: zero_scalar},
                         neumann={3: zero_scalar, 4: zero_scalar})
    goal = CombinedGoal([GoalFunctional("volume")])
    exact_goal = 0.5 ** 2 / 2.0 * (1.0 / 6.0)
    return problem, goal, exact_goal


# -- boundary layer postprocessing ---------------------------------------------


def boundary_layer_width(profile, lam_max=3.0, n_scan=600, lam_min=1e-10):
    """Width of the boundary layer along the wall normal.

    profile(lam) evaluates the solution at distance lam from the wall point
    along the outward normal.  Finds the outermost crossings of 0.9 and 0.1
    by a log-spaced scan plus bisection and returns their distance.
    """
    lams = np.geomspace(lam_min, lam_max, n_scan)
    vals = np.array([profile(l) for l in lams])

    def outermost_crossing(level):
        s = vals - level
        idx = np.nonzero(s[:-1] * s[1:] <= 0.0)[0]
        idx = [i for i in idx if s[i] != 0.0 or s[i + 1] != 0.0]
        if not idx:
            raise BracketingError(
                f"level {level} not bracketed along the normal ray "
                f"(profile range [{vals.min():.3g}, {vals.max():.3g}])")
        i = idx[-1]
        lo, hi = lams[i], lams[i + 1]
        flo = profile(lo) - level
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = profile(mid) - level
            if flo * fm <= 0.0:
                hi = mid
            else:
                lo, flo = mid, fm
            if hi - lo < 1e-16 + 1e-12 * hi:
                break
        return 0.5 * (lo + hi)

    lam09 = outermost_crossing(0.9)
    lam01 = outermost_crossing(0.1)
    return abs(lam01 - lam09)


def solution_normal_profile(space, coeffs, origin=HEMKER_WALL_POINT,
                            direction=None):
    """profile(lam) evaluating a FE field along the outward wall normal."""
    direction = direction if direction is not None else \
        (-2.0 ** -0.5, 2.0 ** -0.5)
    d = np.asarray(direction, dtype=float)
    o = np.asarray(origin, dtype=float)

    def profile(lam):
        return evaluate_field(space, coeffs, o + lam * d)

    return profile


def hemker_cutlines(space, coeffs, n_points=2000):
    """The two reference cut lines at final time: a vertical line through the
    interior layers at x = 4, and the boundary-normal ray at the wall point.

    Returns rows (line_id, parameter, x, y, value)."""
    rows = []
    ys = np.linspace(-3.0, 3.0, n_points)
    for y in ys:
        v = evaluate_field(space, coeffs, (4.0, y))
        rows.append((0, y, 4.0, y, v))
    o = np.asarray(HEMKER_WALL_POINT)
    d = np.asarray((-2.0 ** -0.5, 2.0 ** -0.5))
    lams = np.geomspace(1e-9, 3.0, n_points)
    for lam in lams:
        x = o + lam * d
        v = evaluate_field(space, coeffs, x)
        rows.append((1, lam, x[0], x[1], v))
    return rows
