"""Goal functionals: mollified point values, volume integrals, and their
weighted combination driving a single adjoint solve.

Point values are regularized by the compactly supported bump
delta(x) = alpha * exp(1 - 1/(1 - r^2/s^2)), r = |x - c|, scaled so the bump
integrates to one.  All pairings with the bump use a fixed polar Gauss rule
on the support disk, so the unit-mass property holds to quadrature accuracy
on any mesh.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PointNotFoundError, PreconditionError
from .geometry import MeshGeometry, inverse_map, locate_points
from .quadrature import gauss_legendre

# pi * e * E_2(1): integral of exp(1 - 1/(1-rho^2)) over the unit disk
BUMP_MASS_CONST = 1.268112161127595


class MollifiedDelta:
    """Smooth unit-mass bump with support in the disk of radius s around c."""

    def __init__(self, center, cutoff):
        if cutoff <= 0:
            raise ValueError("cutoff radius must be positive")
        self.c = np.asarray(center, dtype=float).reshape(2)
        self.s = float(cutoff)
        self.alpha = 1.0 / (BUMP_MASS_CONST * self.s ** 2)

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = ((x - self.c) ** 2).sum(axis=-1) / self.s ** 2
        out = np.zeros(len(x))
        inside = r2 < 1.0
        out[inside] = self.alpha * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out


def mollifier_value(m: MollifiedDelta, x):
    """Bump value at a single point (spec operation)."""
    return float(m.value(np.asarray(x, dtype=float).reshape(1, 2))[0])


@dataclass
class GoalFunctional:
    """One quantity of interest.

    kind 'terminal_point'   : J(u) = (delta_c, u(T))
    kind 'integrated_point' : J(u) = int_window (delta_c, u(t)) dt
    kind 'volume'           : J(u) = int_window int_D u dx dt
    """

    kind: str
    center: Optional[tuple] = None
    cutoff: float = 0.0
    window: Optional[tuple] = None
    box: Optional[tuple] = None  # ((x0,x1),(y0,y1)) subdomain for 'volume'

    def __post_init__(self):
        if self.kind not in ("terminal_point", "integrated_point", "volume"):
            raise ValueError(f"unknown goal kind {self.kind!r}")
        if self.kind != "volume":
            if self.center is None or self.cutoff <= 0:
                raise ValueError("point goals need a center and cutoff > 0")
            self.mollifier = MollifiedDelta(self.center, self.cutoff)
        else:
            self.mollifier = None


@dataclass
class CombinedGoal:
    goals: list
    weights: list = field(default_factory=list)

    def __post_init__(self):
        if not self.goals:
            raise ValueError("need at least one goal")
        if not self.weights:
            self.weights = [1.0] * len(self.goals)
        if len(self.weights) != len(self.goals):
            raise ValueError("one weight per goal required")
        self.weights = [float(w) for w in self.weights]
        if not all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


def combine(goals, weights=None):
    return CombinedGoal(list(goals), list(weights) if weights is not None else [])


class PointSourceQuad:
    """Polar Gauss rule on a mollifier's support disk, located on a mesh.

    Weights include both the bump value and the polar Jacobian, so
    sum(w) == 1 up to the radial quadrature error.  Points falling outside
    the mesh are dropped with a warning (clipped quadrature).
    """

    def __init__(self, mesh, mollifier, nr=24, ntheta=48):
        self._mesh = mesh
        rho, wr = gauss_legendre(nr)
        theta = (np.arange(ntheta) + 0.5) * (2 * np.pi / ntheta)
        R, T = np.meshgrid(rho, theta, indexing="ij")
        pts = mollifier.c + mollifier.s * np.stack(
            [R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
        bump = np.exp(1.0 - 1.0 / (1.0 - rho ** 2))
        wfull = (mollifier.alpha * mollifier.s ** 2 * (2 * np.pi / ntheta)
                 * (wr * rho * bump)[:, None] * np.ones(ntheta)[None, :]).ravel()
        located = locate_points(mesh, pts, on_missing="none")
        cells, refs, ws = [], [], []
        dropped = 0
        for hit, w in zip(located, wfull):
            if hit is None:
                dropped += 1
                continue
            cells.append(hit[0])
            refs.append(hit[1])
            ws.append(w)
        if dropped:
            warnings.warn(f"mollifier support clipped: {dropped} of {len(pts)} "
                          "quadrature points outside the mesh", RuntimeWarning)
        self.cells = np.asarray(cells, dtype=np.int64)
        self.refs = np.asarray(refs, dtype=float)
        self.w = np.asarray(ws, dtype=float)
        self.mass = float(self.w.sum())

    def load_vector(self, space):
        """Raw load vector L_i = sum_q w_q phi_i(x_q)."""
        out = np.zeros(space.n_dofs)
        pos = {cid: k for k, cid in enumerate(space.cell_ids)}
        vals, _ = space.elem.tabulate(self.refs)
        for q, cid in enumerate(self.cells):
            out[space.cell_dofs[pos[cid]]] += self.w[q] * vals[q]
        return out

    def cell_entries(self, space):
        """[(cell position, local load vector)] for localized pairings."""
        pos = {cid: k for k, cid in enumerate(space.cell_ids)}
        vals, _ = space.elem.tabulate(self.refs)
        acc = {}
        for q, cid in enumerate(self.cells):
            k = pos[cid]
            acc.setdefault(k, np.zeros(space.elem.n_dofs))
            acc[k] += self.w[q] * vals[q]
        return sorted(acc.items())

    def eval_function(self, fn):
        """sum_q w_q fn(x_q) for a callable of physical points (N,2)->(N,)."""
        return float(self.w @ fn(self.points()))

    def points(self):
        """Physical quadrature points, mapped back through the cell geometry."""
        from .geometry import _cell_nodes_and_degree
        from .reference import reference_element

        out = np.empty((len(self.cells), 2))
        for q, (cid, xi) in enumerate(zip(self.cells, self.refs)):
            nodes, deg = _cell_nodes_and_degree(self._mesh, cid)
            vals, _ = reference_element(deg, deg).tabulate(xi.reshape(1, 2))
            out[q] = vals[0] @ nodes
        return out


def volume_load_cellwise(space, box=None, nq=None, geo=None):
    """Cellwise load (E, nd) of int_D phi_i dx, D the optional box."""
    geo = geo if geo is not None else MeshGeometry(space.mesh, nq or 2 * space.p + 1)
    vals, _ = space.elem.tabulate(geo.qpoints)
    w = geo.w
    if box is not None:
        (x0, x1), (y0, y1) = box
        ind = ((geo.xq[..., 0] >= x0) & (geo.xq[..., 0] <= x1)
               & (geo.xq[..., 1] >= y0) & (geo.xq[..., 1] <= y1))
        w = w * ind
    return np.einsum("eq,qn->en", w, vals)


def _overlap(interval, window):
    if window is None:
        return interval[1] - interval[0]
    lo = max(interval[0], window[0])
    hi = min(interval[1], window[1])
    return max(hi - lo, 0.0)


class GoalAssembly:
    """Loads and evaluations of a combined goal on one FE space/partition."""

    def __init__(self, goal: CombinedGoal, space, partition, geo=None):
        self.goal = goal
        self.space = space
        self.partition = partition
        self._loads = []       # raw load vectors per goal
        self._cellwise = []    # cellwise entries per goal
        for g in goal.goals:
            if g.kind == "volume":
                cw = volume_load_cellwise(space, box=g.box, geo=geo)
                vec = np.zeros(space.n_dofs)
                np.add.at(vec, space.cell_dofs.ravel(), cw.ravel())
                self._loads.append(vec)
                self._cellwise.append([(k, cw[k]) for k in range(cw.shape[0])
                                       if np.any(cw[k])])
            else:
                psq = PointSourceQuad(space.mesh, g.mollifier)
                self._loads.append(psq.load_vector(space))
                self._cellwise.append(psq.cell_entries(space))

    def _slab_factor(self, g, k):
        """Weighting of slab k (0-based) in the goal: tau-overlap for
        integrated kinds, 1 on the last slab for terminal kinds."""
        iv = self.partition.intervals[k]
        if g.kind == "terminal_point":
            return 1.0 if k == self.partition.n_intervals - 1 else 0.0
        return _overlap(iv, g.window)

    def load_vector(self, k):
        """Adjoint right-hand side contribution of slab k (raw DoF vector)."""
        out = np.zeros(self.space.n_dofs)
        for g, w, vec in zip(self.goal.goals, self.goal.weights, self._loads):
            fac = self._slab_factor(g, k)
            if fac:
                out += w * fac * vec
        return out

    def _accumulate(self, factors, cellwise_field):
        out = np.zeros(cellwise_field.shape[0])
        for fac, entries in zip(factors, self._cellwise):
            if not fac:
                continue
            for pos, load in entries:
                out[pos] += fac * (load @ cellwise_field[pos])
        return out

    def cell_pairs_integrated(self, k, cellwise_field):
        """Localized J' of slab k for time-integrated kinds, including the
        window-overlap factor: (E,) per-cell contributions."""
        factors = [w * self._slab_factor(g, k) if g.kind != "terminal_point"
                   else 0.0
                   for g, w in zip(self.goal.goals, self.goal.weights)]
        return self._accumulate(factors, cellwise_field)

    def cell_pairs_terminal(self, cellwise_field):
        """Localized J' for terminal kinds (applied on the last slab only)."""
        factors = [w if g.kind == "terminal_point" else 0.0
                   for g, w in zip(self.goal.goals, self.goal.weights)]
        return self._accumulate(factors, cellwise_field)

    def cell_pairs_reconstruction(self, k, slope_field):
        """J'(E u - u) on slab k for integrated kinds: pairs the reconstruction
        slope with the first moment of (t - m_k) over the clipped window.
        Zero whenever the window covers the whole interval."""
        t0, t1 = self.partition.intervals[k]
        m = 0.5 * (t0 + t1)
        factors = []
        for g, w in zip(self.goal.goals, self.goal.weights):
            if g.kind == "terminal_point" or g.window is None:
                factors.append(0.0)
                continue
            lo = max(t0, g.window[0])
            hi = min(t1, g.window[1])
            if hi <= lo:
                factors.append(0.0)
            else:
                factors.append(w * 0.5 * ((hi - m) ** 2 - (lo - m) ** 2))
        if not any(factors):
            return 0.0
        return self._accumulate(factors, slope_field)

    def evaluate(self, solution):
        """J_w(u_h) for a slab solution (right-box rule in time)."""
        total = 0.0
        for g, w, vec in zip(self.goal.goals, self.goal.weights, self._loads):
            if g.kind == "terminal_point":
                total += w * float(vec @ solution.U[-1])
            else:
                for k in range(self.partition.n_intervals):
                    fac = self._slab_factor(g, k)
                    if fac:
                        total += w * fac * float(vec @ solution.U[k])
        return total

    def evaluate_per_goal(self, solution):
        vals = []
        for g, vec in zip(self.goal.goals, self._loads):
            if g.kind == "terminal_point":
                vals.append(float(vec @ solution.U[-1]))
            else:
                vals.append(sum(self._slab_factor(g, k) * float(vec @ solution.U[k])
                                for k in range(self.partition.n_intervals)))
        return vals


def evaluate_goal(g: GoalFunctional, solution, space=None, partition=None):
    """J(u_h) for a single goal functional (spec operation)."""
    space = space or solution.space
    partition = partition or solution.partition
    ga = GoalAssembly(CombinedGoal([g]), space, partition)
    return ga.evaluate(solution)


def goal_load(cg: CombinedGoal, space, partition, k):
    """Adjoint load vector of slab k for a combined goal (spec operation)."""
    return GoalAssembly(cg, space, partition).load_vector(k)


def exact_goal_value(goal: CombinedGoal, mesh, fn_xt, T, time_points=32):
    """J_w(u) for a known space-time function, via the mollifier quadrature
    and Gauss time integration (reference values for effectivity indices)."""
    total = 0.0
    for g, w in zip(goal.goals, goal.weights):
        if g.kind == "volume":
            geo = MeshGeometry(mesh, 4)
            tq, tw = gauss_legendre(time_points)
            w0, w1 = g.window if g.window else (0.0, T)
            for t, wt in zip(w0 + tq * (w1 - w0), tw * (w1 - w0)):
                wq = geo.w
                if g.box is not None:
                    (x0, x1), (y0, y1) = g.box
                    ind = ((geo.xq[..., 0] >= x0) & (geo.xq[..., 0] <= x1)
                           & (geo.xq[..., 1] >= y0) & (geo.xq[..., 1] <= y1))
                    wq = wq * ind
                total += w * wt * float(
                    (wq * fn_xt(geo.xq.reshape(-1, 2), t).reshape(wq.shape)).sum())
            continue
        psq = PointSourceQuad(mesh, g.mollifier)
        pts = psq.points()
        if g.kind == "terminal_point":
            total += w * float(psq.w @ fn_xt(pts, T))
        else:
            tq, tw = gauss_legendre(time_points)
            w0, w1 = g.window if g.window else (0.0, T)
            for t, wt in zip(w0 + tq * (w1 - w0), tw * (w1 - w0)):
                total += w * wt * float(psq.w @ fn_xt(pts, t))
    return total
