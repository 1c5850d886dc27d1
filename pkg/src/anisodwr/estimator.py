"""DWR error estimators in time and per spatial direction.

Temporal weights come from a piecewise-linear reconstruction through the
interval-midpoint values of the dG(0) solution.  Spatial weights combine a
degree restriction R_h (2p -> p), directional restrictions R_i (degree p in
direction i only), and a patchwise higher-order interpolation on 2h parents.
The directional interpolation keeps the 2h lift in direction i and restricts
the complementary direction to degree p on each child, so the two
directional weights telescope to the full patch weight up to the mixed
(higher-order) remainder, which is omitted.

All residual pairings reuse the assembler's quadrature tables, so the
localized contributions sum to the global values exactly and Galerkin
orthogonality transfers to round-off.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import PreconditionError
from .forms import Assembler
from .goals import GoalAssembly
from .mesh import build_patches
from .reference import reference_element
from .quadrature import lagrange_1d


# -- time reconstruction ------------------------------------------------------


class TimeReconstruction:
    """Per-interval linear-in-time lift of a dG(0) field through midpoints.

    On I_n the polynomial interpolates the values at the midpoints of I_n and
    I_{n+1} (one-sided at the final interval).  A single-interval partition
    degenerates to the identity and is flagged."""

    def __init__(self, partition, values):
        self.partition = partition
        self.values = values
        self.degenerate = partition.n_intervals < 2
        mids = partition.midpoints
        N = partition.n_intervals
        self.slopes = []
        for k in range(N):
            if self.degenerate:
                self.slopes.append(np.zeros_like(values[0]))
            elif k < N - 1:
                self.slopes.append((values[k + 1] - values[k]) / (mids[k + 1] - mids[k]))
            else:
                self.slopes.append((values[N - 1] - values[N - 2])
                                   / (mids[N - 1] - mids[N - 2]))

    def interval_of(self, t):
        pts = self.partition.t_points
        k = int(np.searchsorted(pts, t, side="left")) - 1
        return min(max(k, 0), self.partition.n_intervals - 1)

    def eval(self, t):
        k = self.interval_of(t)
        m = self.partition.midpoints[k]
        return self.values[k] + self.slopes[k] * (t - m)


def reconstruct_in_time(solution, r=0):
    """Degree-(r+1) temporal lift of a slab solution (r = 0 implemented)."""
    if r != 0:
        raise NotImplementedError("reconstruction implemented for r = 0")
    return TimeReconstruction(solution.partition, solution.U)


# -- element-level restriction / interpolation operators ----------------------


def _restrict_1d(nodes_hi, nodes_lo):
    """Matrix mapping values at nodes_hi to values (at nodes_hi) of the
    lower-degree interpolant through nodes_lo."""
    S, _, _ = lagrange_1d(nodes_hi, nodes_lo)    # evaluate hi-basis at lo nodes
    E, _, _ = lagrange_1d(nodes_lo, nodes_hi)    # evaluate lo-basis at hi nodes
    return E @ S


class PatchOperators:
    """All cellwise operator matrices for primal degree p (adjoint 2p)."""

    _SLOT_TABLE = {
        (2, 2): ((0.0, 0.0, 0.5, 0.5), (0.5, 0.0, 0.5, 0.5),
                 (0.0, 0.5, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5)),
        (2, 1): ((0.0, 0.0, 0.5, 1.0), (0.5, 0.0, 0.5, 1.0)),
        (1, 2): ((0.0, 0.0, 1.0, 0.5), (0.0, 0.5, 1.0, 0.5)),
    }

    def __init__(self, p):
        self.p = p
        q = 2 * p
        self.elem_p = reference_element(p, p)
        self.elem_q = reference_element(q, q)
        self.embed = self.elem_p.tabulate(self.elem_q.nodes)[0]      # (nq2, ndp)
        sel = self.elem_q.tabulate(self.elem_p.nodes)[0]             # (ndp, nq2)
        self.restrict_h = self.embed @ sel                           # (nq2, nq2)
        B = _restrict_1d(self.elem_q.nodes_1d[0], self.elem_p.nodes_1d[0])
        eye = np.eye(q + 1)
        self.restrict_dir = {1: np.kron(eye, B), 2: np.kron(B, eye)}
        self._patch = {}
        for shape, slots in self._SLOT_TABLE.items():
            d1 = q if shape[0] == 2 else p
            d2 = q if shape[1] == 2 else p
            pelem = reference_element(d1, d2)
            gather = []
            for node in pelem.nodes:
                for si, (ox, oy, sx, sy) in enumerate(slots):
                    lx = (node[0] - ox) / sx
                    ly = (node[1] - oy) / sy
                    if -1e-12 <= lx <= 1 + 1e-12 and -1e-12 <= ly <= 1 + 1e-12:
                        vals = self.elem_p.tabulate(
                            np.array([[min(max(lx, 0.0), 1.0),
                                       min(max(ly, 0.0), 1.0)]]))[0][0]
                        gather.append((si, vals))
                        break
            G = np.zeros((pelem.n_dofs, len(slots), self.elem_p.n_dofs))
            for n, (si, vals) in enumerate(gather):
                G[n, si] = vals
            evals = []
            for ox, oy, sx, sy in slots:
                pts = np.column_stack([ox + sx * self.elem_q.nodes[:, 0],
                                       oy + sy * self.elem_q.nodes[:, 1]])
                evals.append(pelem.tabulate(pts)[0])                 # (nq2, npn)
            self._patch[shape] = (G, evals)

    def embed_cellwise(self, space_p, vec):
        """Primal DoF vector -> cellwise degree-2p local values (E, nq2)."""
        return vec[space_p.cell_dofs] @ self.embed.T

    def patch_interpolate(self, Uc_embedded, Uloc_p, patchset, cell_pos):
        """Cellwise values of I_2h u: the 2h interpolant evaluated at each
        child's degree-2p nodes.  Exception cells keep the identity."""
        B = Uc_embedded.copy()
        groups = {}
        for pidx, (parent, children, shape) in enumerate(patchset.patches):
            groups.setdefault(shape, []).append(children)
        for shape, childlists in groups.items():
            G, evals = self._patch[shape]
            pos = np.array([[cell_pos[c] for c in children]
                            for children in childlists])             # (np, nc)
            Uloc = Uloc_p[pos]                                       # (np, nc, ndp)
            patchvals = np.einsum("ncd,pcd->pn", G, Uloc)            # (np, npn)
            for si in range(pos.shape[1]):
                B[pos[:, si]] = patchvals @ evals[si].T
        return B

    def directional_weight(self, B, Uc, direction):
        """w2 = I_{2h,i} u - u: keep the 2h lift in `direction`, restrict the
        complementary direction to degree p per child."""
        other = 2 if direction == 1 else 1
        return B @ self.restrict_dir[other].T - Uc


# -- spec-level operator wrappers ---------------------------------------------


def restrict_degree(space_q, space_p, z):
    """R_h^p: global degree-2p vector -> degree-p vector by nodal interpolation
    (single-valued on shared nodes by continuity)."""
    ops = PatchOperators(space_p.p)
    sel = ops.elem_q.tabulate(ops.elem_p.nodes)[0]
    out = np.empty(space_p.n_dofs)
    vals = z[space_q.cell_dofs] @ sel.T
    for k in range(len(space_p.cell_dofs)):
        out[space_p.cell_dofs[k]] = vals[k]
    return out


def restrict_directional(space_q, z, direction):
    """R_i^p: degree p in direction i, degree 2p kept in the other; returns a
    vector in the same degree-2p space."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    p = space_q.p // 2
    if 2 * p != space_q.p:
        raise PreconditionError("directional restriction expects an even degree")
    ops = PatchOperators(p)
    out = np.empty_like(z)
    vals = z[space_q.cell_dofs] @ ops.restrict_dir[direction].T
    for k in range(len(space_q.cell_dofs)):
        out[space_q.cell_dofs[k]] = vals[k]
    return out


def interpolate_patch(u, patchset, space_p, direction=None):
    """I_2h^(2p) u (direction None) or I_{2h,i}^(2p) u - as cellwise values on
    the degree-2p element of each active cell."""
    ops = PatchOperators(space_p.p)
    cell_pos = {cid: k for k, cid in enumerate(space_p.cell_ids)}
    Uloc = u[space_p.cell_dofs]
    Uc = Uloc @ ops.embed.T
    B = ops.patch_interpolate(Uc, Uloc, patchset, cell_pos)
    if direction is None:
        return B
    other = 2 if direction == 1 else 1
    return B @ ops.restrict_dir[other].T


# -- indicator field -----------------------------------------------------------


class ErrorIndicatorField:
    """Localized eta_tau^{K,n} and eta_{h,i}^{K,n} plus aggregates."""

    def __init__(self, cell_ids, partition, eta_tau_local, eta_h_local,
                 degenerate_reconstruction=False):
        self.cell_ids = cell_ids
        self.partition = partition
        self.eta_tau_local = eta_tau_local      # (E, N)
        self.eta_h_local = eta_h_local          # dict direction -> (E, N)
        self.degenerate_reconstruction = degenerate_reconstruction

    @property
    def eta_tau(self):
        return float(self.eta_tau_local.sum())

    def eta_h_dir(self, i):
        return float(self.eta_h_local[i].sum())

    @property
    def eta_h(self):
        return self.eta_h_dir(1) + self.eta_h_dir(2)

    @property
    def eta_tauh(self):
        return self.eta_tau + self.eta_h

    def aggregate_cells(self):
        """Signed per-cell, per-direction sums over all intervals (E, 2)."""
        return np.column_stack([self.eta_h_local[1].sum(axis=1),
                                self.eta_h_local[2].sum(axis=1)])

    def aggregate_intervals(self):
        """Signed per-interval sums over all cells (N,)."""
        return self.eta_tau_local.sum(axis=0)


def effectivity_index(eta, exact_goal_error):
    """|eta_tauh / exact error|; NaN when the exact error vanishes."""
    total = eta.eta_tauh if isinstance(eta, ErrorIndicatorField) else float(eta)
    if exact_goal_error == 0.0 or not np.isfinite(exact_goal_error):
        return float("nan")
    return abs(total / exact_goal_error)


# -- main computation -----------------------------------------------------------


def compute_indicators(problem, goal, primal, adjoint, delta0=0.0,
                       adjoint_assembler=None, goal_assembly=None,
                       patchset=None):
    """Evaluate the localized space-time error indicators.

    primal lives in degree p, adjoint in degree 2p on the same mesh and
    partition.  Returns an ErrorIndicatorField.
    """
    space_p, space_q = primal.space, adjoint.space
    partition = primal.partition
    if space_q.p != 2 * space_p.p:
        raise PreconditionError("adjoint space must have degree 2p")
    asm = adjoint_assembler
    if asm is None:
        asm = Assembler(space_q, problem, delta0=delta0, nq=2 * space_p.p + 1)
    ga = goal_assembly
    if ga is None:
        ga = GoalAssembly(goal, space_q, partition, geo=asm.geo)
    if patchset is None:
        patchset = build_patches(space_p.mesh)

    ops = PatchOperators(space_p.p)
    cell_pos = {cid: k for k, cid in enumerate(space_p.cell_ids)}
    N = partition.n_intervals
    E = len(space_p.cell_ids)
    taus = partition.taus

    # cellwise fields, everything expressed on the degree-2p element
    Uc = [ops.embed_cellwise(space_p, primal.U[k]) for k in range(N)]
    U0c = ops.embed_cellwise(space_p, primal.u0_full)
    Zc = [adjoint.U[k][space_q.cell_dofs] for k in range(N)]
    Bp = [ops.patch_interpolate(Uc[k], primal.U[k][space_p.cell_dofs],
                                patchset, cell_pos) for k in range(N)]

    rec_u = TimeReconstruction(partition, Uc)
    rec_z = TimeReconstruction(partition, Zc)

    eta_tau_loc = np.zeros((E, N))
    eta_h_loc = {1: np.zeros((E, N)), 2: np.zeros((E, N))}
    Rh = ops.restrict_h
    pair = kernels.pair_cellwise

    w2_prev = {1: None, 2: None}
    for k in range(N):
        t0, t1 = partition.intervals[k]
        tau = taus[k]
        m = 0.5 * (t0 + t1)
        A, S, M, Mb = asm.element_matrices(t1)
        samples = asm.slab_load_samples((t0, t1))
        load_int = sum(w * (F + Neu) for _t, w, F, _Fb, Neu in samples)
        load_fb = sum(w * Fb for _t, w, _F, Fb, _Neu in samples)
        jumpU = Uc[k] - (Uc[k - 1] if k > 0 else U0c)

        # temporal estimator
        wzP = -0.5 * tau * rec_z.slopes[k]
        su = rec_u.slopes[k]
        sz = rec_z.slopes[k]
        wuP = -0.5 * tau * su
        jumpWU = wuP - (0.5 * taus[k - 1] * rec_u.slopes[k - 1] if k > 0 else 0.0)
        # data terms paired with the linear-in-time weight E z - z
        t_terms = sum((w * (t - m)) * np.einsum("en,en->e", F + Neu, sz)
                      for t, w, F, _Fb, Neu in samples)
        t_terms -= pair(M, wzP, jumpU)
        t_terms -= tau * pair(M, Zc[k], su) + pair(M, Zc[k], jumpWU)
        t_terms = t_terms + ga.cell_pairs_reconstruction(k, su)
        if k == N - 1:
            t_terms = t_terms + ga.cell_pairs_terminal(0.5 * tau * su)
        eta_tau_loc[:, k] = 0.5 * t_terms

        # directional spatial estimators
        RHz = Zc[k] @ Rh.T
        for i in (1, 2):
            RIz = Zc[k] @ ops.restrict_dir[i].T
            w1 = Zc[k] - RIz
            w2 = ops.directional_weight(Bp[k], Uc[k], i)
            jumpW2 = w2 - (w2_prev[i] if k > 0 else 0.0)
            rho = (np.einsum("en,en->e", load_int, w1)
                   - tau * pair(A, w1, Uc[k]) - pair(M, w1, jumpU))
            rho_star = (ga.cell_pairs_integrated(k, w2)
                        - tau * pair(A, RHz, w2) - pair(M, RHz, jumpW2))
            if k == N - 1:
                rho_star = rho_star + ga.cell_pairs_terminal(w2)
            s_term = (tau * pair(S, RIz, Uc[k])
                      - np.einsum("en,en->e", load_fb, RIz)
                      + pair(Mb, RIz, jumpU))
            s_prime = tau * pair(S, RHz, w2) + pair(Mb, RHz, jumpW2)
            eta_h_loc[i][:, k] = 0.5 * (rho + rho_star + s_term + s_prime)
            w2_prev[i] = w2

    return ErrorIndicatorField(list(space_p.cell_ids), partition, eta_tau_loc,
                               eta_h_loc,
                               degenerate_reconstruction=rec_u.degenerate)


def eta_tau(problem, goal, primal, adjoint, delta0=0.0, **kw):
    """Global temporal estimator and its (cell, interval) localization."""
    field = compute_indicators(problem, goal, primal, adjoint, delta0, **kw)
    return field.eta_tau, field.eta_tau_local


def eta_h_directional(problem, goal, primal, adjoint, i, delta0=0.0, **kw):
    """Global directional spatial estimator and its localization."""
    field = compute_indicators(problem, goal, primal, adjoint, delta0, **kw)
    return field.eta_h_dir(i), field.eta_h_local[i]
