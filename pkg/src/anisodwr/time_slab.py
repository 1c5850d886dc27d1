"""Forward primal and backward adjoint slab marching.

The primal problem is solved interval by interval (dG(0): one spatial system
per slab).  The adjoint of the linear stabilized scheme is the transpose of
the condensed slab operators swept backward, loaded by the goal derivative;
the adjoint space uses degree q = 2p on the same mesh with homogeneous
Dirichlet constraints.  Factorizations are cached per time-step size when
the coefficients are steady.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError
from .fe_space import FeSpace
from .forms import Assembler
from .geometry import MeshGeometry
from .goals import GoalAssembly
from .problem import zero_scalar


class TimePartition:
    """Strictly increasing time points 0 = t_0 < ... < t_N = T."""

    def __init__(self, t_points, r=0):
        t = np.asarray(t_points, dtype=float)
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("time points must be strictly increasing")
        self.t_points = t
        self.r = int(r)

    @classmethod
    def uniform(cls, T, n, r=0):
        return cls(np.linspace(0.0, T, n + 1), r=r)

    @property
    def n_intervals(self):
        return len(self.t_points) - 1

    @property
    def intervals(self):
        return list(zip(self.t_points[:-1], self.t_points[1:]))

    @property
    def taus(self):
        return np.diff(self.t_points)

    @property
    def midpoints(self):
        return 0.5 * (self.t_points[:-1] + self.t_points[1:])

    @property
    def n_time_dofs(self):
        return (self.r + 1) * self.n_intervals

    @property
    def T(self):
        return float(self.t_points[-1])

    def bisect(self, marked):
        """New partition with the marked intervals (0-based) halved."""
        pts = []
        marked = set(marked)
        for k, (a, b) in enumerate(self.intervals):
            pts.append(a)
            if k in marked:
                pts.append(0.5 * (a + b))
        pts.append(self.t_points[-1])
        return TimePartition(pts, r=self.r)


class SlabSolution:
    """Per-interval coefficient vectors of a dG(0) space-time field."""

    def __init__(self, space, partition, U, u0_full=None):
        self.space = space
        self.partition = partition
        self.U = U              # list of full DoF vectors, one per interval
        self.u0_full = u0_full  # initial trace (primal only)

    def end_value(self, k=None):
        return self.U[-1 if k is None else k]


def sparse_solve(matrix, rhs, method="direct", rtol=1e-10):
    """Solve one sparse system; deterministic for identical inputs."""
    rhs = np.asarray(rhs, dtype=float)
    if method == "direct":
        try:
            lu = spla.splu(sp.csc_matrix(matrix))
            x = lu.solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}")
        return x
    x, info = spla.gmres(sp.csr_matrix(matrix), rhs, rtol=rtol, maxiter=2000,
                         M=_ilu_preconditioner(matrix))
    if info != 0:
        raise SingularSystemError(f"iterative solver did not converge (info={info})")
    return x


def _ilu_preconditioner(matrix):
    ilu = spla.spilu(sp.csc_matrix(matrix), drop_tol=1e-5, fill_factor=20)
    return spla.LinearOperator(matrix.shape, ilu.solve)


class _SlabOperator:
    """Condensed slab matrices with factorization caching."""

    def __init__(self, space, assembler, problem):
        self.space = space
        self.asm = assembler
        self.problem = problem
        self._lu = {}
        self._mats = {}
        self._coupling_c = None

    def _key(self, tau, t):
        if self.problem.time_dependent_coefficients:
            return (round(tau, 15), round(t, 15))
        return round(tau, 15)

    def condensed(self, tau, t):
        """(K_raw, K_c, B_raw, B_c) for time step tau at data time t."""
        key = self._key(tau, t)
        hit = self._mats.get(key)
        if hit is None:
            A, S, M, Mb = self.asm.element_matrices(t)
            K_raw = self.asm.scatter_matrix(M + Mb + tau * (A + S))
            B_raw = self.asm.scatter_matrix(M + Mb)
            C = self.space.C
            K_c = (C.T @ K_raw @ C).tocsc()
            B_c = (C.T @ B_raw @ C).tocsr()
            hit = (K_raw, K_c, B_raw, B_c)
            self._mats[key] = hit
        return hit

    def factor(self, tau, t, transpose=False):
        key = (self._key(tau, t), transpose)
        lu = self._lu.get(key)
        if lu is None:
            _K_raw, K_c, _B, _Bc = self.condensed(tau, t)
            mat = K_c.T.tocsc() if transpose else K_c
            try:
                lu = spla.splu(mat)
            except RuntimeError as exc:
                raise SingularSystemError(f"slab factorization failed: {exc}")
            self._lu[key] = lu
        return lu


def solve_primal(problem, mesh, partition, p=1, delta0=0.0, nq=None,
                 space=None, assembler=None, method="direct"):
    """March the stabilized primal problem over all slabs."""
    if partition.r != 0:
        raise NotImplementedError("dG(r) solves are implemented for r = 0")
    if space is None:
        space = FeSpace(mesh, p, dirichlet=problem.dirichlet)
    if assembler is None:
        nq = nq if nq is not None else 2 * p + 1
        assembler = Assembler(space, problem, delta0=delta0, nq=nq)
    op = _SlabOperator(space, assembler, problem)
    u0_full = space.interpolate(problem.u0)
    U = []
    u_prev = u0_full
    for k, (t0, t1) in enumerate(partition.intervals):
        tau = t1 - t0
        try:
            K_raw, _K_c, B_raw, _B_c = op.condensed(tau, t1)
            rhs = assembler.scatter_vector(assembler.slab_loads((t0, t1)))
            rhs += B_raw @ u_prev
            C, g = space.prolongation(t1)
            rhs_c = C.T @ (rhs - K_raw @ g)
            if method == "direct":
                u_free = op.factor(tau, t1).solve(rhs_c)
            else:
                _K_raw, K_c, _B, _Bc = op.condensed(tau, t1)
                u_free = sparse_solve(K_c, rhs_c, method=method)
        except SingularSystemError as exc:
            raise SingularSystemError(str(exc), slab_index=k)
        u_full = C @ u_free + g
        U.append(u_full)
        u_prev = u_full
    return SlabSolution(space, partition, U, u0_full=u0_full)


def solve_adjoint(problem, mesh, partition, goal, p=1, delta0=0.0, nq=None,
                  primal=None, space=None, assembler=None, goal_assembly=None,
                  method="direct"):
    """Backward sweep of the transposed stabilized operator, loaded by J'.

    For the linear equation and linear(ized) goals the adjoint slab operator
    is the transpose of the primal one on the degree-2p space; the primal
    solution is only needed for goal linearization and may be omitted.
    """
    if partition.r != 0:
        raise NotImplementedError("dG(r) solves are implemented for r = 0")
    q = 2 * p
    if space is None:
        hom = {bid: zero_scalar for bid in problem.dirichlet}
        space = FeSpace(mesh, q, dirichlet=hom)
    if assembler is None:
        nq = nq if nq is not None else 2 * p + 1
        assembler = Assembler(space, problem, delta0=delta0, nq=nq)
    if goal_assembly is None:
        goal_assembly = GoalAssembly(goal, space, partition, geo=assembler.geo)
    op = _SlabOperator(space, assembler, problem)
    N = partition.n_intervals
    C = space.C
    Z = [None] * N
    z_next_free = np.zeros(space.n_free)
    for k in range(N - 1, -1, -1):
        t0, t1 = partition.intervals[k]
        tau = t1 - t0
        try:
            _K_raw, _K_c, _B_raw, B_c = op.condensed(tau, t1)
            j = goal_assembly.load_vector(k)
            rhs_c = C.T @ j
            if k < N - 1:
                rhs_c = rhs_c + B_next.T @ z_next_free
            if method == "direct":
                z_free = op.factor(tau, t1, transpose=True).solve(rhs_c)
            else:
                _Kr, K_c, _B, _Bc = op.condensed(tau, t1)
                z_free = sparse_solve(K_c.T.tocsr(), rhs_c, method=method)
        except SingularSystemError as exc:
            raise SingularSystemError(str(exc), slab_index=k)
        Z[k] = C @ z_free
        z_next_free = z_free
        B_next = B_c
    return SlabSolution(space, partition, Z)
