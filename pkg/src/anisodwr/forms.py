"""Assembly of the slab-local algebraic systems.

dG(0) in time with coefficients frozen at the right endpoint makes each slab
an implicit-Euler-type system

    [(M + Mb) + tau_n (A + S)] u_n = L_n + (M + Mb) u_{n-1}

where A is the inner convection-diffusion-reaction form, M the mass matrix,
and S, Mb the SUPG companions weighted by delta_K = delta0 |K|^{1/d}.  The
load L_n integrates the source and Neumann data in time with a 2-point Gauss
rule per interval, so the scheme still sees the temporal variation of the
data (a pure right-box load would hide that error from the temporal
estimator).  One spatial quadrature rule (2p+1 points per direction by
default) and the same time rule are shared by the solver and the error
estimator so that the discrete residual identities hold to round-off.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import PreconditionError
from .geometry import MeshGeometry
from .mesh import EDGE_DEFS
from .quadrature import gauss_legendre


def time_gauss(interval, n=2):
    """Gauss points/weights on one time interval (weights sum to tau)."""
    x, w = gauss_legendre(n)
    t0, t1 = interval
    return t0 + (t1 - t0) * x, (t1 - t0) * w


class SlabSystem:
    """Raw (unconstrained) matrix and right-hand side for one time interval."""

    def __init__(self, matrix, rhs, interval, coupling):
        self.matrix = matrix
        self.rhs = rhs
        self.interval = interval
        self.coupling = coupling  # (M + Mb) global matrix multiplying u_{n-1}


class Assembler:
    """Precomputed geometry/shape tables plus element-matrix assembly for one
    finite element space.

    The cellwise tables (element matrices, loads) are also consumed directly
    by the error estimator, which evaluates residual pairings cell by cell
    with the identical quadrature data.
    """

    def __init__(self, space, problem, delta0=0.0, nq=None, geo=None):
        self.space = space
        self.problem = problem
        self.delta0 = float(delta0)
        p = space.p
        self.nq = nq if nq is not None else 2 * p + 1
        self.geo = geo if geo is not None else MeshGeometry(space.mesh, self.nq)
        if self.geo.nq != self.nq:
            raise PreconditionError("geometry quadrature does not match")
        vals, grads, hess = space.elem.tabulate(self.geo.qpoints, hessians=True)
        self.val = vals
        self.gphys = self.geo.physical_gradients(grads)
        self.lap = self.geo.physical_laplacians(grads, hess, self.gphys)
        self.delta = self.delta0 * np.sqrt(self.geo.areas)
        self._mat_cache = {}
        self._nd = space.elem.n_dofs
        E = len(self.geo.cell_ids)
        rows = np.repeat(space.cell_dofs, self._nd, axis=1).ravel()
        cols = np.tile(space.cell_dofs, (1, self._nd)).ravel()
        self._scatter_rows = rows
        self._scatter_cols = cols
        self._E = E

    # -- coefficient evaluation ---------------------------------------------

    def _coeffs_at(self, t):
        x = self.geo.xq.reshape(-1, 2)
        bq = self.problem.b(x, t).reshape(self._E, -1, 2)
        aq = self.problem.check_reaction_sign(x, t).reshape(self._E, -1)
        return bq, aq

    def source_at(self, t):
        x = self.geo.xq.reshape(-1, 2)
        return self.problem.f(x, t).reshape(self._E, -1)

    # -- cellwise tables ------------------------------------------------------

    def element_matrices(self, t):
        """(A, S, M, Mb) element matrices; cached for steady coefficients."""
        key = float(t) if self.problem.time_dependent_coefficients else "steady"
        hit = self._mat_cache.get(key)
        if hit is None:
            bq, aq = self._coeffs_at(t)
            hit = kernels.cdr_cell_matrices(
                self.geo.w, bq, aq, self.problem.epsilon, self.delta,
                self.val, self.gphys, self.val, self.gphys, self.lap)
            self._mat_cache[key] = hit
            self._bq_cache = bq
        return hit

    def element_loads(self, t):
        """(F, Fb) cellwise load vectors for the source at time t."""
        bq, _ = self._coeffs_at(t)
        fq = self.source_at(t)
        return kernels.cdr_cell_loads(self.geo.w, bq, fq, self.delta, self.val,
                                      self.gphys)

    def slab_load_samples(self, interval, n_time=2):
        """[(t_g, w_g, F_g, Fb_g, Neu_g)] at the Gauss times of the interval;
        the w_g sum to tau."""
        tg, wg = time_gauss(interval, n_time)
        out = []
        for t, w in zip(tg, wg):
            F, Fb = self.element_loads(t)
            out.append((t, w, F, Fb, self.neumann_cellwise(t)))
        return out

    def slab_loads(self, interval, n_time=2):
        """Time-integrated cellwise load of one slab:
        int_I (f, phi + delta b.grad phi) dt + Neumann terms, shape (E, nd)."""
        acc = None
        for _t, w, F, Fb, Neu in self.slab_load_samples(interval, n_time):
            piece = w * (F + Fb + Neu)
            acc = piece if acc is None else acc + piece
        return acc

    # -- scatter ---------------------------------------------------------------

    def scatter_matrix(self, cellmats):
        K = sp.coo_matrix((cellmats.ravel(),
                           (self._scatter_rows, self._scatter_cols)),
                          shape=(self.space.n_dofs, self.space.n_dofs))
        return K.tocsr()

    def scatter_vector(self, cellvecs):
        v = np.zeros(self.space.n_dofs)
        np.add.at(v, self.space.cell_dofs.ravel(), cellvecs.ravel())
        return v

    # -- boundary terms ---------------------------------------------------------

    def neumann_cellwise(self, t):
        """Cellwise Neumann load  int_{Gamma_N} u_N phi ds  (E, nd)."""
        out = np.zeros((self._E, self._nd))
        if not self.problem.neumann:
            return out
        mesh = self.space.mesh
        pos = {cid: k for k, cid in enumerate(self.space.cell_ids)}
        sq, wq = gauss_legendre(self.nq)
        for cid, le, bid in mesh.boundary_edges():
            fn = self.problem.neumann.get(bid)
            if fn is None:
                continue
            ea, eb, ax = EDGE_DEFS[le]
            # reference points along the edge
            ref = np.zeros((len(sq), 2))
            if ax == 0:
                ref[:, 0] = sq
                ref[:, 1] = 0.0 if le == 0 else 1.0
            else:
                ref[:, 1] = sq
                ref[:, 0] = 0.0 if le == 3 else 1.0
            from .geometry import _cell_nodes_and_degree
            from .reference import reference_element
            nodes, deg = _cell_nodes_and_degree(mesh, cid)
            gvals, ggrads = reference_element(deg, deg).tabulate(ref)
            xq = gvals @ nodes
            tangent = np.einsum("nm,qn->qm", nodes, ggrads[:, :, ax])
            ds = np.hypot(tangent[:, 0], tangent[:, 1])
            g = fn(xq, t)
            svals, _ = self.space.elem.tabulate(ref)
            out[pos[cid]] += np.einsum("q,qn->n", wq * ds * g, svals)
        return out

    def neumann_load(self, t):
        return self.scatter_vector(self.neumann_cellwise(t))


# -- spec-level operations ----------------------------------------------------


def assemble_inner_form(space, problem, t, nq=None):
    """Sparse matrix of the inner form (eps grad u, grad phi) + (b.grad u, phi)
    + (alpha u, phi) at time t."""
    asm = Assembler(space, problem, delta0=0.0, nq=nq)
    A, _S, _M, _Mb = asm.element_matrices(t)
    return asm.scatter_matrix(A)


def assemble_supg(space, problem, interval, u_prev_full, delta0, nq=None,
                  initial=False, u0_full=None):
    """SUPG add-ons for one slab: (matrix add-on, rhs add-on).

    The matrix add-on contains tau*S plus the jump term Mb; the rhs add-on
    carries int_I (f, delta b.grad phi) dt plus Mb u_prev (the initial-value
    term for the first interval)."""
    t0, t1 = interval
    tau = t1 - t0
    asm = Assembler(space, problem, delta0=delta0, nq=nq)
    _A, S, _M, Mb = asm.element_matrices(t1)
    Ssc = asm.scatter_matrix(S)
    Mbsc = asm.scatter_matrix(Mb)
    mat = tau * Ssc + Mbsc
    prev = u0_full if initial else u_prev_full
    fb = None
    for _t, w, _F, Fb, _Neu in asm.slab_load_samples(interval):
        fb = w * Fb if fb is None else fb + w * Fb
    rhs = asm.scatter_vector(fb) + Mbsc @ prev
    return mat, rhs


def assemble_rhs_F(space, problem, interval, nq=None):
    """Right-hand side int_I (f, phi) dt plus Neumann boundary terms
    (2-point Gauss in time)."""
    asm = Assembler(space, problem, delta0=0.0, nq=nq)
    acc = None
    for _t, w, F, _Fb, Neu in asm.slab_load_samples(interval):
        piece = w * (F + Neu)
        acc = piece if acc is None else acc + piece
    return asm.scatter_vector(acc)


def assemble_slab(space, problem, interval, u_prev_full, delta0=0.0,
                  stabilize=True, nq=None, assembler=None):
    """Full raw slab system for one interval (dG(0), coefficients frozen at
    the right endpoint, data integrated in time)."""
    t0, t1 = interval
    tau = t1 - t0
    asm = assembler
    if asm is None:
        asm = Assembler(space, problem, delta0=delta0 if stabilize else 0.0,
                        nq=nq)
    A, S, M, Mb = asm.element_matrices(t1)
    K = asm.scatter_matrix(M + Mb + tau * (A + S))
    coupling = asm.scatter_matrix(M + Mb)
    rhs = asm.scatter_vector(asm.slab_loads(interval)) + coupling @ u_prev_full
    return SlabSystem(K, rhs, interval, coupling)
