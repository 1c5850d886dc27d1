"""Batched cell mappings: Jacobians, mapping Hessians, quadrature weights,
aspect ratios and point location on an AnisoQuadMesh.

Q1 (bilinear) geometry is used for affine and general straight quads; cells
flagged curved carry a 9-node biquadratic geometry whose circle-edge midnode
is projected onto the manifold.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidGeometryError, MappingError, PointNotFoundError
from .quadrature import tensor_gauss
from .reference import reference_element

# counterclockwise corner order -> lexicographic reference-node order
_LEX = (0, 1, 3, 2)


def _gather_geometry(mesh, cell_ids):
    """Split cells into Q1 and Q2 geometry groups with node arrays."""
    q1_idx, q2_idx = [], []
    for k, cid in enumerate(cell_ids):
        (q2_idx if mesh.cells[cid].mapping_kind == "curved" else q1_idx).append(k)
    V = mesh.vertex_array()
    nodes_q1 = None
    if q1_idx:
        ids = np.array([[mesh.cells[cell_ids[k]].vertex_ids[c] for c in _LEX]
                        for k in q1_idx])
        nodes_q1 = V[ids]
    nodes_q2 = None
    if q2_idx:
        nodes_q2 = np.array([mesh.geometry_nodes(cell_ids[k]) for k in q2_idx])
    return q1_idx, nodes_q1, q2_idx, nodes_q2


def _map_tables(kind_degree, points):
    elem = reference_element(kind_degree, kind_degree)
    return elem.tabulate(points, hessians=True)


class MeshGeometry:
    """Mapping data of the active cells at a tensor Gauss rule.

    Attributes (E = number of active cells, Q = quadrature points per cell):
      xq    (E,Q,2)      physical quadrature points
      jac   (E,Q,2,2)    dx_i/dxi_j
      jinv  (E,Q,2,2)    dxi_i/dx_j
      detj  (E,Q)
      w     (E,Q)        quadrature weight times |det J|
      hess  (E,Q,2,2,2)  d^2 x_m / dxi_a dxi_b, indexed [m,a,b]
      areas (E,)
    """

    def __init__(self, mesh, nq):
        self.mesh = mesh
        self.nq = nq
        self.cell_ids = list(mesh.active_cells())
        self.qpoints, self.qweights = tensor_gauss(nq, nq)
        E, Q = len(self.cell_ids), len(self.qweights)
        self.xq = np.empty((E, Q, 2))
        self.jac = np.empty((E, Q, 2, 2))
        self.hess = np.zeros((E, Q, 2, 2, 2))
        q1_idx, nodes1, q2_idx, nodes2 = _gather_geometry(mesh, self.cell_ids)
        for idx, nodes, deg in ((q1_idx, nodes1, 1), (q2_idx, nodes2, 2)):
            if not idx:
                continue
            vals, grads, hess = _map_tables(deg, self.qpoints)
            sel = np.asarray(idx)
            self.xq[sel] = np.einsum("qn,enm->eqm", vals, nodes)
            self.jac[sel] = np.einsum("enm,qnj->eqmj", nodes, grads)
            self.hess[sel] = np.einsum("enm,qnab->eqmab", nodes, hess)
        self.detj = (self.jac[..., 0, 0] * self.jac[..., 1, 1]
                     - self.jac[..., 0, 1] * self.jac[..., 1, 0])
        if np.any(self.detj <= 0.0):
            bad = np.argwhere(self.detj <= 0.0)[0]
            raise InvalidGeometryError(
                f"nonpositive mapping Jacobian in cell {self.cell_ids[bad[0]]}")
        self.jinv = np.empty_like(self.jac)
        self.jinv[..., 0, 0] = self.jac[..., 1, 1] / self.detj
        self.jinv[..., 0, 1] = -self.jac[..., 0, 1] / self.detj
        self.jinv[..., 1, 0] = -self.jac[..., 1, 0] / self.detj
        self.jinv[..., 1, 1] = self.jac[..., 0, 0] / self.detj
        self.w = self.qweights[None, :] * self.detj
        self.areas = self.w.sum(axis=1)

    def physical_gradients(self, ref_grads):
        """Map reference gradients (Q,N,2) to physical ones (E,Q,N,2)."""
        return np.einsum("qnc,eqcd->eqnd", ref_grads, self.jinv)

    def physical_laplacians(self, ref_grads, ref_hess, gphys):
        """Laplacians (E,Q,N) of mapped shape functions.

        Uses d2u/dxa dxb = Jinv^T (H_ref - sum_m K_m du/dx_m) Jinv with
        K_m the mapping Hessian of coordinate m.
        """
        corr = ref_hess[None, :, :, :, :] - np.einsum(
            "eqmab,eqnm->eqnab", self.hess, gphys)
        # trace over a=b of Jinv^T corr Jinv
        jj = np.einsum("eqca,eqda->eqcd", self.jinv, self.jinv)
        return np.einsum("eqcd,eqncd->eqn", jj, corr)


def max_aspect_ratio(mesh, nq=3):
    """Max singular-value ratio of the mapping Jacobian over all active cells
    and their quadrature points.  1 on uniform square meshes; invariant under
    rigid rotations."""
    geo = MeshGeometry(mesh, nq)
    sv = np.linalg.svd(geo.jac, compute_uv=False)
    ratios = sv[..., 0] / sv[..., 1]
    return float(ratios.max())


def cell_sizes(mesh, geo=None, nq=3):
    """delta_K length scale per active cell: sqrt of the cell area."""
    if geo is None:
        geo = MeshGeometry(mesh, nq)
    return np.sqrt(geo.areas)


# -- single-cell mapping and point location ---------------------------------


def _cell_nodes_and_degree(mesh, cid):
    cell = mesh.cells[cid]
    if cell.mapping_kind == "curved":
        return mesh.geometry_nodes(cid), 2
    return mesh.vertex_array()[[cell.vertex_ids[c] for c in _LEX]], 1


def map_points(mesh, cid, ref_points):
    nodes, deg = _cell_nodes_and_degree(mesh, cid)
    vals, _ = reference_element(deg, deg).tabulate(np.atleast_2d(ref_points))
    return vals @ nodes


def inverse_map(mesh, cid, x, tol=1e-12, maxit=40):
    """Reference coordinates of physical point x in cell cid via Newton."""
    nodes, deg = _cell_nodes_and_degree(mesh, cid)
    elem = reference_element(deg, deg)
    x = np.asarray(x, dtype=float)
    xi = np.array([0.5, 0.5])
    for _ in range(maxit):
        vals, grads = elem.tabulate(xi.reshape(1, 2))
        r = vals[0] @ nodes - x
        J = np.einsum("nm,nj->mj", nodes, grads[0])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det == 0.0:
            raise MappingError(f"singular Jacobian while inverting cell {cid}")
        step = np.array([J[1, 1] * r[0] - J[0, 1] * r[1],
                         -J[1, 0] * r[0] + J[0, 0] * r[1]]) / det
        xi = xi - step
        if np.max(np.abs(step)) < tol:
            return xi
        if np.max(np.abs(xi)) > 10.0:
            break
    raise MappingError(f"inverse mapping did not converge in cell {cid}")


def _bbox_table(mesh):
    """Cached per-active-cell bounding boxes (padded for curved edges)."""
    cache = getattr(mesh, "_bbox_cache", None)
    if cache is not None and cache[0] == mesh.version:
        return cache[1], cache[2], cache[3]
    cell_ids = list(mesh.active_cells())
    lo = np.empty((len(cell_ids), 2))
    hi = np.empty((len(cell_ids), 2))
    for k, cid in enumerate(cell_ids):
        nodes, _ = _cell_nodes_and_degree(mesh, cid)
        pad = 0.125 * (nodes.max(axis=0) - nodes.min(axis=0)) + 1e-14
        lo[k] = nodes.min(axis=0) - pad
        hi[k] = nodes.max(axis=0) + pad
    mesh._bbox_cache = (mesh.version, lo, hi, cell_ids)
    return lo, hi, cell_ids


def _newton_batch(mesh, cid, pts, tol=1e-12, maxit=40):
    """Vectorized inverse mapping of several points into one cell."""
    nodes, deg = _cell_nodes_and_degree(mesh, cid)
    elem = reference_element(deg, deg)
    xi = np.full((len(pts), 2), 0.5)
    for _ in range(maxit):
        vals, grads = elem.tabulate(xi)
        r = vals @ nodes - pts
        J = np.einsum("nm,qnj->qmj", nodes, grads)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        det = np.where(det == 0.0, np.nan, det)
        step = np.empty_like(r)
        step[:, 0] = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
        step[:, 1] = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
        xi = xi - step
        if np.nanmax(np.abs(step)) < tol:
            break
        np.clip(xi, -5.0, 6.0, out=xi)
    return xi


def locate_points(mesh, points, tol=1e-10, on_missing="raise"):
    """Find (cell_id, reference coords) for each physical point.

    Bounding-box prefilter (cached per mesh version) plus batched Newton
    inversion.  Points outside every active cell raise PointNotFoundError,
    or yield None entries with on_missing='none'.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi, cell_ids = _bbox_table(mesh)
    n = len(points)
    by_cell = {}
    for i, x in enumerate(points):
        cand = np.nonzero(np.all((lo <= x) & (x <= hi), axis=1))[0]
        for k in cand:
            by_cell.setdefault(int(k), []).append(i)
    found = {}
    for k in sorted(by_cell):
        idx = by_cell[k]
        pts = points[idx]
        xi = _newton_batch(mesh, cell_ids[k], pts)
        ok = np.all((xi >= -tol) & (xi <= 1.0 + tol), axis=1) & np.all(
            np.isfinite(xi), axis=1)
        for j, i in enumerate(idx):
            if ok[j] and i not in found:
                found[i] = (cell_ids[k], np.clip(xi[j], 0.0, 1.0))
    results = []
    for i in range(n):
        hit = found.get(i)
        if hit is None and on_missing == "raise":
            raise PointNotFoundError(
                f"point {points[i]} not inside any active cell")
        results.append(hit)
    return results
