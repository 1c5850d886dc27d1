"""Continuous tensor-product Lagrange spaces on the anisotropic quad mesh.

DoFs live on vertices, edges and cell interiors of the active mesh.  Hanging
DoFs are constrained by interpolating the coarse-edge trace at the fine
nodes; Dirichlet DoFs carry inhomogeneous affine constraints.  Constraint
chains (a master that is itself constrained) are resolved transitively, so
the prolongation matrix references free DoFs only.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError
from .geometry import locate_points, map_points
from .mesh import EDGE_DEFS
from .quadrature import gauss_lobatto_nodes, lagrange_1d
from .reference import reference_element


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


class FeSpace:
    """Isotropic degree-p space with hanging-node and Dirichlet constraints.

    dirichlet maps boundary id -> g(x, t) (vectorized in x); DoFs on those
    boundary faces become inhomogeneous constraints evaluated per time.
    """

    def __init__(self, mesh, degree, dirichlet=None):
        if degree < 1:
            raise PreconditionError("global spaces need degree >= 1")
        self.mesh = mesh
        self.p = degree
        self.elem = reference_element(degree, degree)
        self.dirichlet = dict(dirichlet or {})
        self._prolongation_cache = {}
        self._build()

    # -- numbering ---------------------------------------------------------

    def _local_node_entity(self, ix, iy):
        """Classify local lex node: ('v', corner) | ('e', edge, along_index)
        | ('i', interior_index)."""
        p = self.p
        corner = {(0, 0): 0, (p, 0): 1, (p, p): 2, (0, p): 3}
        if (ix, iy) in corner:
            return ("v", corner[(ix, iy)])
        if iy == 0:
            return ("e", 0, ix)
        if iy == p:
            return ("e", 2, ix)
        if ix == 0:
            return ("e", 3, iy)
        if ix == p:
            return ("e", 1, iy)
        return ("i", (iy - 1) * (p - 1) + (ix - 1))

    def _build(self):
        mesh, p = self.mesh, self.p
        active = mesh.active_cells()
        self.cell_ids = list(active)
        vmap, emap = {}, {}
        n = 0
        vertex_of_dof = {}
        edge_of_dof = {}
        for cid in active:
            cell = mesh.cells[cid]
            for v in cell.vertex_ids:
                if v not in vmap:
                    vmap[v] = n
                    vertex_of_dof[n] = v
                    n += 1
            if p > 1:
                for a, b, _e in mesh.cell_edges(cid):
                    key = _edge_key(a, b)
                    if key not in emap:
                        emap[key] = n
                        for k in range(p - 1):
                            edge_of_dof[n + k] = (key, k)
                        n += p - 1
        interior_start = {}
        n_int = (p - 1) ** 2
        for cid in active:
            if n_int:
                interior_start[cid] = n
                n += n_int
        self.n_dofs = n
        self._vmap, self._emap = vmap, emap
        self._interior_start = interior_start

        nd = (p + 1) ** 2
        cell_dofs = np.empty((len(active), nd), dtype=np.int64)
        for k, cid in enumerate(active):
            cell = mesh.cells[cid]
            v = cell.vertex_ids
            for iy in range(p + 1):
                for ix in range(p + 1):
                    kind = self._local_node_entity(ix, iy)
                    loc = iy * (p + 1) + ix
                    if kind[0] == "v":
                        cell_dofs[k, loc] = vmap[v[kind[1]]]
                    elif kind[0] == "e":
                        _, e, along = kind
                        ea, eb, _ax = EDGE_DEFS[e]
                        a, b = v[ea], v[eb]
                        key = _edge_key(a, b)
                        idx = along - 1 if a < b else (p - 1) - along
                        cell_dofs[k, loc] = emap[key] + idx
                    else:
                        cell_dofs[k, loc] = interior_start[cid] + kind[1]
        self.cell_dofs = cell_dofs
        self._build_node_coords()
        self._build_constraints()

    def _edge_dof_list(self, key):
        """Coarse-edge trace DoFs in canonical order: [v_a, interior..., v_b]."""
        a, b = key
        dofs = [self._vmap[a]]
        if self.p > 1:
            base = self._emap[key]
            dofs += [base + k for k in range(self.p - 1)]
        dofs.append(self._vmap[b])
        return dofs

    def _edge_node_positions(self, cid, local_edge, svals):
        """Physical positions along a cell edge at parameters svals (in the
        edge's reference direction)."""
        mesh = self.mesh
        cell = mesh.cells[cid]
        ea, eb, _ax = EDGE_DEFS[local_edge]
        va = np.asarray(mesh.vertices[cell.vertex_ids[ea]])
        vb = np.asarray(mesh.vertices[cell.vertex_ids[eb]])
        svals = np.asarray(svals, dtype=float)[:, None]
        if local_edge in cell.curved_edges:
            vm = mesh._project_circle(0.5 * (va + vb))
            l0 = (1 - svals) * (1 - 2 * svals)
            l1 = 4 * svals * (1 - svals)
            l2 = svals * (2 * svals - 1)
            return l0 * va + l1 * vm + l2 * vb
        return va + svals * (vb - va)

    def _build_node_coords(self):
        mesh, p = self.mesh, self.p
        coords = np.empty((self.n_dofs, 2))
        V = mesh.vertex_array()
        for v, dof in self._vmap.items():
            coords[dof] = V[v]
        if p > 1:
            gl = gauss_lobatto_nodes(p + 1)[1:-1]
            done = set()
            interior_nodes = self.elem.nodes[
                [iy * (p + 1) + ix for iy in range(1, p) for ix in range(1, p)]]
            for k, cid in enumerate(self.cell_ids):
                if self._interior_start:
                    coords[self._interior_start[cid]:
                           self._interior_start[cid] + (p - 1) ** 2] = \
                        map_points(mesh, cid, interior_nodes)
                for le, (ea, eb, _ax) in enumerate(EDGE_DEFS):
                    cell = mesh.cells[cid]
                    a, b = cell.vertex_ids[ea], cell.vertex_ids[eb]
                    key = _edge_key(a, b)
                    if key in done:
                        continue
                    done.add(key)
                    svals = gl if a < b else 1.0 - gl[::-1]
                    pos = self._edge_node_positions(cid, le, svals)
                    if a >= b:
                        pos = pos[::-1]
                    coords[self._emap[key]: self._emap[key] + p - 1] = pos
        self.node_coords = coords

    # -- constraints ---------------------------------------------------------

    def _build_constraints(self):
        """First-order constraints: hanging interpolation plus Dirichlet."""
        mesh, p = self.mesh, self.p
        hanging = {}  # dof -> (masters, weights)
        entries = mesh._active_edge_entries()
        gl_nodes = gauss_lobatto_nodes(p + 1)
        for key, ents in entries.items():
            if len(ents) != 1:
                continue
            down = []
            mesh._descendant_entries(key, entries, down)
            if not down:
                continue
            coarse_cid = ents[0][0]
            if mesh.cells[coarse_cid].boundary_faces.get(ents[0][1]) is not None:
                raise PreconditionError("hanging boundary face")
            a, b = key
            m = mesh._edge_mid[key]
            spos = {a: 0.0, b: 1.0, m: 0.5}
            masters = self._edge_dof_list(key)

            def constrain(dof, s):
                vals, _, _ = lagrange_1d(gl_nodes, np.array([s]))
                hanging[dof] = (list(masters), vals[0].copy())

            if m in self._vmap:
                constrain(self._vmap[m], 0.5)
            for sub in ((a, m), (m, b)):
                skey = _edge_key(*sub)
                if skey not in entries:
                    raise PreconditionError(
                        "face is more than one-irregular; refine first")
                if p > 1 and skey in self._emap:
                    s0, s1 = spos[skey[0]], spos[skey[1]]
                    for k in range(p - 1):
                        s = s0 + gl_nodes[k + 1] * (s1 - s0)
                        constrain(self._emap[skey] + k, s)

        dirichlet = {}  # dof -> boundary id
        if self.dirichlet:
            for cid, le, bid in mesh.boundary_edges():
                if bid not in self.dirichlet:
                    continue
                cell = mesh.cells[cid]
                ea, eb, _ax = EDGE_DEFS[le]
                a, b = cell.vertex_ids[ea], cell.vertex_ids[eb]
                dirichlet[self._vmap[a]] = bid
                dirichlet[self._vmap[b]] = bid
                if p > 1:
                    base = self._emap[_edge_key(a, b)]
                    for k in range(p - 1):
                        dirichlet[base + k] = bid
        for dof in dirichlet:
            hanging.pop(dof, None)

        # transitive resolution: masters must end up free or Dirichlet
        resolved = {}
        for dof, (masters, weights) in hanging.items():
            masters = list(masters)
            weights = list(weights)
            for _ in range(64):
                expand = [i for i, mdof in enumerate(masters)
                          if mdof in hanging and mdof not in dirichlet]
                if not expand:
                    break
                new_m, new_w = [], []
                for i, (mdof, w) in enumerate(zip(masters, weights)):
                    if i in expand:
                        mm, mw = hanging[mdof]
                        new_m.extend(mm)
                        new_w.extend(w * np.asarray(mw))
                    else:
                        new_m.append(mdof)
                        new_w.append(w)
                agg = {}
                for mdof, w in zip(new_m, new_w):
                    agg[mdof] = agg.get(mdof, 0.0) + w
                masters = list(agg.keys())
                weights = [agg[mdof] for mdof in masters]
            else:
                raise PreconditionError("hanging-node constraint chain too deep")
            resolved[dof] = (masters, np.asarray(weights))

        self.hanging = resolved
        self.dirichlet_dofs = dirichlet
        constrained = set(resolved) | set(dirichlet)
        self.constrained_mask = np.zeros(self.n_dofs, dtype=bool)
        for dof in constrained:
            self.constrained_mask[dof] = True
        self.free_dofs = np.nonzero(~self.constrained_mask)[0]
        self.n_free = len(self.free_dofs)
        free_index = -np.ones(self.n_dofs, dtype=np.int64)
        free_index[self.free_dofs] = np.arange(self.n_free)
        self._free_index = free_index

        rows, cols, vals = [], [], []
        for dof in self.free_dofs:
            rows.append(dof)
            cols.append(free_index[dof])
            vals.append(1.0)
        for dof, (masters, weights) in resolved.items():
            for mdof, w in zip(masters, weights):
                if mdof in dirichlet:
                    continue  # handled via the inhomogeneity
                rows.append(dof)
                cols.append(free_index[mdof])
                vals.append(w)
        self.C = sp.csr_matrix((vals, (rows, cols)),
                               shape=(self.n_dofs, self.n_free))

    def dirichlet_values(self, t=0.0):
        """Inhomogeneity vector g(t): boundary data at constrained nodes,
        propagated through hanging chains whose masters sit on the boundary."""
        g = np.zeros(self.n_dofs)
        if not self.dirichlet_dofs:
            return g
        by_bid = {}
        for dof, bid in self.dirichlet_dofs.items():
            by_bid.setdefault(bid, []).append(dof)
        for bid, dofs in by_bid.items():
            fn = self.dirichlet[bid]
            g[dofs] = fn(self.node_coords[dofs], t)
        for dof, (masters, weights) in self.hanging.items():
            for mdof, w in zip(masters, weights):
                if mdof in self.dirichlet_dofs:
                    g[dof] += w * g[mdof]
        return g

    def prolongation(self, t=0.0):
        """(C, g): full = C @ free + g; cached by time for static data."""
        key = float(t)
        hit = self._prolongation_cache.get(key)
        if hit is None:
            hit = (self.C, self.dirichlet_values(t))
            self._prolongation_cache[key] = hit
        return hit

    # -- interpolation / evaluation ------------------------------------------

    def interpolate(self, fn, t=None):
        """Nodal interpolation of fn(x) or fn(x, t) onto the space."""
        if t is None:
            vals = fn(self.node_coords)
        else:
            vals = fn(self.node_coords, t)
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (self.n_dofs,)).copy()

    def apply_constraints(self, coeffs, t=0.0):
        """Overwrite constrained entries so the vector is conforming."""
        C, g = self.prolongation(t)
        return C @ coeffs[self.free_dofs] + g

    def evaluate(self, coeffs, points, cells=None):
        """u_h at physical points; cells may pre-specify containing cells."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if cells is None:
            located = locate_points(self.mesh, points)
        else:
            from .geometry import inverse_map
            located = [(cid, inverse_map(self.mesh, cid, x))
                       for cid, x in zip(cells, points)]
        pos = {cid: k for k, cid in enumerate(self.cell_ids)}
        out = np.empty(len(points))
        for i, (cid, xi) in enumerate(located):
            vals, _ = self.elem.tabulate(xi.reshape(1, 2))
            out[i] = vals[0] @ coeffs[self.cell_dofs[pos[cid]]]
        return out if len(out) > 1 else float(out[0])


def build_dof_map(mesh, p, dirichlet=None):
    """Global numbering with hanging-node constraints (spec operation)."""
    if mesh.check_one_irregular() > 1:
        raise PreconditionError("mesh violates one-irregularity")
    return FeSpace(mesh, p, dirichlet=dirichlet)


def evaluate_field(space, coeffs, point, cell_hint=None):
    """Point evaluation of a coefficient vector (spec operation)."""
    cells = [cell_hint] if cell_hint is not None else None
    return space.evaluate(coeffs, np.asarray(point, dtype=float).reshape(1, 2),
                          cells=cells)
