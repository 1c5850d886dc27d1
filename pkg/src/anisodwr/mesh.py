"""Quadrilateral meshes with independent per-direction refinement.

Cells form a forest rooted at the coarse mesh.  Each cell may be split along
reference axis 1, axis 2, or both; refinement levels are tracked per
direction.  Hanging vertices are shared topologically through an
edge-midpoint registry, and `refine_cells` restores per-direction
one-irregularity by refining the coarser element at the end of each
hanging-node chain.

Local conventions on the reference square [0,1]^2:
  corners   v0=(0,0), v1=(1,0), v2=(1,1), v3=(0,1)  (counterclockwise)
  edges     0: (v0,v1) bottom   1: (v1,v2) right
            2: (v3,v2) top      3: (v0,v3) left
Edges 0 and 2 are tangent to axis 1, edges 1 and 3 to axis 2.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidGeometryError, PreconditionError, StaleMarkError

# (corner_a, corner_b, tangent_axis) per local edge, axes 0-based internally
EDGE_DEFS = ((0, 1, 0), (1, 2, 1), (3, 2, 0), (0, 3, 1))

# child slots (ox, oy, sx, sy) in parent reference coordinates
_SLOTS_AXIS0 = ((0.0, 0.0, 0.5, 1.0), (0.5, 0.0, 0.5, 1.0))
_SLOTS_AXIS1 = ((0.0, 0.0, 1.0, 0.5), (0.0, 0.5, 1.0, 0.5))
_SLOTS_ISO = ((0.0, 0.0, 0.5, 0.5), (0.5, 0.0, 0.5, 0.5),
              (0.0, 0.5, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5))


class Cell:
    """One node of the refinement forest."""

    __slots__ = ("id", "vertex_ids", "level", "parent", "children",
                 "split_axes", "slot", "mapping_kind", "boundary_faces",
                 "curved_edges")

    def __init__(self, cid, vertex_ids, level, mapping_kind,
                 parent=None, slot=None, boundary_faces=None, curved_edges=()):
        self.id = cid
        self.vertex_ids = tuple(vertex_ids)
        self.level = tuple(level)
        self.parent = parent
        self.children = None
        self.split_axes = None
        self.slot = slot  # (ox, oy, sx, sy) within the parent
        self.mapping_kind = mapping_kind
        self.boundary_faces = dict(boundary_faces or {})
        self.curved_edges = tuple(curved_edges)

    @property
    def is_active(self):
        return self.children is None


class PatchSet:
    """Grouping of active cells into once-refined parents for 2h-interpolation.

    patches[i] = (parent_id, child_ids, shape) with shape in {(2,2),(2,1),(1,2)}.
    Cells without a fully active sibling group are listed in `exceptions`
    and act as their own identity patch.
    """

    def __init__(self, patches, exceptions, cell_patch):
        self.patches = patches
        self.exceptions = exceptions
        self.cell_patch = cell_patch  # cell_id -> (patch_index, slot_index) or None


class AnisoQuadMesh:
    """Forest-of-quads mesh with per-direction refinement levels."""

    def __init__(self, manifold=None):
        self.vertices = []          # list of (x, y)
        self.cells = []             # list of Cell, index == id
        self.manifold = manifold    # (center(2,), radius) for circular boundary
        self._edge_mid = {}         # (a,b) sorted -> midpoint vertex id
        self._mid_of = {}           # vertex id -> (a,b) parent edge
        self._verts_np = None
        self._active = None
        self.version = 0

    # -- basic queries ----------------------------------------------------

    def vertex_array(self):
        if self._verts_np is None or len(self._verts_np) != len(self.vertices):
            self._verts_np = np.asarray(self.vertices, dtype=float)
        return self._verts_np

    def active_cells(self):
        """Ids of leaf cells, ascending."""
        if self._active is None:
            self._active = [c.id for c in self.cells if c.is_active]
        return self._active

    @property
    def n_active(self):
        return len(self.active_cells())

    def cell_corners(self, cell_ids=None):
        """Corner coordinates (E, 4, 2) for the given (default: active) cells."""
        if cell_ids is None:
            cell_ids = self.active_cells()
        idx = np.array([self.cells[c].vertex_ids for c in cell_ids], dtype=int)
        return self.vertex_array()[idx]

    def cell_edges(self, cid):
        """Edges of a cell as (vertex_a, vertex_b, local_edge) with a,b ordered
        along the edge's reference direction."""
        v = self.cells[cid].vertex_ids
        return [(v[a], v[b], e) for e, (a, b, _ax) in enumerate(EDGE_DEFS)]

    def boundary_edges(self):
        """All active boundary faces as (cell_id, local_edge, boundary_id)."""
        out = []
        for cid in self.active_cells():
            for e, bid in self.cells[cid].boundary_faces.items():
                out.append((cid, e, bid))
        return out

    def _invalidate(self):
        self._active = None
        self.version += 1

    # -- vertex helpers ---------------------------------------------------

    def _add_vertex(self, xy):
        self.vertices.append((float(xy[0]), float(xy[1])))
        self._verts_np = None
        return len(self.vertices) - 1

    def _project_circle(self, xy):
        c, r = self.manifold
        d = np.asarray(xy, dtype=float) - np.asarray(c, dtype=float)
        nrm = np.hypot(d[0], d[1])
        if nrm == 0.0:
            raise InvalidGeometryError("cannot project circle center onto manifold")
        return np.asarray(c) + d * (r / nrm)

    def edge_midpoint_vertex(self, a, b, on_circle=False):
        """Vertex id of the midpoint of edge (a,b), creating and registering
        it on first use.  Circle edges get the arc midpoint."""
        key = (a, b) if a < b else (b, a)
        m = self._edge_mid.get(key)
        if m is not None:
            return m
        va = np.asarray(self.vertices[a])
        vb = np.asarray(self.vertices[b])
        mid = 0.5 * (va + vb)
        if on_circle:
            mid = self._project_circle(mid)
        m = self._add_vertex(mid)
        self._edge_mid[key] = m
        self._mid_of[m] = key
        return m

    # -- cell geometry nodes ----------------------------------------------

    def geometry_nodes(self, cid):
        """Geometry nodes of one cell: (4,2) corners for Q1 mappings, or the
        (9,2) biquadratic node set for curved cells (Coons-blended center)."""
        cell = self.cells[cid]
        V = self.vertex_array()
        corners = V[list(cell.vertex_ids)]
        if cell.mapping_kind != "curved":
            return corners
        mids = []
        for e, (a, b, _ax) in enumerate(EDGE_DEFS):
            m = 0.5 * (corners[a] + corners[b])
            if e in cell.curved_edges:
                m = self._project_circle(m)
            mids.append(m)
        mids = np.asarray(mids)
        center = 0.5 * mids.sum(axis=0) - 0.25 * corners.sum(axis=0)
        nodes = np.empty((9, 2))
        nodes[0], nodes[2], nodes[8], nodes[6] = corners
        nodes[1], nodes[5], nodes[7], nodes[3] = mids
        nodes[4] = center
        return nodes

    # -- refinement ---------------------------------------------------------

    def refine_cells(self, marks):
        """Split marked active cells along the marked axes (1 and/or 2), then
        refine further until the per-direction one-irregularity invariant
        holds again.  Returns the mutated mesh."""
        want = {}
        for cid, axis in marks:
            if axis not in (1, 2):
                raise ValueError(f"axis must be 1 or 2, got {axis}")
            if not self.cells[cid].is_active:
                raise StaleMarkError(f"cell {cid} is not active")
            want.setdefault(cid, set()).add(axis - 1)
        for cid, axes in sorted(want.items()):
            self._split(cid, axes)
        self.forced_splits = self._enforce_one_irregularity()
        self._invalidate()
        return self

    def _split(self, cid, axes):
        cell = self.cells[cid]
        v = list(cell.vertex_ids)
        V = self.vertex_array()
        iso = len(axes) == 2

        def mid(edge):
            a, b, _ax = EDGE_DEFS[edge]
            return self.edge_midpoint_vertex(v[a], v[b], on_circle=edge in cell.curved_edges)

        if iso or 0 in axes:
            m0, m2 = mid(0), mid(2)
        if iso or 1 in axes:
            m1, m3 = mid(1), mid(3)
        if iso:
            nodes = self.geometry_nodes(cid)
            if cell.mapping_kind == "curved":
                center = nodes[4]
            else:
                # bilinear map at (1/2,1/2) == corner mean
                center = 0.25 * (V[v[0]] + V[v[1]] + V[v[2]] + V[v[3]])
            c = self._add_vertex(center)
            kids_vertices = [(v[0], m0, c, m3), (m0, v[1], m1, c),
                             (m3, c, m2, v[3]), (c, m1, v[2], m2)]
            slots = _SLOTS_ISO
            dlevel = (1, 1)
        elif 0 in axes:
            kids_vertices = [(v[0], m0, m2, v[3]), (m0, v[1], v[2], m2)]
            slots = _SLOTS_AXIS0
            dlevel = (1, 0)
        else:
            kids_vertices = [(v[0], v[1], m1, m3), (m3, m1, v[2], v[3])]
            slots = _SLOTS_AXIS1
            dlevel = (0, 1)

        children = []
        for kv, slot in zip(kids_vertices, slots):
            kid_id = len(self.cells)
            bfaces, curved = self._inherit_sides(cell, slot)
            kind = cell.mapping_kind
            if kind == "curved" and not curved:
                kind = "bilinear"
            kid = Cell(kid_id, kv, (cell.level[0] + dlevel[0], cell.level[1] + dlevel[1]),
                       kind, parent=cid, slot=slot, boundary_faces=bfaces,
                       curved_edges=curved)
            self.cells.append(kid)
            children.append(kid_id)
        cell.children = children
        cell.split_axes = tuple(sorted(a + 1 for a in axes))
        self._invalidate()

    @staticmethod
    def _inherit_sides(cell, slot):
        """Boundary ids and curved flags for a child occupying `slot`."""
        ox, oy, sx, sy = slot
        on_side = {0: oy == 0.0, 2: oy + sy == 1.0, 3: ox == 0.0, 1: ox + sx == 1.0}
        bfaces = {e: bid for e, bid in cell.boundary_faces.items() if on_side[e]}
        curved = tuple(e for e in cell.curved_edges if on_side[e])
        return bfaces, curved

    # -- adjacency and one-irregularity -------------------------------------

    def _active_edge_entries(self):
        entries = {}
        for cid in self.active_cells():
            for a, b, e in self.cell_edges(cid):
                key = (a, b) if a < b else (b, a)
                entries.setdefault(key, []).append((cid, e))
        return entries

    def _parent_edge(self, key):
        a, b = key
        pa = self._mid_of.get(a)
        if pa is not None and b in pa:
            return pa
        pb = self._mid_of.get(b)
        if pb is not None and a in pb:
            return pb
        return None

    def _descendant_entries(self, key, entries, out):
        m = self._edge_mid.get(key)
        if m is None:
            return
        for sub in ((key[0], m), (m, key[1])):
            skey = (sub[0], sub[1]) if sub[0] < sub[1] else (sub[1], sub[0])
            out.extend(entries.get(skey, ()))
            self._descendant_entries(skey, entries, out)

    def face_neighbor_pairs(self):
        """All pairs of active cells sharing (part of) a face, each pair once."""
        entries = self._active_edge_entries()
        pairs = set()
        for key, ents in entries.items():
            if len(ents) == 2:
                a, b = ents[0][0], ents[1][0]
                pairs.add((min(a, b), max(a, b)))
                continue
            cid = ents[0][0]
            up = self._parent_edge(key)
            while up is not None:
                for (other, _e) in entries.get(up, ()):
                    pairs.add((min(cid, other), max(cid, other)))
                up = self._parent_edge(up)
            down = []
            self._descendant_entries(key, entries, down)
            for (other, _e) in down:
                pairs.add((min(cid, other), max(cid, other)))
        return pairs

    def _enforce_one_irregularity(self):
        forced = 0
        while True:
            to_split = {}
            for a, b in self.face_neighbor_pairs():
                ca, cb = self.cells[a], self.cells[b]
                for ax in (0, 1):
                    if ca.level[ax] - cb.level[ax] >= 2:
                        to_split.setdefault(b, set()).add(ax)
                    elif cb.level[ax] - ca.level[ax] >= 2:
                        to_split.setdefault(a, set()).add(ax)
            if not to_split:
                return forced
            for cid, axes in sorted(to_split.items()):
                if self.cells[cid].is_active:
                    self._split(cid, axes)
                    forced += 1

    def check_one_irregular(self):
        """Max per-direction level jump across any face (should be <= 1)."""
        worst = 0
        for a, b in self.face_neighbor_pairs():
            ca, cb = self.cells[a], self.cells[b]
            worst = max(worst, abs(ca.level[0] - cb.level[0]),
                        abs(ca.level[1] - cb.level[1]))
        return worst

    def hanging_vertices(self):
        """Vertices lying strictly inside an active cell's face: vertex id ->
        (coarse edge key, coarse cell id)."""
        entries = self._active_edge_entries()
        used = set()
        for cid in self.active_cells():
            used.update(self.cells[cid].vertex_ids)
        out = {}
        for key, ents in entries.items():
            m = self._edge_mid.get(key)
            if m is None or m not in used or len(ents) != 1:
                continue
            # fine cells across must exist on the sub-edges
            down = []
            self._descendant_entries(key, entries, down)
            if down:
                out[m] = (key, ents[0][0])
        return out


# -- constructors -----------------------------------------------------------

def create_rectangle_mesh(x_range, y_range, nx, ny,
                          boundary_ids=(1, 2, 3, 4)):
    """Uniform nx-by-ny grid of affine cells on the given rectangle.

    boundary_ids = (left, right, bottom, top).
    """
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (nx >= 1 and ny >= 1):
        raise InvalidGeometryError("nx, ny must be >= 1")
    if not (x1 > x0 and y1 > y0):
        raise InvalidGeometryError("degenerate coordinate range")
    mesh = AnisoQuadMesh()
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    for y in ys:
        for x in xs:
            mesh._add_vertex((x, y))
    left, right, bottom, top = boundary_ids

    def vid(i, j):
        return j * (nx + 1) + i

    for j in range(ny):
        for i in range(nx):
            bfaces = {}
            if j == 0:
                bfaces[0] = bottom
            if j == ny - 1:
                bfaces[2] = top
            if i == 0:
                bfaces[3] = left
            if i == nx - 1:
                bfaces[1] = right
            cid = len(mesh.cells)
            mesh.cells.append(Cell(cid, (vid(i, j), vid(i + 1, j),
                                         vid(i + 1, j + 1), vid(i, j + 1)),
                                   (0, 0), "affine", boundary_faces=bfaces))
    return mesh


HEMKER_INFLOW = 1
HEMKER_CIRCLE = 2
HEMKER_WALL = 3


def create_hemker_mesh(initial_refines=2):
    """Coarse mesh of ((-3,8)x(-3,3)) minus the unit disk: an 8-cell ring
    around the circle plus two downstream blocks, optionally refined
    uniformly.  Two uniform refinements give the 196-vertex starting mesh of
    the benchmark runs.

    Boundary ids: 1 inflow (x=-3, Dirichlet), 2 circle (Dirichlet),
    3 outer walls and outflow (homogeneous Neumann).
    """
    mesh = AnisoQuadMesh(manifold=((0.0, 0.0), 1.0))
    angles = [np.pi / 4 * k for k in range(8)]
    circ = [mesh._add_vertex((np.cos(a), np.sin(a))) for a in angles]
    rim_xy = [(3, 0), (3, 3), (0, 3), (-3, 3), (-3, 0), (-3, -3), (0, -3), (3, -3)]
    rim = [mesh._add_vertex(p) for p in rim_xy]
    p83 = mesh._add_vertex((8, -3))
    p80 = mesh._add_vertex((8, 0))
    p8t = mesh._add_vertex((8, 3))

    # outer-rim boundary id per sector (None = interior face to the blocks)
    rim_bid = [None, HEMKER_WALL, HEMKER_WALL, HEMKER_INFLOW,
               HEMKER_INFLOW, HEMKER_WALL, HEMKER_WALL, None]
    for k in range(8):
        k1 = (k + 1) % 8
        bfaces = {3: HEMKER_CIRCLE}
        if rim_bid[k] is not None:
            bfaces[1] = rim_bid[k]
        cid = len(mesh.cells)
        mesh.cells.append(Cell(cid, (circ[k], rim[k], rim[k1], circ[k1]),
                               (0, 0), "curved", boundary_faces=bfaces,
                               curved_edges=(3,)))
    # downstream blocks
    cid = len(mesh.cells)
    mesh.cells.append(Cell(cid, (rim[7], p83, p80, rim[0]), (0, 0), "bilinear",
                           boundary_faces={0: HEMKER_WALL, 1: HEMKER_WALL}))
    cid = len(mesh.cells)
    mesh.cells.append(Cell(cid, (rim[0], p80, p8t, rim[1]), (0, 0), "bilinear",
                           boundary_faces={1: HEMKER_WALL, 2: HEMKER_WALL}))

    for _ in range(initial_refines):
        mesh.refine_cells([(c, 1) for c in mesh.active_cells()]
                          + [(c, 2) for c in mesh.active_cells()])
    return mesh


# -- patches ------------------------------------------------------------------

def build_patches(mesh):
    """Group active cells into once-refined parents.

    Root cells and cells whose sibling group is not fully active are
    exceptions: they act as their own patch with identity interpolation.
    """
    patches = []
    exceptions = []
    cell_patch = {}
    seen_parent = {}
    for cid in mesh.active_cells():
        cell = mesh.cells[cid]
        pid = cell.parent
        ok = False
        if pid is not None:
            parent = mesh.cells[pid]
            ok = all(mesh.cells[k].is_active for k in parent.children)
        if not ok:
            exceptions.append(cid)
            cell_patch[cid] = None
            continue
        if pid not in seen_parent:
            axes = mesh.cells[pid].split_axes
            if axes == (1, 2):
                shape = (2, 2)
            elif axes == (1,):
                shape = (2, 1)
            else:
                shape = (1, 2)
            seen_parent[pid] = len(patches)
            patches.append((pid, tuple(mesh.cells[pid].children), shape))
        pidx = seen_parent[pid]
        cell_patch[cid] = (pidx, patches[pidx][1].index(cid))
    counted = sum(len(p[1]) for p in patches) + len(exceptions)
    if counted != mesh.n_active:
        raise PreconditionError("patch cover does not partition the active cells")
    return PatchSet(patches, exceptions, cell_patch)
