"""Legacy ASCII VTK output of the active mesh with optional cell/point data.

Cells are written as linear quads (VTK type 9); curved cells are represented
by their corner vertices, which is sufficient for inspection.
"""
from __future__ import annotations

import numpy as np


def write_vtk(mesh, path, cell_data=None, point_data=None, title="anisodwr"):
    """Dump the active mesh as an unstructured grid.

    cell_data / point_data map names to arrays over active cells / vertices
    used by active cells (full vertex array length accepted).
    """
    V = mesh.vertex_array()
    active = mesh.active_cells()
    quads = np.array([mesh.cells[c].vertex_ids for c in active], dtype=int)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(V)} double\n")
        for x, y in V:
            fh.write(f"{x:.12e} {y:.12e} 0.0\n")
        fh.write(f"CELLS {len(quads)} {5 * len(quads)}\n")
        for q in quads:
            fh.write(f"4 {q[0]} {q[1]} {q[2]} {q[3]}\n")
        fh.write(f"CELL_TYPES {len(quads)}\n")
        for _ in quads:
            fh.write("9\n")
        if cell_data:
            fh.write(f"CELL_DATA {len(quads)}\n")
            for name, arr in cell_data.items():
                arr = np.asarray(arr, dtype=float)
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in arr:
                    fh.write(f"{v:.12e}\n")
        if point_data:
            fh.write(f"POINT_DATA {len(V)}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr, dtype=float)
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in arr:
                    fh.write(f"{v:.12e}\n")


def vertex_values(space, coeffs):
    """Values at mesh vertices from a DoF vector (for point data)."""
    out = np.zeros(len(space.mesh.vertices))
    for v, dof in space._vmap.items():
        out[v] = coeffs[dof]
    return out
