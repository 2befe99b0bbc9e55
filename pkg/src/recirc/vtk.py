"""Legacy ASCII VTK output of the mesh and nodal fields, for inspection."""

import numpy as np


def write_vtk(path, mesh, point_vectors=None, point_scalars=None, title="recirc"):
    """Write an unstructured-grid VTK file.

    Parameters
    ----------
    point_vectors : dict name -> (nv, 2) vertex vectors (z-padded to 3D)
    point_scalars : dict name -> (nv,) vertex scalars
    """
    nv = mesh.num_vertices
    nt = mesh.num_cells
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for p in mesh.vertices:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} 0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for c in mesh.cells:
        lines.append(f"3 {c[0]} {c[1]} {c[2]}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)  # VTK_TRIANGLE

    point_vectors = point_vectors or {}
    point_scalars = point_scalars or {}
    if point_vectors or point_scalars:
        lines.append(f"POINT_DATA {nv}")
    for name, vec in point_vectors.items():
        vec = np.asarray(vec)
        lines.append(f"VECTORS {name} double")
        for v in vec:
            lines.append(f"{v[0]:.17g} {v[1]:.17g} 0")
    for name, scal in point_scalars.items():
        scal = np.asarray(scal)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for s in scal:
            lines.append(f"{s:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
