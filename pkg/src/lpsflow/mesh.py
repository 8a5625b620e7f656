"""Conforming triangulations of the unit square.

Two mesh families are provided: a regular diagonal triangulation
(grid 1) and a fixed irregular coarse mesh (grid 2), both refined
uniformly by red refinement.  Meshes are immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

__all__ = [
    "Mesh",
    "build_grid1",
    "build_grid2",
    "refine_red",
    "validate_mesh",
    "dump_mesh",
]


@dataclass(frozen=True)
class Mesh:
    """Triangulation of [0,1]^2 with counterclockwise cells.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array
        Vertex indices per triangle, counterclockwise.
    boundary_edges : (nb, 2) int array
        Vertex index pairs lying on the boundary.
    boundary_markers : (nb,) int array
        1 bottom, 2 right, 3 top, 4 left.
    level : int
        Number of uniform refinements applied to the coarse mesh.
    cell_diameters : (nc,) float array
        Longest edge of each triangle.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    level: int
    cell_diameters: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.cell_diameters is None:
            object.__setattr__(self, "cell_diameters", _diameters(self.vertices, self.cells))
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    @property
    def h_max(self):
        return float(self.cell_diameters.max())

    @property
    def h_min(self):
        return float(self.cell_diameters.min())

    def cell_areas(self):
        return _signed_areas(self.vertices, self.cells)

    def edges(self):
        """Unique edges as sorted (lo, hi) pairs, lexicographically ordered."""
        return _unique_edges(self.cells)

    def boundary_vertex_set(self):
        return set(self.boundary_edges.ravel().tolist())

    def cell_neighbors(self):
        """For each cell, the set of cell indices sharing at least a vertex."""
        nv = self.num_vertices
        by_vertex = [[] for _ in range(nv)]
        for c, tri in enumerate(self.cells):
            for v in tri:
                by_vertex[v].append(c)
        neigh = []
        for tri in self.cells:
            s = set()
            for v in tri:
                s.update(by_vertex[v])
            neigh.append(s)
        return neigh


def _signed_areas(vertices, cells):
    p = vertices[cells]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _diameters(vertices, cells):
    p = vertices[cells]
    e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return np.maximum(e0, np.maximum(e1, e2))


def _unique_edges(cells):
    e = np.vstack([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    return e


def _boundary_marker(p0, p1):
    """Side of the unit square containing segment p0-p1, or 0 if interior."""
    tol = 1e-12
    if abs(p0[1]) < tol and abs(p1[1]) < tol:
        return 1
    if abs(p0[0] - 1.0) < tol and abs(p1[0] - 1.0) < tol:
        return 2
    if abs(p0[1] - 1.0) < tol and abs(p1[1] - 1.0) < tol:
        return 3
    if abs(p0[0]) < tol and abs(p1[0]) < tol:
        return 4
    return 0


def _boundary_edges_from_cells(vertices, cells):
    """Edges adjacent to exactly one cell, with square-side markers."""
    e = np.vstack([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    bnd = uniq[counts == 1]
    markers = np.array([_boundary_marker(vertices[i], vertices[j]) for i, j in bnd], dtype=int)
    return bnd, markers


def build_grid1(level):
    """Regular triangulation: n x n squares each split along the
    lower-left to upper-right diagonal, n = 2**level.

    The level-0 mesh has 2 cells and diameter sqrt(2); each level halves
    the diameters.
    """
    if not (0 <= level <= 10):
        raise GeometryError(f"grid 1 level must be in [0, 10], got {level}")
    n = 2 ** level
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    cells = np.array(cells, dtype=int)
    bnd, markers = _boundary_edges_from_cells(vertices, cells)
    return Mesh(vertices, cells, bnd, markers, level)


# Coarse grid 2: interior vertex joined to the corners, one bottom-edge
# split.  Chosen fixed so runs are reproducible; any shape-regular
# irregular coarse mesh would do.
_GRID2_VERTICES = np.array([
    [0.0, 0.0],
    [1.0, 0.0],
    [1.0, 1.0],
    [0.0, 1.0],
    [0.55, 0.45],
    [0.3, 0.0],
])
_GRID2_CELLS = np.array([
    [0, 5, 4],
    [5, 1, 4],
    [1, 2, 4],
    [2, 3, 4],
    [3, 0, 4],
])


def build_grid2(level):
    """Irregular coarse mesh of the unit square, red-refined `level` times.

    Level 0 has 5 cells, one interior vertex, and maximal diameter 1.
    """
    if not (0 <= level <= 10):
        raise GeometryError(f"grid 2 level must be in [0, 10], got {level}")
    bnd, markers = _boundary_edges_from_cells(_GRID2_VERTICES, _GRID2_CELLS)
    mesh = Mesh(_GRID2_VERTICES.copy(), _GRID2_CELLS.copy(), bnd, markers, 0)
    for _ in range(level):
        mesh = refine_red(mesh)
    return mesh


def refine_red(mesh):
    """Split every triangle into 4 similar children via edge midpoints.

    Conformity is preserved because midpoint vertices are shared through
    a global edge table; children inherit half the parent diameter.
    """
    edges = _unique_edges(mesh.cells)
    edge_index = {(int(i), int(j)): k for k, (i, j) in enumerate(edges)}
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    nv = mesh.num_vertices

    def mid(a, b):
        return nv + edge_index[(a, b) if a < b else (b, a)]

    cells = np.empty((4 * mesh.num_cells, 3), dtype=int)
    for c, (a, b, d) in enumerate(mesh.cells):
        a, b, d = int(a), int(b), int(d)
        mab, mbd, mda = mid(a, b), mid(b, d), mid(d, a)
        cells[4 * c + 0] = (a, mab, mda)
        cells[4 * c + 1] = (mab, b, mbd)
        cells[4 * c + 2] = (mda, mbd, d)
        cells[4 * c + 3] = (mab, mbd, mda)

    bnd_edges = []
    bnd_markers = []
    for (a, b), m in zip(mesh.boundary_edges, mesh.boundary_markers):
        a, b = int(a), int(b)
        k = mid(a, b)
        bnd_edges.append((a, k))
        bnd_edges.append((k, b))
        bnd_markers.extend([m, m])
    bnd = np.array(bnd_edges, dtype=int)
    markers = np.array(bnd_markers, dtype=int)
    return Mesh(vertices, cells, bnd, markers, mesh.level + 1)


def validate_mesh(mesh, tol=1e-12):
    """Check orientation, conformity, and coverage of the unit square.

    Raises GeometryError on the first violated invariant.
    """
    areas = mesh.cell_areas()
    if np.any(areas <= 0):
        raise GeometryError("cell with non-positive signed area")
    if abs(areas.sum() - 1.0) > tol:
        raise GeometryError(f"cell areas sum to {areas.sum()!r}, expected 1")

    e = np.vstack([mesh.cells[:, [0, 1]], mesh.cells[:, [1, 2]], mesh.cells[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise GeometryError("edge shared by more than two cells")
    bnd_set = {(int(i), int(j)) for i, j in np.sort(mesh.boundary_edges, axis=1)}
    once = {(int(i), int(j)) for i, j in uniq[counts == 1]}
    if once != bnd_set:
        raise GeometryError("boundary edge table does not match single-cell edges")

    diam = _diameters(mesh.vertices, mesh.cells)
    if not np.allclose(diam, mesh.cell_diameters, rtol=0, atol=1e-14):
        raise GeometryError("stored cell diameters are stale")
    return True


def dump_mesh(mesh):
    """Plain-text dump: `v x y`, `c i j k`, and `b i j` lines."""
    lines = []
    for x, y in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r}")
    for i, j, k in mesh.cells:
        lines.append(f"c {i} {j} {k}")
    for i, j in mesh.boundary_edges:
        lines.append(f"b {i} {j}")
    return "\n".join(lines) + "\n"
