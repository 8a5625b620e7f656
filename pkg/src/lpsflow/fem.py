"""Continuous Lagrange elements P1, P2, P3 on triangles.

Degrees of freedom are ordered globally as: mesh vertices, then edge
dofs (edges sorted lexicographically by endpoint indices, nodes along
an edge ordered away from the lower endpoint), then cell dofs.  Vector
fields use the block layout [all x-components; all y-components].
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GeometryError, UsageError

__all__ = [
    "FESpace",
    "QuadratureRule",
    "build_space",
    "quadrature_for",
    "reference_basis",
    "eval_basis",
    "cell_geometry",
    "BasisTables",
    "basis_tables",
    "interpolate",
    "interpolate_vector",
]


# ---------------------------------------------------------------------------
# reference element


def _nodes_reference(degree):
    """Barycentric lattice nodes in the global dof order convention.

    Order: the 3 vertices, then degree-1 nodes per edge (edges (0,1),
    (1,2), (2,0), walking from the first to the second vertex), then the
    interior node for P3.
    """
    verts = np.eye(3)
    nodes = [verts[0], verts[1], verts[2]]
    for (a, b) in ((0, 1), (1, 2), (2, 0)):
        for k in range(1, degree):
            lam = np.zeros(3)
            lam[a] = 1.0 - k / degree
            lam[b] = k / degree
            nodes.append(lam)
    if degree == 3:
        nodes.append(np.full(3, 1.0 / 3.0))
    return np.array(nodes)


def _p1(lam):
    vals = lam.copy()
    # gradients w.r.t. (lam1, lam2); lam0 = 1 - lam1 - lam2
    grads = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
                            (lam.shape[0], 3, 2)).copy()
    return vals, grads


def _p2(lam):
    n = lam.shape[0]
    vals = np.empty((n, 6))
    grads = np.empty((n, 6, 2))
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    for m, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        vals[:, 3 + m] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, 3 + m, :] = 4.0 * (lam[:, b][:, None] * dlam[a] + lam[:, a][:, None] * dlam[b])
    return vals, grads


def _p3(lam):
    n = lam.shape[0]
    vals = np.empty((n, 10))
    grads = np.empty((n, 10, 2))
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for i in range(3):
        li = lam[:, i]
        vals[:, i] = 0.5 * li * (3.0 * li - 1.0) * (3.0 * li - 2.0)
        dv = 0.5 * (27.0 * li * li - 18.0 * li + 2.0)
        grads[:, i, :] = dv[:, None] * dlam[i]
    col = 3
    for (a, b) in ((0, 1), (1, 2), (2, 0)):
        la, lb = lam[:, a], lam[:, b]
        # node nearer vertex a (lam_a = 2/3), then nearer vertex b
        vals[:, col] = 4.5 * la * lb * (3.0 * la - 1.0)
        grads[:, col, :] = 4.5 * (((6.0 * la - 1.0) * lb)[:, None] * dlam[a]
                                  + (la * (3.0 * la - 1.0))[:, None] * dlam[b])
        col += 1
        vals[:, col] = 4.5 * la * lb * (3.0 * lb - 1.0)
        grads[:, col, :] = 4.5 * ((lb * (3.0 * lb - 1.0))[:, None] * dlam[a]
                                  + ((6.0 * lb - 1.0) * la)[:, None] * dlam[b])
        col += 1
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    vals[:, 9] = 27.0 * l0 * l1 * l2
    grads[:, 9, :] = 27.0 * ((l1 * l2)[:, None] * dlam[0]
                             + (l0 * l2)[:, None] * dlam[1]
                             + (l0 * l1)[:, None] * dlam[2])
    return vals, grads


_SHAPE_FUNCTIONS = {1: _p1, 2: _p2, 3: _p3}


def reference_basis(degree, barycentric):
    """Shape function values and reference gradients at barycentric points.

    Returns (values, ref_grads) of shapes (npts, nd) and (npts, nd, 2),
    with gradients taken w.r.t. the reference coordinates (x, y) of the
    unit triangle (0,0)-(1,0)-(0,1).
    """
    lam = np.atleast_2d(np.asarray(barycentric, dtype=float))
    try:
        fn = _SHAPE_FUNCTIONS[degree]
    except KeyError:
        raise ConfigurationError(f"unsupported polynomial degree {degree}")
    return fn(lam)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle, weights summing to 1/2."""

    points: np.ndarray       # (nq, 3) barycentric
    weights: np.ndarray      # (nq,)
    exactness_degree: int

    @property
    def num_points(self):
        return self.points.shape[0]


def _collapsed_rule(degree):
    """Gauss-Legendre product rule mapped to the triangle.

    The square-to-triangle map x = a(1-b), y = b carries Jacobian (1-b),
    so polynomials of total degree d need 1D exactness d in a and d+1 in
    b; point counts are chosen accordingly.  Not point-optimal but exact
    by construction at every degree.
    """
    na = (degree + 2) // 2
    nb = (degree + 3) // 2
    xa, wa = np.polynomial.legendre.leggauss(na)
    xb, wb = np.polynomial.legendre.leggauss(nb)
    a = 0.5 * (xa + 1.0)
    b = 0.5 * (xb + 1.0)
    wa = 0.5 * wa
    wb = 0.5 * wb
    pts = []
    wts = []
    for i in range(na):
        for j in range(nb):
            x = a[i] * (1.0 - b[j])
            y = b[j]
            pts.append((1.0 - x - y, x, y))
            wts.append(wa[i] * wb[j] * (1.0 - b[j]))
    return np.array(pts), np.array(wts)


def quadrature_for(degree_needed):
    """Smallest stocked rule with exactness at least `degree_needed`."""
    if degree_needed > 12:
        raise ConfigurationError(f"no quadrature rule of exactness {degree_needed} (max 12)")
    if degree_needed <= 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5]), 1)
    if degree_needed == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6],
                        [1 / 6, 2 / 3, 1 / 6],
                        [1 / 6, 1 / 6, 2 / 3]])
        return QuadratureRule(pts, np.full(3, 1 / 6), 2)
    pts, wts = _collapsed_rule(degree_needed)
    return QuadratureRule(pts, wts, degree_needed)


# ---------------------------------------------------------------------------
# global space


@dataclass(frozen=True)
class FESpace:
    """Scalar continuous Lagrange space of given degree on a mesh."""

    mesh: object
    degree: int
    num_dofs: int
    dof_coords: np.ndarray    # (num_dofs, 2)
    cell_dofs: np.ndarray     # (nc, nd) global dof per local node
    boundary_dofs: np.ndarray  # sorted dof indices on the boundary

    @property
    def num_local(self):
        return self.cell_dofs.shape[1]

    def boundary_mask(self):
        mask = np.zeros(self.num_dofs, dtype=bool)
        mask[self.boundary_dofs] = True
        return mask


def build_space(mesh, degree):
    """Assemble dof maps for the continuous degree-l Lagrange space."""
    if degree not in (1, 2, 3):
        raise ConfigurationError(f"degree must be 1, 2 or 3, got {degree}")
    nv = mesh.num_vertices
    nc = mesh.num_cells
    edges = mesh.edges()
    ne = edges.shape[0]
    edge_index = {(int(i), int(j)): k for k, (i, j) in enumerate(edges)}
    per_edge = degree - 1
    per_cell = 1 if degree == 3 else 0
    num_dofs = nv + per_edge * ne + per_cell * nc

    coords = np.empty((num_dofs, 2))
    coords[:nv] = mesh.vertices
    for k, (i, j) in enumerate(edges):
        p, q = mesh.vertices[i], mesh.vertices[j]
        for s in range(per_edge):
            t = (s + 1) / degree
            coords[nv + per_edge * k + s] = (1.0 - t) * p + t * q
    if per_cell:
        base = nv + per_edge * ne
        coords[base:base + nc] = mesh.vertices[mesh.cells].mean(axis=1)

    nd = (degree + 1) * (degree + 2) // 2
    cell_dofs = np.empty((nc, nd), dtype=int)
    cell_dofs[:, :3] = mesh.cells
    if degree >= 2:
        for c, tri in enumerate(mesh.cells):
            col = 3
            for (a, b) in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                a, b = int(a), int(b)
                k = edge_index[(a, b) if a < b else (b, a)]
                if per_edge == 1:
                    cell_dofs[c, col] = nv + k
                    col += 1
                else:
                    # global edge nodes run from the lower endpoint
                    first, second = nv + 2 * k, nv + 2 * k + 1
                    if a < b:
                        cell_dofs[c, col] = first
                        cell_dofs[c, col + 1] = second
                    else:
                        cell_dofs[c, col] = second
                        cell_dofs[c, col + 1] = first
                    col += 2
            if per_cell:
                cell_dofs[c, col] = nv + per_edge * ne + c
    bnd = _boundary_dofs(mesh, degree, nv, edge_index, per_edge)
    return FESpace(mesh, degree, num_dofs, coords, cell_dofs, bnd)


def _boundary_dofs(mesh, degree, nv, edge_index, per_edge):
    dofs = set(mesh.boundary_edges.ravel().tolist())
    if per_edge:
        for (i, j) in mesh.boundary_edges:
            i, j = int(i), int(j)
            k = edge_index[(i, j) if i < j else (j, i)]
            for s in range(per_edge):
                dofs.add(nv + per_edge * k + s)
    return np.array(sorted(dofs), dtype=int)


# ---------------------------------------------------------------------------
# geometry and evaluation


def cell_geometry(mesh):
    """Per-cell affine map data: Jacobians, inverses, determinants."""
    p = mesh.vertices[mesh.cells]
    jac = np.empty((mesh.num_cells, 2, 2))
    jac[:, :, 0] = p[:, 1] - p[:, 0]
    jac[:, :, 1] = p[:, 2] - p[:, 0]
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0):
        raise GeometryError("degenerate or inverted cell (non-positive Jacobian)")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    return jac, inv, det


@dataclass(frozen=True)
class BasisTables:
    """Precomputed quadrature-point data for one space and rule.

    phys_points[c, q] is the image of quadrature point q in cell c;
    grads[c, q, i] is the physical gradient of local basis i there.
    scaled_weights[c, q] = w_q * det J_c are the physical quadrature
    weights (integrals over cell c are plain contractions).
    """

    space: FESpace
    rule: QuadratureRule
    values: np.ndarray          # (nq, nd)
    grads: np.ndarray           # (nc, nq, nd, 2)
    phys_points: np.ndarray     # (nc, nq, 2)
    scaled_weights: np.ndarray  # (nc, nq)


def basis_tables(space, rule):
    vals, ref_grads = reference_basis(space.degree, rule.points)
    jac, inv, det = cell_geometry(space.mesh)
    # physical gradient: J^{-T} grad_ref
    grads = np.einsum("cba,qib->cqia", inv, ref_grads)
    p0 = space.mesh.vertices[space.mesh.cells[:, 0]]
    ref_xy = rule.points[:, 1:]
    phys = p0[:, None, :] + np.einsum("cab,qb->cqa", jac, ref_xy)
    sw = rule.weights[None, :] * det[:, None]
    return BasisTables(space, rule, vals, grads, phys, sw)


def eval_basis(space, cell, rule):
    """Basis values and physical gradients at quadrature points of one cell.

    Returns (values, grads, phys_points, scaled_weights) with shapes
    (nq, nd), (nq, nd, 2), (nq, 2), (nq,).
    """
    vals, ref_grads = reference_basis(space.degree, rule.points)
    tri = space.mesh.cells[cell]
    p = space.mesh.vertices[tri]
    jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if det <= 0:
        raise GeometryError(f"cell {cell} has non-positive Jacobian determinant")
    inv = np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]]) / det
    grads = np.einsum("ba,qib->qia", inv, ref_grads)
    phys = p[0][None, :] + rule.points[:, 1:] @ jac.T
    return vals, grads, phys, rule.weights * det


def evaluate_field(tables, coeffs):
    """Scalar FE function values at all quadrature points, (nc, nq)."""
    c = np.asarray(coeffs)
    local = c[tables.space.cell_dofs]
    return np.einsum("qi,ci->cq", tables.values, local)


def evaluate_gradient(tables, coeffs):
    """Scalar FE function gradients at quadrature points, (nc, nq, 2)."""
    c = np.asarray(coeffs)
    local = c[tables.space.cell_dofs]
    return np.einsum("cqia,ci->cqa", tables.grads, local)


# ---------------------------------------------------------------------------
# interpolation


def interpolate(space, f):
    """Nodal (Lagrange) interpolation of a pointwise function.

    `f` is called with coordinate arrays (x, y) and must broadcast.
    """
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = np.asarray(f(x, y), dtype=float)
    if vals.shape != x.shape:
        raise UsageError("interpolated function must return one value per point")
    return vals


def interpolate_vector(space, f):
    """Interpolate a 2-vector field; returns the stacked [x; y] layout.

    `f` returns a pair of arrays (components at the given points).
    """
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    fx, fy = f(x, y)
    return np.concatenate([np.asarray(fx, dtype=float), np.asarray(fy, dtype=float)])
