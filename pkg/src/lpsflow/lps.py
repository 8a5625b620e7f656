"""Quasi-interpolation into the degree-(l-1) space and its fluctuation.

The interpolation is a single-owner-cell Scott-Zhang variant: the value
at a target dof is the L2 projection of the input onto polynomials over
one fixed cell adjacent to the dof (the lowest cell index), evaluated at
the dof coordinate.  Because the dof coordinate is a Lagrange node of
the owner cell, the evaluation reduces to one row of the inverse local
mass matrix.

Inputs are per-cell quadrature samples, so discontinuous data such as
gradients of finite element functions are handled without smoothing
assumptions.  The fluctuation is (input samples) minus (interpolant
sampled at the same points).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import UsageError

__all__ = [
    "FluctuationOperator",
    "PiecewiseConstantSpace",
    "piecewise_constant_space",
    "build_quasi_interpolant",
    "fluct_values",
    "fluct_gradient",
    "fluct_divergence",
]


@dataclass(frozen=True)
class PiecewiseConstantSpace:
    """Cellwise constants; the degree-0 target for P1 stabilizers."""

    mesh: object
    degree: int
    num_dofs: int
    dof_coords: np.ndarray
    cell_dofs: np.ndarray


def piecewise_constant_space(mesh):
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    cell_dofs = np.arange(mesh.num_cells, dtype=int)[:, None]
    return PiecewiseConstantSpace(mesh, 0, mesh.num_cells, centroids, cell_dofs)


@dataclass(frozen=True)
class FluctuationOperator:
    """Sampling form of sigma (quasi-interpolant) and its fluctuation."""

    mesh: object
    target: object             # FESpace of degree j, or PiecewiseConstantSpace
    rule: object
    owner_cell: np.ndarray     # (n_j,) owning cell per target dof
    proj_weights: np.ndarray   # (n_j, nq) quadrature functional per dof
    target_values: np.ndarray  # (nq, nd_j) target basis at rule points
    phys_points: np.ndarray    # (nc, nq, 2)
    scaled_weights: np.ndarray  # (nc, nq)

    @property
    def target_degree(self):
        return self.target.degree

    def project(self, samples):
        """Coefficients of the quasi-interpolant of per-cell samples (nc, nq)."""
        return np.einsum("dq,dq->d", self.proj_weights, samples[self.owner_cell])

    def expand(self, coeffs):
        """Sample a target-space function at the rule points, (nc, nq)."""
        local = np.asarray(coeffs)[self.target.cell_dofs]
        return np.einsum("qm,cm->cq", self.target_values, local)

    def fluctuation(self, samples):
        """samples - sigma(samples), per cell and quadrature point."""
        return samples - self.expand(self.project(samples))

    def fluctuation_of_function(self, f):
        """Fluctuation of a pointwise function sampled at the rule points."""
        x = self.phys_points[..., 0]
        y = self.phys_points[..., 1]
        return self.fluctuation(np.asarray(f(x, y), dtype=float))


def _target_basis_values(target, rule):
    if target.degree == 0:
        return np.ones((rule.num_points, 1))
    vals, _ = fem.reference_basis(target.degree, rule.points)
    return vals


def build_quasi_interpolant(space_j, mesh, rule=None):
    """Build the fluctuation operator for a target space of degree j >= 0.

    `rule` fixes the sampling points; it must match the rule used later
    for assembly and defaults to exactness 2j+2 (enough for exact local
    projections of the data the stabilizers produce).
    """
    if space_j.mesh is not mesh:
        raise UsageError("target space was built on a different mesh")
    if rule is None:
        rule = fem.quadrature_for(max(2 * space_j.degree + 2, 2))
    _, inv, det = fem.cell_geometry(mesh)
    vals = _target_basis_values(space_j, rule)      # (nq, nd)
    sw = rule.weights[None, :] * det[:, None]       # (nc, nq)

    nc = mesh.num_cells
    nd = vals.shape[1]
    # batched local mass matrices and moment maps
    mass = np.einsum("cq,qm,qn->cmn", sw, vals, vals)
    moments = np.einsum("cq,qm->cmq", sw, vals)     # (nc, nd, nq)
    proj = np.linalg.solve(mass, moments)           # rows of M^{-1} B

    n_j = space_j.num_dofs
    owner = np.full(n_j, -1, dtype=int)
    local_of = np.zeros(n_j, dtype=int)
    for c in range(nc):
        for i, d in enumerate(space_j.cell_dofs[c]):
            if owner[d] < 0:
                owner[d] = c
                local_of[d] = i
    weights = proj[owner, local_of, :]              # (n_j, nq)

    jac, _, _ = fem.cell_geometry(mesh)
    p0 = mesh.vertices[mesh.cells[:, 0]]
    phys = p0[:, None, :] + np.einsum("cab,qb->cqa", jac, rule.points[:, 1:])
    return FluctuationOperator(mesh, space_j, rule, owner, weights, vals, phys, sw)


def _check_source(op, space):
    if space.mesh is not op.mesh:
        raise UsageError("field space lives on a different mesh than the operator")


def _gradient_samples(op, space, coeffs):
    tables = fem.basis_tables(space, op.rule)
    return tables, np.asarray(coeffs)


def fluct_values(op, space, coeffs):
    """Fluctuation of a scalar FE function's values, (nc, nq)."""
    _check_source(op, space)
    tables = fem.basis_tables(space, op.rule)
    return op.fluctuation(fem.evaluate_field(tables, coeffs))


def fluct_gradient(op, space, coeffs):
    """Fluctuation of the gradient of a scalar or vector FE field.

    Returns an array (ncomp, 2, nc, nq): one fluctuated scalar per field
    component and derivative direction.  Scalar fields give ncomp = 1.
    """
    _check_source(op, space)
    coeffs = np.asarray(coeffs)
    n = space.num_dofs
    if coeffs.shape[0] == n:
        comps = [coeffs]
    elif coeffs.shape[0] == 2 * n:
        comps = [coeffs[:n], coeffs[n:]]
    else:
        raise UsageError("coefficient vector does not match the space")
    tables = fem.basis_tables(space, op.rule)
    out = np.empty((len(comps), 2, op.phys_points.shape[0], op.rule.num_points))
    for k, c in enumerate(comps):
        g = fem.evaluate_gradient(tables, c)        # (nc, nq, 2)
        for a in range(2):
            out[k, a] = op.fluctuation(g[:, :, a])
    return out


def fluct_divergence(op, space, coeffs):
    """Fluctuation of the divergence of a vector FE field, (nc, nq)."""
    _check_source(op, space)
    coeffs = np.asarray(coeffs)
    n = space.num_dofs
    if coeffs.shape[0] != 2 * n:
        raise UsageError("divergence fluctuation needs a vector field")
    tables = fem.basis_tables(space, op.rule)
    gx = fem.evaluate_gradient(tables, coeffs[:n])
    gy = fem.evaluate_gradient(tables, coeffs[n:])
    return op.fluctuation(gx[:, :, 0] + gy[:, :, 1])


# ---------------------------------------------------------------------------
# sparse sampling maps used by the assembly module


def sampling_matrices(op, space):
    """Sparse maps from scalar coefficients to fluctuation samples.

    Returns (Fx, Fy), each of shape (nc*nq, n): row c*nq + q holds the
    fluctuation of the x- (resp. y-) derivative at quadrature point q of
    cell c.  Composition: F = E - T @ G with E the derivative sampler,
    G the projection onto target coefficients, T the target sampler.
    """
    _check_source(op, space)
    tables = fem.basis_tables(space, op.rule)
    nc = op.mesh.num_cells
    nq = op.rule.num_points
    n = space.num_dofs
    nd = space.num_local
    rows = np.repeat(np.arange(nc * nq), nd)
    cols = np.broadcast_to(space.cell_dofs[:, None, :], (nc, nq, nd)).ravel()

    tvals = op.target_values
    ndj = tvals.shape[1]
    trows = np.repeat(np.arange(nc * nq), ndj)
    tcols = np.broadcast_to(op.target.cell_dofs[:, None, :], (nc, nq, ndj)).ravel()
    tdata = np.broadcast_to(tvals[None, :, :], (nc, nq, ndj)).ravel()
    T = sp.coo_matrix((tdata, (trows, tcols)), shape=(nc * nq, op.target.num_dofs)).tocsr()

    out = []
    for a in range(2):
        data = tables.grads[:, :, :, a].ravel()
        E = sp.coo_matrix((data, (rows, cols)), shape=(nc * nq, n)).tocsr()
        # projection of the sampled derivative: for target dof d, sum over
        # quadrature points of the owner cell
        gr = np.repeat(np.arange(op.target.num_dofs), nd * nq)
        gc = np.broadcast_to(space.cell_dofs[op.owner_cell][:, None, :],
                             (op.target.num_dofs, nq, nd)).ravel()
        gd = np.einsum("dq,dqi->dqi", op.proj_weights,
                       tables.grads[op.owner_cell][:, :, :, a]).ravel()
        G = sp.coo_matrix((gd, (gr, gc)), shape=(op.target.num_dofs, n)).tocsr()
        out.append((E - T @ G).tocsr())
    return out[0], out[1]
