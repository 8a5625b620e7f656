"""Direct and preconditioned-Krylov solution of the saddle-point systems.

The zero-mean pressure constraint is an augmentation row/column (one
scalar Lagrange multiplier).  Factorizing the augmented matrix directly
is wasteful: the mean functional is a dense row and sparse orderings
produce massive fill around it.  Instead the multiplier is eliminated
by a bordered solve: factorize the (sparse) system matrix regularized
by a single diagonal pin entry, then recover the exact solution of the
augmented system from a few triangular solves and a 2x2 system.
Residuals of the *augmented* system are driven to ~1e-13 relative by
iterative refinement, so the elimination is transparent to callers.

Dirichlet rows and columns are both eliminated (values moved to the
right-hand side), which keeps the sparsity pattern symmetric; SuperLU
runs in symmetric mode with a relaxed pivot threshold, which preserves
the fill-reducing ordering.  Plain partial pivoting is the fallback.

The gradient/divergence fluctuation stabilizers couple unknowns across
owner-cell neighborhoods; their two-hop stencil inflates direct fill
badly on fine meshes.  For those systems a GMRES backend is provided:
the exact matrix is applied as an operator while the factorization of
the narrow part (plus the cell-local portion of the stabilizer) serves
as preconditioner, refreshed once per time step.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

__all__ = ["solve_linear", "SaddlePointSolver"]

_SYM_OPTIONS = {"SymmetricMode": True, "DiagPivotThresh": 1e-3}


def solve_linear(matrix, rhs):
    """Direct sparse solve with iterative refinement.

    Raises SolverError when the factorization fails or the relative
    residual stays above 1e-11.
    """
    a = matrix.tocsc()
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values (singular system?)")
    x += lu.solve(rhs - a @ x)
    bnorm = np.linalg.norm(rhs)
    rnorm = np.linalg.norm(rhs - a @ x)
    if rnorm > 1e-11 * max(bnorm, 1.0):
        raise SolverError(f"direct solve residual {rnorm:.3e} exceeds tolerance")
    return x


def _interleave_permutation(n):
    """Group (u_x, u_y, p) unknowns per node; helps the ordering heuristic."""
    perm = np.empty(3 * n, dtype=np.intp)
    idx = np.arange(n)
    perm[3 * idx] = idx
    perm[3 * idx + 1] = idx + n
    perm[3 * idx + 2] = idx + 2 * n
    return perm


class _Bordered:
    """Bordered elimination of the mean multiplier for one factorization."""

    def __init__(self, lu, perm, iperm, c, k, alpha):
        self._lu = lu
        self._perm = perm
        self._iperm = iperm
        self.c = c
        self.k = k
        self.alpha = alpha
        self.v = self._solve(c)
        e_k = np.zeros(c.size)
        e_k[k] = 1.0
        self.w = self._solve(e_k)
        self.m22 = np.array([[1.0 - alpha * self.w[k], self.v[k]],
                             [alpha * (c @ self.w), -(c @ self.v)]])

    def _solve(self, vec):
        return self._lu.solve(vec[self._perm])[self._iperm]

    def apply(self, r_z, r_s):
        """Solve  A dz + c dlam = r_z,  c^T dz = r_s  (A unpinned)."""
        y = self._solve(r_z)
        try:
            s, lam = np.linalg.solve(self.m22, np.array([y[self.k], r_s - self.c @ y]))
        except np.linalg.LinAlgError as exc:
            raise SolverError("bordered 2x2 system is singular") from exc
        return y - lam * self.v + self.alpha * s * self.w, lam


class SaddlePointSolver:
    """Solves  A z + c*lam = b,  c^T z = r  with Dirichlet elimination.

    `A` is the (3n x 3n) block system for (velocity, pressure); `c` the
    mean-functional column.  Dirichlet velocity values are imposed
    exactly; the multiplier makes the pressure mean zero up to roundoff.

    backend "direct" factorizes each matrix passed to solve(); backend
    "gmres" applies it as an operator, preconditioned by the last
    matrix given to prepare_preconditioner(), and falls back to the
    direct path when Krylov iteration stagnates.
    """

    def __init__(self, n, dirichlet, mean_vector, backend="direct",
                 pin_index=None, alpha=1.0):
        self.n = n
        self.size = 3 * n
        self.backend = backend
        self.dirichlet = np.asarray(dirichlet, dtype=np.intp)
        self.c = np.concatenate([np.zeros(2 * n), mean_vector])
        self.k = 2 * n if pin_index is None else pin_index
        self.alpha = float(alpha)
        mask = np.ones(self.size)
        mask[self.dirichlet] = 0.0
        self._mask_diag = sp.diags(mask)
        self._mask = mask
        ones = np.ones(self.dirichlet.size)
        self._identity_rows = sp.coo_matrix(
            (ones, (self.dirichlet, self.dirichlet)), shape=(self.size, self.size)).tocsr()
        self._pin = sp.coo_matrix(
            ([self.alpha], ([self.k], [self.k])), shape=(self.size, self.size)).tocsr()
        self._perm = _interleave_permutation(n)
        self._iperm = np.argsort(self._perm)
        self._precond = None

    def _masked(self, matrix):
        return self._mask_diag @ matrix @ self._mask_diag + self._identity_rows

    def _factorize(self, masked):
        ap = (masked + self._pin)[self._perm][:, self._perm].tocsc()
        try:
            lu = spla.splu(ap, permc_spec="MMD_AT_PLUS_A", options=dict(_SYM_OPTIONS))
        except RuntimeError:
            # static pivoting hit a hard zero; fall back to full pivoting
            lu = spla.splu(ap, permc_spec="COLAMD")
        return _Bordered(lu, self._perm, self._iperm, self.c, self.k, self.alpha)

    def prepare_preconditioner(self, matrix):
        """Factorize `matrix` (masked, pinned) for use by the gmres backend."""
        self._precond = self._factorize(self._masked(matrix))

    def _rhs_with_boundary(self, matrix, rhs, boundary_values):
        g_vec = np.zeros(self.size)
        g_vec[self.dirichlet] = boundary_values
        b = self._mask * (rhs - matrix @ g_vec)
        b[self.dirichlet] = boundary_values
        return b

    def _refine(self, bordered_apply, masked, b, constraint_rhs, z, lam, passes=3):
        bscale = max(np.linalg.norm(b), 1.0)
        res = np.inf
        for _ in range(passes):
            r_z = b - masked @ z - lam * self.c
            r_s = constraint_rhs - self.c @ z
            res = np.sqrt(r_z @ r_z + r_s * r_s)
            if res <= 1e-13 * bscale:
                return z, lam, res
            dz, dlam = bordered_apply(r_z, r_s)
            z = z + dz
            lam = lam + dlam
            if not np.all(np.isfinite(z)):
                raise SolverError("saddle-point solve produced non-finite values")
        r_z = b - masked @ z - lam * self.c
        r_s = constraint_rhs - self.c @ z
        return z, lam, np.sqrt(r_z @ r_z + r_s * r_s)

    def _solve_direct(self, masked, b, constraint_rhs):
        bordered = self._factorize(masked)
        z, lam = bordered.apply(b, constraint_rhs)
        return self._refine(bordered.apply, masked, b, constraint_rhs, z, lam)

    def _solve_gmres(self, masked, b, constraint_rhs):
        if self._precond is None:
            raise SolverError("gmres backend used before prepare_preconditioner()")
        pc = self._precond
        size = self.size

        def op(x):
            z, lam = x[:size], x[size]
            return np.concatenate([masked @ z + lam * self.c, [self.c @ z]])

        def pre(x):
            dz, dlam = pc.apply(x[:size], x[size])
            return np.concatenate([dz, [dlam]])

        a_op = spla.LinearOperator((size + 1, size + 1), matvec=op)
        m_op = spla.LinearOperator((size + 1, size + 1), matvec=pre)
        rhs = np.concatenate([b, [constraint_rhs]])
        sol = np.zeros(size + 1)
        bscale = max(np.linalg.norm(rhs), 1.0)
        res = np.linalg.norm(rhs)
        for _ in range(6):
            if res <= 2e-15 * bscale:
                break
            resid = rhs - op(sol)
            dx, info = spla.gmres(a_op, resid, M=m_op, rtol=1e-12, atol=1e-16,
                                  restart=120, maxiter=3)
            new_res = np.linalg.norm(resid - op(dx))
            if info != 0 and new_res > 0.5 * res:
                return None  # stagnation; caller falls back to direct
            sol = sol + dx
            if new_res > 0.9 * res:
                res = new_res
                break
            res = new_res
        res = np.linalg.norm(rhs - op(sol))
        if res > 1e-13 * bscale:
            return None
        return sol[:size], sol[size], res

    def solve(self, matrix, rhs, boundary_values, constraint_rhs=0.0):
        """Solve for (z, lam); `boundary_values` are the Dirichlet data."""
        masked = self._masked(matrix)
        b = self._rhs_with_boundary(matrix, rhs, boundary_values)
        bscale = max(np.linalg.norm(b), 1.0)
        result = None
        if self.backend == "gmres":
            result = self._solve_gmres(masked, b, constraint_rhs)
        if result is None:
            result = self._solve_direct(masked, b, constraint_rhs)
        z, lam, res = result
        if not np.all(np.isfinite(z)):
            raise SolverError("saddle-point solve produced non-finite values")
        if res > 1e-11 * bscale:
            raise SolverError(f"saddle-point residual {res:.3e} exceeds tolerance")
        return z, lam
