"""Sparse assembly of all bilinear forms of the stabilized schemes.

Velocity matrices act on the stacked [x-components; y-components]
layout; scalar operators are assembled once and reused blockwise.  One
quadrature rule (exactness >= 3*degree) is used for every form of a run
so that measured convergence rates are free of variational crimes.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem, lps
from .errors import ConfigurationError, UsageError

__all__ = [
    "ParameterRule",
    "StabilizationConfig",
    "SystemBlocks",
    "default_rule_for",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_convection",
    "assemble_graddiv",
    "assemble_pressure_lps",
    "assemble_velocity_lps",
    "assemble_div_coupling",
    "assemble_load",
    "assemble_mean_functional",
]

METHODS = ("GD", "GRADLPS", "DIVLPS", "HALFRATE")


@dataclass(frozen=True)
class ParameterRule:
    """Per-cell stabilization parameter coeff * h_K**power."""

    coeff: float
    power: float = 0.0

    def values(self, mesh):
        if self.coeff < 0:
            raise ConfigurationError("stabilization coefficients must be >= 0")
        if self.power == 0:
            return np.full(mesh.num_cells, float(self.coeff))
        return self.coeff * mesh.cell_diameters ** self.power

    def value_at(self, h):
        return self.coeff * h ** self.power


def _default_stab(method):
    if method == "GD":
        return ParameterRule(1.0, 2.0), None, ParameterRule(0.1, 0.0)
    if method == "GRADLPS":
        return ParameterRule(1.0, 2.0), ParameterRule(1.0, 0.0), None
    if method == "DIVLPS":
        return ParameterRule(1.0, 2.0), ParameterRule(1.0, 0.0), None
    if method == "HALFRATE":
        return ParameterRule(1e-4, 1.0), ParameterRule(0.01, 1.0), None
    raise ConfigurationError(f"unknown method {method!r}")


@dataclass(frozen=True)
class StabilizationConfig:
    """Which stabilization terms a scheme uses and their parameters.

    tau_p weighs the pressure-gradient fluctuation; tau_u the velocity
    fluctuation term (gradient kind for GRADLPS/HALFRATE, divergence
    kind for DIVLPS); mu the global grad-div penalty (GD only).
    """

    method: str
    tau_p: ParameterRule = None
    tau_u: ParameterRule = None
    mu: ParameterRule = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        dp, du, dmu = _default_stab(self.method)
        if self.tau_p is None:
            object.__setattr__(self, "tau_p", dp)
        if self.tau_u is None:
            object.__setattr__(self, "tau_u", du)
        if self.mu is None:
            object.__setattr__(self, "mu", dmu)
        for rule in (self.tau_p, self.tau_u, self.mu):
            if rule is not None and rule.coeff < 0:
                raise ConfigurationError("stabilization coefficients must be >= 0")
        if self.method == "HALFRATE":
            if self.tau_p.power != 1.0 or self.tau_u.power != 1.0:
                raise ConfigurationError(
                    "HALFRATE requires tau_p and tau_u proportional to h_K")

    @property
    def velocity_lps_kind(self):
        if self.method in ("GRADLPS", "HALFRATE"):
            return "gradient"
        if self.method == "DIVLPS":
            return "divergence"
        return None


def default_rule_for(degree):
    """The single quadrature rule of a run (exactness 3*degree)."""
    return fem.quadrature_for(3 * degree)


def _tables(space, tables):
    if tables is None:
        return fem.basis_tables(space, default_rule_for(space.degree))
    if tables.space is not space:
        raise UsageError("basis tables belong to a different space")
    return tables


def _scatter(space_rows, space_cols, local):
    nd_r = space_rows.cell_dofs.shape[1]
    nd_c = space_cols.cell_dofs.shape[1]
    rows = np.repeat(space_rows.cell_dofs, nd_c, axis=1).ravel()
    cols = np.tile(space_cols.cell_dofs, (1, nd_r)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(space_rows.num_dofs, space_cols.num_dofs))
    return mat.tocsr()


def _block_diag2(a):
    return sp.block_diag([a, a], format="csr")


# ---------------------------------------------------------------------------
# scalar building blocks


def scalar_mass(space, tables=None):
    t = _tables(space, tables)
    local = np.einsum("cq,qi,qj->cij", t.scaled_weights, t.values, t.values)
    return _scatter(space, space, local)


def scalar_stiffness(space, tables=None):
    t = _tables(space, tables)
    local = np.einsum("cq,cqia,cqja->cij", t.scaled_weights, t.grads, t.grads)
    return _scatter(space, space, local)


def scalar_convection(space, w_coeffs, tables=None):
    """(w . grad(phi_j) + 0.5 div(w) phi_j, phi_i) for a velocity w."""
    t = _tables(space, tables)
    n = space.num_dofs
    w = np.asarray(w_coeffs)
    if w.shape[0] != 2 * n:
        raise UsageError("convecting field must be a vector field on the space")
    wx = fem.evaluate_field(t, w[:n])
    wy = fem.evaluate_field(t, w[n:])
    gx = fem.evaluate_gradient(t, w[:n])
    gy = fem.evaluate_gradient(t, w[n:])
    divw = gx[:, :, 0] + gy[:, :, 1]
    adv = (np.einsum("cq,cqj->cqj", wx, t.grads[:, :, :, 0])
           + np.einsum("cq,cqj->cqj", wy, t.grads[:, :, :, 1])
           + 0.5 * np.einsum("cq,qj->cqj", divw, t.values))
    local = np.einsum("cq,qi,cqj->cij", t.scaled_weights, t.values, adv)
    return _scatter(space, space, local)


# ---------------------------------------------------------------------------
# public vector-space forms


def assemble_mass(space, tables=None):
    """Velocity mass matrix (2n x 2n)."""
    return _block_diag2(scalar_mass(space, tables))


def assemble_stiffness(space, nu, tables=None):
    """nu-weighted velocity stiffness matrix (2n x 2n)."""
    if nu <= 0:
        raise ConfigurationError("viscosity must be positive")
    return _block_diag2(nu * scalar_stiffness(space, tables))


def assemble_convection(space, w_coeffs, tables=None):
    """Skew convection form linearized at w, acting componentwise."""
    return _block_diag2(scalar_convection(space, w_coeffs, tables))


def assemble_graddiv(space, mu, tables=None):
    """Global grad-div penalty mu*(div u, div v); mu scalar or per-cell."""
    t = _tables(space, tables)
    mu_c = np.broadcast_to(np.asarray(mu, dtype=float), (space.mesh.num_cells,))
    if np.any(mu_c < 0):
        raise ConfigurationError("grad-div parameter must be >= 0")
    w = t.scaled_weights * mu_c[:, None]
    blocks = [[None, None], [None, None]]
    for a in range(2):
        for b in range(2):
            local = np.einsum("cq,cqi,cqj->cij", w,
                              t.grads[:, :, :, a], t.grads[:, :, :, b])
            blocks[a][b] = _scatter(space, space, local)
    return sp.bmat(blocks, format="csr")


def assemble_pressure_lps(space, fluct_op, tau, tables=None):
    """Pressure stabilization: sum_K tau_K (fluct grad p, fluct grad q)_K."""
    tau_c = np.broadcast_to(np.asarray(tau, dtype=float), (space.mesh.num_cells,))
    if np.any(tau_c < 0):
        raise ConfigurationError("tau_p must be >= 0")
    fx, fy = lps.sampling_matrices(fluct_op, space)
    w = (fluct_op.scaled_weights * tau_c[:, None]).ravel()
    W = sp.diags(w)
    mat = (fx.T @ W @ fx + fy.T @ W @ fy).tocsr()
    return mat


def assemble_velocity_lps(space, fluct_op, kind, tau, tables=None):
    """Velocity fluctuation stabilizer of gradient or divergence kind."""
    if kind not in ("gradient", "divergence"):
        raise ConfigurationError(f"kind must be 'gradient' or 'divergence', got {kind!r}")
    tau_c = np.broadcast_to(np.asarray(tau, dtype=float), (space.mesh.num_cells,))
    if np.any(tau_c < 0):
        raise ConfigurationError("tau must be >= 0")
    fx, fy = lps.sampling_matrices(fluct_op, space)
    w = (fluct_op.scaled_weights * tau_c[:, None]).ravel()
    W = sp.diags(w)
    if kind == "gradient":
        block = (fx.T @ W @ fx + fy.T @ W @ fy).tocsr()
        return _block_diag2(block)
    # divergence kind couples the components through div = dx ux + dy uy
    sxx = fx.T @ W @ fx
    sxy = fx.T @ W @ fy
    syy = fy.T @ W @ fy
    return sp.bmat([[sxx, sxy], [sxy.T, syy]], format="csr")


def assemble_div_coupling(velocity_space, pressure_space, tables=None):
    """(div u, q) coupling, shape (n_p, 2*n_u); transpose gives -grad p."""
    if velocity_space.mesh is not pressure_space.mesh:
        raise UsageError("velocity and pressure spaces live on different meshes")
    tv = _tables(velocity_space, tables)
    tp = tv if pressure_space is velocity_space else fem.basis_tables(pressure_space, tv.rule)
    bx = np.einsum("cq,qi,cqj->cij", tv.scaled_weights, tp.values, tv.grads[:, :, :, 0])
    by = np.einsum("cq,qi,cqj->cij", tv.scaled_weights, tp.values, tv.grads[:, :, :, 1])
    dx = _scatter(pressure_space, velocity_space, bx)
    dy = _scatter(pressure_space, velocity_space, by)
    return sp.hstack([dx, dy], format="csr")


def assemble_load(space, f, t, tables=None):
    """Load vector of a time-dependent 2-vector forcing, stacked layout."""
    tb = _tables(space, tables)
    x = tb.phys_points[..., 0]
    y = tb.phys_points[..., 1]
    fx, fy = f(t, x, y)
    lx = np.einsum("cq,cq,qi->ci", tb.scaled_weights, np.asarray(fx, dtype=float), tb.values)
    ly = np.einsum("cq,cq,qi->ci", tb.scaled_weights, np.asarray(fy, dtype=float), tb.values)
    out = np.zeros(2 * space.num_dofs)
    np.add.at(out[:space.num_dofs], space.cell_dofs.ravel(), lx.ravel())
    np.add.at(out[space.num_dofs:], space.cell_dofs.ravel(), ly.ravel())
    return out


def assemble_mean_functional(space, tables=None):
    """Vector m with m_i = integral of basis i (the pressure-mean row)."""
    t = _tables(space, tables)
    local = np.einsum("cq,qi->ci", t.scaled_weights, t.values)
    out = np.zeros(space.num_dofs)
    np.add.at(out, space.cell_dofs.ravel(), local.ravel())
    return out


# ---------------------------------------------------------------------------
# grouped blocks for the time stepper


@dataclass
class SystemBlocks:
    """All time-independent matrices of one discretization."""

    mass: sp.csr_matrix
    viscous: sp.csr_matrix
    div_coupling: sp.csr_matrix
    pressure_lps: sp.csr_matrix
    velocity_stab: sp.csr_matrix      # grad-div or velocity LPS; may be zero
    mean_functional: np.ndarray
    config: StabilizationConfig
    tables: fem.BasisTables
    fluct_op: object = None
    _convection_cache: dict = field(default_factory=dict, repr=False)

    def convection(self, w_coeffs):
        return assemble_convection(self.tables.space, w_coeffs, self.tables)

    def load(self, f, t):
        return assemble_load(self.tables.space, f, t, self.tables)


def build_system_blocks(space, config, nu, rule=None):
    """Assemble every static matrix of the scheme given by `config`."""
    if rule is None:
        rule = default_rule_for(space.degree)
    tables = fem.basis_tables(space, rule)
    mesh = space.mesh
    if space.degree == 1:
        target = lps.piecewise_constant_space(mesh)
    else:
        target = fem.build_space(mesh, space.degree - 1)
    fluct_op = lps.build_quasi_interpolant(target, mesh, rule)

    s_p = assemble_pressure_lps(space, fluct_op, config.tau_p.values(mesh), tables)
    kind = config.velocity_lps_kind
    if kind is not None:
        s_u = assemble_velocity_lps(space, fluct_op, kind, config.tau_u.values(mesh), tables)
    elif config.mu is not None:
        s_u = assemble_graddiv(space, config.mu.values(mesh), tables)
    else:
        n2 = 2 * space.num_dofs
        s_u = sp.csr_matrix((n2, n2))
    return SystemBlocks(
        mass=assemble_mass(space, tables),
        viscous=assemble_stiffness(space, nu, tables),
        div_coupling=assemble_div_coupling(space, space, tables),
        pressure_lps=s_p,
        velocity_stab=s_u,
        mean_functional=assemble_mean_functional(space, tables),
        config=config,
        tables=tables,
        fluct_op=fluct_op,
    )
