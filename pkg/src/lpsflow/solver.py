"""Time stepping with Picard linearization of the convective term.

Each step solves the stabilized saddle-point system for (velocity,
pressure) with a zero-mean multiplier.  The momentum rows are assembled
in dt-scaled form, which keeps the nonlinear residual comparable to
machine precision and lets the iteration reach tight tolerances.
Boundary values are the interpolated Dirichlet data of the exact
solution at the new time level.

The velocity fluctuation stabilizer has a two-hop stencil; on fine
meshes its direct factorization is expensive, so the stepper switches
to the GMRES backend (exact operator, narrow-matrix preconditioner)
when the stabilization parameters are small enough for fast Krylov
convergence.  Lagging the stabilizer to the right-hand side of the
Picard iteration is also supported but diverges for moderate time
steps, so it is off by default.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import assembly, fem, metrics, mesh as meshing
from .errors import ConfigurationError, PicardError, SolverError
from .linalg import SaddlePointSolver, solve_linear

__all__ = [
    "State",
    "TimeGrid",
    "PicardConfig",
    "StepDiagnostics",
    "TimeStepper",
    "solve_linear",
    "advance_step",
    "run",
    "SimulationResult",
]

SCHEMES = {"implicit-euler": 1.0, "crank-nicolson": 0.5}

# gradient/divergence LPS systems switch to the Krylov backend above
# this size, provided the preconditioned spectrum stays clustered
_GMRES_SIZE_LIMIT = 6000
_GMRES_SPREAD_LIMIT = 4.0


@dataclass(frozen=True)
class State:
    t: float
    velocity: np.ndarray   # (2n,) stacked components
    pressure: np.ndarray   # (n,)


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    t_end: float
    scheme: str = "crank-nicolson"

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("time step must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {sorted(SCHEMES)}")
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-10:
            raise ConfigurationError("final time must be a positive integer multiple of dt")

    @property
    def num_steps(self):
        return round(self.t_end / self.dt)

    @property
    def theta(self):
        return SCHEMES[self.scheme]


@dataclass(frozen=True)
class PicardConfig:
    tolerance: float = 1e-13
    max_iterations: int = 50
    lag_fluctuation_gradient: bool = False

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigurationError("Picard tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("Picard needs at least one iteration")

    def lag_for(self, config):
        return (self.lag_fluctuation_gradient
                and config.method in ("GRADLPS", "HALFRATE"))


@dataclass
class StepDiagnostics:
    iterations: int
    residuals: list


def _pad(matrix, size):
    coo = matrix.tocoo()
    return sp.coo_matrix((coo.data, (coo.row, coo.col)), shape=(size, size)).tocsr()


class TimeStepper:
    """Advances the discrete system; owns the assembled static blocks."""

    def __init__(self, space, blocks, forcing, boundary_values, grid, picard,
                 include_convection=True):
        self.space = space
        self.blocks = blocks
        self.forcing = forcing                  # f(t, x, y) -> (fx, fy)
        self.boundary_values = boundary_values  # g(t) -> values on dirichlet dofs
        self.grid = grid
        self.picard = picard
        self.include_convection = include_convection

        n = space.num_dofs
        self.n = n
        bnd = space.boundary_dofs
        self.dirichlet = np.concatenate([bnd, bnd + n])
        self._lag = picard.lag_for(blocks.config)

        # dt-scaled, theta-weighted blocks; the velocity stabilizer is
        # kept separate so it can be lagged or preconditioned around
        th = grid.theta
        dt = grid.dt
        s_u = blocks.velocity_stab
        self._static = sp.bmat([
            [blocks.mass + dt * th * blocks.viscous, -dt * blocks.div_coupling.T],
            [blocks.div_coupling, blocks.pressure_lps],
        ], format="csr")
        self._su_term = _pad(dt * th * s_u, 3 * n)
        self._explicit_static = ((1.0 - th) * (blocks.viscous + s_u)).tocsr()
        self._true_matrix = (self._static + self._su_term).tocsr()
        self._solve_matrix = self._static if self._lag else self._true_matrix

        backend = self._choose_backend()
        self.saddle = SaddlePointSolver(n, self.dirichlet, blocks.mean_functional,
                                        backend=backend)
        if backend == "gmres":
            pattern = self._static.copy()
            pattern.data = np.ones_like(pattern.data)
            self._su_local = self._su_term.multiply(pattern).tocsr()
        else:
            self._su_local = None
        self._f_cache = {}

    def _choose_backend(self):
        kind = self.blocks.config.velocity_lps_kind
        if self._lag or kind is None or self._su_term.nnz == 0:
            return "direct"
        if 3 * self.n + 1 <= _GMRES_SIZE_LIMIT:
            return "direct"
        mesh = self.space.mesh
        tau = self.blocks.config.tau_u.values(mesh)
        spread = self.grid.dt * self.grid.theta * 50.0 * float(
            np.max(tau / mesh.cell_diameters ** 2))
        return "gmres" if spread <= _GMRES_SPREAD_LIMIT else "direct"

    def _load(self, t):
        key = round(t / self.grid.dt)
        if key not in self._f_cache:
            self._f_cache[key] = self.blocks.load(self.forcing, t)
            for k in [k for k in self._f_cache if k < key - 1]:
                del self._f_cache[k]
        return self._f_cache[key]

    def _conv_padded(self, w):
        if not self.include_convection:
            return None
        conv = self.blocks.convection(w)
        return _pad(self.grid.dt * self.grid.theta * conv, 3 * self.n)

    def _explicit_rhs(self, state, f_old, f_new):
        dt, th = self.grid.dt, self.grid.theta
        u = state.velocity
        rhs_u = self.blocks.mass @ u + dt * (th * f_new + (1.0 - th) * f_old)
        if th < 1.0:
            rhs_u -= dt * (self._explicit_static @ u)
            if self.include_convection:
                rhs_u -= dt * (1.0 - th) * (self.blocks.convection(u) @ u)
        return rhs_u

    def _residual(self, z, lam, conv_pad, rhs3, g):
        """Euclidean norm of the nonlinear residual at (z, lam)."""
        a = self._true_matrix if conv_pad is None else self._true_matrix + conv_pad
        r = a @ z - rhs3 + lam * self.saddle.c
        r[self.dirichlet] = z[self.dirichlet] - g
        r_mean = self.saddle.c @ z
        return float(np.sqrt(r @ r + r_mean * r_mean))

    def step(self, state):
        """One theta-step with Picard iteration; returns (State, diagnostics)."""
        n = self.n
        dt = self.grid.dt
        t_new = state.t + dt
        f_old = self._load(state.t)
        f_new = self._load(t_new)
        rhs_u0 = self._explicit_rhs(state, f_old, f_new)
        rhs3_true = np.concatenate([rhs_u0, np.zeros(n)])
        g = self.boundary_values(t_new)

        w = state.velocity
        conv_pad = self._conv_padded(w)
        if self.saddle.backend == "gmres":
            precond = self._static + self._su_local
            if conv_pad is not None:
                precond = precond + conv_pad
            self.saddle.prepare_preconditioner(precond)

        residuals = []
        for it in range(1, self.picard.max_iterations + 1):
            rhs3 = rhs3_true
            if self._lag:
                rhs_u = rhs_u0 - dt * self.grid.theta * (self.blocks.velocity_stab @ w)
                rhs3 = np.concatenate([rhs_u, np.zeros(n)])
            mat = self._solve_matrix if conv_pad is None else self._solve_matrix + conv_pad
            z, lam = self.saddle.solve(mat, rhs3, g)
            u = z[:2 * n]
            conv_new = self._conv_padded(u)
            res = self._residual(z, lam, conv_new, rhs3_true, g)
            residuals.append(res)
            if res < self.picard.tolerance:
                return State(t_new, u, z[2 * n:]), StepDiagnostics(it, residuals)
            w, conv_pad = u, conv_new
        raise PicardError(
            f"Picard iteration did not converge at t={t_new:.6g} "
            f"(residual {residuals[-1]:.3e} after {len(residuals)} iterations)",
            residual=residuals[-1], iterations=len(residuals), time=t_new)


def advance_step(state, stepper):
    """Single accepted step; see TimeStepper.step for the contract."""
    new_state, _ = stepper.step(state)
    return new_state


@dataclass
class SimulationResult:
    states: list
    report: object
    diagnostics: list = field(default_factory=list)


def build_mesh(grid_kind, level):
    if grid_kind == 1:
        return meshing.build_grid1(level)
    if grid_kind == 2:
        return meshing.build_grid2(level)
    raise ConfigurationError(f"grid must be 1 or 2, got {grid_kind!r}")


def run(problem, grid_kind, level, degree, stab_config, time_grid, picard=None,
        nu=None, include_convection=True, keep_states=True):
    """Full time integration with per-step error records.

    `problem` supplies the exact solution (initial data, Dirichlet
    values, forcing); `nu` defaults to problem.nu.  Returns a
    SimulationResult whose report carries the per-step error records
    consumed by the metrics module.
    """
    if picard is None:
        picard = PicardConfig()
    if nu is None:
        nu = problem.nu
    msh = build_mesh(grid_kind, level)
    space = fem.build_space(msh, degree)
    blocks = assembly.build_system_blocks(space, stab_config, nu)

    bnd = space.boundary_dofs
    bx, by = space.dof_coords[bnd, 0], space.dof_coords[bnd, 1]

    def boundary_values(t):
        gx, gy = problem.velocity(t, bx, by)
        return np.concatenate([gx, gy])

    stepper = TimeStepper(space, blocks, problem.forcing, boundary_values,
                          time_grid, picard, include_convection)
    u0 = fem.interpolate_vector(space, problem.velocity_at(0.0))
    state = State(0.0, u0, np.zeros(space.num_dofs))

    report = metrics.RunReport(level=level, h=msh.h_max, nu=nu,
                               dt=time_grid.dt, config=stab_config)
    recorder = metrics.Recorder(space, blocks, problem, report)

    states = [state]
    diags = []
    mean_scale = abs(blocks.mean_functional).sum()
    for _ in range(time_grid.num_steps):
        state, diag = stepper.step(state)
        if abs(blocks.mean_functional @ state.pressure) > 1e-10 * max(mean_scale, 1.0):
            raise SolverError("discrete pressure lost its zero mean")
        recorder.record(state, diag.iterations)
        if keep_states:
            states.append(state)
        diags.append(diag)
    recorder.finish()
    return SimulationResult(states if keep_states else [state], report, diags)
