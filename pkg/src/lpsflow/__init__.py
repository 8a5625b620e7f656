"""Equal-order finite elements for the evolutionary Navier-Stokes
equations with local projection stabilization, plus a manufactured-
solution convergence harness."""

from .assembly import ParameterRule, StabilizationConfig, SystemBlocks, build_system_blocks
from .errors import (ConfigurationError, GeometryError, PicardError,
                     SolverError, UsageError)
from .fem import (FESpace, QuadratureRule, build_space, interpolate,
                  interpolate_vector, quadrature_for)
from .lps import (FluctuationOperator, build_quasi_interpolant,
                  fluct_divergence, fluct_gradient)
from .mesh import (Mesh, build_grid1, build_grid2, dump_mesh, refine_red,
                   validate_mesh)
from .metrics import (RunReport, composite_error_gd, composite_error_lps,
                      convergence_rates, error_norms, pressure_primitive_error)
from .mms import ManufacturedSolution
from .solver import (PicardConfig, SimulationResult, State, TimeGrid,
                     TimeStepper, advance_step, run, solve_linear)

__version__ = "0.1.0"
