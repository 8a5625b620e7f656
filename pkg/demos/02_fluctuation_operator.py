"""The quasi-interpolation and its fluctuation.

The stabilizers penalize the fluctuation (identity minus a locally
projected interpolant) of gradients.  This script shows the two key
properties: the fluctuation annihilates anything in the coarser target
space, and on smooth data it shrinks at rate j+1.
"""

import numpy as np

from lpsflow import build_grid1, build_space, build_quasi_interpolant, fluct_gradient, interpolate
from lpsflow.assembly import default_rule_for
from lpsflow.fem import basis_tables, evaluate_field

degree = 2
mesh = build_grid1(2)
space = build_space(mesh, degree)
target = build_space(mesh, degree - 1)
rule = default_rule_for(degree)
op = build_quasi_interpolant(target, mesh, rule)

# annihilation: a field of the target space passes through unchanged
rng = np.random.default_rng(0)
coeffs = rng.normal(size=target.num_dofs)
samples = evaluate_field(basis_tables(target, rule), coeffs)
print("reproduction error on a random P1 field:",
      np.abs(op.project(samples) - coeffs).max())
print("fluctuation of that field:", np.abs(op.fluctuation(samples)).max())

# a linear field has a constant gradient, so the gradient fluctuation is zero
lin = interpolate(space, lambda x, y: 3.0 * x - 2.0 * y)
print("gradient fluctuation of a linear field:",
      np.abs(fluct_gradient(op, space, lin)).max())

# smooth data: L2 norm of the fluctuation decays at rate j+1 = degree
print("\nfluctuation decay on sin(pi x) sin(pi y):")
prev = None
for level in (1, 2, 3, 4):
    m = build_grid1(level)
    o = build_quasi_interpolant(build_space(m, degree - 1), m, rule)
    fl = o.fluctuation_of_function(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    err = float(np.sqrt((o.scaled_weights * fl ** 2).sum()))
    rate = "" if prev is None else f"  rate {np.log2(prev / err):.3f}"
    print(f"  level {level}: {err:.6e}{rate}")
    prev = err
