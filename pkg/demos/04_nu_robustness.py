"""Viscosity robustness: errors stay bounded as nu -> 0.

The error constants of the stabilized schemes do not contain inverse
powers of nu, so sweeping nu from 1e-2 down to 1e-8 at a fixed mesh
moves the composite error only by a bounded factor.
"""

from lpsflow import experiments

cfg = experiments.parse_config("""
method = GD
degree = 2
grid = 1
levels = 2
nu = 1e-2,1e-4,1e-6,1e-8
dt = 0.01
t_end = 0.1
""")

res = experiments.run_nu_sweep(cfg, out_path=None)
values = [(row["nu"], row["composite"]) for row in res.rows]
for nu, comp in values:
    print(f"nu = {nu:8.0e}: composite = {comp:.6e}")
comps = [c for _, c in values]
print(f"\nmax/min ratio across the sweep: {max(comps) / min(comps):.3f}")
