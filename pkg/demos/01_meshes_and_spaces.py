"""Meshes of the unit square and the equal-order Lagrange spaces.

Builds the regular grid 1 and the irregular grid 2, refines them, and
shows the dof bookkeeping of the P1/P2/P3 spaces.
"""

import numpy as np

from lpsflow import build_grid1, build_grid2, build_space, dump_mesh, refine_red, validate_mesh

print("Grid 1 (regular diagonal triangulation)")
for level in range(4):
    m = build_grid1(level)
    validate_mesh(m)
    print(f"  level {level}: {m.num_cells:5d} cells, {m.num_vertices:5d} vertices, "
          f"h = {m.h_max:.5f}, h_max/h_min = {m.h_max / m.h_min:.3f}")

print("\nGrid 2 (fixed irregular coarse mesh, red-refined)")
m2 = build_grid2(0)
print(f"  level 0 cell areas: {np.sort(m2.cell_areas()).round(4)}")
for level in range(3):
    m = build_grid2(level)
    validate_mesh(m)
    print(f"  level {level}: {m.num_cells:5d} cells, h = {m.h_max:.5f}")

print("\nRed refinement halves every diameter:")
child = refine_red(m2)
print(f"  parent h = {m2.h_max}, child h = {child.h_max}")

print("\nEqual-order spaces on grid 1 level 2:")
mesh = build_grid1(2)
for degree in (1, 2, 3):
    space = build_space(mesh, degree)
    print(f"  P{degree}: {space.num_dofs:4d} scalar dofs "
          f"({space.boundary_dofs.size} on the boundary); velocity+pressure "
          f"unknowns = {3 * space.num_dofs}")

print("\nPlain-text dump of the 2-cell mesh:")
print(dump_mesh(build_grid1(0)))
