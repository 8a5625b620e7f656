import math
from math import factorial

import numpy as np
import pytest

from lpsflow import fem, mesh as meshing
from lpsflow.errors import ConfigurationError
from lpsflow.mms import ManufacturedSolution


def exact_monomial_integral(a, b):
    # integral of x^a y^b over the reference triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


class TestQuadrature:
    def test_degree1_is_barycenter_rule(self):
        r = fem.quadrature_for(1)
        assert r.num_points == 1
        assert abs(r.weights[0] - 0.5) < 1e-15
        assert np.abs(r.points[0] - 1 / 3).max() < 1e-15

    @pytest.mark.parametrize("degree", range(1, 13))
    def test_weights_sum_to_half(self, degree):
        r = fem.quadrature_for(degree)
        assert abs(r.weights.sum() - 0.5) < 1e-14

    @pytest.mark.parametrize("degree", range(1, 13))
    def test_exactness_against_closed_form(self, degree):
        r = fem.quadrature_for(degree)
        assert r.exactness_degree >= degree
        x, y = r.points[:, 1], r.points[:, 2]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                got = float((r.weights * x ** a * y ** b).sum())
                exact = exact_monomial_integral(a, b)
                assert abs(got - exact) <= 1e-13 * max(1.0, abs(exact))

    def test_degree8_specific_monomial(self):
        r = fem.quadrature_for(8)
        x, y = r.points[:, 1], r.points[:, 2]
        got = float((r.weights * x ** 3 * y ** 5).sum())
        assert abs(got - exact_monomial_integral(3, 5)) < 1e-15

    def test_degree_cap(self):
        with pytest.raises(ConfigurationError):
            fem.quadrature_for(13)


class TestSpace:
    @pytest.mark.parametrize("degree,expected", [(1, 4), (2, 9), (3, 16)])
    def test_dof_counts_grid1_level0(self, degree, expected):
        space = fem.build_space(meshing.build_grid1(0), degree)
        assert space.num_dofs == expected

    @pytest.mark.parametrize("degree", [1, 2, 3])
    @pytest.mark.parametrize("build,level", [(meshing.build_grid1, 2),
                                             (meshing.build_grid2, 1)])
    def test_dof_count_formula(self, degree, build, level):
        m = build(level)
        space = fem.build_space(m, degree)
        ne = m.edges().shape[0]
        bubble = (degree - 1) * (degree - 2) // 2
        assert space.num_dofs == (m.num_vertices + (degree - 1) * ne
                                  + max(0, bubble) * m.num_cells)

    def test_invalid_degree(self):
        with pytest.raises(ConfigurationError):
            fem.build_space(meshing.build_grid1(0), 4)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_boundary_dofs_lie_on_boundary(self, degree):
        space = fem.build_space(meshing.build_grid2(1), degree)
        xy = space.dof_coords[space.boundary_dofs]
        on_edge = ((np.abs(xy[:, 0]) < 1e-12) | (np.abs(xy[:, 0] - 1) < 1e-12)
                   | (np.abs(xy[:, 1]) < 1e-12) | (np.abs(xy[:, 1] - 1) < 1e-12))
        assert on_edge.all()

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_global_continuity_across_edges(self, degree):
        # evaluate a random FE function from both sides of interior edges
        m = meshing.build_grid2(1)
        space = fem.build_space(m, degree)
        rng = np.random.default_rng(3)
        coeffs = rng.normal(size=space.num_dofs)

        edges = {}
        for c, tri in enumerate(m.cells):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edges.setdefault(key, []).append(c)
        for (va, vb), cells in edges.items():
            if len(cells) != 2:
                continue
            traces = []
            for c in cells:
                lam = _edge_barycentric_for_cell(m.cells[c], va, vb)
                vals, _ = fem.reference_basis(degree, lam)
                traces.append(vals @ coeffs[space.cell_dofs[c]])
            assert np.abs(traces[0] - traces[1]).max() < 1e-12


def _edge_barycentric_for_cell(tri, va, vb):
    """Barycentric coordinates of points along edge (va, vb) within tri."""
    ts = np.linspace(0.1, 0.9, 5)
    ia = list(tri).index(va)
    ib = list(tri).index(vb)
    lam = np.zeros((ts.size, 3))
    lam[:, ia] = 1.0 - ts
    lam[:, ib] = ts
    return lam


class TestBasis:
    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_partition_of_unity(self, degree):
        space = fem.build_space(meshing.build_grid2(0), degree)
        rule = fem.quadrature_for(3 * degree)
        for cell in range(space.mesh.num_cells):
            vals, grads, _, _ = fem.eval_basis(space, cell, rule)
            assert np.abs(vals.sum(axis=1) - 1.0).max() < 1e-13
            assert np.abs(grads.sum(axis=1)).max() < 1e-12

    def test_p1_at_barycenter(self):
        vals, _ = fem.reference_basis(1, np.array([[1 / 3, 1 / 3, 1 / 3]]))
        assert np.abs(vals - 1 / 3).max() < 1e-15

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_nodal_property(self, degree):
        # basis i equals one at node i, zero at the others
        from oracles import reference_nodes
        nodes = reference_nodes(degree)
        lam = np.column_stack([1 - nodes[:, 0] - nodes[:, 1], nodes[:, 0], nodes[:, 1]])
        vals, _ = fem.reference_basis(degree, lam)
        assert np.abs(vals - np.eye(vals.shape[0])).max() < 1e-12

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        pts = rng.dirichlet(np.ones(3), size=20)
        h = 1e-6
        for degree in (1, 2, 3):
            vals, grads = fem.reference_basis(degree, pts)
            for axis in range(2):
                shift = np.zeros(3)
                # moving in reference x: lam1 += h, lam0 -= h; in y: lam2 += h
                shift[axis + 1] = h
                shift[0] = -h
                vp, _ = fem.reference_basis(degree, pts + shift)
                vm, _ = fem.reference_basis(degree, pts - shift)
                fd = (vp - vm) / (2 * h)
                assert np.abs(fd - grads[:, :, axis]).max() < 1e-7


class TestInterpolation:
    def test_constant_reproduced(self):
        space = fem.build_space(meshing.build_grid1(1), 2)
        coeffs = fem.interpolate(space, lambda x, y: np.full_like(x, 3.25))
        assert np.abs(coeffs - 3.25).max() < 1e-14

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_polynomial_reproduction(self, degree):
        rng = np.random.default_rng(degree)
        cs = rng.normal(size=(degree + 1, degree + 1))

        def poly(x, y):
            acc = np.zeros_like(x)
            for i in range(degree + 1):
                for j in range(degree + 1 - i):
                    acc = acc + cs[i, j] * x ** i * y ** j
            return acc

        space = fem.build_space(meshing.build_grid2(1), degree)
        coeffs = fem.interpolate(space, poly)
        tables = fem.basis_tables(space, fem.quadrature_for(2 * degree))
        got = fem.evaluate_field(tables, coeffs)
        want = poly(tables.phys_points[..., 0], tables.phys_points[..., 1])
        assert np.abs(got - want).max() < 1e-12

    def test_lagrange_property_at_dof_coords(self):
        space = fem.build_space(meshing.build_grid2(1), 3)
        f = lambda x, y: np.sin(x) * np.cos(y)
        coeffs = fem.interpolate(space, f)
        x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
        assert np.abs(coeffs - f(x, y)).max() < 1e-13

    def test_manufactured_velocity_vanishes_at_t_half_pi(self):
        space = fem.build_space(meshing.build_grid1(1), 2)
        sol = ManufacturedSolution(1.0)
        coeffs = fem.interpolate_vector(space, sol.velocity_at(math.pi / 2))
        assert np.abs(coeffs).max() < 1e-15

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_interpolation_error_decay_rate(self, degree):
        # L2 error of the interpolant decays with rate degree + 1
        sol = ManufacturedSolution(1.0)
        errs = []
        for lv in (2, 3, 4):
            m = meshing.build_grid1(lv)
            space = fem.build_space(m, degree)
            tables = fem.basis_tables(space, fem.quadrature_for(3 * degree + 2))
            c = fem.interpolate(space, lambda x, y: sol.velocity(0.0, x, y)[0])
            got = fem.evaluate_field(tables, c)
            want = sol.velocity(0.0, tables.phys_points[..., 0], tables.phys_points[..., 1])[0]
            errs.append(math.sqrt(float((tables.scaled_weights * (got - want) ** 2).sum())))
        rate = math.log2(errs[-2] / errs[-1])
        assert abs(rate - (degree + 1)) < 0.2
