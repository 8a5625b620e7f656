import math

import numpy as np
import pytest

from lpsflow import assembly, fem, lps, mesh as meshing
from lpsflow.errors import UsageError
from lpsflow.mms import ManufacturedSolution
from oracles import DenseFluctuation


def make_operator(mesh, degree):
    rule = assembly.default_rule_for(degree)
    if degree == 1:
        target = lps.piecewise_constant_space(mesh)
    else:
        target = fem.build_space(mesh, degree - 1)
    return lps.build_quasi_interpolant(target, mesh, rule), rule


class TestReproduction:
    @pytest.mark.parametrize("degree", [2, 3])
    def test_coefficients_reproduced_for_target_space_inputs(self, degree):
        # sigma of v_h in the degree-(l-1) space gives back its coefficients
        mesh = meshing.build_grid1(2)
        op, rule = make_operator(mesh, degree)
        rng = np.random.default_rng(11)
        tables = fem.basis_tables(op.target, rule)
        for _ in range(100):
            coeffs = rng.normal(size=op.target.num_dofs)
            samples = fem.evaluate_field(tables, coeffs)
            assert np.abs(op.project(samples) - coeffs).max() < 1e-12
            assert np.abs(op.fluctuation(samples)).max() < 1e-12

    def test_constant_input(self):
        mesh = meshing.build_grid2(1)
        op, _ = make_operator(mesh, 2)
        samples = np.full((mesh.num_cells, op.rule.num_points), 4.25)
        assert np.abs(op.project(samples) - 4.25).max() < 1e-13
        assert np.abs(op.fluctuation(samples)).max() < 1e-13

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_constant_gradient_field_annihilated(self, degree):
        mesh = meshing.build_grid2(1)
        op, _ = make_operator(mesh, degree)
        space = fem.build_space(mesh, degree)
        coeffs = fem.interpolate(space, lambda x, y: 3.0 * x - 2.0 * y + 1.0)
        assert np.abs(lps.fluct_gradient(op, space, coeffs)).max() < 1e-12


class TestApproximation:
    @pytest.mark.parametrize("degree", [2, 3])
    def test_smooth_decay_rate_j_plus_1(self, degree):
        j = degree - 1
        errs = []
        for lv in (2, 3, 4):
            mesh = meshing.build_grid1(lv)
            op, _ = make_operator(mesh, degree)
            fl = op.fluctuation_of_function(
                lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
            errs.append(math.sqrt(float((op.scaled_weights * fl ** 2).sum())))
        rate = math.log2(errs[-2] / errs[-1])
        assert abs(rate - (j + 1)) < 0.35

    @pytest.mark.parametrize("degree", [2, 3])
    def test_weighted_pressure_fluct_energy_decay(self, degree):
        # tau = h_K^2 times the squared fluctuation of grad(I_h p) decays
        # at least like h^(2l); observed rate is 2l + 2 for the smooth p
        sol = ManufacturedSolution(1.0)
        energies = []
        for lv in (2, 3, 4):
            mesh = meshing.build_grid1(lv)
            op, _ = make_operator(mesh, degree)
            space = fem.build_space(mesh, degree)
            ph = fem.interpolate(space, sol.pressure_at(0.0))
            g = lps.fluct_gradient(op, space, ph)
            tau = mesh.cell_diameters ** 2
            energies.append(float(
                (tau[None, :, None] * op.scaled_weights[None, ...] * g[0] ** 2).sum()))
        rate = math.log2(energies[-2] / energies[-1])
        assert rate > 2 * degree - 0.2
        assert abs(rate - (2 * degree + 2)) < 0.6


class TestAgainstDenseOracle:
    @pytest.mark.parametrize("build", [meshing.build_grid1, meshing.build_grid2])
    @pytest.mark.parametrize("degree", [2, 3])
    def test_gradient_fluctuation_matches_dense(self, build, degree):
        mesh = build(0)
        op, rule = make_operator(mesh, degree)
        space = fem.build_space(mesh, degree)
        dense = DenseFluctuation(op.target, mesh, rule)
        rng = np.random.default_rng(5)
        coeffs = rng.normal(size=space.num_dofs)
        tables = fem.basis_tables(space, rule)
        got = lps.fluct_gradient(op, space, coeffs)
        for axis in range(2):
            samples = fem.evaluate_gradient(tables, coeffs)[:, :, axis]
            want = dense.apply(samples)
            assert np.abs(got[0, axis] - want).max() < 1e-12

    @pytest.mark.parametrize("degree", [2, 3])
    def test_divergence_fluctuation_matches_dense(self, degree):
        mesh = meshing.build_grid2(0)
        op, rule = make_operator(mesh, degree)
        space = fem.build_space(mesh, degree)
        dense = DenseFluctuation(op.target, mesh, rule)
        rng = np.random.default_rng(6)
        coeffs = rng.normal(size=2 * space.num_dofs)
        tables = fem.basis_tables(space, rule)
        gx = fem.evaluate_gradient(tables, coeffs[:space.num_dofs])
        gy = fem.evaluate_gradient(tables, coeffs[space.num_dofs:])
        want = dense.apply(gx[:, :, 0] + gy[:, :, 1])
        got = lps.fluct_divergence(op, space, coeffs)
        assert np.abs(got - want).max() < 1e-12

    def test_zero_field(self):
        mesh = meshing.build_grid1(1)
        op, _ = make_operator(mesh, 2)
        space = fem.build_space(mesh, 2)
        out = lps.fluct_divergence(op, space, np.zeros(2 * space.num_dofs))
        assert np.abs(out).max() == 0.0

    def test_constant_divergence_field_annihilated(self):
        # div(x, y) = 2 is constant, so its fluctuation vanishes
        mesh = meshing.build_grid2(1)
        op, _ = make_operator(mesh, 2)
        space = fem.build_space(mesh, 2)
        coeffs = np.concatenate([fem.interpolate(space, lambda x, y: x),
                                 fem.interpolate(space, lambda x, y: y)])
        assert np.abs(lps.fluct_divergence(op, space, coeffs)).max() < 1e-12


class TestStructure:
    def test_mesh_mismatch_rejected(self):
        mesh = meshing.build_grid1(1)
        other = meshing.build_grid1(1)
        op, _ = make_operator(mesh, 2)
        space_other = fem.build_space(other, 2)
        with pytest.raises(UsageError):
            lps.fluct_gradient(op, space_other, np.zeros(space_other.num_dofs))

    def test_owner_cell_is_lowest_adjacent(self):
        mesh = meshing.build_grid1(1)
        op, _ = make_operator(mesh, 2)
        for d, owner in enumerate(op.owner_cell):
            adjacent = [c for c in range(mesh.num_cells)
                        if d in op.target.cell_dofs[c]]
            assert owner == min(adjacent)

    def test_stencil_depends_only_on_owner_cell(self):
        # each sigma coefficient uses only source dofs of its owner cell
        mesh = meshing.build_grid1(1)
        op, rule = make_operator(mesh, 2)
        space = fem.build_space(mesh, 2)
        fx, _ = lps.sampling_matrices(op, space)
        # probe: perturbing a source dof far from a cell's owner patch
        # must not change sigma there; equivalently project() touches
        # only owner-cell samples, which holds by construction
        rng = np.random.default_rng(9)
        base = rng.normal(size=(mesh.num_cells, rule.num_points))
        sig0 = op.project(base)
        for d in range(op.target.num_dofs):
            mod = base.copy()
            untouched = [c for c in range(mesh.num_cells) if c != op.owner_cell[d]]
            mod[untouched] += 1.0
            assert abs(op.project(mod)[d] - sig0[d]) < 1e-12

    def test_local_stability_constant_level_independent(self):
        rng = np.random.default_rng(7)
        consts = []
        for lv in (1, 2, 3):
            mesh = meshing.build_grid1(lv)
            op, rule = make_operator(mesh, 2)
            space = fem.build_space(mesh, 2)
            tables = fem.basis_tables(space, rule)
            neigh = mesh.cell_neighbors()
            cmax = 0.0
            for _ in range(34):
                coeffs = rng.normal(size=space.num_dofs)
                samples = fem.evaluate_field(tables, coeffs)
                sig = op.expand(op.project(samples))
                num = (op.scaled_weights * sig ** 2).sum(axis=1)
                den_cell = (op.scaled_weights * samples ** 2).sum(axis=1)
                for cell in range(mesh.num_cells):
                    den = sum(den_cell[c2] for c2 in neigh[cell])
                    cmax = max(cmax, math.sqrt(num[cell] / den))
            consts.append(cmax)
        assert max(consts) / min(consts) <= 1.5
