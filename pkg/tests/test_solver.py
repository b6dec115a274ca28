import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from degenlab.geometry import Perforation, PolarGrid, ProblemDims
from degenlab import solver as sv


class TestElementMatrices:
    def test_interval_matrices_uniform(self):
        nodes = np.array([0.0, 1.0])
        K, M = sv.interval_matrices(nodes)
        assert np.allclose(K.toarray(), [[1.0, -1.0], [-1.0, 1.0]])
        assert np.allclose(M.toarray(), np.array([[2.0, 1.0],
                                                  [1.0, 2.0]]) / 6.0)

    @given(q=st.floats(-0.9, 2.5), rl=st.floats(0.1, 1.0),
           h=st.floats(0.1, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_power_mass_matches_quadrature(self, q, rl, h):
        nodes = np.array([rl, rl + h])
        M = sv.power_mass_matrix(nodes, q).toarray()
        hat0 = lambda r: (nodes[1] - r) / h
        val, _ = quad(lambda r: r ** q * hat0(r) ** 2, *nodes)
        assert M[0, 0] == pytest.approx(val, rel=1e-8)

    def test_stiffness_constant_annihilated(self):
        nodes = np.linspace(0.5, 1.5, 6)
        K = sv.power_stiffness_matrix(nodes, 1.3).toarray()
        assert np.abs(K @ np.ones(6)).max() < 1e-12

    def test_divergent_center_requires_flag(self):
        nodes = np.array([0.0, 0.5, 1.0])
        with pytest.raises(ValueError):
            sv.power_mass_matrix(nodes, -1.5)
        M = sv.power_mass_matrix(nodes, -1.5, drop_divergent_center=True)
        assert np.isfinite(M.toarray()).all()

    def test_periodic_theta_matrices(self):
        theta = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        K, M = sv.periodic_theta_matrices(theta, None)
        ones = np.ones(64)
        assert np.abs(K @ ones).max() < 1e-12
        assert ones @ (M @ ones) == pytest.approx(2.0 * np.pi)


class TestProblemSpecValidation:
    def test_thin_bc_names(self):
        dims = ProblemDims(2, 2, -0.5)
        with pytest.raises(ValueError):
            sv.ProblemSpec(dims, thin_bc="weird")

    def test_dirichlet_needs_subcritical(self):
        dims = ProblemDims(3, 2, 0.5)  # a+n = 2.5
        with pytest.raises(ValueError):
            sv.ProblemSpec(dims, thin_bc=sv.THIN_DIRICHLET,
                           x_boxes=[(-1, 1)], axisymmetric=True)

    def test_across_needs_integrable_weight(self):
        dims = ProblemDims(2, 2, -2.0)  # a+n = 0
        with pytest.raises(ValueError):
            sv.ProblemSpec(dims, thin_bc=sv.THIN_ACROSS)
        # fine with a hole
        sv.ProblemSpec(dims, perforation=Perforation(epsilon=0.1),
                       thin_bc=sv.THIN_ACROSS)

    def test_perforated_forces_across(self):
        dims = ProblemDims(2, 2, -0.5)
        with pytest.raises(ValueError):
            sv.ProblemSpec(dims, perforation=Perforation(epsilon=0.1),
                           thin_bc=sv.THIN_DIRICHLET)


class TestSolve:
    def test_exact_reproduction_linear_radial(self):
        # at a+n = 1 the solution r lies in the trial space
        dims = ProblemDims(2, 2, -1.0)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                              thin_data=lambda: 0.0,
                              outer_bc=lambda r: r, axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=24, grading=2.0)
        assert np.max(np.abs(fld.values - fld.grid.r_nodes)) < 1e-9

    def test_operator_symmetric_and_cg_converges(self):
        dims = ProblemDims(2, 2, -0.5)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_ACROSS,
                              outer_bc=lambda r, t: np.cos(t)
                              * np.ones_like(r))
        fld = sv.solve_problem(spec, num_r=32, num_theta=48, grading=2.0)
        assert fld.residual < 1e-7
        assert fld.iterations > 0

    def test_dirichlet_trace_honored(self):
        dims = ProblemDims(3, 2, -0.5)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                              thin_data=lambda x: np.exp(-x ** 2),
                              outer_bc=lambda x, r: 0.0 * x,
                              x_boxes=[(-2.0, 2.0)], axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=24, num_x=24, grading=2.0)
        x = fld.grid.x_axes[0]
        # corner nodes belong to the x faces; compare interior thin nodes
        assert np.max(np.abs(fld.values[1:-1, 0]
                             - np.exp(-x[1:-1] ** 2))) < 1e-10
        assert np.max(np.abs(fld.values[:, -1])) < 1e-12
        assert np.max(np.abs(fld.values[0, 1:])) < 1e-12

    def test_tensor_eval_matches_nodes(self):
        dims = ProblemDims(2, 2, -0.5)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                              thin_data=lambda: 0.0,
                              outer_bc=lambda r: r ** 1.5,
                              axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=32, grading=3.0)
        vals = sv.tensor_eval(fld, [fld.grid.r_nodes])
        assert vals == pytest.approx(fld.values, abs=1e-12)

    def test_maximum_principle(self):
        dims = ProblemDims(2, 2, -0.5)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                              thin_data=lambda: 0.0,
                              outer_bc=lambda r: np.ones_like(r),
                              axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=48, grading=3.0)
        assert fld.values.min() >= -1e-10
        assert fld.values.max() <= 1.0 + 1e-10


class TestManufactured:
    def test_convergence_table_shape(self):
        dims = ProblemDims(2, 2, -1.5)
        s0 = 1.5
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                              thin_data=lambda: 0.0,
                              outer_bc=lambda r: r ** s0,
                              axisymmetric=True)
        rec = sv.manufactured_residual(
            lambda r: r ** s0, [lambda r: s0 * r ** (s0 - 1.0)], spec,
            [(8, None, 0), (16, None, 0), (32, None, 0)], grading=4.0)
        assert len(rec["energy_errors"]) == 3
        assert len(rec["observed_orders"]) == 2
        assert rec["observed_orders"][-1] > 0.8

    def test_source_term(self):
        # -(r^{p} u')' = r^{p} f with u = 1 - r^2:
        # f = 2(a+n) constant for the axisymmetric ball problem
        a, n = -0.5, 2
        dims = ProblemDims(2, 2, a)
        f_const = 2.0 * (a + n)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_ACROSS,
                              f=lambda r: f_const * np.ones_like(r),
                              outer_bc=lambda r: 0.0 * r,
                              axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=128, grading=2.0)
        exact = 1.0 - fld.grid.r_nodes ** 2
        assert np.max(np.abs(fld.values - exact)) < 5e-4


class TestPerforationSweep:
    def test_sweep_converges_to_reference(self):
        dims = ProblemDims(2, 2, -0.5)
        spec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_ACROSS,
                              outer_bc=lambda r, t: np.cos(t)
                              * np.ones_like(r))
        out = sv.perforation_sweep(spec, [0.2, 0.1, 0.05], num_r=48,
                                   num_theta=64, grading=2.0)
        l2 = [rec["l2"] for rec in out]
        assert l2 == sorted(l2, reverse=True)  # shrinking hole converges
