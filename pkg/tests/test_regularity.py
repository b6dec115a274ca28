from math import sqrt

import numpy as np
import pytest

from degenlab.geometry import Perforation, PolarGrid, ProblemDims
from degenlab import regularity as rg
from degenlab import solver as sv
from degenlab.spectral import indicial_exponents, sphere_eigs


def radial_field(a, n, values_fn, num_r=256, grading=3.0, radius=1.0):
    dims = ProblemDims(n, n, a)
    grid = PolarGrid.build(dims, radius, num_r, grading=grading)
    return sv.DiscreteField(grid, values_fn(grid.r_nodes))


class TestHolderExponent:
    @pytest.mark.parametrize("g", [0.3, 0.5, 0.7, 1.0])
    def test_power_field_exponent(self, g):
        fld = radial_field(-0.5, 2, lambda r: r ** g)
        prof = rg.holder_exponent(fld, order=0)
        assert prof.alpha_hat == pytest.approx(min(g, 1.0), abs=0.02)

    def test_lipschitz_cap(self):
        fld = radial_field(-0.5, 2, lambda r: r ** 1.7)
        prof = rg.holder_exponent(fld, order=0)
        assert prof.alpha_hat <= 1.0

    def test_gradient_order(self):
        g = 1.5
        fld = radial_field(-0.5, 2, lambda r: r ** g)
        prof = rg.holder_exponent(fld, order=1)
        assert prof.alpha_hat == pytest.approx(g - 1.0, abs=0.05)

    def test_constant_field_resolution_limited(self):
        fld = radial_field(-0.5, 2, lambda r: np.ones_like(r))
        assert rg.holder_exponent(fld).resolution_limited

    def test_invalid_order(self):
        fld = radial_field(-0.5, 2, lambda r: r)
        with pytest.raises(ValueError):
            rg.holder_exponent(fld, order=2)


class TestConormalResidual:
    def test_flat_solution_zero_flux(self):
        fld = radial_field(-0.5, 2, lambda r: np.ones_like(r))
        rec = rg.conormal_residual(fld, where="sigma0")
        # one-sided stencil on tiny graded cells amplifies roundoff
        assert rec["residual"] < 1e-6

    def test_linear_field_unit_flux(self):
        dims = ProblemDims(2, 2, -0.5)
        grid = PolarGrid.build(dims, 1.0, 200, epsilon=0.1, grading=1.0)
        fld = sv.DiscreteField(grid, grid.r_nodes.copy())
        rec = rg.conormal_residual(fld, where="hole")
        assert rec["residual"] == pytest.approx(1.0, rel=1e-3)

    def test_where_validation(self):
        fld = radial_field(-0.5, 2, lambda r: r)
        with pytest.raises(ValueError):
            rg.conormal_residual(fld, where="hole")


class TestModeFit:
    def test_exact_basis_element(self):
        a, n = -0.5, 2
        basis = sphere_eigs(2, a, depth=5)
        g1 = indicial_exponents(a, n, 1.0).gamma_plus
        dims = ProblemDims(2, 2, a)
        grid = PolarGrid.build(dims, 1.0, 128, num_theta=192, grading=3.0)
        R, T = np.meshgrid(grid.r_nodes, grid.theta_nodes, indexing="ij")
        fld = sv.DiscreteField(grid, R ** g1 * np.cos(T))
        md = rg.mode_fit(fld, basis, num_levels=4)
        f1 = md.fit_for_level(1)
        # cos(theta) = sqrt(pi) * e_1 in the weighted-orthonormal basis
        assert f1.c_plus == pytest.approx(sqrt(np.pi), rel=1e-3)
        assert abs(f1.c_minus) < 1e-4
        assert md.reconstruction_error < 1e-3
        others = [abs(f.c_plus) + abs(f.c_minus)
                  for f in md.fits if f.mode != 1]
        assert max(others) < 1e-10

    def test_annular_oracle_boundary_conditions(self):
        a, n, mu, eps, R = -0.5, 2, 1.0, 0.1, 1.0
        cp, cm = rg.annular_mode_oracle(a, n, mu, eps, R)
        ind = indicial_exponents(a, n, mu)
        gp, gm = ind.gamma_plus, ind.gamma_minus
        # outer Dirichlet value 1 and zero derivative at the hole
        assert cp * R ** gp + cm * R ** gm == pytest.approx(1.0)
        dv = cp * gp * eps ** (gp - 1) + cm * gm * eps ** (gm - 1)
        assert dv == pytest.approx(0.0, abs=1e-10)


class TestC2Failure:
    def test_closed_form_monotone_blowup(self):
        a, n = -2.5, 3
        q1 = rg.c2_quotient_closed_form(a, n, 0.5, 0.5, 0.2)
        q2 = rg.c2_quotient_closed_form(a, n, 0.5, 0.5, 0.0125)
        assert q2 > 3.0 * q1

    def test_family_is_weighted_harmonic_flux_free(self):
        # the off-diagonal second derivative of the family at the hole
        a, n, eps = -1.5, 2, 0.1
        r = np.linspace(eps, 1.0, 50)
        vals = rg.c2_offdiag_exact(a, n, eps, r)
        t = a + n
        expected = -t * eps ** t * r ** (-t)
        assert vals == pytest.approx(expected)

    def test_table_matches_closed_form(self):
        rows = rg.c2_failure_table(-2.5, 3, 0.5, 0.5, [0.2],
                                   num_r=192, num_x=16, grading=2.0)
        assert rows[0]["relative_gap"] < 0.05


class TestHarnackRatio:
    def test_exact_product_solution(self):
        a, n, d = -3.0, 4, 5
        dims = ProblemDims(d, n, a)
        spec = sv.ProblemSpec(
            dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
            thin_data=lambda x: 0.0 * x,
            outer_bc=lambda x, r: r * (1.0 + 0.5 * x),
            x_boxes=[(-1.0, 1.0)], axisymmetric=True)
        fld = sv.solve_problem(spec, num_r=64, num_x=32, grading=3.0)
        hr = rg.harnack_ratio(fld, r_cut=0.05, center=(0.0,))
        assert hr.b == pytest.approx(4.0 - a - 2 * n)
        assert hr.weak_residual < 1e-8
        x = fld.grid.x_axes[0]
        # w = u / r = 1 + 0.5 x, constant in r
        assert hr.w_values.min() == pytest.approx(0.5, abs=1e-6)
        assert hr.w_values.max() == pytest.approx(1.5, abs=1e-6)

    def test_requires_subcritical(self):
        fld = radial_field(0.5, 2, lambda r: r)
        with pytest.raises(ValueError):
            rg.harnack_ratio(fld)
