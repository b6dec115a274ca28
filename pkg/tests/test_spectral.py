from math import pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab.spectral import (alpha_star, circle_weight, gamma1_floor,
                               indicial_exponents, mu_star, regime,
                               sphere_eigs)


class TestIndicialExponents:
    @given(a=st.floats(-3.0, 1.5), mu=st.floats(0.0, 25.0))
    @settings(max_examples=60, deadline=None)
    def test_roots_solve_equation(self, a, mu):
        n = 2
        ind = indicial_exponents(a, n, mu)
        for g in (ind.gamma_plus, ind.gamma_minus):
            assert g ** 2 + (a + n - 2.0) * g - mu == pytest.approx(
                0.0, abs=1e-9)
        assert ind.gamma_plus >= ind.gamma_minus

    def test_mode_zero(self):
        ind = indicial_exponents(-0.5, 2, 0.0)
        assert ind.gamma_plus == pytest.approx(0.5)
        assert ind.gamma_minus == pytest.approx(0.0)

    def test_rejects_negative_mu(self):
        with pytest.raises(ValueError):
            indicial_exponents(0.0, 2, -1.0)


class TestThresholdExponent:
    def test_known_value(self):
        _, al = alpha_star(-2.0, 2, 1.0)
        assert al == pytest.approx(1.0 + sqrt(2.0), abs=1e-12)

    def test_isotropic_ratio_one(self):
        for n in range(2, 7):
            ms = mu_star(0.0, n, 1.0)
            assert ms == pytest.approx(n - 1.0, abs=1e-12)

    def test_ratio_validation(self):
        with pytest.raises(ValueError):
            mu_star(0.0, 2, 0.0)
        with pytest.raises(ValueError):
            mu_star(0.0, 2, 1.5)

    def test_regime_record(self):
        rec = regime(-2.0, 2, 1.0)
        assert rec["capacity_regime"] == "supersingular"
        assert not rec["a2_weight"]
        assert rec["c1_regime"]

    def test_gamma1_floor(self):
        g = gamma1_floor(-0.5, 2, 1.0, 1.0)
        assert g == pytest.approx(indicial_exponents(-0.5, 2, 1.0).gamma_plus)
        with pytest.raises(ValueError):
            gamma1_floor(-2.0, 2, 1.0, 1.0)


class TestSphereEigs:
    def test_isotropic_closed_form(self):
        basis = sphere_eigs(3, -1.0, depth=5)
        assert basis.mus == pytest.approx([k * (k + 1) for k in range(5)])
        assert basis.mults == [1, 3, 5, 7, 9]

    def test_circle_analytic(self):
        basis = sphere_eigs(2, -0.5, depth=4, num_theta=256)
        assert basis.mus == pytest.approx([0.0, 1.0, 4.0, 9.0])
        assert basis.mults == [1, 2, 2, 2]
        assert basis.orthonormality_defect() < 1e-10

    def test_numeric_path_recovers_circle(self):
        basis = sphere_eigs(2, -0.5, depth=4, num_theta=512,
                            method="numeric")
        for k in range(1, 4):
            assert abs(basis.mus[k] - k * k) <= 1e-6 * k * k
        assert basis.mults[1:4] == [2, 2, 2]

    def test_anisotropic_above_floor(self):
        A3 = np.array([[1.0, 0.0], [0.0, 0.25]])
        a = -0.5
        basis = sphere_eigs(2, a, A3=A3, depth=3, num_theta=512)
        assert basis.mus[1] >= mu_star(a, 2, 0.25) - 1e-8
        assert basis.orthonormality_defect() < 1e-8

    def test_sample_interpolation(self):
        basis = sphere_eigs(2, 0.0, depth=3, num_theta=512)
        theta = np.array([0.3, 1.2, 5.0])
        vals = basis.sample(theta)
        # second function is cos(theta)/sqrt(pi)
        assert vals[1] == pytest.approx(np.cos(theta) / sqrt(pi), abs=1e-4)

    def test_weight(self):
        A3 = np.diag([4.0, 1.0])
        th = np.array([0.0, pi / 2.0])
        w = circle_weight(A3, -1.0, th)
        assert w == pytest.approx([0.5, 1.0])

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            sphere_eigs(3, 0.0, A3=np.diag([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            sphere_eigs(3, 0.0, method="numeric")
        with pytest.raises(ValueError):
            sphere_eigs(2, 0.0, method="bogus")
