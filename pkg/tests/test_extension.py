from math import gamma, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab import extension as ext


def make_cfg(d=3, n=2, s=0.25, num_points=128):
    return ext.ExtensionConfig(d, n, s, half_width=8.0,
                               num_points=num_points)


class TestDtnConstant:
    def test_unit_at_midpoint(self):
        # a+n = 1 gives 2^0 * Gamma(1/2)/Gamma(1/2) = 1 exactly
        assert ext.dtn_constant(-1.0, 2) == 1.0

    def test_positive_and_vanishing_at_two(self):
        vals = [ext.dtn_constant(t - 2, 2) for t in (0.2, 0.8, 1.4,
                                                     1.9, 1.999)]
        assert all(v > 0 for v in vals)
        assert vals[-1] < vals[-2] < vals[-3]
        assert vals[-1] < 1e-2

    def test_range_validation(self):
        with pytest.raises(ValueError):
            ext.dtn_constant(0.0, 2)


class TestKernel:
    @given(lam=st.floats(0.5, 2.0), x=st.floats(-3.0, 3.0),
           r=st.floats(0.1, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_dilation_covariance(self, lam, x, r):
        cfg = make_cfg()
        m = cfg.base_dim
        lhs = ext.poisson_kernel(cfg, lam * x, lam * r)
        rhs = lam ** (-m) * ext.poisson_kernel(cfg, x, r)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("r", [0.05, 0.1, 0.2])
    def test_unit_mass(self, r):
        cfg = make_cfg()
        assert ext.kernel_mass(cfg, r) == pytest.approx(1.0, abs=1e-6)

    def test_positive_r_required(self):
        cfg = make_cfg()
        with pytest.raises(ValueError):
            ext.poisson_kernel(cfg, 0.0, 0.0)

    def test_symbol_half_is_exponential(self):
        rho = np.linspace(0.01, 5.0, 40)
        assert ext.kernel_symbol(0.5, rho) == pytest.approx(np.exp(-rho))

    def test_symbol_at_zero(self):
        assert ext.kernel_symbol(0.25, np.array([0.0]))[0] == 1.0


class TestExtend:
    def test_translation_equivariance(self):
        cfg = ext.ExtensionConfig(3, 2, 0.25, num_points=128)
        x = cfg.axes()[0]
        u = np.exp(-x ** 2)
        shift = 8
        U1 = ext.extend(cfg, np.roll(u, shift), heights=[0.3])[0]
        U2 = np.roll(ext.extend(cfg, u, heights=[0.3])[0], shift)
        assert U1 == pytest.approx(U2, abs=1e-12)

    def test_height_zero_rejected(self):
        cfg = ext.ExtensionConfig(3, 2, 0.25, num_points=64)
        u = np.exp(-cfg.axes()[0] ** 2)
        with pytest.raises(ValueError):
            ext.extend(cfg, u, heights=[0.0])

    def test_padding_guard(self):
        cfg = ext.ExtensionConfig(3, 2, 0.25, num_points=64)
        u = np.ones(64)  # no decay at the boundary
        with pytest.raises(ValueError):
            ext.extend(cfg, u, heights=[0.1])

    def test_maximum_principle(self):
        cfg = ext.ExtensionConfig(3, 2, 0.25, num_points=128)
        u = np.exp(-cfg.axes()[0] ** 2)
        U = ext.extend(cfg, u, heights=[0.1, 1.0])
        assert U.min() >= -1e-10
        assert U.max() <= u.max() + 1e-10

    def test_two_dimensional_base(self):
        cfg = ext.ExtensionConfig(4, 2, 0.25, num_points=64)
        mesh = np.meshgrid(*cfg.axes(), indexing="ij")
        u = np.exp(-(mesh[0] ** 2 + mesh[1] ** 2))
        U = ext.extend(cfg, u, heights=[0.5])
        assert U.shape == (1, 64, 64)


class TestFracLaplacian:
    def test_fourier_mode_eigenvalue(self):
        cfg = ext.ExtensionConfig(3, 2, 0.3, num_points=128)
        x = cfg.axes()[0]
        k = 2.0 * pi / (2.0 * cfg.half_width) * 4  # grid mode
        u = np.cos(k * x)
        out = ext.frac_laplacian(cfg, u)
        assert out == pytest.approx(k ** (2 * 0.3) * u, abs=1e-10)


class TestDtnCheck:
    def test_gaussian_defects(self):
        cfg = ext.ExtensionConfig(4, 2, 0.25, num_points=256)
        mesh = np.meshgrid(*cfg.axes(), indexing="ij")
        u = np.exp(-(mesh[0] ** 2 + mesh[1] ** 2))
        rec = ext.dtn_check(cfg, u)
        assert rec["sup_defect"] <= 0.02
        assert rec["energy_defect"] <= 0.02
        assert rec["d_an"] == pytest.approx(
            ext.dtn_constant(cfg.a, cfg.n))

    def test_ladder_validation(self):
        cfg = ext.ExtensionConfig(3, 2, 0.25, num_points=64)
        u = np.exp(-cfg.axes()[0] ** 2)
        with pytest.raises(ValueError):
            ext.dtn_check(cfg, u, r_ladder=[0.01, 0.02])
        with pytest.raises(ValueError):
            ext.dtn_check(cfg, u, r_ladder=[0.1, 0.2, 0.3, 0.4])


class TestConfigValidation:
    def test_s_range(self):
        with pytest.raises(ValueError):
            ext.ExtensionConfig(3, 2, 1.5)

    def test_base_dim_support(self):
        with pytest.raises(ValueError):
            ext.ExtensionConfig(5, 2, 0.25)

    def test_trace_space_constraint(self):
        with pytest.raises(ValueError):
            ext.ExtensionConfig(3, 2, 0.75)  # d-n = 1 <= 2s
