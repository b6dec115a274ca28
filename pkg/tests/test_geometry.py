import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from degenlab.geometry import (CoefficientField, Perforation, PolarGrid,
                               ProblemDims, classify_regime, eval_weight,
                               graded_nodes, psi_level, radial_moment,
                               sphere_area, straighten, straighten_inverse,
                               weighted_integral)


class TestProblemDims:
    def test_regimes(self):
        assert classify_regime(-3.0, 2) == "supersingular"
        assert classify_regime(-2.0, 2) == "supersingular"
        assert classify_regime(-0.5, 2) == "mid-range"
        assert classify_regime(0.0, 2) == "superdegenerate"
        assert classify_regime(1.0, 3) == "superdegenerate"

    def test_validation(self):
        with pytest.raises(ValueError):
            ProblemDims(2, 1, 0.0)
        with pytest.raises(ValueError):
            ProblemDims(2, 3, 0.0)

    def test_s_parameter(self):
        dims = ProblemDims(3, 2, -1.0)
        assert dims.s == pytest.approx(0.5)
        assert dims.b == pytest.approx(4.0 - (-1.0) - 2 * 2)

    def test_a2_weight(self):
        assert ProblemDims(3, 2, -0.5).is_a2_weight
        assert not ProblemDims(3, 2, -2.0).is_a2_weight
        assert not ProblemDims(3, 2, 4.0).is_a2_weight


class TestRadialMoment:
    @given(q=st.floats(-3.5, 3.5), rl=st.floats(0.05, 1.0),
           width=st.floats(0.05, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_quadrature(self, q, rl, width):
        rr = rl + width
        val, _ = quad(lambda r: r ** q, rl, rr)
        assert radial_moment(q, rl, rr) == pytest.approx(val, rel=1e-8)

    def test_zero_lower_endpoint(self):
        assert radial_moment(1.0, 0.0, 2.0) == pytest.approx(2.0)
        assert not np.isfinite(radial_moment(-1.0, 0.0, 1.0))
        assert not np.isfinite(radial_moment(-2.5, 0.0, 1.0))

    def test_log_case(self):
        assert radial_moment(-1.0, 0.5, 2.0) == pytest.approx(np.log(4.0))


class TestGradedNodes:
    @given(power=st.floats(1.0, 6.0), num=st.integers(4, 60))
    @settings(max_examples=40, deadline=None)
    def test_monotone_and_endpoints(self, power, num):
        nodes = graded_nodes(0.0, 1.0, num, power=power)
        assert len(nodes) == num + 1
        assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(1.0)
        assert np.all(np.diff(nodes) > 0)

    def test_grading_concentrates_at_origin(self):
        uniform = graded_nodes(0.0, 1.0, 10, power=1.0)
        graded = graded_nodes(0.0, 1.0, 10, power=3.0)
        assert graded[1] < uniform[1]


class TestWeightAndStraightening:
    def test_eval_weight(self):
        dims = ProblemDims(3, 2, -1.0)
        z = np.array([0.7, 3.0, 4.0])  # |y| = 5
        assert eval_weight(dims, z) == pytest.approx(0.2)

    def test_straighten_roundtrip(self):
        mat = np.diag([1.0, 2.0, 0.5])
        A = CoefficientField.constant(mat, 3, 2)
        z = np.array([0.3, 0.4, -0.2])
        back = straighten_inverse(A, straighten(A, z))
        assert np.allclose(back, z)

    def test_psi_level_isotropic(self):
        A = CoefficientField.identity(3, 2)
        z = np.array([0.5, 0.3, 0.4])
        assert psi_level(A, z) == pytest.approx(0.5)


class TestPerforation:
    def test_validation(self):
        with pytest.raises(ValueError):
            Perforation(epsilon=-0.1)
        assert not Perforation(epsilon=0.0).is_perforated
        assert Perforation(epsilon=0.1).is_perforated


class TestPolarGridIntegration:
    def test_sphere_area(self):
        assert sphere_area(2) == pytest.approx(2.0 * np.pi)
        assert sphere_area(3) == pytest.approx(4.0 * np.pi)

    def test_weighted_integral_power(self):
        # int_{B_1 in R^n} |y|^a dy = |S^{n-1}| / (a+n)
        dims = ProblemDims(2, 2, -0.5)
        grid = PolarGrid.build(dims, 1.0, 200, grading=2.0)
        val = weighted_integral(grid, dims, np.ones(grid.shape))
        assert val == pytest.approx(sphere_area(2) / 1.5, rel=1e-3)


class TestCoefficientField:
    def test_constant_blocks(self):
        mat = np.diag([2.0, 1.0, 0.5])
        A = CoefficientField.constant(mat, 3, 2)
        A1, A2, A3 = A.blocks(np.zeros(3))
        assert A1.shape == (1, 1) and A3.shape == (2, 2)
        assert np.allclose(A3, np.diag([1.0, 0.5]))
        assert A.is_constant

    def test_rejects_nonspd(self):
        with pytest.raises(ValueError):
            CoefficientField.constant(np.diag([1.0, -1.0]), 2, 2)
