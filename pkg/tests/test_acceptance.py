"""End-to-end acceptance battery.

Each test pins one headline property of the package at fixed, frozen
configurations: exponent formulas, sphere spectra, manufactured
convergence, mode structure, observed regularity, conormal residuals,
second-derivative blow-up, functional inequalities, the extension
operator, and bit-level determinism of the suite runner.
"""

from math import atan, pi, sqrt

import numpy as np
import pytest

from degenlab import experiments as xp
from degenlab import extension as ext
from degenlab import inequalities as ineq
from degenlab import spectral as sp


def run(name, **overrides):
    return xp.run_experiment(name, overrides)


def first_order(errs, orders):
    """Energy errors converge at first order: either the exact solution
    is reproduced to roundoff, or every observed order is close to 1
    with the Richardson-extrapolated asymptotic order at least 1."""
    if max(errs) <= 1e-10:
        return True
    if min(orders) >= 1.0:
        return True
    return min(orders) >= 0.95 and 2.0 * orders[-1] - orders[-2] >= 1.0


class TestThresholdExponents:
    def test_closed_form_value(self):
        ms, alpha = sp.alpha_star(-2.0, 2, 1.0)
        assert abs(alpha - (1.0 + sqrt(2.0))) <= 1e-10

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_matches_first_indicial_exponent_at_a_zero(self, n):
        _, alpha = sp.alpha_star(0.0, n, 1.0)
        gamma1 = sp.indicial_exponents(0.0, n, float(n - 1)).gamma_plus
        assert abs(alpha - gamma1) <= 1e-10

    def test_regime_predicate_equivalence_on_grid(self):
        # 40 x 5 grid of (a, n); the a values avoid the equality case
        a_grid = [-3.95 + 0.2 * k for k in range(40)]
        for n in (2, 3, 4, 5, 6):
            for a in a_grid:
                ms, alpha = sp.alpha_star(a, n, 1.0)
                assert (alpha > 1.0) == (a < ms + 1.0 - n), (a, n)


class TestSphereSpectrum:
    def test_isotropic_circle_numeric(self):
        basis = sp.sphere_eigs(2, -0.5, depth=6, num_theta=2048,
                               method="numeric")
        for k in range(1, 6):
            assert basis.mus[k] == pytest.approx(float(k * k), rel=1e-6)
            assert basis.mults[k] == 2
        assert basis.mults[0] == 1

    def test_anisotropic_first_eigenvalue_floor(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = float(rng.uniform(-1.5, 1.0))
            phi = float(rng.uniform(0.0, pi))
            evs = np.sort(rng.uniform(0.2, 1.0, size=2))
            Q = np.array([[np.cos(phi), -np.sin(phi)],
                          [np.sin(phi), np.cos(phi)]])
            A3 = Q @ np.diag(evs) @ Q.T
            basis = sp.sphere_eigs(2, a, A3=A3, depth=4, num_theta=1024)
            floor = sp.mu_star(a, 2, float(evs[0] / evs[1]))
            assert basis.mus[1] >= floor - 1e-8, (a, evs)


class TestManufacturedConvergence:
    @pytest.mark.parametrize("a", [-1.5, -1.0, -0.5])
    def test_characteristic_dirichlet_power(self, a):
        res = run("manufactured", family="dirichlet_power", a=a, n=2,
                  resolutions=[48, 96, 192], grading=8.0)
        rec = res.report["results"]
        assert first_order(rec["energy_errors"], rec["observed_orders"]), rec

    def test_indicial_angular_mode(self):
        res = run("manufactured", family="conormal_mode", a=-1.5, n=2,
                  resolutions=[[16, 24], [32, 48], [64, 96]], grading=3.0)
        rec = res.report["results"]
        assert first_order(rec["energy_errors"], rec["observed_orders"]), rec

    @pytest.mark.parametrize("eps", [0.1, 0.05])
    def test_perforated_quadratic_family(self, eps):
        res = run("manufactured", family="perforated_quadratic", a=-1.5,
                  n=2, epsilon=eps, resolutions=[16, 32, 64], grading=2.0)
        rec = res.report["results"]
        assert first_order(rec["energy_errors"], rec["observed_orders"]), rec


class TestModeStructure:
    def test_entire_solution_has_no_negative_branch(self):
        res = run("modes", a=-0.5, n=2, epsilon=0.0, num_r=192,
                  num_theta=256, grading=3.0, ratio_tol=1e-3)
        assert res.report["overall_pass"]
        assert res.report["results"]["c_ratio"] <= 1e-3

    def test_perforated_solution_matches_radial_oracle(self):
        res = run("modes", a=-0.5, n=2, epsilon=0.1, num_r=192,
                  num_theta=256, grading=3.0, oracle_tol=1e-3)
        assert res.report["overall_pass"]
        assert res.report["results"]["oracle_relative_error"] <= 1e-3


class TestObservedRegularity:
    def test_holder_exponent_half(self):
        res = run("holder", a=-0.5, n=2, num_r=256, grading=5.0,
                  rel_tol=0.05)
        assert res.report["overall_pass"]
        assert res.report["results"]["alpha_hat"] == pytest.approx(
            0.5, rel=0.05)

    def test_boundary_harnack_ratio_lipschitz(self):
        res = run("harnack", a=-3.0, n=4, d=5, num_r=128, num_x=64,
                  grading=3.0, exponent_floor=0.95)
        assert res.report["overall_pass"]
        assert res.report["results"]["alpha_hat"] >= 0.95
        assert res.report["results"]["weak_residual"] <= 1e-8


class TestConormalResidual:
    def test_refinement_order_and_scaled_bound(self):
        res = run("conormal", a=-2.0, n=2, eps_list=[0.2, 0.1, 0.05],
                  alpha=1.0, num_r=192, num_theta=256, grading=2.0)
        rec = res.report["results"]
        assert min(rec["orders"]) >= 1.0, rec
        scaled = rec["scaled_residuals"]
        assert all(scaled[i + 1] <= scaled[i] * 1.05
                   for i in range(len(scaled) - 1)), scaled


class TestSecondDerivativeBlowup:
    def test_quotient_growth_matches_closed_form(self):
        res = run("c2_failure", a=-2.5, n=3, beta=0.5, alpha=0.5,
                  eps_list=[0.2, 0.0125], num_r=384, num_x=24,
                  grading=2.0, gap_tol=0.05, growth_floor=3.0)
        assert res.report["overall_pass"]
        rec = res.report["results"]
        assert rec["growth_factor"] >= 3.0
        assert max(r["relative_gap"] for r in rec["rows"]) <= 0.05


class TestInequalities:
    def test_hardy_corpus_and_near_extremal(self):
        for delta in (-1.5, -3.0):
            rep = ineq.hardy_check(delta, 2, num=50, seed=0)
            assert rep.passed, (delta, rep.worst_ratio)
        ratios = ineq.hardy_near_extremal(-1.5, 2,
                                          t_list=(0.4, 0.2, 0.1, 0.05))
        assert ratios[-1] > 0.9
        assert all(r <= 1.0 + 1e-9 for r in ratios)

    @pytest.mark.parametrize("variant", ["zero-trace", "away-from-hole",
                                         "wirtinger"])
    def test_poincare_corpus(self, variant):
        rep = ineq.poincare_check(-0.5, 2, variant=variant, num=50, seed=0)
        assert rep.passed, rep.worst_ratio

    def test_sobolev_corpus_stable(self):
        rec = ineq.sobolev_check(-0.5, 2, 3, 3.0, num=50, seed=0)
        assert rec["stable_within_factor_2"]
        assert min(rec["fitted_constants"]) > 0.0

    def test_trace_constant_scaling_branches(self):
        mid = ineq.trace_scaling(-0.5, 2, num_r=600)
        assert abs(mid["slope"] - mid["expected_slope"]) <= 0.1
        upper = ineq.trace_scaling(0.5, 2, num_r=600)
        assert abs(upper["slope"] - 1.0) <= 0.1
        crit = ineq.trace_scaling(0.0, 2, num_r=600)
        assert crit["branch"] == "eps log eps" and crit["bounded"]

    def test_capacity_trichotomy(self):
        mid = ineq.capacity_estimate(-0.5, 2, 2)
        assert mid.verdict == "positive-finite"
        expected = 2.0 + (-0.5) - 2.0
        assert mid.scaling_exponent == pytest.approx(expected, rel=0.15)
        assert ineq.capacity_estimate(1.0, 2, 3).verdict == "zero"
        assert ineq.capacity_estimate(-3.0, 2, 3).verdict == "infinite"


class TestExtension:
    def test_kernel_mass_at_three_heights(self):
        cfg = ext.ExtensionConfig(4, 2, 0.25, num_points=256)
        for r in (0.05, 0.1, 0.2):
            assert abs(ext.kernel_mass(cfg, r) - 1.0) <= 1e-6

    def test_dtn_and_energy_defects_gaussian(self):
        cfg = ext.ExtensionConfig(4, 2, 0.25, num_points=256)
        mesh = np.meshgrid(*cfg.axes(), indexing="ij")
        u = np.exp(-(mesh[0] ** 2 + mesh[1] ** 2))
        rec = ext.dtn_check(cfg, u)
        assert rec["sup_defect"] <= 0.02
        assert rec["energy_defect"] <= 0.02

    def test_normalization_constant_exact_at_midpoint(self):
        assert ext.dtn_constant(-1.0, 2) == 1.0

    def test_extension_consistent_with_solver(self):
        res = run("consistency", d=3, n=2, s=0.25, num_points=256,
                  resolutions=[[48, 128], [96, 256]], tol=5e-3)
        assert res.report["overall_pass"], res.report["checks"]
        worst = [max(e) for e in res.report["results"]["errors"]]
        assert worst[-1] <= 5e-3
        assert worst[1] < worst[0]


class TestDeterminism:
    def test_suite_bit_identical_with_same_seed(self):
        r1 = xp.run_suite(seed=0)
        r2 = xp.run_suite(seed=0)
        assert r1.report["overall_pass"]
        b1 = xp.canonical_json(r1.report).encode("utf-8")
        b2 = xp.canonical_json(r2.report).encode("utf-8")
        assert b1 == b2
        assert xp.canonical_json(xp._sanitize(r1.tables)) == \
            xp.canonical_json(xp._sanitize(r2.tables))
