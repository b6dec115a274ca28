import numpy as np
import pytest

from degenlab import inequalities as ineq


class TestHardy:
    def test_corpus_passes(self):
        rep = ineq.hardy_check(-1.5, 2, num=25, seed=1)
        assert rep.passed
        assert rep.worst_ratio <= 1.0 + rep.tolerance

    def test_supersingular_branch_no_boundary_term(self):
        rep = ineq.hardy_check(-3.0, 2, num=25, seed=2)
        assert rep.passed

    def test_excluded_delta(self):
        with pytest.raises(ValueError):
            ineq.hardy_check(-2.0, 2)

    def test_near_extremal_approaches_constant(self):
        ratios = ineq.hardy_near_extremal(-1.5, 2,
                                          t_list=(0.4, 0.2, 0.1, 0.05))
        assert all(r <= 1.0 + 1e-9 for r in ratios)
        assert ratios == sorted(ratios)  # improving as t decreases
        assert ratios[-1] > 0.9


class TestPoincare:
    @pytest.mark.parametrize("variant", ["zero-trace", "away-from-hole",
                                         "wirtinger"])
    def test_variants_pass(self, variant):
        rep = ineq.poincare_check(-0.5, 2, variant=variant, num=25, seed=3)
        assert rep.passed, rep.worst_ratio

    def test_away_from_hole_requires_subcritical(self):
        with pytest.raises(ValueError):
            ineq.poincare_check(1.0, 2, variant="away-from-hole")

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            ineq.poincare_check(-0.5, 2, variant="nope")

    def test_wirtinger_constant_positive(self):
        lam = ineq.wirtinger_constant(-0.5, 2)
        assert lam > 0


class TestTraceScaling:
    def test_midrange_slope(self):
        rec = ineq.trace_scaling(-0.5, 2, num_r=400)
        assert rec["branch"] == "eps^{a+n-1}"
        assert abs(rec["slope"] - rec["expected_slope"]) <= 0.1

    def test_superdegenerate_slope_one(self):
        rec = ineq.trace_scaling(0.5, 2, num_r=400)
        assert rec["expected_slope"] == pytest.approx(1.0)
        assert abs(rec["slope"] - 1.0) <= 0.1

    def test_critical_log_branch_bounded(self):
        rec = ineq.trace_scaling(0.0, 2, num_r=400)
        assert rec["branch"] == "eps log eps"
        assert rec["bounded"]

    def test_constant_monotone_in_eps(self):
        cs = [ineq.trace_constant(-0.5, 2, 1.0, e, num_r=300)
              for e in (0.02, 0.01, 0.005)]
        assert cs == sorted(cs, reverse=True)


class TestSobolev:
    def test_stable_constants(self):
        rec = ineq.sobolev_check(-0.5, 2, 3, 3.0, num=25, seed=4)
        assert rec["stable_within_factor_2"]
        assert min(rec["fitted_constants"]) > 0

    def test_q_range_validation(self):
        with pytest.raises(ValueError):
            ineq.sobolev_check(-0.5, 2, 3, 50.0)


class TestCapacity:
    def test_midrange(self):
        est = ineq.capacity_estimate(-0.5, 2, 2)
        assert est.regime == "mid-range"
        assert est.verdict == "positive-finite"
        expected = 2 + (-0.5) - 2.0
        assert est.scaling_exponent == pytest.approx(expected, rel=0.15)

    def test_superdegenerate_zero(self):
        est = ineq.capacity_estimate(1.0, 2, 3)
        assert est.regime == "superdegenerate"
        assert est.verdict == "zero"
        assert est.energies == sorted(est.energies, reverse=True)

    def test_supersingular_diverges(self):
        est = ineq.capacity_estimate(-3.0, 2, 3)
        assert est.regime == "supersingular"
        assert est.verdict == "infinite"
        assert est.energies == sorted(est.energies)

    def test_supersingular_needs_d_above_n(self):
        with pytest.raises(ValueError):
            ineq.capacity_estimate(-3.0, 2, 2)


class TestMuckenhoupt:
    def test_closed_form_constant(self):
        a, n = -0.5, 2
        rec = ineq.muckenhoupt_constant(a, n)
        closed = n ** 2 / ((a + n) * (n - a))
        assert rec["constant"] == pytest.approx(closed)
        assert rec["is_a2"]
        # scale invariance of the power weight
        assert rec["products"] == pytest.approx(
            [rec["products"][0]] * len(rec["products"]))

    def test_outside_a2(self):
        assert not ineq.muckenhoupt_constant(-2.5, 2)["is_a2"]
        assert not ineq.muckenhoupt_constant(4.5, 2)["is_a2"]


class TestCorpus:
    def test_seeded_reproducibility(self):
        c1 = ineq.random_corpus(5, seed=7)
        c2 = ineq.random_corpus(5, seed=7)
        r = np.linspace(0.1, 0.9, 20)
        for f1, f2 in zip(c1, c2):
            assert f1.u(r) == pytest.approx(f2.u(r))

    def test_cutoffs(self):
        funcs = ineq.random_corpus(5, seed=8, inner_cut=0.1, outer_cut=True)
        r = np.array([0.05, 0.999])
        for f in funcs:
            assert abs(f.u(r)[0]) < 1e-12
            assert abs(f.u(r)[1]) < 1e-4
