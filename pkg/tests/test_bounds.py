import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excess_agg import bounds
from excess_agg.core import LearnerConfig, run
from excess_agg.errors import (
    AlphaOutOfRange,
    ConfigMismatch,
    DegenerateK,
    DeltaOutOfRange,
    NegativeInput,
)
from excess_agg.learners import AdaptMLProd, MLCHedge, MLPoly, MLProd

LN2 = math.log(2)


class TestFormulas:
    def test_theorem1_zero_second_order(self):
        np.testing.assert_allclose(bounds.theorem1_bound([0.5, 0.5], [0.5, 0.5], [0, 0]), 2 * LN2)

    def test_theorem1_value(self):
        b = bounds.theorem1_bound([0.5], [0.5], [10.0])
        np.testing.assert_allclose(b, 2 * LN2 + 5)
        assert abs(b[0] - 6.386) < 1e-3

    def test_corollary3_constant(self):
        expected = 3 * LN2 + math.log(1 + (1 / math.e) * (1 + LN2))
        assert abs(bounds.corollary3_constant(2, 1) - expected) < 1e-14

    @pytest.mark.parametrize("k", [5, 10])
    def test_corollary3_constant_grows_slowly(self, k):
        ratio = bounds.corollary3_constant(k, 10 ** 6) / bounds.corollary3_constant(k, 10 ** 3)
        assert 1.0 < ratio < 1.1

    def test_corollary3_uniform_prior_uses_constant(self):
        c = bounds.corollary3_constant(4, 50)
        np.testing.assert_allclose(bounds.adapt_constants(np.full(4, 0.25), 50), c)
        b = bounds.corollary3_bound(np.full(4, 0.25), 50, [3.0] * 4)
        np.testing.assert_allclose(b, c / math.sqrt(math.log(4)) * 2 + 2 * c)

    def test_theorem4_floor(self):
        np.testing.assert_allclose(bounds.theorem4_bound(1, 0, [0.0]), 1.0)

    def test_theorem4_value(self):
        np.testing.assert_allclose(bounds.theorem4_bound(4, 99, [24.0]),
                                   10 * math.sqrt(1 + math.log(100)), rtol=1e-14)

    def test_variance_zero(self):
        # constant increments: variance term vanishes
        b = bounds.variance_bound([0.5, 0.5], [3.0, 3.0], [100 * 0.03 ** 2] * 2, 100)
        np.testing.assert_allclose(b, 4 * LN2, rtol=1e-12)

    def test_variance_identical_experts(self):
        led = run(MLProd(2), np.tile([0.3, 0.3], (20, 1))).ledger
        np.testing.assert_allclose(bounds.variance(led).per_expert_bound, 4 * LN2)

    def test_solve_quadratic_examples(self):
        assert bounds.solve_quadratic(0, 0) == 0
        assert bounds.solve_quadratic(4, 3) == 5
        with pytest.raises(NegativeInput):
            bounds.solve_quadratic(-1, 0)

    def test_small_excess_examples(self):
        np.testing.assert_allclose(bounds.small_excess_bound((1.0, 0.0), math.e, [9.0]), 10.0)
        xi = (1.3, 2.0)
        const = 2.0 + 2 * 1.3 * math.sqrt(2.0 * LN2) + 4 * 1.3 ** 2 * LN2
        np.testing.assert_allclose(bounds.small_excess_bound(xi, 2, [0.0]), const)

    def test_iid_examples(self):
        assert bounds.bound_iid((0.0, 3.5), 4, 0.3) == 3.5
        assert abs(bounds.bound_iid((1.0, 0.0), math.e, 0.5) - 2.0) < 1e-14
        c, hp = bounds.bound_iid((1.0, 1.0), 3, 0.2, delta=0.05)
        assert c == bounds.bound_iid((1.0, 1.0), 3, 0.2)
        lt = math.log(20) + math.log(1 + math.log(1 + c / 4) / (2 * math.e))
        assert abs(hp - (c + 30 * math.sqrt(lt * math.log(3)))) < 1e-12

    def test_iid_monotone_in_alpha(self):
        xi = bounds.xi_adapt_ml_prod(3, 1000)
        cs = [bounds.bound_iid(xi, 3, a) for a in np.arange(1, 11) / 10]
        assert all(x >= y for x, y in zip(cs, cs[1:]))

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
    def test_iid_alpha_range(self, alpha):
        with pytest.raises(AlphaOutOfRange):
            bounds.bound_iid((1, 1), 2, alpha)

    def test_iid_delta_range(self):
        with pytest.raises(DeltaOutOfRange):
            bounds.bound_iid((1, 1), 2, 0.5, delta=1.0)

    def test_mlc_hedge_zero_loss(self):
        np.testing.assert_allclose(bounds.mlc_hedge_bound(np.full(3, 1 / 3), [1.0] * 3, [0.0] * 3),
                                   math.e * math.log(3), rtol=1e-14)

    def test_mlc_hedge_halving_confidences(self):
        prior, rates, wl = np.full(2, 0.5), np.array([0.3, 0.3]), np.array([40.0, 12.0])
        g = LN2 / 0.3 + (math.e - 1) * LN2
        full = bounds.mlc_hedge_bound(prior, rates, wl) - g
        half = bounds.mlc_hedge_bound(prior, rates, wl / 2) - g
        np.testing.assert_allclose(half, full / 2, rtol=1e-12)

    def test_xi_pairs(self):
        c = bounds.corollary3_constant(5, 100)
        lk = math.log(5)
        assert bounds.xi_adapt_ml_prod(5, 100) == (c / lk, 2 * c + c / math.sqrt(lk))
        a = math.sqrt(5 * (1 + math.log(101)))
        np.testing.assert_allclose(bounds.xi_ml_poly(5, 100), (a / math.sqrt(lk), a))
        with pytest.raises(DegenerateK):
            bounds.xi_ml_poly(1, 10)


class TestProperties:
    def test_solve_quadratic_grid(self):
        a, c = np.meshgrid(np.linspace(0, 100, 100), np.linspace(0, 100, 100))
        root = (c + np.sqrt(c * c + 4 * a)) / 2
        dom = np.vectorize(bounds.solve_quadratic)(a, c)
        assert np.all(root <= dom + 1e-12)

    @settings(max_examples=200, deadline=None)
    @given(x1=st.floats(0.01, 20), x2=st.floats(0, 50), neg=st.floats(0, 1e4), k=st.integers(2, 50))
    def test_small_excess_dominates_worst_regret(self, x1, x2, neg, k):
        """Largest R with R <= a sqrt(R + 2 R^-) + xi2 (since S <= R + 2 R^-) stays below the bound."""
        a = x1 * math.sqrt(math.log(k))
        x = (a + math.sqrt(a * a + 4 * (x2 + 2 * neg))) / 2
        worst = x * x - 2 * neg
        assert worst <= bounds.small_excess_bound((x1, x2), k, [neg])[0] * (1 + 1e-12) + 1e-9

    def test_bias_variance_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            led = run(AdaptMLProd(3), rng.random((int(rng.integers(5, 400)), 3)), keep_outcomes=True)
            r = np.array([o.instantaneous_regrets for o in led.outcomes])
            t = len(r)
            mean = r.sum(axis=0) / t
            two_pass = np.sum((r - mean) ** 2, axis=0)
            np.testing.assert_allclose(
                led.ledger.squared_excess, two_pass + t * mean ** 2, atol=1e-9)
            g = np.log(3)
            np.testing.assert_allclose(
                bounds.variance(led.ledger).per_expert_bound,
                4 * g + 2 * np.sqrt(two_pass * g), atol=1e-9)

    def test_optimized_prod_below_rate_grid(self):
        rng = np.random.default_rng(1)
        prior = np.full(4, 0.25)
        for s in rng.uniform(0, 500, 50):
            best = min(bounds.theorem1_bound(prior, [eta] * 4, [s] * 4)[0]
                       for eta in np.linspace(1e-3, 5, 5000))
            assert bounds.optimized_prod_bound(prior, [s])[0] <= best + 1e-12

    def test_variance_with_xi_dominates_learner_bound(self):
        """The variance form with xi is implied by R <= a sqrt(S) + xi2 for any R, S."""
        rng = np.random.default_rng(2)
        xi = (1.7, 3.0)
        a = xi[0] * math.sqrt(math.log(3))
        for _ in range(1000):
            t = int(rng.integers(1, 1000))
            s = rng.uniform(0, t)
            r = min(a * math.sqrt(s) + xi[1], math.sqrt(s * t))
            b = bounds.variance_bound(np.full(3, 1 / 3), [r] * 3, [s] * 3, t, xi)[0]
            assert r <= b + 1e-9


class TestReports:
    def test_theorem1_report(self):
        m = MLProd(3)
        run(m, np.random.default_rng(0).random((100, 3)))
        rep = bounds.theorem1(m.ledger, m.config)
        assert rep.kind == "deterministic" and rep.proved and rep.all_satisfied
        assert not rep.violated

    def test_config_mismatch(self):
        m = MLProd(3)
        with pytest.raises(ConfigMismatch):
            bounds.theorem1(m.ledger, LearnerConfig(2, fixed_rates=[0.5, 0.5]))
        with pytest.raises(ConfigMismatch):
            bounds.theorem1(m.ledger, AdaptMLProd(3).config)

    def test_degenerate_k(self):
        with pytest.raises(DegenerateK):
            bounds.corollary3(AdaptMLProd(1).ledger)

    def test_informational_never_violates(self):
        led = run(MLPoly(2), np.tile([[0.0, 1.0], [1.0, 0.0]], (50, 1))).ledger
        rep = bounds.BoundReport("Eq5", [-1.0, -1.0], led.cumulative_regret, kind="informational")
        assert not rep.all_satisfied and not rep.violated

    def test_iid_report_json(self):
        m = AdaptMLProd(3)
        run(m, np.random.default_rng(1).random((50, 3)))
        rep = bounds.iid(m.ledger, bounds.xi_adapt_ml_prod(3, 50), 0.2, best=1)
        d = json.loads(json.dumps(rep.as_dict()))
        assert d["kind"] == "high_probability"
        assert d["per_expert_bound"][0] is None and d["per_expert_bound"][1] > 0

    def test_unknown_ids(self):
        with pytest.raises(ValueError):
            bounds.BoundReport("T9", [0.0], [0.0])
        with pytest.raises(ValueError):
            bounds.BoundReport("T1", [0.0], [0.0], kind="maybe")

    def test_mlc_hedge_report(self):
        rng = np.random.default_rng(3)
        m = MLCHedge(3, rates=[0.1, 0.3, 1.0])
        run(m, rng.random((500, 3)), rng.uniform(0.01, 1.0, (500, 3)))
        assert bounds.mlc_hedge(m.ledger, m.config).all_satisfied


def test_small_excess_dominates_small_loss_form():
    """For nonnegative losses R^- <= sum of the expert's losses, so the bound is never looser."""
    rng = np.random.default_rng(9)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        m = AdaptMLProd(k)
        run(m, rng.random((int(rng.integers(10, 500)), k)) ** 3)
        led = m.ledger
        xi = bounds.xi_adapt_ml_prod(k, led.round_count)
        assert np.all(led.negative_part <= led.cumulative_loss + 1e-12)
        assert np.all(bounds.small_excess_bound(xi, k, led.negative_part)
                      <= bounds.small_excess_bound(xi, k, led.cumulative_loss) + 1e-12)
        assert bounds.small_excess(led, xi).all_satisfied
