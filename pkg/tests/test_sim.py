import numpy as np
import pytest

from excess_agg import csvio
from excess_agg.core import LossVector, RegretLedger, run
from excess_agg.errors import InvalidSpec
from excess_agg.learners import AdaptMLProd, MLCHedge, MLPoly, MLProd
from excess_agg.sim import KINDS, GeneratorSpec, generate, generate_rounds


def spec(kind, k=3, t=200, seed=5, **params):
    return GeneratorSpec(kind, k, t, params, seed)


class TestStreams:
    @pytest.mark.parametrize("kind", [k for k in KINDS if k != "alternating"])
    def test_reproducible_and_in_range(self, kind):
        a, b = generate(spec(kind)), generate(spec(kind))
        np.testing.assert_array_equal(a.raw, b.raw)
        assert a.losses.min() >= 0 and a.losses.max() <= 1
        if a.confidences is not None:
            np.testing.assert_array_equal(a.confidences, b.confidences)
            assert np.all(a.confidences.max(axis=1) > 0)
            assert a.confidences.min() >= 0 and a.confidences.max() <= 1

    @pytest.mark.parametrize("kind", ["adversarial_random", "iid_gap", "confidence_bernoulli",
                                      "identical", "shock_recovery"])
    def test_slices_match_whole_stream(self, kind):
        s = spec(kind, k=5, t=101)
        whole = generate(s)
        for lo, hi in [(0, 1), (3, 50), (37, 101), (100, 101)]:
            part = generate_rounds(s, lo, hi)
            np.testing.assert_array_equal(part.raw, whole.raw[lo:hi])
            if whole.confidences is not None:
                np.testing.assert_array_equal(part.confidences, whole.confidences[lo:hi])

    def test_seeds_differ(self):
        assert not np.array_equal(generate(spec("adversarial_random", seed=1)).raw,
                                  generate(spec("adversarial_random", seed=2)).raw)

    def test_identical_means_zero_regret(self):
        s = generate(spec("identical"))
        for learner in (MLProd(3), AdaptMLProd(3), MLPoly(3)):
            res = run(learner, s.losses)
            np.testing.assert_array_equal(res.ledger.cumulative_regret, 0.0)

    def test_iid_gap_mean(self):
        s = generate(GeneratorSpec("iid_gap", 2, 100_000, {"means": [0.3, 0.5], "alpha": 0.2}, 3))
        gap = s.raw[:, 1].mean() - s.raw[:, 0].mean()
        sigma = np.sqrt((0.3 * 0.7 + 0.5 * 0.5) / 100_000)
        assert abs(gap - 0.2) < 3 * sigma
        assert s.spec.best_expert == 0

    def test_alternating(self):
        s = generate(GeneratorSpec("alternating", 2, 4))
        np.testing.assert_array_equal(s.raw, [[0, 1], [1, 0], [0, 1], [1, 0]])

    def test_small_loss_best_expert_small(self):
        s = generate(spec("small_loss", t=2000))
        assert s.raw[:, 0].max() <= 0.02 and s.raw.max() <= 0.1

    def test_gain_framed_translation_invariance(self):
        s = generate(spec("gain_framed", k=4, t=500))
        assert s.raw.min() >= -1 and s.raw.max() <= 0
        assert s.losses.min() >= 0 and s.losses.max() <= 1
        framed = AdaptMLProd(4)
        mix = []
        for row in s.raw:
            mix.append(framed.predict())
            framed.update(LossVector.from_raw(row, (-1.0, 0.0)))
        shifted = run(AdaptMLProd(4), s.raw + 1.0)
        np.testing.assert_allclose(np.array(mix), shifted.mixtures, atol=1e-12, rtol=0)
        half = 0.5 * (s.raw + 1.0)
        low, high = run(MLProd(4), half), run(MLProd(4), half + 0.5)
        np.testing.assert_allclose(high.mixtures, low.mixtures, atol=1e-12, rtol=0)

    def test_confidence_scaled(self):
        s = generate(spec("confidence_scaled", k=3, t=1000, lambdas=[1.0, 0.1, 0.5]))
        assert s.confidences[:, 1].max() <= 0.1
        assert s.confidences[:, 2].max() <= 0.5

    def test_confidence_bernoulli_binary(self):
        s = generate(spec("confidence_bernoulli", k=4, t=2000, sleep_prob=0.3))
        assert set(np.unique(s.confidences)) <= {0.0, 1.0}
        assert abs((s.confidences == 0).mean() - 0.3) < 0.05

    def test_shock_recovery_shape(self):
        s = generate(spec("shock_recovery", k=3, t=10, shocks=2, epsilon=0.1))
        np.testing.assert_array_equal(s.raw[:2], [[1, 0, 0]] * 2)
        np.testing.assert_array_equal(s.raw[2:], [[0, 0.1, 0.1]] * 8)

    @pytest.mark.parametrize("bad", [
        dict(kind="nope", n_experts=2, n_rounds=5),
        dict(kind="alternating", n_experts=3, n_rounds=5),
        dict(kind="iid_gap", n_experts=2, n_rounds=5, params={"means": [0.3, 0.4], "alpha": 0.2}),
        dict(kind="iid_gap", n_experts=2, n_rounds=5, params={"alpha": 0.0}),
        dict(kind="confidence_scaled", n_experts=2, n_rounds=5, params={"lambdas": [0, 0]}),
        dict(kind="small_loss", n_experts=2, n_rounds=-1),
        dict(kind="identical", n_experts=0, n_rounds=5),
    ])
    def test_invalid_spec(self, bad):
        with pytest.raises(InvalidSpec):
            GeneratorSpec(**bad)

    def test_invalid_slice(self):
        with pytest.raises(InvalidSpec):
            generate_rounds(spec("identical", t=10), 5, 11)


class TestCsvRoundTrip:
    @pytest.mark.parametrize("kind", ["adversarial_random", "gain_framed", "confidence_bernoulli"])
    def test_replay_identical(self, tmp_path, kind):
        s = generate(spec(kind, k=4, t=300))
        lp, cp = tmp_path / "l.csv", tmp_path / "c.csv"
        s.to_csv(lp, cp)
        raw = csvio.read_matrix(lp, 4)
        np.testing.assert_array_equal(raw, s.raw)
        conf = csvio.read_matrix(cp, 4) if s.confidences is not None else None

        def replay(r, c):
            learner = MLCHedge(4) if c is not None else AdaptMLProd(4)
            for t, row in enumerate(r):
                lv = LossVector.from_raw(row, s.loss_range)
                learner.update(lv, None if c is None else c[t])
            return learner.ledger

        a, b = replay(s.raw, s.confidences), replay(raw, conf)
        np.testing.assert_allclose(b.cumulative_regret, a.cumulative_regret, atol=1e-12)
        np.testing.assert_allclose(b.squared_excess, a.squared_excess, atol=1e-12)
        assert isinstance(b, RegretLedger)

    def test_malformed_rows(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("expert_1,expert_2,expert_3,expert_4\n0.1,0.2,0.3,0.4\n0.1,0.2,0.3\n")
        with pytest.raises(csvio.CsvFormatError) as err:
            csvio.read_matrix(p, 4)
        assert err.value.row == 3
        p.write_text("a,b\n0.1,0.2\n")
        with pytest.raises(csvio.CsvFormatError) as err:
            csvio.read_matrix(p)
        assert err.value.row == 1
        p.write_text("expert_1,expert_2\n0.1,x\n")
        with pytest.raises(csvio.CsvFormatError):
            csvio.read_matrix(p)
        p.write_text("expert_1,expert_2\n0.1,nan\n")
        with pytest.raises(csvio.CsvFormatError):
            csvio.read_matrix(p)
