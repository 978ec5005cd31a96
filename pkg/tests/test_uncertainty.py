import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyde.uncertainty import (UncertaintyReport, ensemble_variance,
                                histogram, histogram_to_csv,
                                max_disagreement, predictive_entropy,
                                regression_nll)

from oracles import pairwise_max_disagreement, two_pass_variance


def random_probs(rng, M, B, K):
    z = rng.uniform(0.1, 5.0, size=(M, B, K))
    return z / z.sum(axis=-1, keepdims=True)


class TestPredictiveEntropy:
    def test_uniform_is_log_k(self):
        probs = np.full((3, 2, 4), 0.25)
        assert np.allclose(predictive_entropy(probs), np.log(4))

    def test_one_hot_is_zero(self):
        probs = np.zeros((2, 1, 3))
        probs[:, :, 1] = 1.0
        assert np.allclose(predictive_entropy(probs), 0.0)

    def test_hand_value(self):
        # members [0.9,0.1] and [0.5,0.5]: mean [0.7,0.3]
        probs = np.array([[[0.9, 0.1]], [[0.5, 0.5]]])
        expected = -(0.7 * np.log(0.7) + 0.3 * np.log(0.3))
        assert np.allclose(predictive_entropy(probs), expected)

    def test_invalid_rows_rejected(self):
        with pytest.raises(ValueError):
            predictive_entropy(np.full((1, 1, 2), 0.7))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6), st.integers(1, 5),
           st.integers(2, 6))
    def test_bounds(self, seed, M, B, K):
        probs = random_probs(np.random.default_rng(seed), M, B, K)
        h = predictive_entropy(probs)
        assert np.all(h >= 0.0)
        assert np.all(h <= np.log(K) + 1e-12)


class TestMaxDisagreement:
    def test_identical_members_zero(self):
        probs = np.tile(random_probs(np.random.default_rng(0), 1, 3, 4), (5, 1, 1))
        per_class, per_sample = max_disagreement(probs)
        assert not per_class.any() and not per_sample.any()

    def test_hand_value(self):
        probs = np.array([[[0.9, 0.1]], [[0.5, 0.5]], [[0.7, 0.3]]])
        per_class, per_sample = max_disagreement(probs)
        assert np.allclose(per_class, [[0.4, 0.4]])
        assert np.allclose(per_sample, [0.4])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 5), st.integers(1, 4),
           st.integers(2, 5))
    def test_matches_pairwise_oracle(self, seed, M, B, K):
        probs = random_probs(np.random.default_rng(seed), M, B, K)
        per_class, per_sample = max_disagreement(probs)
        oracle = pairwise_max_disagreement(probs)
        assert np.max(np.abs(per_class - oracle)) <= 1e-12
        assert np.max(np.abs(per_sample - oracle.max(axis=1))) <= 1e-12
        assert np.all(per_class >= 0) and np.all(per_class <= 1 + 1e-12)


class TestEnsembleVariance:
    def test_m1_zero(self):
        assert not ensemble_variance(np.random.default_rng(0).normal(size=(1, 4, 2))).any()

    def test_hand_value(self):
        # members 1 and 3: mean 2, unbiased var ((1)^2+(1)^2)/1 = 2
        samples = np.array([[[1.0]], [[3.0]]])
        assert np.allclose(ensemble_variance(samples), 2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 6), st.integers(1, 4),
           st.integers(1, 3))
    def test_matches_two_pass_oracle(self, seed, M, B, K):
        samples = np.random.default_rng(seed).normal(size=(M, B, K))
        var = ensemble_variance(samples)
        assert np.max(np.abs(var - two_pass_variance(samples))) <= 1e-10
        assert np.all(var >= 0)


class TestRegressionNLL:
    def test_matches_direct_gaussian_formula(self):
        rng = np.random.default_rng(1)
        samples = rng.normal(size=(4, 8, 1))
        targets = rng.normal(size=(8, 1))
        mean = samples.mean(axis=0)
        var = np.maximum(samples.var(axis=0, ddof=1), 1e-6)
        direct = float(np.mean(
            0.5 * (np.log(2 * np.pi * var) + (targets - mean) ** 2 / var)))
        per_sample, mean_nll = regression_nll(samples, targets)
        assert per_sample.shape == (8,)
        assert abs(mean_nll - direct) < 1e-12

    def test_variance_floor(self):
        samples = np.ones((3, 2, 1))
        targets = np.ones((2, 1))
        # degenerate ensemble: variance floored instead of log(0)
        _, val = regression_nll(samples, targets, min_var=1e-6)
        assert np.isfinite(val)
        assert abs(val - 0.5 * np.log(2 * np.pi * 1e-6)) < 1e-9

    def test_target_scale_shift(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(size=(4, 8, 1))
        targets = rng.normal(size=(8, 1))
        _, base = regression_nll(samples, targets)
        _, scaled = regression_nll(samples, targets, target_scale=2.0)
        assert abs(scaled - (base + np.log(2.0))) < 1e-12

    def test_single_member_rejected(self):
        with pytest.raises(ValueError):
            regression_nll(np.zeros((1, 4, 1)), np.zeros((4, 1)))


def test_report_from_probs_and_csv(tmp_path):
    probs = np.array([[[0.9, 0.1]], [[0.5, 0.5]]])
    rep = UncertaintyReport.from_probs(probs)
    assert np.allclose(rep.mean_prediction, [[0.7, 0.3]])
    assert np.allclose(rep.max_disagreement, [0.4])
    path = tmp_path / "rep.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,mean_0,mean_1,entropy,max_disagreement,variance_0,variance_1"
    assert lines[1].startswith("0,0.7")
    assert len(lines) == 2


class TestHistogram:
    def test_counts_and_edges(self):
        edges, counts = histogram(np.array([0.1, 0.2, 0.9]), bins=2,
                                  value_range=(0.0, 1.0))
        assert np.array_equal(counts, [2, 1])
        assert np.allclose(edges, [0.0, 0.5, 1.0])

    def test_csv_output(self, tmp_path):
        edges, counts = histogram(np.array([0.1, 0.6]), bins=2,
                                  value_range=(0.0, 1.0))
        path = tmp_path / "h.csv"
        histogram_to_csv(path, edges, counts)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,count"
        assert lines[1] == "0.0,0.5,1"
        assert lines[2] == "0.5,1.0,1"
