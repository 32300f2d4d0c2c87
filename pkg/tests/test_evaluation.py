import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphlogit.em import FitResult, fit_em
from graphlogit.evaluation import auc_pair_count, compare_models, predict_proba, roc_curve
from graphlogit.graph import neighbor_feature_sum
from graphlogit.logistic import fit_logistic
from graphlogit.model import FullParams, sigmoid

from conftest import random_dataset


def _fake_fit(params, weights, converged=True):
    return FitResult(params=params, weights=np.asarray(weights, dtype=float), iterations=1,
                     converged=converged, marginal_loglik_trace=[0.0], init=params)


class TestPredict:
    def test_hand_mixture(self):
        data, truth = random_dataset(n=4, p=1, density=0.8, seed=1)
        w = np.array([0.1, 0.5, 0.9, 0.3])
        out = predict_proba(_fake_fit(truth, w), data)
        A = data.graph.adjacency.toarray()
        for i in range(4):
            s = A[i] @ (data.X[:, 0] * truth.beta[0])
            lin = truth.beta0 + data.X[i, 0] * truth.beta[0]
            p1 = 1 / (1 + np.exp(-(lin + truth.delta * s)))
            p0 = 1 / (1 + np.exp(-lin))
            assert out[i] == pytest.approx(w[i] * p1 + (1 - w[i]) * p0, rel=1e-14)

    def test_delta_zero_modes_agree(self):
        data, truth = random_dataset(n=20, seed=2)
        prm = truth.replace(delta=0.0)
        fit = _fake_fit(prm, np.random.default_rng(0).random(20))
        ref = sigmoid(data.X_design @ prm.eta)
        np.testing.assert_allclose(predict_proba(fit, data, "marginal"), ref)
        np.testing.assert_allclose(predict_proba(fit, data, "sampled", seed=3), ref)

    def test_unit_weights(self):
        data, truth = random_dataset(n=20, seed=2)
        fit = _fake_fit(truth, np.ones(20))
        s = neighbor_feature_sum(data.graph, data.X, truth.beta)
        ref = sigmoid(data.X_design @ truth.eta + truth.delta * s)
        np.testing.assert_allclose(predict_proba(fit, data, "marginal"), ref)
        np.testing.assert_allclose(predict_proba(fit, data, "sampled"), ref)

    def test_sampled_reproducible(self):
        data, truth = random_dataset(n=30, seed=2)
        fit = _fake_fit(truth, np.full(30, 0.5))
        a = predict_proba(fit, data, "sampled", seed=8)
        b = predict_proba(fit, data, "sampled", seed=8)
        np.testing.assert_array_equal(a, b)

    def test_nonconverged_warns(self):
        data, truth = random_dataset(n=10, seed=2)
        with pytest.warns(RuntimeWarning):
            predict_proba(_fake_fit(truth, np.zeros(10), converged=False), data)

    def test_bad_mode(self):
        data, truth = random_dataset(n=10, seed=2)
        with pytest.raises(ValueError):
            predict_proba(_fake_fit(truth, np.zeros(10)), data, mode="hard")


class TestRoc:
    def test_four_point_example(self):
        roc = roc_curve([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0])
        assert roc.auc == pytest.approx(0.75, abs=1e-15)
        assert (roc.n_pos, roc.n_neg) == (2, 2)

    def test_perfect(self):
        roc = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert roc.auc == 1.0
        assert any((p == [0.0, 1.0]).all() for p in roc.points)

    def test_all_tied_is_diagonal(self):
        roc = roc_curve(np.full(6, 0.3), [1, 0, 1, 0, 0, 1])
        assert roc.auc == 0.5
        np.testing.assert_array_equal(roc.points, [[0, 0], [1, 1]])

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc_curve([0.1, 0.2], [1, 1])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 100_000), n=st.integers(2, 200))
    def test_matches_pair_count(self, seed, n):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), 1)  # many ties
        roc = roc_curve(scores, labels)
        assert roc.auc == pytest.approx(auc_pair_count(scores, labels), abs=1e-12)
        pts = roc.points
        np.testing.assert_array_equal(pts[0], [0, 0])
        np.testing.assert_array_equal(pts[-1], [1, 1])
        assert np.all(np.diff(pts, axis=0) >= 0)
        assert roc.auc == pytest.approx(np.trapezoid(pts[:, 1], pts[:, 0]), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 100_000))
    def test_monotone_transform_invariant(self, seed):
        rng = np.random.default_rng(seed)
        labels = np.r_[0, 1, rng.integers(0, 2, 48)]
        scores = rng.normal(size=50)
        assert roc_curve(np.exp(scores), labels).auc == roc_curve(scores, labels).auc


class TestCompare:
    def test_identical_scores(self):
        data, truth = random_dataset(n=40, seed=5)
        null = fit_logistic(data.X, data.Y)
        prm = FullParams.from_parts(0.0, null.eta, [0.0, 0.0, 0.0])
        rep = compare_models(data, _fake_fit(prm, np.full(40, 0.5)), null)
        assert rep["auc_difference"] == 0.0

    def test_report_fields(self):
        data, _ = random_dataset(n=80, seed=5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_em(data)
        rep = compare_models(data, fit, fit_logistic(data.X, data.Y))
        assert set(rep) == {"auc_latent", "auc_logistic", "auc_difference",
                            "roc_latent", "roc_logistic"}
        assert rep["auc_difference"] == pytest.approx(rep["auc_latent"] - rep["auc_logistic"])
