import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from gsr.errors import ArgumentError
from gsr.tsne import (EmbeddingSnapshot, ExactTSNE, conditional_affinities,
                      joint_affinities, kl_divergence_and_grad,
                      _entropy_and_probs, _pairwise_sq_distances, tsne_embed)


def three_clusters(n_per=50, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.vstack([rng.normal(c, scale, size=(n_per, 2)) for c in centers])
    return X, np.repeat([0, 1, 2], n_per)


class TestAffinities:
    def test_perplexity_achieved_everywhere(self):
        X, _ = three_clusters()
        target = 20.0
        D = _pairwise_sq_distances(X)
        _, betas = conditional_affinities(D, target)
        n = X.shape[0]
        for i in range(n):
            others = np.arange(n) != i
            H, _ = _entropy_and_probs(D[i, others], betas[i])
            assert abs(np.exp(H) - target) / target <= 1e-3

    def test_conditional_rows_sum_to_one(self):
        X, _ = three_clusters(n_per=20)
        P, _ = conditional_affinities(_pairwise_sq_distances(X), 10.0)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(np.diag(P) == 0.0)

    def test_joint_symmetric(self):
        X, _ = three_clusters(n_per=20)
        P, _ = joint_affinities(X, 10.0)
        assert np.allclose(P, P.T)

    def test_preconditions(self):
        X = np.zeros((5, 2))
        with pytest.raises(ArgumentError):
            joint_affinities(X, 1.0)          # perplexity < 2
        with pytest.raises(ArgumentError):
            joint_affinities(X, 10.0)         # fewer than 3 * perplexity rows


class TestOptimization:
    def test_silhouette_on_separated_clusters(self):
        X, labels = three_clusters()
        Y = ExactTSNE(perplexity=30, iterations=600, seed=1).fit_transform(X)
        assert silhouette_score(Y, labels) > 0.5

    def test_kl_decreases(self):
        X, _ = three_clusters()
        ts = ExactTSNE(perplexity=25, iterations=520, seed=3)
        ts.fit_transform(X)
        assert ts.kl_history_[500] < ts.kl_history_[0]

    def test_duplicated_rows_coincide(self):
        X, _ = three_clusters(n_per=20, scale=0.2)
        Xd = np.vstack([X, X[3:4]])
        ts = ExactTSNE(perplexity=5, iterations=500, learning_rate=5.0, seed=2)
        Y = ts.fit_transform(Xd)
        assert np.linalg.norm(Y[3] - Y[-1]) < 1e-3

    def test_deterministic(self):
        X, _ = three_clusters(n_per=20)
        a = tsne_embed(X, perplexity=10, iterations=50, seed=4)
        b = tsne_embed(X, perplexity=10, iterations=50, seed=4)
        assert np.array_equal(a, b)

    def test_wide_input_reduced(self):
        rng = np.random.default_rng(5)
        X = np.hstack([three_clusters(n_per=20)[0],
                       0.01 * rng.normal(size=(60, 80))])
        Y = ExactTSNE(perplexity=10, iterations=60, seed=0).fit_transform(X)
        assert Y.shape == (60, 2)
        assert np.all(np.isfinite(Y))


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        P, _ = joint_affinities(rng.normal(size=(10, 3)), 3.0)
        Y = rng.normal(size=(10, 2))
        _, grad = kl_divergence_and_grad(P, Y)
        eps, worst = 1e-4, 0.0
        for i in range(10):
            for j in range(2):
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, j] += eps
                Ym[i, j] -= eps
                fd = (kl_divergence_and_grad(P, Yp)[0]
                      - kl_divergence_and_grad(P, Ym)[0]) / (2 * eps)
                worst = max(worst, abs(fd - grad[i, j])
                            / max(abs(fd), abs(grad[i, j]), 1e-8))
        assert worst <= 1e-3


class TestSnapshot:
    def test_csv_format(self):
        snap = EmbeddingSnapshot(1, "noisy", np.array([[0.5, -1.25]]),
                                 np.array([2]), {"n_x": 10})
        lines = snap.to_csv().strip().split("\n")
        assert lines[0] == "tap,variant,x,y,label"
        assert lines[1] == "1,noisy,0.5,-1.25,2"
