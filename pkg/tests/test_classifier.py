import numpy as np
import pytest

from crowdseg.classifier import (
    LinearScorer,
    PcaModel,
    _fit_hinge,
    extract_features,
    fit_pca,
    project,
    score,
    train_scorer,
)
from crowdseg.errors import (
    DimensionMismatch,
    ImageTooSmall,
    SingleClass,
    TargetTooLarge,
    TooFewSamples,
)

from oracles import pca_variances_bruteforce


class TestFeatures:
    def test_constant_image_gives_zero_vector(self):
        feat = extract_features(np.full((32, 32), 0.7))
        assert feat.shape == (128,)
        assert np.all(feat == 0.0)

    def test_too_small_image(self):
        with pytest.raises(ImageTooSmall):
            extract_features(np.zeros((7, 20)))

    def test_rotation_preserves_norm(self, rng):
        img = rng.random((128, 128))
        a = extract_features(img)
        b = extract_features(np.rot90(img))
        assert np.linalg.norm(a) == pytest.approx(np.linalg.norm(b), rel=1e-9)
        # a quarter turn permutes orientation bins by 4
        cells_a = a.reshape(16, 8)
        cells_b = b.reshape(16, 8)
        assert np.sort(cells_a.sum(axis=0)).tolist() == pytest.approx(
            np.sort(np.roll(cells_b.sum(axis=0), 4)).tolist(), rel=1e-9
        )

    def test_vertical_step_edge_hits_horizontal_bin(self):
        img = np.zeros((64, 64))
        img[:, 32:] = 1.0
        feat = extract_features(img).reshape(4, 4, 8)
        # gradient of a vertical edge points along x: orientation 0 -> bin 0
        energy = feat.sum(axis=(0, 1))
        assert energy[0] > 0
        assert energy[0] > 100 * energy[1:].sum()


class TestPca:
    def test_line_in_3d_explains_everything(self, rng):
        t = rng.random(20)
        data = np.outer(t, [1.0, 2.0, -1.0]) + [5.0, 0.0, 3.0]
        model = fit_pca(data, target=2)
        total = model.explained_variance.sum()
        assert model.explained_variance[0] == pytest.approx(total, rel=1e-9)

    def test_full_reconstruction(self, rng):
        data = rng.random((12, 6))
        model = fit_pca(data, target=6)
        coords = np.array([project(model, v) for v in data])
        back = coords @ model.components + model.mean
        assert np.allclose(back, data, atol=1e-8)

    def test_variances_match_covariance_eigenvalues(self, rng):
        data = rng.random((40, 10))
        model = fit_pca(data, target=9)
        want = pca_variances_bruteforce(data)[:9]
        assert np.allclose(model.explained_variance, want, atol=1e-9)

    def test_orthonormal_components(self, rng):
        data = rng.random((30, 8))
        model = fit_pca(data, target=5)
        gram = model.components @ model.components.T
        assert np.allclose(gram, np.eye(5), atol=1e-8)

    def test_sign_convention(self, rng):
        data = rng.random((30, 8))
        model = fit_pca(data, target=5)
        for row in model.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_target_too_large(self, rng):
        data = rng.random((5, 8))
        with pytest.raises(TargetTooLarge):
            fit_pca(data, target=5)  # only 4 = n-1 directions available

    def test_projection_basics(self, rng):
        data = rng.random((20, 6))
        model = fit_pca(data, target=3)
        assert np.allclose(project(model, model.mean), 0.0, atol=1e-12)
        unit = project(model, model.mean + model.components[1])
        assert unit == pytest.approx([0.0, 1.0, 0.0], abs=1e-9)
        v = rng.random(6)
        assert project(model, v) == pytest.approx(model.components @ (v - model.mean))
        with pytest.raises(DimensionMismatch):
            project(model, rng.random(7))


def toy_separable(rng, n=40, dim=5, margin=2.0):
    X = rng.normal(size=(n, dim))
    w_true = rng.normal(size=dim)
    y = np.where(X @ w_true >= 0, 1, -1)
    X += margin * y[:, None] * w_true / np.linalg.norm(w_true)
    return X, y


class TestScorer:
    def test_separable_reaches_full_accuracy(self, rng):
        X, y = toy_separable(rng)
        scorer = train_scorer(X, y, lambda_grid=(1e-4, 1e-3), seed=3)
        preds = np.sign(X @ scorer.weights + scorer.bias)
        assert (preds == y).all()

    def test_label_flip_reverses_ranking(self, rng):
        X, y = toy_separable(rng)
        a = train_scorer(X, y, lambda_grid=(1e-3,), seed=1)
        b = train_scorer(X, -y, lambda_grid=(1e-3,), seed=1)
        sa = X @ a.weights + a.bias
        sb = X @ b.weights + b.bias
        assert np.argsort(sa).tolist() == np.argsort(-sb).tolist()

    def test_training_is_deterministic(self, rng):
        X, y = toy_separable(rng)
        a = train_scorer(X, y, seed=11)
        b = train_scorer(X, y, seed=11)
        assert a.bias == b.bias and (a.weights == b.weights).all()
        assert a.lam == b.lam

    def test_requires_both_classes_and_enough_samples(self, rng):
        X = rng.random((12, 3))
        with pytest.raises(SingleClass):
            train_scorer(X, np.ones(12), seed=0)
        with pytest.raises(TooFewSamples):
            train_scorer(X[:5], np.array([1, 1, -1, -1, 1]), seed=0)

    def test_strong_regularization_shrinks_weights(self, rng):
        X, y = toy_separable(rng, n=60)
        Z = (X - X.mean(axis=0)) / X.std(axis=0)
        norms = [
            np.linalg.norm(_fit_hinge(Z, y.astype(float), lam, iters=400)[0])
            for lam in (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
        ]
        assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))

    def test_score_contract(self):
        scorer = LinearScorer(weights=np.zeros(4), bias=0.3, lam=0.0)
        assert score(scorer, np.ones(4)) == 0.3
        scorer2 = LinearScorer(weights=np.array([1.0, -2.0]), bias=0.5, lam=0.0)
        assert score(scorer2, np.zeros(2)) == 0.5
        assert score(scorer2, np.array([2.0, 1.0])) == pytest.approx(0.5)
        with pytest.raises(DimensionMismatch):
            score(scorer2, np.zeros(3))

    def test_ranking_invariant_to_positive_rescale(self, rng):
        X, _ = toy_separable(rng)
        scorer = LinearScorer(weights=rng.normal(size=5), bias=0.2, lam=0.0)
        scaled = LinearScorer(weights=scorer.weights * 3.5, bias=scorer.bias * 3.5, lam=0.0)
        s1 = [score(scorer, v) for v in X]
        s2 = [score(scaled, v) for v in X]
        assert np.argsort(s1).tolist() == np.argsort(s2).tolist()

    def test_model_json_round_trip(self, rng):
        X, y = toy_separable(rng)
        scorer = train_scorer(X, y, seed=5)
        back = LinearScorer.from_json(scorer.to_json())
        assert (back.weights == scorer.weights).all() and back.bias == scorer.bias
        model = fit_pca(X, target=3)
        back_pca = PcaModel.from_json(model.to_json())
        assert np.allclose(back_pca.components, model.components)
