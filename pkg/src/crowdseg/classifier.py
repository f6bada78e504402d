"""Built-in ambiguity classifier: gradient-histogram features, PCA, and a
max-margin linear scorer trained by deterministic subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ImageTooSmall,
    SingleClass,
    TargetTooLarge,
    TooFewSamples,
)
from .evaluation import average_precision

RESIZE_TO = 128
GRID_CELLS = 4
ORIENTATION_BINS = 8
NORM_EPS = 1e-6
FEATURE_LENGTH = GRID_CELLS * GRID_CELLS * ORIENTATION_BINS  # 128

DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * in_h / out_h - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * in_w / out_w - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def extract_features(image: np.ndarray) -> np.ndarray:
    """128-dim descriptor: magnitude-weighted orientation histograms on a 4x4
    grid of a bilinearly resized 128x128 copy, each cell L2-normalised."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("expected a 2-D grayscale grid")
    if image.shape[0] < 8 or image.shape[1] < 8:
        raise ImageTooSmall(f"image {image.shape[1]}x{image.shape[0]} below 8x8 minimum")
    resized = _bilinear_resize(image, RESIZE_TO, RESIZE_TO)
    gy, gx = np.gradient(resized)
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)  # unsigned, [0, pi)
    bins = np.minimum(
        (orientation / np.pi * ORIENTATION_BINS).astype(int), ORIENTATION_BINS - 1
    )

    cell = RESIZE_TO // GRID_CELLS
    feature = np.zeros((GRID_CELLS, GRID_CELLS, ORIENTATION_BINS))
    for cy in range(GRID_CELLS):
        for cx in range(GRID_CELLS):
            sl = np.s_[cy * cell : (cy + 1) * cell, cx * cell : (cx + 1) * cell]
            hist = np.bincount(
                bins[sl].ravel(), weights=magnitude[sl].ravel(), minlength=ORIENTATION_BINS
            )
            feature[cy, cx] = hist / (np.linalg.norm(hist) + NORM_EPS)
    return feature.ravel()


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (target, dim), rows orthonormal, variance-ordered
    explained_variance: np.ndarray

    @property
    def target_dims(self) -> int:
        return self.components.shape[0]

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(obj["mean"], dtype=float),
            components=np.asarray(obj["components"], dtype=float),
            explained_variance=np.asarray(obj["explained_variance"], dtype=float),
        )


def fit_pca(vectors: Sequence[np.ndarray], target: int) -> PcaModel:
    """Principal components of mean-centred vectors, sign-fixed so the
    largest-magnitude entry of each component is positive."""
    data = np.asarray(vectors, dtype=float)
    n, dim = data.shape
    if target > min(dim, n - 1):
        raise TargetTooLarge(
            f"target {target} exceeds min(dim={dim}, samples-1={n - 1})"
        )
    mean = data.mean(axis=0)
    centred = data - mean
    _, singular, vt = np.linalg.svd(centred, full_matrices=False)
    components = vt[:target]
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    variance = (singular[:target] ** 2) / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def project(model: PcaModel, vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    if vector.shape[-1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"vector length {vector.shape[-1]} != model dim {model.mean.shape[0]}"
        )
    return (vector - model.mean) @ model.components.T


@dataclass(frozen=True)
class LinearScorer:
    weights: np.ndarray
    bias: float
    lam: float  # regularization strength the model was trained with

    def to_json(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "lambda": self.lam}

    @classmethod
    def from_json(cls, obj: dict) -> "LinearScorer":
        return cls(
            weights=np.asarray(obj["weights"], dtype=float),
            bias=float(obj["bias"]),
            lam=float(obj["lambda"]),
        )


def score(scorer: LinearScorer, vector: np.ndarray) -> float:
    """Signed unambiguity score; higher = more confidently single-object."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != scorer.weights.shape:
        raise DimensionMismatch(
            f"vector length {vector.shape} != weights {scorer.weights.shape}"
        )
    return float(scorer.weights @ vector + scorer.bias)


def _fit_hinge(
    X: np.ndarray, y: np.ndarray, lam: float, iters: int
) -> tuple[np.ndarray, float]:
    """Full-batch subgradient descent on mean hinge loss + lam * ||w||^2."""
    n, dim = X.shape
    w = np.zeros(dim)
    b = 0.0
    for t in range(iters):
        margins = y * (X @ w + b)
        active = margins < 1.0
        grad_w = 2.0 * lam * w
        grad_b = 0.0
        if active.any():
            grad_w -= (y[active, None] * X[active]).sum(axis=0) / n
            grad_b -= y[active].sum() / n
        step = 1.0 / np.sqrt(t + 1.0)
        w -= step * grad_w
        b -= step * grad_b
    return w, b


def train_scorer(
    features: Sequence[np.ndarray],
    labels: Sequence[int],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    iters: int = 400,
    folds: int = 5,
    cv_log: list | None = None,
) -> LinearScorer:
    """Train the linear scorer with 5-fold cross-validated regularization.

    Labels are +1 (unambiguous) / -1 (ambiguous).  Fold membership comes from
    a seeded permutation and optimization is full-batch with a fixed schedule,
    so identical inputs and seed give bit-identical weights.  The winning
    regularization strength maximises mean validation average precision; the
    final model is refit on everything.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(X)
    if n < 10:
        raise TooFewSamples(f"need >= 10 samples, got {n}")
    if not ((y == 1).any() and (y == -1).any()):
        raise SingleClass("need both +1 and -1 labels")

    # standardize internally; fold the transform back into (w, b) at the end
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma[sigma == 0] = 1.0
    Z = (X - mu) / sigma

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_slices = np.array_split(order, folds)

    grid = sorted(float(l) for l in lambda_grid)
    best_lam, best_ap = grid[0], -1.0
    for lam in grid:
        aps = []
        for held in fold_slices:
            train_idx = np.setdiff1d(order, held, assume_unique=True)
            if not ((y[train_idx] == 1).any() and (y[train_idx] == -1).any()):
                continue
            w, b = _fit_hinge(Z[train_idx], y[train_idx], lam, iters)
            val_scores = Z[held] @ w + b
            if (y[held] == 1).any():
                aps.append(average_precision(val_scores, y[held] == 1)[0])
        mean_ap = float(np.mean(aps)) if aps else 0.0
        if cv_log is not None:
            cv_log.append((lam, mean_ap))
        if mean_ap > best_ap:
            best_ap, best_lam = mean_ap, lam

    w, b = _fit_hinge(Z, y, best_lam, iters)
    weights = w / sigma
    bias = float(b - (w * mu / sigma).sum())
    return LinearScorer(weights=weights, bias=bias, lam=best_lam)
