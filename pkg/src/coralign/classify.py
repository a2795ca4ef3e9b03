"""Baseline multi-class linear classifier: one-vs-rest hinge loss SVM.

Trained by stochastic subgradient descent with the classic decaying step
schedule eta_t = 1/(lambda_reg t), lambda_reg = 1/(C n), plus a
projection of each class row onto the ball of radius 1/sqrt(lambda_reg).
The bias is carried as an augmented constant-1 feature that is excluded
from regularization and projection.

The schedule alone does not give a monotone objective, so each epoch is
guarded: if the regularized objective went up, the epoch is rolled back
and the step-size scale halved.  This keeps the per-epoch objective
non-increasing without touching the update rule itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_feature_matrix

# Minibatch size for the subgradient steps.
MINIBATCH = 64
# Epochs used for each cross-validation fit.
CV_EPOCHS = 20


@dataclass(frozen=True)
class LinearModel:
    """Per-class weight rows and biases of a multi-class linear scorer."""

    W: np.ndarray  # (K, d)
    b: np.ndarray  # (K,)
    C: float

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]


def _check_labels(labels, n: int) -> tuple[np.ndarray, int]:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InvalidInputError(f"labels must have shape ({n},), got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == labels.astype(int)):
            raise InvalidInputError("labels must be integers")
        labels = labels.astype(int)
    if labels.min() < 0:
        raise InvalidInputError("labels must be non-negative class indices")
    K = int(labels.max()) + 1
    if K < 2:
        raise InvalidInputError("need at least two classes to train")
    return labels, K


def _augmented_objective(Wa, Xa, Ysign, lam: float) -> float:
    """Regularized mean hinge, averaged over the one-vs-rest problems."""
    scores = Xa @ Wa.T
    hinge = np.maximum(0.0, 1.0 - Ysign * scores).mean(axis=0)
    reg = 0.5 * lam * (Wa[:, :-1] ** 2).sum(axis=1)
    return float((hinge + reg).mean())


def train_svm(D, labels, C: float, epochs: int, seed: int) -> LinearModel:
    """Train the one-vs-rest hinge classifier; deterministic per seed."""
    X = as_feature_matrix(D)
    n, d = X.shape
    labels, K = _check_labels(labels, n)
    if not C > 0:
        raise InvalidInputError(f"C must be positive, got {C}")
    if epochs < 1:
        raise InvalidInputError("epochs must be >= 1")
    if n < K:
        raise InvalidInputError(f"need at least K={K} examples, got {n}")

    lam = 1.0 / (C * n)
    radius = 1.0 / np.sqrt(lam)
    Xa = np.hstack([X, np.ones((n, 1))])
    Ysign = np.where(labels[:, None] == np.arange(K)[None, :], 1.0, -1.0)
    Wa = np.zeros((K, d + 1))
    rng = np.random.default_rng(seed)

    t = 0
    scale = 1.0
    accepted = _augmented_objective(Wa, Xa, Ysign, lam)
    for _ in range(epochs):
        snapshot = Wa.copy()
        perm = rng.permutation(n)
        for start in range(0, n, MINIBATCH):
            idx = perm[start : start + MINIBATCH]
            t += 1
            eta = scale / (lam * t)
            Xb, Yb = Xa[idx], Ysign[idx]
            viol = (Yb * (Xb @ Wa.T)) < 1.0
            G = -(viol * Yb).T @ Xb / len(idx)
            G[:, :-1] += lam * Wa[:, :-1]
            Wa = Wa - eta * G
            norms = np.linalg.norm(Wa[:, :-1], axis=1)
            shrink = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
            Wa[:, :-1] *= shrink[:, None]
        candidate = _augmented_objective(Wa, Xa, Ysign, lam)
        if candidate > accepted:
            Wa = snapshot
            scale *= 0.5
        else:
            accepted = candidate
    return LinearModel(W=Wa[:, :-1].copy(), b=Wa[:, -1].copy(), C=float(C))


def svm_objective(model: LinearModel, D, labels) -> float:
    """The training objective of a model on a dataset (lambda_reg from len(D))."""
    X = as_feature_matrix(D)
    n = X.shape[0]
    labels, K = _check_labels(labels, n)
    if K > model.n_classes:
        raise InvalidInputError("labels reference classes the model does not have")
    lam = 1.0 / (model.C * n)
    Xa = np.hstack([X, np.ones((n, 1))])
    Wa = np.hstack([model.W, model.b[:, None]])
    Ysign = np.where(labels[:, None] == np.arange(model.n_classes)[None, :], 1.0, -1.0)
    return _augmented_objective(Wa, Xa, Ysign, lam)


def predict(model: LinearModel, D) -> np.ndarray:
    """Argmax class per row; ties break toward the lowest class index."""
    X = as_feature_matrix(D)
    if X.shape[1] != model.dim:
        raise InvalidInputError(
            f"model expects dimension {model.dim}, got {X.shape[1]}"
        )
    return np.argmax(X @ model.W.T + model.b, axis=1)


def accuracy(pred, truth) -> float:
    """Fraction of positions where pred equals truth."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidInputError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


def cross_validate_C(D, labels, grid, folds: int, seed: int, epochs: int = CV_EPOCHS) -> float:
    """Pick the grid value with the best mean held-out accuracy.

    Folds come from one seeded shuffle split into near-equal parts.
    Ties resolve toward the smaller C (stronger regularization).
    """
    X = as_feature_matrix(D)
    n = X.shape[0]
    labels, _ = _check_labels(labels, n)
    grid = sorted(float(c) for c in grid)
    if not grid:
        raise InvalidInputError("empty C grid")
    if folds < 2:
        raise InvalidInputError("need at least 2 folds")
    if folds > n:
        raise InvalidInputError("more folds than examples")

    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    best_C, best_acc = None, -1.0
    for C in grid:
        accs = []
        for f in range(folds):
            test_idx = parts[f]
            train_idx = np.concatenate([parts[g] for g in range(folds) if g != f])
            model = train_svm(X[train_idx], labels[train_idx], C, epochs, seed)
            accs.append(accuracy(predict(model, X[test_idx]), labels[test_idx]))
        mean_acc = float(np.mean(accs))
        if mean_acc > best_acc:
            best_C, best_acc = C, mean_acc
    return best_C
