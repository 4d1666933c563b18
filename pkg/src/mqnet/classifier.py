"""Small softmax target model: one tanh hidden layer, linear head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    learning_rate: float = 0.05
    batch_size: int = 16

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class Classifier:
    w1: np.ndarray  # (d_f, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, k)
    b2: np.ndarray  # (k,)
    steps_taken: int = 0

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    def copy(self) -> "Classifier":
        return Classifier(self.w1.copy(), self.b1.copy(), self.w2.copy(),
                          self.b2.copy(), self.steps_taken)


def init_classifier(input_dim: int, n_classes: int, hidden_dim: int = 32,
                    seed=None) -> Classifier:
    """Glorot-normal weights, zero biases; deterministic per ``seed``."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / (input_dim + hidden_dim)),
                    size=(input_dim, hidden_dim))
    w2 = rng.normal(0.0, np.sqrt(2.0 / (hidden_dim + n_classes)),
                    size=(hidden_dim, n_classes))
    return Classifier(w1, np.zeros(hidden_dim), w2, np.zeros(n_classes))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(features) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def penultimate_features(clf: Classifier, features) -> np.ndarray:
    X, single = _as_batch(features)
    H = np.tanh(X @ clf.w1 + clf.b1)
    return H[0] if single else H


def logits(clf: Classifier, features) -> np.ndarray:
    X, single = _as_batch(features)
    out = np.tanh(X @ clf.w1 + clf.b1) @ clf.w2 + clf.b2
    return out[0] if single else out


def probs(clf: Classifier, features) -> np.ndarray:
    return _softmax(logits(clf, features))


def ce_loss(clf: Classifier, features, label):
    """Cross-entropy ``-log p[label]``; vectorized over a batch of labels."""
    lab = np.asarray(label)
    if np.any(lab < 0) or np.any(lab >= clf.n_classes):
        raise ValueError(f"label out of range [0, {clf.n_classes})")
    z = np.atleast_2d(logits(clf, features))
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = -logp[np.arange(len(z)), np.atleast_1d(lab)]
    out = np.maximum(out, 0.0)
    return float(out[0]) if lab.ndim == 0 else out


def train_classifier(clf: Classifier, features, labels, cfg: TrainConfig,
                     rng: np.random.Generator) -> Classifier:
    """Run exactly ``cfg.iterations`` mini-batch SGD steps on cross-entropy.

    Batches are drawn with replacement, so the step count does not depend on
    how many labeled examples there are. Returns a new classifier.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("empty labeled set")
    if len(y) != len(X):
        raise ValueError("features and labels differ in length")
    k = clf.n_classes
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"label out of range [0, {k})")
    model = clf.copy()
    if cfg.iterations == 0:
        return model
    w1, b1, w2, b2 = model.w1, model.b1, model.w2, model.b2
    lr = cfg.learning_rate
    bs = cfg.batch_size
    batches = rng.integers(0, len(X), size=(cfg.iterations, bs))
    onehot = np.eye(k)[y]
    for idx in batches:
        xb = X[idx]
        h = np.tanh(xb @ w1 + b1)
        z = h @ w2 + b2
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        dz = (p - onehot[idx]) / bs
        dh = (dz @ w2.T) * (1.0 - h * h)
        w2 -= lr * (h.T @ dz)
        b2 -= lr * dz.sum(axis=0)
        w1 -= lr * (xb.T @ dh)
        b1 -= lr * dh.sum(axis=0)
    model.steps_taken += cfg.iterations
    return model


def predict(clf: Classifier, features) -> np.ndarray:
    """Argmax class; ties go to the lowest index."""
    return np.argmax(np.atleast_2d(logits(clf, features)), axis=1)


def test_accuracy(clf: Classifier, features, labels) -> float:
    y = np.asarray(labels, dtype=int)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(clf, features) == y))


test_accuracy.__test__ = False
