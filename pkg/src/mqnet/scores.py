"""Purity and informativeness scores.

Raw OOD scores (higher = more out-of-distribution) and raw query scores
(higher = more informative) live on arbitrary scales. The meta-model needs
strictly positive inputs, so both are z-scored against the current unlabeled
pool and passed through ``exp``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float


@dataclass(frozen=True)
class ScorePair:
    """Meta-input tuple for one example."""

    purity: float
    informativeness: float

    def __post_init__(self):
        if not (self.purity > 0 and self.informativeness > 0):
            raise ValueError(
                f"score pair must be strictly positive, got "
                f"({self.purity}, {self.informativeness})"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.purity, self.informativeness], dtype=float)


@dataclass(frozen=True)
class ClassGaussianStats:
    """Per-class means with one shared (tied) precision matrix."""

    means: np.ndarray  # (k, d)
    precision: np.ndarray  # (d, d)


def compute_norm_stats(values) -> NormStats:
    """Mean and population standard deviation of a score batch."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty score batch")
    return NormStats(mean=float(arr.mean()), std=float(arr.std()))


def zscore(values, stats: NormStats) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if stats.std == 0:
        return np.zeros_like(arr)
    return (arr - stats.mean) / stats.std


def to_purity(ood_scores, stats_of_negated: NormStats) -> np.ndarray:
    """``exp(zscore(-O))``; ``stats_of_negated`` must describe ``-O`` on the pool."""
    return np.exp(zscore(-np.asarray(ood_scores, dtype=float), stats_of_negated))


def to_informativeness(q_scores, stats: NormStats) -> np.ndarray:
    return np.exp(zscore(q_scores, stats))


def energy_ood_score(logits, temperature: float = 1.0):
    """Energy ``-T * logsumexp(logits / T)`` along the last axis.

    Accepts a single logit vector (returns a float) or a ``(n, k)`` batch.
    Higher energy means more OOD.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    arr = np.asarray(logits, dtype=float)
    if arr.size == 0 or arr.shape[-1] == 0:
        raise ValueError("logits must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits must be finite")
    scaled = arr / temperature
    top = scaled.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(scaled - top).sum(axis=-1)) + top[..., 0]
    out = -temperature * lse
    return float(out) if out.ndim == 0 else out


def fit_class_gaussians(features, labels, n_classes: int | None = None,
                        ridge: float = 1e-6) -> ClassGaussianStats:
    """Fit class means and a tied covariance on labeled IN features.

    Classes with no examples are skipped. The covariance is estimated from
    class-centered features, regularized by ``ridge * I`` and inverted.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("no fitted classes: empty feature set")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    present = [c for c in range(n_classes) if np.any(y == c)]
    means = np.stack([X[y == c].mean(axis=0) for c in present])
    centered = X - means[np.searchsorted(present, y)]
    cov = centered.T @ centered / X.shape[0]
    cov += ridge * np.eye(X.shape[1])
    precision = np.linalg.inv(cov)
    precision = 0.5 * (precision + precision.T)
    return ClassGaussianStats(means=means, precision=precision)


def mahalanobis_ood_score(feature, stats: ClassGaussianStats):
    """Squared Mahalanobis distance to the nearest class mean.

    ``feature`` may be one vector or an ``(n, d)`` batch.
    """
    if stats.means.shape[0] == 0:
        raise ValueError("no fitted classes")
    x = np.asarray(feature, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    diff = X[:, None, :] - stats.means[None, :, :]  # (n, k, d)
    d2 = np.einsum("nkd,de,nke->nk", diff, stats.precision, diff)
    out = np.maximum(d2.min(axis=1), 0.0)
    return float(out[0]) if single else out


def _check_simplex(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.size == 0 or np.any(p < 0) or np.any(
            np.abs(p.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("probabilities must be a valid simplex")
    return p


def confidence_q(probs):
    """``1 - max_c p_c``: the CONF query score, higher = less confident."""
    p = _check_simplex(probs)
    out = 1.0 - p.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def entropy_q(probs):
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = _check_simplex(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out
