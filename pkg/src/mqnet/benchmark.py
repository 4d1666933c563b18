"""Synthetic open-set benchmark: Gaussian IN classes plus Gaussian OOD clusters.

IN class means sit evenly on a circle. OOD clusters sit at the angular
midpoints between neighbouring IN means, alternating between an inner ring
(between classes, where the classifier is unsure) and an outer ring (beyond
the classes). Pool ids are assigned after shuffling, so id order carries no
information about membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BenchmarkConfig:
    pool_size: int = 600
    n_classes: int = 4
    noise_ratio: float = 0.4
    n_ood_clusters: int = 4
    in_radius: float = 3.0
    in_std: float = 1.45
    ood_std: float = 0.6
    ood_inner_scale: float = 1.0
    ood_outer_scale: float = 1.8
    test_per_class: int = 500

    def __post_init__(self):
        if not 0 <= self.noise_ratio < 1:
            raise ValueError("noise_ratio must lie in [0, 1)")
        if self.pool_size < 1:
            raise ValueError("pool_size must be positive")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if self.n_ood_clusters < 1:
            raise ValueError("n_ood_clusters must be positive")
        if self.in_std <= 0 or self.ood_std <= 0 or self.in_radius <= 0:
            raise ValueError("radii and spreads must be positive")

    @property
    def n_ood(self) -> int:
        # round() guards against 0.1 * 30 == 3.0000000000000004
        return math.ceil(round(self.noise_ratio * self.pool_size, 9))

    @property
    def n_in(self) -> int:
        return self.pool_size - self.n_ood


@dataclass(frozen=True)
class Example:
    id: int
    features: np.ndarray
    class_label: int  # -1 for OOD
    is_in: bool


@dataclass
class Pool:
    """Unlabeled examples as visible to query strategies: ids and features.

    Rows stay sorted by id.
    """

    ids: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def without(self, removed) -> "Pool":
        keep = ~np.isin(self.ids, np.asarray(list(removed), dtype=int))
        return Pool(self.ids[keep], self.features[keep])


@dataclass(frozen=True)
class GroundTruth:
    """Hidden membership and class of every pool id (indexed by id)."""

    is_in: np.ndarray
    labels: np.ndarray
    features: np.ndarray

    def example(self, example_id: int) -> Example:
        i = int(example_id)
        return Example(i, self.features[i], int(self.labels[i]),
                       bool(self.is_in[i]))


@dataclass(frozen=True)
class Benchmark:
    pool: Pool
    test_features: np.ndarray
    test_labels: np.ndarray
    truth: GroundTruth


def class_means(cfg: BenchmarkConfig) -> np.ndarray:
    theta = 2 * np.pi * np.arange(cfg.n_classes) / cfg.n_classes
    return cfg.in_radius * np.column_stack([np.cos(theta), np.sin(theta)])


def ood_means(cfg: BenchmarkConfig) -> np.ndarray:
    k = cfg.n_classes
    j = np.arange(cfg.n_ood_clusters)
    # later laps around the circle are shifted so clusters do not coincide
    lap = j // k
    theta = 2 * np.pi * ((j % k) + 0.5 + 0.25 * lap) / k
    scale = np.where(j % 2 == 0, cfg.ood_inner_scale, cfg.ood_outer_scale)
    r = cfg.in_radius * scale
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _draw_in(cfg, counts_per_class, rng):
    means = class_means(cfg)
    labels = np.repeat(np.arange(cfg.n_classes), counts_per_class)
    X = means[labels] + cfg.in_std * rng.standard_normal((len(labels), 2))
    return X, labels


def generate_benchmark(cfg: BenchmarkConfig, seed=0) -> Benchmark:
    rng = np.random.default_rng(seed)
    k = cfg.n_classes
    n_in, n_ood = cfg.n_in, cfg.n_ood
    counts = np.full(k, n_in // k)
    counts[: n_in % k] += 1
    X_in, y_in = _draw_in(cfg, counts, rng)

    centers = ood_means(cfg)
    cluster = np.arange(n_ood) % cfg.n_ood_clusters
    X_ood = centers[cluster] + cfg.ood_std * rng.standard_normal((n_ood, 2))

    X = np.vstack([X_in, X_ood]) if n_ood else X_in
    labels = np.concatenate([y_in, np.full(n_ood, -1)])
    is_in = np.concatenate([np.ones(n_in, bool), np.zeros(n_ood, bool)])
    order = rng.permutation(cfg.pool_size)
    X, labels, is_in = X[order], labels[order], is_in[order]

    X_test, y_test = _draw_in(cfg, np.full(k, cfg.test_per_class), rng)
    ids = np.arange(cfg.pool_size)
    return Benchmark(
        pool=Pool(ids, X.copy()),
        test_features=X_test,
        test_labels=y_test,
        truth=GroundTruth(is_in=is_in, labels=labels, features=X),
    )
