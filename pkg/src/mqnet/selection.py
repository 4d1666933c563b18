"""Labeling oracle, cost accounting and budgeted sequential selection.

Selection is item-by-item: the cost of an example (IN or OOD) is only known
once the oracle has seen it, so we cannot take a top-b slice up front. Every
selector stops before the next query as soon as the accumulated cost reaches
the budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .benchmark import Example, GroundTruth, Pool


@dataclass(frozen=True)
class CostModel:
    c_in: float = 1.0
    c_ood: float = 1.0

    def __post_init__(self):
        if not (self.c_in > 0 and self.c_ood > 0):
            raise ValueError("labeling costs must be positive")

    @property
    def max_cost(self) -> float:
        return max(self.c_in, self.c_ood)


@dataclass
class LabeledSet:
    """Labeled IN examples and identified OOD examples, in query order."""

    in_items: list = field(default_factory=list)  # (Example, label)
    ood_items: list = field(default_factory=list)  # Example
    order: list = field(default_factory=list)  # ids as queried

    def __len__(self) -> int:
        return len(self.in_items) + len(self.ood_items)

    def add(self, example: Example, label) -> None:
        if label is None:
            self.ood_items.append(example)
        else:
            self.in_items.append((example, label))
        self.order.append(example.id)

    def extend(self, other: "LabeledSet") -> None:
        clash = set(self.order) & set(other.order)
        if clash:
            raise ValueError(f"ids labeled twice: {sorted(clash)}")
        self.in_items.extend(other.in_items)
        self.ood_items.extend(other.ood_items)
        self.order.extend(other.order)

    def ids(self) -> list[int]:
        return list(self.order)

    def in_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.in_items:
            return np.zeros((0, 0)), np.zeros(0, dtype=int)
        X = np.stack([ex.features for ex, _ in self.in_items])
        y = np.array([lab for _, lab in self.in_items], dtype=int)
        return X, y

    def all_features(self) -> np.ndarray:
        feats = [ex.features for ex, _ in self.in_items]
        feats += [ex.features for ex in self.ood_items]
        return np.stack(feats) if feats else np.zeros((0, 0))


def oracle_label(example: Example, cost_model: CostModel):
    """Reveal an example: ``(class_label, c_in)`` for IN, ``(None, c_ood)`` for OOD."""
    if example.is_in:
        return example.class_label, cost_model.c_in
    return None, cost_model.c_ood


class Oracle:
    """Answers label queries against the hidden ground truth.

    Tracks contacted ids so that no example is ever labeled (or paid for)
    twice.
    """

    def __init__(self, truth: GroundTruth, cost_model: CostModel):
        self.truth = truth
        self.cost_model = cost_model
        self.labeled_ids: set[int] = set()
        self.total_cost = 0.0

    def label(self, example_id: int):
        i = int(example_id)
        if i in self.labeled_ids:
            raise ValueError(f"example {i} was already labeled")
        example = self.truth.example(i)
        label, cost = oracle_label(example, self.cost_model)
        self.labeled_ids.add(i)
        self.total_cost += cost
        return example, label, cost

    def pool_cost(self, pool: Pool) -> float:
        """Total cost of labeling every example in ``pool`` (oracle-side only)."""
        inn = self.truth.is_in[pool.ids]
        return float(inn.sum() * self.cost_model.c_in
                     + (~inn).sum() * self.cost_model.c_ood)


def query_cost(query: LabeledSet, cost_model: CostModel) -> float:
    return (len(query.in_items) * cost_model.c_in
            + len(query.ood_items) * cost_model.c_ood)


def _label_in_order(positions, pool: Pool, budget: float, oracle) -> tuple[LabeledSet, Pool]:
    query = LabeledSet()
    spent = 0.0
    for pos in positions:
        if spent >= budget:
            break
        example, label, cost = oracle.label(pool.ids[pos])
        query.add(example, label)
        spent += cost
    return query, pool.without(query.order)


def greedy_order(scores, ids) -> np.ndarray:
    """Positions sorted by descending score, ties by ascending id."""
    return np.lexsort((np.asarray(ids), -np.asarray(scores, dtype=float)))


def select_queries(scores, pool: Pool, budget: float,
                   oracle) -> tuple[LabeledSet, Pool]:
    """Repeatedly query the highest-scoring unlabeled example within budget.

    ``scores`` is an array aligned with ``pool`` or a callable ``pool -> array``.
    Scores are fixed for the round, so the greedy argmax sequence is the
    descending-score order.
    """
    if len(pool) == 0:
        raise ValueError("empty pool")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if callable(scores):
        scores = scores(pool)
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(pool),):
        raise ValueError("scores must align with the pool")
    return _label_in_order(greedy_order(scores, pool.ids), pool, budget, oracle)


def initial_labeled(pool: Pool, budget: float, oracle: Oracle,
                    rng: np.random.Generator) -> tuple[LabeledSet, Pool]:
    """Uniformly random initial labeled set under the same stopping rule."""
    if len(pool) == 0:
        raise ValueError("empty pool")
    if budget > oracle.pool_cost(pool):
        raise ValueError("budget exceeds the total labeling cost of the pool")
    return _label_in_order(rng.permutation(len(pool)), pool, budget, oracle)


def kcenter_greedy(pool_features, labeled_features, budget: float,
                   cost_of: Callable[[int], float]) -> list[int]:
    """k-center greedy over pool positions.

    Each step picks the pool point farthest (Euclidean) from its nearest
    center among ``labeled ∪ selected``; ties go to the lowest position.
    ``cost_of(position)`` is called once per pick and the loop stops once the
    running cost reaches ``budget``.
    """
    X = np.asarray(pool_features, dtype=float)
    L = np.asarray(labeled_features, dtype=float)
    n = len(X)
    if L.size:
        diff = X[:, None, :] - L[None, :, :]
        mind = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
    else:
        mind = np.full(n, np.inf)
    picked: list[int] = []
    available = np.ones(n, bool)
    spent = 0.0
    while spent < budget and available.any():
        cand = np.where(available, mind, -np.inf)
        pos = int(np.argmax(cand))
        picked.append(pos)
        available[pos] = False
        spent += cost_of(pos)
        d = np.sqrt(((X - X[pos]) ** 2).sum(axis=1))
        mind = np.minimum(mind, d)
    return picked


def select_coreset(pool: Pool, pool_features, labeled_features, budget: float,
                   oracle) -> tuple[LabeledSet, Pool]:
    if len(pool) == 0:
        raise ValueError("empty pool")
    query = LabeledSet()

    def cost_of(pos):
        example, label, cost = oracle.label(pool.ids[pos])
        query.add(example, label)
        return cost

    kcenter_greedy(pool_features, labeled_features, budget, cost_of)
    return query, pool.without(query.order)
