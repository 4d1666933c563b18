"""Open-set active learning loop with MQ-Net and baseline strategies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf_mod
from .benchmark import BenchmarkConfig, generate_benchmark
from .classifier import TrainConfig
from .meta import (MetaTrainConfig, MonotoneMlp, SelfValItem, forward,
                   init_mlp, masked_loss, train_meta)
from .metrics import auroc, in_ratio
from .scores import (ScorePair, compute_norm_stats, confidence_q,
                     energy_ood_score, entropy_q, fit_class_gaussians,
                     mahalanobis_ood_score, to_informativeness, to_purity)
from .selection import (CostModel, LabeledSet, Oracle, initial_labeled,
                        query_cost, select_coreset, select_queries)

log = logging.getLogger(__name__)

STRATEGIES = ("mqnet", "random", "conf", "coreset", "linear", "product",
              "purity_only", "info_only")
PURITY_SOURCES = ("energy", "mahalanobis")
INFO_SOURCES = ("entropy", "confidence")

# stream tags for independent, strategy-agnostic RNG streams
_SEED_INIT, _SEED_META, _SEED_STRATEGY, _SEED_CLF_INIT, _SEED_CLF_TRAIN = range(5)


@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int = 10
    budget: float = 30.0
    seed: int = 0
    strategy: str = "mqnet"
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    costs: CostModel = field(default_factory=CostModel)
    meta: MetaTrainConfig = field(default_factory=MetaTrainConfig)
    meta_hidden_dim: int = 64
    classifier: TrainConfig = field(default_factory=TrainConfig)
    classifier_hidden_dim: int = 32
    purity_source: str = "energy"
    info_source: str = "entropy"
    energy_temperature: float = 1.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.purity_source not in PURITY_SOURCES:
            raise ValueError(f"unknown purity source {self.purity_source!r}")
        if self.info_source not in INFO_SOURCES:
            raise ValueError(f"unknown informativeness source {self.info_source!r}")
        if self.energy_temperature <= 0:
            raise ValueError("energy_temperature must be positive")
        if self.meta_hidden_dim < 1 or self.classifier_hidden_dim < 1:
            raise ValueError("hidden dimensions must be positive")

    @property
    def noise_ratio(self) -> float:
        return self.benchmark.noise_ratio


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    test_accuracy: float
    query_in_ratio: float
    cost_spent: float
    purity_auroc: float  # NaN when the pool holds a single kind
    strategy_name: str
    pool_exhausted: bool = False

    FIELDS = ("round_index", "strategy_name", "test_accuracy",
              "query_in_ratio", "cost_spent", "purity_auroc",
              "pool_exhausted")


@dataclass
class RoundTrace:
    pool_ids: np.ndarray
    purity: np.ndarray
    informativeness: np.ndarray
    query: LabeledSet
    self_val: list
    plain_losses: list
    train_ids: list
    train_set_ood: int


@dataclass
class RunTrace:
    """Optional instrumentation filled in by :func:`run_experiment`."""

    rounds: list = field(default_factory=list)
    initial: LabeledSet | None = None
    mlp: MonotoneMlp | None = None
    pool_size_start: int = 0

    @property
    def ood_training_count(self) -> int:
        return sum(r.train_set_ood for r in self.rounds)


def score_pairs(purity, informativeness) -> np.ndarray:
    return np.column_stack([np.asarray(purity, float),
                            np.asarray(informativeness, float)])


def mqnet_scores(round_index: int, mlp: MonotoneMlp, pairs) -> np.ndarray:
    """First round falls back to ``P + I``; later rounds use the meta-model."""
    Z = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if round_index <= 1:
        return Z[:, 0] + Z[:, 1]
    return forward(mlp, Z)


def baseline_scores(strategy: str, probs, pairs,
                    rng: np.random.Generator) -> np.ndarray:
    """Per-example scores for the score-based baselines.

    ``coreset`` is not score-based and goes through
    :func:`mqnet.selection.select_coreset` instead.
    """
    Z = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if strategy == "random":
        return rng.random(len(Z))
    if strategy == "conf":
        return confidence_q(probs)
    if strategy == "linear":
        return Z[:, 0] + Z[:, 1]
    if strategy == "product":
        return Z[:, 0] * Z[:, 1]
    if strategy == "purity_only":
        return Z[:, 0].copy()
    if strategy == "info_only":
        return Z[:, 1].copy()
    raise ValueError(f"unknown strategy {strategy!r}")


def _ood_scores(cfg, clf, pool_features, pool_logits, labeled):
    X_in, y_in = labeled.in_arrays()
    if cfg.purity_source == "energy" or len(X_in) == 0:
        # class statistics need at least one labeled IN example
        return energy_ood_score(pool_logits, cfg.energy_temperature)
    stats = fit_class_gaussians(clf_mod.penultimate_features(clf, X_in), y_in,
                                n_classes=cfg.benchmark.n_classes)
    return mahalanobis_ood_score(
        clf_mod.penultimate_features(clf, pool_features), stats)


def _query_scores(cfg, pool_probs):
    if cfg.info_source == "entropy":
        return entropy_q(pool_probs)
    return confidence_q(pool_probs)


def _rng(seed, tag, *extra) -> np.random.Generator:
    return np.random.default_rng([int(seed), tag, *extra])


def run_experiment(cfg: ExperimentConfig,
                   trace: RunTrace | None = None) -> list[RoundRecord]:
    """Run ``cfg.rounds`` rounds of open-set AL and return one record per round.

    Random streams are keyed by (seed, purpose), so every strategy sees the
    same benchmark, initial labeled set and classifier initializations.
    """
    bench = generate_benchmark(cfg.benchmark, seed=cfg.seed)
    oracle = Oracle(bench.truth, cfg.costs)
    pool = bench.pool
    if cfg.budget > oracle.pool_cost(pool):
        raise ValueError("budget exceeds the total labeling cost of the pool")
    labeled, pool = initial_labeled(pool, cfg.budget, oracle,
                                    _rng(cfg.seed, _SEED_INIT))
    meta_rng = _rng(cfg.seed, _SEED_META)
    strategy_rng = _rng(cfg.seed, _SEED_STRATEGY)
    mlp = init_mlp(cfg.meta_hidden_dim, meta_rng)
    if trace is not None:
        trace.initial = LabeledSet(list(labeled.in_items),
                                   list(labeled.ood_items), list(labeled.order))
        trace.pool_size_start = len(bench.pool)

    records: list[RoundRecord] = []
    for r in range(1, cfg.rounds + 1):
        if len(pool) == 0:
            log.warning("pool exhausted before round %d; stopping", r)
            break
        X_in, y_in = labeled.in_arrays()
        train_ids = [ex.id for ex, _ in labeled.in_items]
        train_set_ood = int((~bench.truth.is_in[train_ids]).sum()) if train_ids else 0
        clf = clf_mod.init_classifier(pool.features.shape[1], cfg.benchmark.n_classes,
                                      cfg.classifier_hidden_dim,
                                      seed=[cfg.seed, _SEED_CLF_INIT, r])
        if len(X_in):
            clf = clf_mod.train_classifier(clf, X_in, y_in, cfg.classifier,
                                           _rng(cfg.seed, _SEED_CLF_TRAIN, r))
        else:
            log.warning("round %d: no labeled IN examples; classifier left untrained", r)
        acc = clf_mod.test_accuracy(clf, bench.test_features, bench.test_labels)

        pool_logits = clf_mod.logits(clf, pool.features)
        pool_probs = clf_mod.probs(clf, pool.features)
        O = _ood_scores(cfg, clf, pool.features, pool_logits, labeled)
        Q = _query_scores(cfg, pool_probs)
        P = to_purity(O, compute_norm_stats(-O))
        I = to_informativeness(Q, compute_norm_stats(Q))
        Z = score_pairs(P, I)

        pool_in = bench.truth.is_in[pool.ids]
        p_auroc = (auroc(P, pool_in) if 0 < pool_in.sum() < len(pool_in)
                   else float("nan"))

        if cfg.strategy == "mqnet":
            scores = mqnet_scores(r, mlp, Z)
            query, new_pool = select_queries(scores, pool, cfg.budget, oracle)
        elif cfg.strategy == "coreset":
            labeled_feats = clf_mod.penultimate_features(clf, labeled.all_features())
            query, new_pool = select_coreset(
                pool, clf_mod.penultimate_features(clf, pool.features),
                labeled_feats, cfg.budget, oracle)
        else:
            scores = baseline_scores(cfg.strategy, pool_probs, Z, strategy_rng)
            query, new_pool = select_queries(scores, pool, cfg.budget, oracle)

        position = {int(i): p for p, i in enumerate(pool.ids)}
        self_val, plain = [], []
        for ex in _query_examples(query):
            p = position[ex.id]
            plain_loss = (clf_mod.ce_loss(clf, ex.features, ex.class_label)
                          if ex.is_in else 0.0)
            plain.append(plain_loss)
            self_val.append(SelfValItem(ScorePair(float(P[p]), float(I[p])),
                                        masked_loss(plain_loss, ex.is_in),
                                        ex.is_in))

        if cfg.strategy == "mqnet" and len(self_val) >= 2:
            mlp = train_meta(mlp, self_val, cfg.meta, meta_rng)

        spent = query_cost(query, cfg.costs)
        exhausted = len(new_pool) == 0 and spent < cfg.budget
        if exhausted:
            log.warning("round %d: pool exhausted at cost %.3f < budget %.3f",
                        r, spent, cfg.budget)
        records.append(RoundRecord(
            round_index=r,
            test_accuracy=acc,
            query_in_ratio=in_ratio(query),
            cost_spent=spent,
            purity_auroc=p_auroc,
            strategy_name=cfg.strategy,
            pool_exhausted=exhausted,
        ))
        if trace is not None:
            trace.rounds.append(RoundTrace(pool.ids.copy(), P, I, query,
                                           self_val, plain, train_ids,
                                           train_set_ood))
        labeled.extend(query)
        pool = new_pool

    if trace is not None:
        trace.mlp = mlp
    return records


def _query_examples(query: LabeledSet):
    by_id = {ex.id: ex for ex, _ in query.in_items}
    by_id.update({ex.id: ex for ex in query.ood_items})
    return [by_id[i] for i in query.order]
