"""Monotone meta-scorer: non-negative 2-layer MLP trained with a ranking loss.

The network maps a meta-input ``z = (purity, informativeness)`` to a score

    phi(z) = relu(W2) . sigmoid(relu(W1) z + relu(b1)) + relu(b2)

Every effective parameter is non-negative and the sigmoid is increasing, so
``phi`` is componentwise non-decreasing on the non-negative orthant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .scores import ScorePair

INPUT_DIM = 2
CHECKPOINT_FORMAT = "mqnet-checkpoint/1"


@dataclass
class MonotoneMlp:
    """Raw (unconstrained) parameters; see :func:`project_params`."""

    raw_w1: np.ndarray  # (m, d)
    raw_b1: np.ndarray  # (m,)
    raw_w2: np.ndarray  # (1, m)
    raw_b2: np.ndarray  # (1,)

    @property
    def hidden_dim(self) -> int:
        return self.raw_w1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.raw_w1.shape[1]

    def to_vector(self) -> np.ndarray:
        """Flat raw parameters in the order w1 (row-major), b1, w2, b2."""
        return np.concatenate([self.raw_w1.ravel(), self.raw_b1.ravel(),
                               self.raw_w2.ravel(), self.raw_b2.ravel()])

    @classmethod
    def from_vector(cls, vec, hidden_dim: int,
                    input_dim: int = INPUT_DIM) -> "MonotoneMlp":
        vec = np.asarray(vec, dtype=float)
        m, d = hidden_dim, input_dim
        expected = m * d + m + m + 1
        if vec.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {vec.shape}")
        i = 0
        w1 = vec[i:i + m * d].reshape(m, d).copy()
        i += m * d
        b1 = vec[i:i + m].copy()
        i += m
        w2 = vec[i:i + m].reshape(1, m).copy()
        i += m
        b2 = vec[i:i + 1].copy()
        return cls(w1, b1, w2, b2)

    def copy(self) -> "MonotoneMlp":
        return MonotoneMlp(self.raw_w1.copy(), self.raw_b1.copy(),
                           self.raw_w2.copy(), self.raw_b2.copy())


class EffectiveParams(NamedTuple):
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class MetaTrainConfig:
    margin: float = 0.1
    pair_batch_size: int = 64
    epochs: int = 100
    learning_rate: float = 0.01
    lr_decay_factor: float = 0.1
    lr_decay_at_fraction: float = 0.5
    strict_margin: bool = False

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.pair_batch_size < 1:
            raise ValueError("pair_batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError("lr_decay_factor must lie in (0, 1]")
        if not 0 < self.lr_decay_at_fraction <= 1:
            raise ValueError("lr_decay_at_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class SelfValItem:
    score_pair: ScorePair
    masked_loss: float
    is_in: bool

    def __post_init__(self):
        if self.masked_loss < 0:
            raise ValueError("masked loss must be non-negative")
        if not self.is_in and self.masked_loss != 0:
            raise ValueError("OOD items must carry a zero masked loss")


def init_mlp(hidden_dim: int = 64, rng: np.random.Generator | None = None,
             input_dim: int = INPUT_DIM, scale: float = 0.05) -> MonotoneMlp:
    """Weights ~ U(-scale, scale), biases zero."""
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be positive")
    rng = np.random.default_rng() if rng is None else rng
    return MonotoneMlp(
        raw_w1=rng.uniform(-scale, scale, size=(hidden_dim, input_dim)),
        raw_b1=np.zeros(hidden_dim),
        raw_w2=rng.uniform(-scale, scale, size=(1, hidden_dim)),
        raw_b2=np.zeros(1),
    )


def project_params(raw: MonotoneMlp) -> EffectiveParams:
    return EffectiveParams(np.maximum(raw.raw_w1, 0.0),
                           np.maximum(raw.raw_b1, 0.0),
                           np.maximum(raw.raw_w2, 0.0),
                           np.maximum(raw.raw_b2, 0.0))


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _as_inputs(z) -> tuple[np.ndarray, bool]:
    if isinstance(z, ScorePair):
        return z.as_array()[None, :], True
    arr = np.asarray(z, dtype=float)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _hidden(eff: EffectiveParams, Z: np.ndarray) -> np.ndarray:
    return _sigmoid(Z @ eff.w1.T + eff.b1)


def forward(mlp: MonotoneMlp, z):
    """Meta-score of one score pair (float) or of an ``(n, 2)`` batch (array)."""
    Z, single = _as_inputs(z)
    if not np.all(np.isfinite(Z)):
        raise ValueError("meta-input must be finite")
    eff = project_params(mlp)
    out = _hidden(eff, Z) @ eff.w2[0] + eff.b2[0]
    return float(out[0]) if single else out


def first_layer(mlp: MonotoneMlp, z) -> np.ndarray:
    """Hidden activations ``sigmoid(relu(W1) z + relu(b1))``."""
    Z, _ = _as_inputs(z)
    return _hidden(project_params(mlp), Z)


def masked_loss(ce: float, is_in: bool) -> float:
    if ce < 0:
        raise ValueError("cross-entropy must be non-negative")
    return float(ce) if is_in else 0.0


def sign3(a: float, b: float) -> int:
    if a > b:
        return 1
    if a == b:
        return 0
    return -1


def pair_minibatch(item_indices, M: int,
                   rng: np.random.Generator) -> list[tuple]:
    """Draw ``2M`` items without replacement; pair position k with M + k.

    ``M`` shrinks to ``len(items) // 2`` when too few items are available.
    """
    items = list(item_indices)
    n = len(items)
    if n < 2:
        raise ValueError("self-validation set too small")
    if M < 1:
        raise ValueError("M must be positive")
    M = min(M, n // 2)
    drawn = rng.permutation(n)[:2 * M]
    return [(items[drawn[k]], items[drawn[M + k]]) for k in range(M)]


def pair_loss(score_i: float, score_j: float, mloss_i: float, mloss_j: float,
              eta: float, strict_margin: bool = False) -> float:
    """Hinge ranking loss for an ordered pair.

    Default form is ``max(0, -s * (score_i - score_j + eta))`` with
    ``s = sign3(mloss_i, mloss_j)``. ``strict_margin`` switches to
    ``max(0, eta - s * (score_i - score_j))`` for ``s != 0``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    s = sign3(mloss_i, mloss_j)
    if s == 0:
        return 0.0
    delta = score_i - score_j
    arg = eta - s * delta if strict_margin else -s * (delta + eta)
    return max(0.0, arg)


def _item_arrays(items) -> tuple[np.ndarray, np.ndarray]:
    Z = np.array([it.score_pair.as_array() for it in items], dtype=float)
    L = np.array([it.masked_loss for it in items], dtype=float)
    return Z.reshape(-1, INPUT_DIM), L


def _pair_terms(scores, losses, pairs, eta, strict_margin):
    P = np.asarray(pairs, dtype=int).reshape(-1, 2)
    i, j = P[:, 0], P[:, 1]
    s = np.sign(losses[i] - losses[j])
    delta = scores[i] - scores[j]
    if strict_margin:
        arg = np.where(s != 0, eta - s * delta, 0.0)
    else:
        arg = -s * (delta + eta)
    return i, j, s, arg


def batch_loss(mlp: MonotoneMlp, items, pairs, eta: float,
               strict_margin: bool = False) -> float:
    """Sum of :func:`pair_loss` over ``pairs`` (indices into ``items``)."""
    if len(pairs) == 0:
        return 0.0
    Z, L = _item_arrays(items)
    scores = forward(mlp, Z)
    _, _, _, arg = _pair_terms(scores, L, pairs, eta, strict_margin)
    return float(np.maximum(arg, 0.0).sum())


def gradient(mlp: MonotoneMlp, items, pairs, eta: float,
             strict_margin: bool = False) -> MonotoneMlp:
    """Analytic gradient of :func:`batch_loss` w.r.t. the raw parameters.

    Returned in a :class:`MonotoneMlp` container of matching shapes. The
    hinge contributes nothing at its kink and the projection passes gradient
    only where ``raw > 0``.
    """
    Z, L = _item_arrays(items)
    return _gradient_arrays(mlp, Z, L, pairs, eta, strict_margin)


def _gradient_arrays(mlp, Z, L, pairs, eta, strict_margin) -> MonotoneMlp:
    zeros = MonotoneMlp(np.zeros_like(mlp.raw_w1), np.zeros_like(mlp.raw_b1),
                        np.zeros_like(mlp.raw_w2), np.zeros_like(mlp.raw_b2))
    if len(pairs) == 0:
        return zeros
    eff = project_params(mlp)
    H = _hidden(eff, Z)
    scores = H @ eff.w2[0] + eff.b2[0]
    i, j, s, arg = _pair_terms(scores, L, pairs, eta, strict_margin)
    active = arg > 0
    if not np.any(active):
        return zeros
    # d loss / d phi per item
    coef = np.zeros(len(Z))
    np.add.at(coef, i[active], -s[active])
    np.add.at(coef, j[active], s[active])

    g_w2 = (coef @ H)[None, :]
    g_b2 = np.array([coef.sum()])
    D = coef[:, None] * (eff.w2[0] * H * (1.0 - H))
    g_w1 = D.T @ Z
    g_b1 = D.sum(axis=0)
    return MonotoneMlp(g_w1 * (mlp.raw_w1 > 0), g_b1 * (mlp.raw_b1 > 0),
                       g_w2 * (mlp.raw_w2 > 0), g_b2 * (mlp.raw_b2 > 0))


@dataclass
class MetaTrainLog:
    steps: int = 0
    losses: list = field(default_factory=list)


def train_meta(mlp: MonotoneMlp, self_val, cfg: MetaTrainConfig,
               rng: np.random.Generator,
               log: MetaTrainLog | None = None) -> MonotoneMlp:
    """Paired mini-batch SGD on the self-validation set.

    One epoch is ``max(1, n // 2M)`` mini-batches. The learning rate is
    multiplied by ``cfg.lr_decay_factor`` once ``cfg.lr_decay_at_fraction`` of
    the total steps have run. Returns a new model; ``mlp`` is left untouched.
    """
    items = list(self_val)
    n = len(items)
    if n < 2:
        raise ValueError("self-validation set too small")
    M = min(cfg.pair_batch_size, n // 2)
    steps_per_epoch = max(1, n // (2 * M))
    total = cfg.epochs * steps_per_epoch
    decay_at = int(cfg.lr_decay_at_fraction * total)
    model = mlp.copy()
    Z, L = _item_arrays(items)
    indices = list(range(n))
    for step in range(total):
        lr = cfg.learning_rate * (cfg.lr_decay_factor if step >= decay_at else 1.0)
        pairs = pair_minibatch(indices, M, rng)
        g = _gradient_arrays(model, Z, L, pairs, cfg.margin, cfg.strict_margin)
        if log is not None:
            log.steps += 1
            log.losses.append(batch_loss(model, items, pairs, cfg.margin,
                                         cfg.strict_margin))
        model.raw_w1 -= lr * g.raw_w1
        model.raw_b1 -= lr * g.raw_b1
        model.raw_w2 -= lr * g.raw_w2
        model.raw_b2 -= lr * g.raw_b2
    return model


def save_checkpoint(mlp: MonotoneMlp, path) -> Path:
    """Write raw parameters as JSON; floats use ``repr`` for exact round-trip."""
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "hidden_dim": mlp.hidden_dim,
        "input_dim": mlp.input_dim,
        "layout": ["raw_w1", "raw_b1", "raw_w2", "raw_b2"],
        "params": [float(v) for v in mlp.to_vector()],
    }
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> MonotoneMlp:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    return MonotoneMlp.from_vector(payload["params"], payload["hidden_dim"],
                                   payload["input_dim"])

