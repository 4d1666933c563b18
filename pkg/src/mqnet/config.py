"""Flat JSON configuration for single runs and sweeps.

Every key is optional; omitted keys take the defaults below. Unknown keys and
out-of-range values raise :class:`ConfigError` naming the offending key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .benchmark import BenchmarkConfig
from .classifier import TrainConfig
from .meta import MetaTrainConfig
from .selection import CostModel
from .simulator import (INFO_SOURCES, PURITY_SOURCES, STRATEGIES,
                        ExperimentConfig)

OUT_DIR_ENV = "MQNET_OUT_DIR"
DEFAULT_OUT_DIR = "mqnet_out"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit_open(v):
    return 0 < v <= 1


# key -> (section, field, type, check, requirement)
_SCALARS = {
    "rounds": ("exp", "rounds", int, _pos, "a positive integer"),
    "budget": ("exp", "budget", float, _pos, "positive"),
    "seed": ("exp", "seed", int, _nonneg, "a non-negative integer"),
    "strategy": ("exp", "strategy", str, lambda v: v in STRATEGIES,
                 f"one of {', '.join(STRATEGIES)}"),
    "meta_hidden_dim": ("exp", "meta_hidden_dim", int, _pos, "a positive integer"),
    "classifier_hidden_dim": ("exp", "classifier_hidden_dim", int, _pos,
                              "a positive integer"),
    "purity_source": ("exp", "purity_source", str, lambda v: v in PURITY_SOURCES,
                      f"one of {', '.join(PURITY_SOURCES)}"),
    "info_source": ("exp", "info_source", str, lambda v: v in INFO_SOURCES,
                    f"one of {', '.join(INFO_SOURCES)}"),
    "energy_temperature": ("exp", "energy_temperature", float, _pos, "positive"),
    "pool_size": ("bench", "pool_size", int, _pos, "a positive integer"),
    "n_classes": ("bench", "n_classes", int, lambda v: v >= 2, "at least 2"),
    "noise_ratio": ("bench", "noise_ratio", float, lambda v: 0 <= v < 1,
                    "in [0, 1)"),
    "n_ood_clusters": ("bench", "n_ood_clusters", int, _pos, "a positive integer"),
    "in_radius": ("bench", "in_radius", float, _pos, "positive"),
    "in_std": ("bench", "in_std", float, _pos, "positive"),
    "ood_std": ("bench", "ood_std", float, _pos, "positive"),
    "ood_inner_scale": ("bench", "ood_inner_scale", float, _nonneg, "non-negative"),
    "ood_outer_scale": ("bench", "ood_outer_scale", float, _nonneg, "non-negative"),
    "test_per_class": ("bench", "test_per_class", int, _pos, "a positive integer"),
    "cost_in": ("cost", "c_in", float, _pos, "positive"),
    "cost_ood": ("cost", "c_ood", float, _pos, "positive"),
    "margin": ("meta", "margin", float, _pos, "positive"),
    "pair_batch_size": ("meta", "pair_batch_size", int, _pos, "a positive integer"),
    "meta_epochs": ("meta", "epochs", int, _pos, "a positive integer"),
    "meta_learning_rate": ("meta", "learning_rate", float, _pos, "positive"),
    "meta_lr_decay_factor": ("meta", "lr_decay_factor", float, _unit_open,
                             "in (0, 1]"),
    "meta_lr_decay_at_fraction": ("meta", "lr_decay_at_fraction", float,
                                  _unit_open, "in (0, 1]"),
    "strict_margin": ("meta", "strict_margin", bool, lambda v: True, "a boolean"),
    "clf_iterations": ("clf", "iterations", int, _nonneg, "a non-negative integer"),
    "clf_learning_rate": ("clf", "learning_rate", float, _pos, "positive"),
    "clf_batch_size": ("clf", "batch_size", int, _pos, "a positive integer"),
}

# sweep-level keys: list-valued grids plus output settings
_SWEEP_LISTS = {
    "strategies": "strategy",
    "noise_ratios": "noise_ratio",
    "cost_grid": "cost_ood",
    "seeds": "seed",
}
_SWEEP_OTHER = ("out_dir", "jobs")

KNOWN_KEYS = tuple(_SCALARS) + tuple(_SWEEP_LISTS) + _SWEEP_OTHER


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentConfig
    strategies: tuple = ("mqnet",)
    noise_ratios: tuple = (0.4,)
    cost_grid: tuple = (1.0,)
    seeds: tuple = (0,)
    out_dir: Path = field(default_factory=lambda: Path(DEFAULT_OUT_DIR))
    jobs: int = 1

    def cells(self):
        """(strategy, noise_ratio, cost_ood, seed) keys in output order."""
        return [(s, t, c, seed) for s in self.strategies
                for t in self.noise_ratios for c in self.cost_grid
                for seed in self.seeds]

    def config_for(self, strategy, noise_ratio, cost_ood, seed) -> ExperimentConfig:
        b = self.base
        return replace(b, strategy=strategy, seed=int(seed),
                       benchmark=replace(b.benchmark, noise_ratio=float(noise_ratio)),
                       costs=replace(b.costs, c_ood=float(cost_ood)))


def _coerce(key, value, typ, check, requirement):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"must be {requirement}, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str) or not check(value):
            raise ConfigError(key, f"must be {requirement}, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(key, f"must be {requirement}, got {value!r}")
    try:
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            v = int(value)
        else:
            v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"must be {requirement}, got {value!r}") from None
    if not check(v):
        raise ConfigError(key, f"must be {requirement}, got {value!r}")
    return v


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    text = p.read_text(encoding="utf-8").strip()
    data = json.loads(text) if text else {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def build_spec(values: dict) -> SweepSpec:
    """Validate a flat key/value mapping and build a :class:`SweepSpec`."""
    unknown = [k for k in values if k not in KNOWN_KEYS]
    if unknown:
        raise ConfigError(unknown[0], "unknown key")

    sections = {"exp": {}, "bench": {}, "cost": {}, "meta": {}, "clf": {}}
    for key, value in values.items():
        if key in _SCALARS:
            section, name, typ, check, req = _SCALARS[key]
            sections[section][name] = _coerce(key, value, typ, check, req)

    lists = {}
    for key, scalar_key in _SWEEP_LISTS.items():
        if key not in values:
            continue
        raw = values[key]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(key, "must be a non-empty list")
        _, _, typ, check, req = _SCALARS[scalar_key]
        lists[key] = tuple(_coerce(key, v, typ, check, req) for v in raw)

    try:
        base = ExperimentConfig(
            benchmark=BenchmarkConfig(**sections["bench"]),
            costs=CostModel(**sections["cost"]),
            meta=MetaTrainConfig(**sections["meta"]),
            classifier=TrainConfig(**sections["clf"]),
            **sections["exp"],
        )
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from exc

    out_dir = values.get("out_dir") or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR
    if not isinstance(out_dir, str):
        raise ConfigError("out_dir", "must be a path string")
    jobs = _coerce("jobs", values.get("jobs", 1), int, _pos, "a positive integer")
    return SweepSpec(
        base=base,
        strategies=lists.get("strategies", (base.strategy,)),
        noise_ratios=lists.get("noise_ratios", (base.benchmark.noise_ratio,)),
        cost_grid=lists.get("cost_grid", (base.costs.c_ood,)),
        seeds=lists.get("seeds", (base.seed,)),
        out_dir=Path(out_dir),
        jobs=jobs,
    )


def parse_config(path=None, overrides: dict | None = None) -> SweepSpec:
    """Read an optional JSON file, apply flag overrides, validate."""
    values = load_config_file(path) if path is not None else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_spec(values)


def spec_to_dict(spec: SweepSpec) -> dict:
    """Flat mapping that :func:`build_spec` turns back into ``spec``."""
    b = spec.base
    sources = {"exp": b, "bench": b.benchmark, "cost": b.costs,
               "meta": b.meta, "clf": b.classifier}
    out = {key: getattr(sources[section], name)
           for key, (section, name, *_rest) in _SCALARS.items()}
    out.update({
        "strategies": list(spec.strategies),
        "noise_ratios": list(spec.noise_ratios),
        "cost_grid": list(spec.cost_grid),
        "seeds": list(spec.seeds),
        "out_dir": str(spec.out_dir),
        "jobs": spec.jobs,
    })
    return out
