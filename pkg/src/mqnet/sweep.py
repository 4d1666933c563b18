"""Multi-seed sweeps, CSV artifacts and the meta-score landscape grid.

Output directory layout::

    <out>/config.resolved.json     flat config that reproduces the sweep
    <out>/runs/<cell>.csv          one row per round (RUN_COLUMNS)
    <out>/checkpoints/<cell>.json  final meta-model of each mqnet run
    <out>/aggregate.csv            mean/std over seeds (AGGREGATE_COLUMNS)
    <out>/failures.csv             only written when a cell raised

``<cell>`` is ``{strategy}_tau{noise_ratio}_cood{cost_ood}_seed{seed}``.
Floats are written with ``repr`` so a CSV parses back to the exact value.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SweepSpec, spec_to_dict
from .meta import MonotoneMlp, forward, save_checkpoint
from .simulator import RoundRecord, RunTrace, run_experiment

log = logging.getLogger(__name__)

RUN_COLUMNS = RoundRecord.FIELDS
METRICS = ("test_accuracy", "query_in_ratio", "cost_spent", "purity_auroc")
AGGREGATE_COLUMNS = (("strategy", "noise_ratio", "cost_ood", "round", "n_seeds")
                     + tuple(f"{m}_{stat}" for m in METRICS
                             for stat in ("mean", "std")))
GRID_COLUMNS = ("informativeness", "purity", "score")


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    noise_ratio: float
    cost_ood: float
    round: int
    n_seeds: int
    stats: dict  # metric -> (mean, std)

    def as_csv_row(self) -> list:
        row = [self.strategy, _fmt(self.noise_ratio), _fmt(self.cost_ood),
               self.round, self.n_seeds]
        for m in METRICS:
            mean, std = self.stats[m]
            row += [_fmt(mean), _fmt(std)]
        return row


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def cell_name(strategy, noise_ratio, cost_ood, seed) -> str:
    return f"{strategy}_tau{float(noise_ratio)!r}_cood{float(cost_ood)!r}_seed{int(seed)}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_run_csv(records, path) -> Path:
    path = Path(path)
    rows = [[_fmt(getattr(r, c)) if c != "strategy_name" else r.strategy_name
             for c in RUN_COLUMNS] for r in records]
    _write_csv(path, RUN_COLUMNS, rows)
    return path


def read_run_csv(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {"round_index": int(row["round_index"]),
                      "strategy_name": row["strategy_name"],
                      "pool_exhausted": row["pool_exhausted"] == "true"}
            for m in METRICS:
                parsed[m] = float(row[m])
            out.append(parsed)
    return out


def aggregate_metric(values) -> tuple[float, float]:
    """Mean and population std over seeds."""
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def aggregate(results: dict) -> list[AggregateRow]:
    """``results`` maps cell keys to record lists; seeds fold together."""
    groups: dict = {}
    for (strategy, tau, cood, seed), records in results.items():
        for rec in records:
            groups.setdefault((strategy, tau, cood, rec.round_index), []).append(rec)
    rows = []
    for (strategy, tau, cood, rnd), recs in groups.items():
        stats = {m: aggregate_metric([getattr(r, m) for r in recs]) for m in METRICS}
        rows.append(AggregateRow(strategy, tau, cood, rnd, len(recs), stats))
    return rows


def _run_cell(args):
    cfg, want_model = args
    trace = RunTrace() if want_model else None
    records = run_experiment(cfg, trace)
    return records, (trace.mlp if trace is not None else None)


def run_sweep(spec: SweepSpec) -> list[AggregateRow]:
    """Run every (strategy, noise ratio, OOD cost, seed) cell and write CSVs.

    A failing cell is logged and listed in ``failures.csv``; the rest of the
    sweep continues. Cells may run in worker processes (``spec.jobs``), but
    outputs are always written in cell-key order.
    """
    out = Path(spec.out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(
        json.dumps(spec_to_dict(spec), indent=1, sort_keys=True) + "\n",
        encoding="utf-8")

    cells = spec.cells()
    tasks = [(spec.config_for(*c), c[0] == "mqnet") for c in cells]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            futures = [pool.submit(_run_cell, t) for t in tasks]
            outcomes = [_collect(f.result) for f in futures]
    else:
        outcomes = [_collect(lambda t=t: _run_cell(t)) for t in tasks]

    results, failures = {}, []
    for cell, (value, error) in zip(cells, outcomes):
        name = cell_name(*cell)
        if error is not None:
            log.error("cell %s failed: %s", name, error)
            failures.append([name, error])
            continue
        records, mlp = value
        results[cell] = records
        write_run_csv(records, out / "runs" / f"{name}.csv")
        if mlp is not None:
            (out / "checkpoints").mkdir(exist_ok=True)
            save_checkpoint(mlp, out / "checkpoints" / f"{name}.json")

    rows = aggregate(results)
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS,
               [r.as_csv_row() for r in rows])
    if failures:
        _write_csv(out / "failures.csv", ("cell", "error"), failures)
    return rows


def _collect(fn):
    try:
        return fn(), None
    except Exception as exc:  # a bad cell must not abort the sweep
        return None, f"{type(exc).__name__}: {exc}"


def score_grid(mlp: MonotoneMlp, grid_range=(0.05, 5.0),
               resolution: int = 25) -> np.ndarray:
    """Meta-scores over a uniform ``resolution x resolution`` grid.

    Returns rows ``(informativeness, purity, score)`` with purity as the
    outer (row) index and informativeness as the inner (column) index.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    lo, hi = map(float, grid_range)
    if not 0 < lo < hi:
        raise ValueError("grid range must satisfy 0 < min < max")
    axis = np.linspace(lo, hi, resolution)
    P, I = np.meshgrid(axis, axis, indexing="ij")
    Z = np.column_stack([P.ravel(), I.ravel()])
    return np.column_stack([Z[:, 1], Z[:, 0], forward(mlp, Z)])


def emit_score_grid(mlp: MonotoneMlp, path, grid_range=(0.05, 5.0),
                    resolution: int = 25) -> Path:
    grid = score_grid(mlp, grid_range, resolution)
    path = Path(path)
    _write_csv(path, GRID_COLUMNS, [[_fmt(v) for v in row] for row in grid])
    return path

