import csv
import json
import math

import numpy as np
import pytest

from mqnet.cli import main
from mqnet.config import (DEFAULT_OUT_DIR, OUT_DIR_ENV, ConfigError,
                          build_spec, parse_config, spec_to_dict)
from mqnet.meta import MonotoneMlp, init_mlp, load_checkpoint
from mqnet.simulator import ExperimentConfig
from mqnet.sweep import (AGGREGATE_COLUMNS, METRICS, RUN_COLUMNS,
                         aggregate_metric, read_run_csv, run_sweep,
                         score_grid)

SMALL = {"rounds": 2, "budget": 10, "pool_size": 120, "test_per_class": 30,
         "clf_iterations": 100, "meta_epochs": 5}


def _read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_empty_is_defaults(self, monkeypatch):
        monkeypatch.delenv(OUT_DIR_ENV, raising=False)
        spec = parse_config()
        assert spec.base == ExperimentConfig()
        assert spec.cells() == [("mqnet", 0.4, 1.0, 0)]
        assert str(spec.out_dir) == DEFAULT_OUT_DIR

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{}")
        assert parse_config(p).base == ExperimentConfig()

    def test_noise_ratio_out_of_range(self):
        with pytest.raises(ConfigError) as info:
            build_spec({"noise_ratio": 1.2})
        assert info.value.key == "noise_ratio"
        assert "noise_ratio" in str(info.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="colour"):
            build_spec({"colour": "red"})

    @pytest.mark.parametrize("key, value", [("rounds", 0), ("rounds", 1.5),
                                            ("strategy", "best"), ("cost_ood", -1),
                                            ("strict_margin", "yes"), ("seeds", [])])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError) as info:
            build_spec({key: value})
        assert info.value.key == key

    def test_cost_grid_cells(self):
        spec = build_spec({"cost_grid": [0.5, 1, 2, 4]})
        assert [c[2] for c in spec.cells()] == [0.5, 1.0, 2.0, 4.0]
        assert spec.config_for(*spec.cells()[3]).costs.c_ood == 4.0

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 3, "rounds": 4}))
        spec = parse_config(p, {"seed": 9, "rounds": None})
        assert (spec.base.seed, spec.base.rounds) == (9, 4)

    def test_env_out_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
        assert parse_config().out_dir == tmp_path / "env"
        assert parse_config(overrides={"out_dir": "x"}).out_dir.name == "x"

    def test_round_trip(self):
        spec = build_spec({"strategies": ["mqnet", "random"], "seeds": [1, 2],
                           "margin": 0.2, "strict_margin": True})
        assert build_spec(spec_to_dict(spec)) == spec


class TestSweep:
    def _spec(self, out, **extra):
        return build_spec({**SMALL, "out_dir": str(out), **extra})

    def test_counts_and_layout(self, tmp_path):
        spec = self._spec(tmp_path, strategies=["mqnet", "random"], seeds=[0, 1, 2])
        rows = run_sweep(spec)
        runs = sorted(p.name for p in (tmp_path / "runs").iterdir())
        assert len(runs) == 6
        assert "mqnet_tau0.4_cood1.0_seed0.csv" in runs
        assert (tmp_path / "aggregate.csv").exists()
        assert len(list((tmp_path / "checkpoints").iterdir())) == 3
        assert not (tmp_path / "failures.csv").exists()
        assert len(rows) == 2 * SMALL["rounds"]
        assert tuple(_read(tmp_path / "aggregate.csv")[0]) == AGGREGATE_COLUMNS
        assert tuple(_read(tmp_path / "runs" / runs[0])[0]) == RUN_COLUMNS

    def test_byte_identical_rerun(self, tmp_path):
        outs = []
        for name, jobs in (("a", 1), ("b", 2)):
            spec = self._spec(tmp_path / name, strategies=["mqnet", "conf"],
                              seeds=[0, 1], jobs=jobs)
            run_sweep(spec)
            outs.append(tmp_path / name)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
        assert files
        for rel in files:
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()

    def test_aggregate_reproducible_from_runs(self, tmp_path):
        run_sweep(self._spec(tmp_path, seeds=[0, 1, 2]))
        per_run = [read_run_csv(p) for p in sorted((tmp_path / "runs").iterdir())]
        for row in _read(tmp_path / "aggregate.csv"):
            r = int(row["round"])
            for m in METRICS:
                vals = [recs[r - 1][m] for recs in per_run]
                mean, std = np.mean(vals), np.std(vals)
                assert abs(float(row[f"{m}_mean"]) - mean) <= 1e-12
                assert abs(float(row[f"{m}_std"]) - std) <= 1e-12

    def test_failure_is_skipped(self, tmp_path):
        # pool of 30 at tau 0.4 costs 24 < budget when c_ood = 0.5
        spec = build_spec({**SMALL, "pool_size": 30, "budget": 25, "rounds": 1,
                           "cost_grid": [0.5, 1.0], "strategies": ["random"],
                           "out_dir": str(tmp_path)})
        run_sweep(spec)
        fails = _read(tmp_path / "failures.csv")
        assert [f["cell"] for f in fails] == ["random_tau0.4_cood0.5_seed0"]
        assert [p.name for p in (tmp_path / "runs").iterdir()] == [
            "random_tau0.4_cood1.0_seed0.csv"]

    def test_aggregate_metric(self):
        assert aggregate_metric([1.0, 3.0]) == (2.0, 1.0)


class TestGrid:
    def test_shape_and_order(self):
        g = score_grid(init_mlp(8, np.random.default_rng(0)), (0.1, 1.0), 10)
        assert g.shape == (100, 3)
        assert g[0, 0] == g[0, 1] == 0.1
        assert g[1, 0] > g[0, 0] and g[1, 1] == g[0, 1]

    def test_monotone_axes(self):
        rng = np.random.default_rng(1)
        mlp = MonotoneMlp.from_vector(rng.normal(size=4 * 16 + 1), 16)
        S = score_grid(mlp, resolution=12)[:, 2].reshape(12, 12)  # [purity, info]
        assert np.all(np.diff(S, axis=0) >= -1e-12)
        assert np.all(np.diff(S, axis=1) >= -1e-12)

    def test_dead_model_constant(self):
        g = score_grid(MonotoneMlp.from_vector(-np.ones(13), 3), resolution=5)
        assert np.all(g[:, 2] == g[0, 2])

    def test_resolution(self):
        with pytest.raises(ValueError):
            score_grid(init_mlp(4), resolution=1)


class TestCli:
    def _args(self, tmp_path):
        return ["--rounds", "2", "--budget", "10", "--out", str(tmp_path)]

    def test_run(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({k: SMALL[k] for k in ("pool_size", "test_per_class",
                                                         "clf_iterations", "meta_epochs")}))
        code = main(["run", "--config", str(cfg), *self._args(tmp_path)])
        assert code == 0
        rows = _read(tmp_path / "run.csv")
        assert len(rows) == 2 and rows[0]["strategy_name"] == "mqnet"
        ck = load_checkpoint(tmp_path / "checkpoint.json")
        assert ck.hidden_dim == 64

        code = main(["grid", "--checkpoint", str(tmp_path / "checkpoint.json"),
                     "--resolution", "4", "--out", str(tmp_path)])
        assert code == 0
        grid = _read(tmp_path / "score_grid.csv")
        assert len(grid) == 16
        assert all(math.isfinite(float(r["score"])) for r in grid)

    def test_sweep(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({**SMALL, "strategies": ["random", "linear"]}))
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert len(list((tmp_path / "o" / "runs").iterdir())) == 2

    def test_bad_value(self, tmp_path, capsys):
        assert main(["run", "--noise-ratio", "1.2", "--out", str(tmp_path)]) == 2
        assert "noise_ratio" in capsys.readouterr().err

    def test_bad_strategy_flag(self):
        with pytest.raises(SystemExit):
            main(["run", "--strategy", "best"])
