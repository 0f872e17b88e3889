import csv
from pathlib import Path

import numpy as np
import pytest

from sparsegrow.dst_engine import sparse_connection_sets
from sparsegrow.experiment import (
    ConfigError,
    ExperimentConfig,
    SidecarError,
    decode_model,
    encode_model,
    load_config,
    parse_config,
    read_model,
    run_flops_report,
    run_gamma_sweep,
    run_training,
    training_plan,
)
from sparsegrow.experiment.cli import main
from sparsegrow.nn_engine import init_params, mlp, preset

ROOT = Path(__file__).resolve().parents[1]
MNIST_SUBSET = ROOT / "data" / "mnist-subset"

MINIMAL = "dataset = synthetic\nstrategy = gse_uniform\nsparsity = 0.8\nseed = 3\n"


def synthetic(tmp_path, **overrides):
    cfg = ExperimentConfig(dataset="synthetic", strategy="gse_uniform", sparsity=0.8, seed=0,
                           model="mlp:20-16-4", epochs=2, batch_size=32, T=5, synthetic_size=256,
                           output_dir=str(tmp_path))
    return cfg.with_overrides(**overrides)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(MINIMAL, env={})
        assert (cfg.momentum, cfg.weight_decay, cfg.lr, cfg.batch_size) == (0.9, 1e-4, 0.1, 128)
        assert (cfg.alpha, cfg.gamma, cfg.T) == (0.2, 1.0, 1000)

    def test_comments_and_quotes(self):
        cfg = parse_config("# run\n" + MINIMAL + "model = 'mlp'  # preset\n", env={})
        assert cfg.model == "mlp"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match=r"line 5: unknown key 'gamm'"):
            parse_config(MINIMAL + "gamm = 1\n", env={})

    def test_zero_gamma(self):
        with pytest.raises(ConfigError, match="line 5: gamma must be > 0"):
            parse_config(MINIMAL + "gamma = 0\n", env={})

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="line 5: epochs: expected an integer"):
            parse_config(MINIMAL + "epochs = five\n", env={})

    def test_missing_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config(MINIMAL.replace("seed = 3\n", ""), env={})

    def test_env_seed_wins(self):
        assert parse_config(MINIMAL, env={"SPARSEGROW_SEED": "42"}).seed == 42
        assert parse_config(MINIMAL.replace("seed = 3\n", ""), env={"SPARSEGROW_SEED": "7"}).seed == 7

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("dataset = mnist\nstrategy gse_uniform\n", env={})

    def test_unknown_model(self):
        with pytest.raises(ConfigError, match="line 5: model: unknown model"):
            parse_config(MINIMAL + "model = resnet9\n", env={})

    def test_bad_strategy(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("gse_uniform", "gse_magic"), env={})

    def test_relative_paths(self, tmp_path):
        (tmp_path / "a.cfg").write_text(MINIMAL + "data_dir = data\n")
        assert load_config(tmp_path / "a.cfg", env={}).data_dir == str(tmp_path / "data")

    def test_plan(self):
        cfg = parse_config(MINIMAL + "epochs = 5\nbatch_size = 100\n", env={})
        total, drops, t_end = training_plan(cfg, 1000)
        assert (total, drops, t_end) == (50, (20, 30), 30)

    def test_shipped_configs_parse(self):
        for path in (ROOT / "configs").glob("*.cfg"):
            load_config(path, env={})


class TestSidecar:
    def _params(self, dtype):
        rng = np.random.default_rng(0)
        model = mlp([6, 5, 3])
        return init_params(model, sparse_connection_sets(model, 0.5, rng, dtype=dtype), rng, dtype)

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_round_trip(self, dtype):
        params = self._params(dtype)
        for lp in params:
            lp.bias[:] = np.arange(lp.bias.size)
        data = encode_model(params)
        layers = decode_model(data)
        for lp, (conn, bias) in zip(params, layers):
            assert np.array_equal(conn.keys, lp.conn.keys)
            assert np.array_equal(conn.weights, lp.conn.weights) and conn.dtype == dtype
            assert np.array_equal(bias, lp.bias)
        assert encode_model([type(p)(c, b) for p, (c, b) in zip(params, layers)]) == data

    def test_header_bytes(self):
        data = encode_model(self._params(np.float64))
        assert data[:4] == b"SPGW"
        assert data[4:8] == (1).to_bytes(4, "little")

    def test_corruption(self):
        data = encode_model(self._params(np.float64))
        with pytest.raises(SidecarError, match="magic"):
            decode_model(b"XXXX" + data[4:])
        with pytest.raises(SidecarError, match="truncated"):
            decode_model(data[:-3])
        with pytest.raises(SidecarError, match="trailing"):
            decode_model(data + b"\x00")


class TestTraining:
    def test_outputs_and_conservation(self, tmp_path):
        result = run_training(synthetic(tmp_path))
        rows = read_rows(tmp_path / "metrics.csv")
        assert len(rows) == 2
        assert len({r["active_connections"] for r in rows}) == 1
        rounds = read_rows(tmp_path / "rounds.csv")
        assert result.final.rounds_done == len({r["step"] for r in rounds}) > 0
        for step in {r["step"] for r in rounds}:
            per_layer = [r for r in rounds if r["step"] == step]
            assert sum(int(r["grown"]) for r in per_layer) == sum(int(r["pruned"]) for r in per_layer)
        assert all(int(r["step"]) % 5 == 0 for r in rounds)
        layers = read_model(tmp_path / "model.bin")
        assert sum(len(c) for c, _ in layers) == int(rows[0]["active_connections"])

    def test_static_keeps_topology(self, tmp_path):
        cfg = synthetic(tmp_path, strategy="static")
        result = run_training(cfg)
        assert result.final.rounds_done == 0
        model = preset(cfg.model)
        initial = sparse_connection_sets(model, cfg.sparsity, np.random.default_rng(cfg.seed))
        final = read_model(tmp_path / "model.bin")
        assert all(np.array_equal(a.keys, b.keys) for a, (b, _) in zip(initial, final))

    @pytest.mark.parametrize("strategy", ["gse_graest", "rigl_dense", "set_random"])
    def test_deterministic_bytes(self, tmp_path, strategy):
        cfg = synthetic(tmp_path, strategy=strategy)
        run_training(cfg, tmp_path / "a")
        run_training(cfg, tmp_path / "b")
        for name in ("metrics.csv", "rounds.csv", "model.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_learns(self, tmp_path):
        result = run_training(synthetic(tmp_path, epochs=4))
        assert result.final.test_acc > 0.6

    def test_cnn_on_cifar_binary(self, tmp_path):
        rng = np.random.default_rng(0)
        for name in [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]:
            records = np.hstack([rng.integers(0, 10, (8, 1)), rng.integers(0, 256, (8, 3072))]).astype(np.uint8)
            (tmp_path / name).write_bytes(records.tobytes())
        cfg = ExperimentConfig(dataset="cifar10", data_dir=str(tmp_path), model="cnn", strategy="gse_graest",
                               sparsity=0.9, seed=0, epochs=1, batch_size=8, T=2, augment=True)
        result = run_training(cfg, tmp_path / "out")
        rounds = read_rows(tmp_path / "out" / "rounds.csv")
        assert result.final.rounds_done == 1  # 5 steps, last round by step 3
        assert {r["layer"] for r in rounds} == {"0", "1", "2"}
        assert result.final.active_connections == sum(len(c) for c, _ in read_model(tmp_path / "out" / "model.bin"))

    @pytest.mark.skipif(not MNIST_SUBSET.exists(), reason="bundled digits not present")
    def test_mnist_beats_chance_and_static(self, tmp_path):
        cfg = load_config(ROOT / "configs" / "mnist_gse.cfg", env={}).with_overrides(epochs=3)
        gse = run_training(cfg, tmp_path / "gse").final.test_acc
        static = run_training(cfg.with_overrides(strategy="static"), tmp_path / "static").final.test_acc
        assert gse > 0.5 and gse > static


class TestSweep:
    def test_rejects_single_gamma(self, tmp_path):
        with pytest.raises(ValueError):
            run_gamma_sweep(synthetic(tmp_path), [1.0])

    def test_rows(self, tmp_path):
        results = run_gamma_sweep(synthetic(tmp_path, epochs=1), [0.5, 1.0], seeds=[0, 1])
        assert len(read_rows(tmp_path / "sweep.csv")) == 4
        summary = read_rows(tmp_path / "summary.csv")
        assert [r["gamma"] for r in summary] == ["0.5", "1"]
        assert float(summary[0]["mean_test_acc"]) == pytest.approx(np.mean(results[0.5]), abs=1e-6)


class TestFlopsReport:
    def test_rows(self, tmp_path):
        run_flops_report(synthetic(tmp_path), sparsities=[0.95, 0.99])
        rows = read_rows(tmp_path / "flops.csv")
        gse = {(r["model"], r["sparsity"]): float(r["ratio_vs_rigl"]) for r in rows if r["strategy"] == "gse_uniform"}
        assert gse[("resnet50", "0.99")] < gse[("resnet50", "0.95")]
        assert gse[("mlp:20-16-4", "0.99")] < gse[("mlp:20-16-4", "0.95")]
        assert all(float(r["overhead_fraction"]) == 0 for r in rows if r["strategy"] == "set_random")


class TestCli:
    def _write(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return str(path)

    def test_train(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "dataset = synthetic\nmodel = mlp:20-16-4\nstrategy = gse_grabo\n"
                                    "sparsity = 0.8\nseed = 1\nepochs = 1\nT = 3\nsynthetic_size = 200\n"
                                    "output_dir = out\n")
        assert main(["train", cfg]) == 0
        assert (tmp_path / "out" / "metrics.csv").exists()
        assert "test_acc" in capsys.readouterr().out

    def test_missing_data(self, tmp_path):
        cfg = self._write(tmp_path, "dataset = mnist\ndata_dir = nowhere\nstrategy = static\nsparsity = 0.9\nseed = 0\n")
        assert main(["train", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_infeasible_sparsity(self, tmp_path):
        cfg = self._write(tmp_path, "dataset = synthetic\nmodel = mlp:4-3-2\nstrategy = static\n"
                                    "sparsity = 0.99\nseed = 0\n")
        assert main(["train", cfg, "--out", str(tmp_path / "o")]) == 3

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numeric_failure(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "dataset = synthetic\nmodel = mlp:20-16-4\nstrategy = static\n"
                                    "sparsity = 0.5\nseed = 0\nlr = 1e12\nepochs = 3\nsynthetic_size = 256\n")
        assert main(["train", cfg, "--out", str(tmp_path / "o")]) == 4
        assert "non-finite loss" in capsys.readouterr().err

    def test_config_error(self, tmp_path):
        assert main(["train", self._write(tmp_path, "gamm = 1\n")]) == 1

    def test_flops(self, tmp_path, capsys):
        cfg = self._write(tmp_path, MINIMAL + "model = mlp:20-16-4\nsynthetic_size = 100\n")
        assert main(["flops", cfg, "--sparsities", "0.9", "0.99", "--out", str(tmp_path)]) == 0
        assert "resnet50,0.99,gse_uniform" in capsys.readouterr().out

    def test_bench(self, tmp_path):
        assert main(["bench", "--sizes", "64", "--sparsities", "0.5", "0.9", "--repeats", "3",
                     "--out", str(tmp_path)]) == 0
        assert len(read_rows(tmp_path / "bench.csv")) == 6
        assert (tmp_path / "crossover.csv").exists()

    def test_flops_without_data(self, tmp_path):
        cfg = self._write(tmp_path, "dataset = mnist\ndata_dir = nowhere\nstrategy = gse_grabo\nsparsity = 0.9\nseed = 0\n")
        assert main(["flops", cfg, "--out", str(tmp_path)]) == 0
        assert len(read_rows(tmp_path / "flops.csv")) == 2 * 4 * 4
