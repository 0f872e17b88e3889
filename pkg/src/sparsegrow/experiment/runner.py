"""Training runs, gamma sweeps and FLOPs reports driven by an ``ExperimentConfig``.

One training step ``t`` (numbered from 1) either updates the weights with
SGD or, when ``t`` is a multiple of ``T`` not beyond ``T_end``, runs one
prune-grow round on the current batch's activations and gradients instead.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data_pipeline import (
    NORMALIZATION,
    AugmentationPolicy,
    Dataset,
    augment,
    batches,
    load_cifar,
    load_mnist,
    normalize,
    synthetic_classification,
)
from ..dst_engine import (
    GSE_STRATEGIES,
    GSE_UNIFORM,
    RESNET50,
    RIGL_DENSE,
    SET_RANDOM,
    STATIC,
    PruneGrowSchedule,
    flops_estimate,
    global_coordination,
    resnet50_schedule,
    sparse_connection_sets,
)
from ..nn_engine import OptimizerState, accuracy, backward, forward, init_params, preset, sgd_step
from .config import ExperimentConfig, format_config
from .sidecar import write_model

log = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "epoch", "step", "train_loss", "train_acc", "test_acc", "lr",
    "active_connections", "rounds_done", "mean_subset_size",
)
ROUNDS_COLUMNS = ("step", "alpha_t", "k", "layer", "subset_size", "grown", "pruned", "active")
RESNET50_STEPS = 32_000


class DataMissingError(FileNotFoundError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    step: int
    train_loss: float
    train_acc: float
    test_acc: float
    lr: float
    active_connections: int
    rounds_done: int
    mean_subset_size: float

    def row(self) -> list[str]:
        return [str(self.epoch), str(self.step), f"{self.train_loss:.6f}", f"{self.train_acc:.6f}",
                f"{self.test_acc:.6f}", f"{self.lr:.6g}", str(self.active_connections),
                str(self.rounds_done), f"{self.mean_subset_size:.2f}"]


@dataclass(frozen=True)
class TrainingResult:
    final: MetricsRecord
    history: list
    output_dir: Path


def load_datasets(config: ExperimentConfig, model=None):
    """Normalized ``(train, test)`` datasets for the config."""
    try:
        if config.dataset == "mnist":
            train, test = load_mnist(config.data_dir, "train"), load_mnist(config.data_dir, "test")
        elif config.dataset in ("cifar10", "cifar100"):
            train = load_cifar(config.data_dir, "train", config.dataset)
            test = load_cifar(config.data_dir, "test", config.dataset)
        else:
            model = model or preset(config.model)
            if len(model.input_shape) != 1:
                raise ValueError("synthetic data needs a feedforward model")
            rng = np.random.default_rng([config.seed, 7])
            dim, classes = model.input_shape[0], model.num_classes
            data = synthetic_classification(config.synthetic_size * 5 // 4, classes, rng, dim=dim)
            cut = config.synthetic_size
            return (Dataset(data.images[:cut], data.labels[:cut], "train", data.name, classes),
                    Dataset(data.images[cut:], data.labels[cut:], "test", data.name, classes))
    except FileNotFoundError as err:
        raise DataMissingError(str(err)) from None
    constants = NORMALIZATION[config.dataset]
    return normalize(train, constants), normalize(test, constants)


def training_plan(config: ExperimentConfig, n_train: int):
    """``(total_steps, drop_steps, T_end)`` for a dataset of ``n_train`` examples."""
    per_epoch = math.ceil(n_train / config.batch_size)
    total = per_epoch * config.epochs
    drops = tuple(int(round(e * per_epoch)) for e in config.drop_epochs())
    if config.T_end:
        t_end = config.T_end
    elif len(drops) >= 2:
        t_end = drops[1]
    else:
        t_end = int(round(0.6 * total))
    return total, drops, t_end


def build_schedule(config: ExperimentConfig, t_end: int) -> PruneGrowSchedule:
    # a run too short for one round still needs a valid schedule
    return PruneGrowSchedule(T=config.T, T_end=max(t_end, config.T), alpha=config.alpha, gamma=config.gamma)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def run_training(config: ExperimentConfig, output_dir=None) -> TrainingResult:
    """Train one model; writes ``metrics.csv``, ``rounds.csv``, ``model.bin`` and ``config.txt``."""
    dtype = np.dtype(config.dtype)
    model = preset(config.model, config.label_smoothing)
    train, test = load_datasets(config, model)
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    total, drops, t_end = training_plan(config, len(train))
    schedule = build_schedule(config, t_end)
    opt = OptimizerState(config.lr, config.momentum, config.weight_decay, drops, config.lr_drop_factor)

    rng = np.random.default_rng(config.seed)
    conns = sparse_connection_sets(model, config.sparsity, rng, config.assignment, dtype)
    params = init_params(model, conns, rng, dtype)
    total_active = sum(len(lp.conn) for lp in params)
    round_rng = np.random.default_rng([config.seed, 1])
    aug_rng = np.random.default_rng([config.seed, 2])
    policy = AugmentationPolicy() if config.augment else None
    fill = None
    if policy is not None:
        mean, std = (np.asarray(c) for c in NORMALIZATION[config.dataset])
        fill = -mean / std
    log.info("training %s/%s: %d steps, %d active connections, T=%d, T_end=%d",
             config.model, config.strategy, total, total_active, schedule.T, schedule.T_end)

    history, round_rows = [], []
    step = rounds = 0
    for epoch in range(config.epochs):
        loss_sum = correct = seen = 0.0
        subset_sizes = []
        for x, y in batches(train, config.batch_size, config.seed, epoch):
            step += 1
            if policy is not None:
                x = augment(x, policy, aug_rng, fill=fill)
            logits, cache = forward(model, params, x, dtype)
            grads = backward(model, params, cache, y)
            if not math.isfinite(grads.loss):
                largest = max(float(np.abs(lp.conn.weights).max(initial=0)) for lp in params)
                raise NumericError(
                    f"non-finite loss {grads.loss} at epoch {epoch} step {step}; "
                    f"lr={opt.lr_at(step)}, max |weight|={largest:.3e}"
                )
            loss_sum += grads.loss * len(y)
            correct += float(np.sum(np.argmax(logits, axis=0) == y))
            seen += len(y)
            if config.strategy != STATIC and schedule.is_update_step(step):
                views = [cache.layer_view(p) for p in range(len(params))]
                new, report = global_coordination(
                    [lp.conn for lp in params], views, schedule, config.strategy, step, round_rng
                )
                if sum(report.grown) != sum(report.pruned):
                    raise AssertionError(f"step {step}: grown {report.grown} != pruned {report.pruned}")
                for lp, conn in zip(params, new):
                    lp.conn = conn
                if sum(len(lp.conn) for lp in params) != total_active:
                    raise AssertionError(f"step {step}: active connection count changed")
                rounds += 1
                subset_sizes.append(sum(report.subset_sizes))
                for i, (s, g, p) in enumerate(zip(report.subset_sizes, report.grown, report.pruned)):
                    round_rows.append([step, f"{report.alpha_t:.6f}", report.k, i, s, g, p, len(params[i].conn)])
            else:
                sgd_step(params, grads, opt, step)
        record = MetricsRecord(
            epoch + 1, step, loss_sum / seen, correct / seen,
            accuracy(model, params, test.images, test.labels), opt.lr_at(step),
            sum(len(lp.conn) for lp in params), rounds,
            float(np.mean(subset_sizes)) if subset_sizes else 0.0,
        )
        history.append(record)
        log.info("epoch %d: loss %.4f train %.4f test %.4f", record.epoch, record.train_loss,
                 record.train_acc, record.test_acc)

    _write_csv(out / "metrics.csv", METRICS_COLUMNS, [r.row() for r in history])
    _write_csv(out / "rounds.csv", ROUNDS_COLUMNS, round_rows)
    write_model(out / "model.bin", params)
    (out / "config.txt").write_text(format_config(config))
    return TrainingResult(history[-1], history, out)


def run_gamma_sweep(config: ExperimentConfig, gammas, seeds=None, output_dir=None):
    """One run per ``(gamma, seed)``; writes ``sweep.csv`` and ``summary.csv``.

    Returns ``{gamma: [final test accuracy per seed]}``.
    """
    gammas = [float(g) for g in gammas]
    if len(gammas) < 2:
        raise ValueError("a gamma sweep needs at least two gammas")
    if any(g <= 0 for g in gammas):
        raise ValueError("gamma must be > 0")
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    out = Path(output_dir or config.output_dir)
    results, rows = {}, []
    for gamma in gammas:
        for seed in seeds:
            run_cfg = config.with_overrides(gamma=gamma, seed=seed)
            res = run_training(run_cfg, out / f"gamma_{gamma:g}_seed_{seed}")
            results.setdefault(gamma, []).append(res.final.test_acc)
            rows.append([f"{gamma:g}", seed, f"{res.final.test_acc:.6f}"])
    _write_csv(out / "sweep.csv", ("gamma", "seed", "test_acc"), rows)
    summary = [[f"{g:g}", len(a), f"{np.mean(a):.6f}", f"{np.percentile(a, 95):.6f}"] for g, a in results.items()]
    _write_csv(out / "summary.csv", ("gamma", "runs", "mean_test_acc", "p95_test_acc"), summary)
    return results


FLOPS_COLUMNS = ("model", "sparsity", "strategy", "train_flops", "inference_flops", "overhead_fraction",
                 "ratio_vs_rigl")


# training-split sizes of the full datasets, used when the files are absent
STANDARD_TRAIN_SIZES = {"mnist": 60_000, "cifar10": 50_000, "cifar100": 50_000}


def dataset_size(config: ExperimentConfig) -> int:
    if config.dataset == "synthetic":
        return config.synthetic_size
    try:
        train, _ = load_datasets(config)
    except DataMissingError:
        log.warning("%s not found under %r; assuming the standard %d training examples",
                    config.dataset, config.data_dir, STANDARD_TRAIN_SIZES[config.dataset])
        return STANDARD_TRAIN_SIZES[config.dataset]
    return len(train)


def flops_rows(name, layers, schedule, steps, sparsities, gse_strategy):
    rows = []
    for s in sparsities:
        rigl = flops_estimate(layers, RIGL_DENSE, schedule, s, steps)
        for strategy in (gse_strategy, RIGL_DENSE, SET_RANDOM, STATIC):
            est = flops_estimate(layers, strategy, schedule, s, steps)
            overhead = (est.train_flops - steps * est.base_step_flops) / est.train_flops
            rows.append([name, f"{s:g}", strategy, f"{est.train_flops:.6e}", f"{est.inference_flops:.6e}",
                         f"{overhead:.6e}", f"{est.train_flops / rigl.train_flops:.6f}"])
    return rows


def run_flops_report(config: ExperimentConfig, sparsities=None, output_dir=None, steps=None):
    """Analytic FLOPs for the configured model and the ResNet-50 table; writes ``flops.csv``."""
    sparsities = tuple(sparsities or config.sparsity_list())
    gse = config.strategy if config.strategy in GSE_STRATEGIES else GSE_UNIFORM
    model = preset(config.model)
    if steps is None:
        total, _, t_end = training_plan(config, dataset_size(config))
    else:
        total, _, t_end = training_plan(config.with_overrides(epochs=1), steps * config.batch_size)
    rows = flops_rows(config.model, model, build_schedule(config, t_end), total, sparsities, gse)
    rows += flops_rows("resnet50", RESNET50, resnet50_schedule(config.gamma, RESNET50_STEPS),
                       RESNET50_STEPS, sparsities, gse)
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "flops.csv", FLOPS_COLUMNS, rows)
    return rows
