"""Flat typed ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Values are typed by key:
integers, reals, booleans (``true``/``false``) or strings.  Unknown keys
are rejected so that a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import os
from dataclasses import MISSING, dataclass, fields, replace
from pathlib import Path

from ..dst_engine import STRATEGIES
from ..nn_engine import preset

SEED_ENV = "SPARSEGROW_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    strategy: str
    sparsity: float
    seed: int
    data_dir: str = ""
    model: str = "mlp"
    assignment: str = "erdos_renyi"
    epochs: int = 5
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_drop_epochs: str = "auto"
    lr_drop_factor: float = 0.1
    label_smoothing: float = 0.0
    T: int = 1000
    T_end: int = 0
    alpha: float = 0.2
    gamma: float = 1.0
    augment: bool = False
    dtype: str = "float32"
    synthetic_size: int = 2000
    output_dir: str = "runs/experiment"
    flops_sparsities: str = "0.9,0.95,0.98,0.99"

    def __post_init__(self):
        checks = [
            (self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}"),
            (self.dataset in ("mnist", "cifar10", "cifar100", "synthetic"), "unknown dataset"),
            (self.assignment in ("erdos_renyi", "uniform"), "assignment must be erdos_renyi or uniform"),
            (0.0 <= self.sparsity < 1.0, "sparsity must lie in [0, 1)"),
            (self.gamma > 0, "gamma must be > 0"),
            (0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)"),
            (self.T >= 1, "T must be >= 1"),
            (self.T_end >= 0, "T_end must be >= 0 (0 selects the default)"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.lr > 0, "lr must be > 0"),
            (0.0 <= self.momentum < 1.0, "momentum must lie in [0, 1)"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (0.0 <= self.label_smoothing < 1.0, "label_smoothing must lie in [0, 1)"),
            (self.dtype in ("float32", "float64"), "dtype must be float32 or float64"),
            (self.synthetic_size >= 2, "synthetic_size must be >= 2"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            preset(self.model)
        except ValueError as err:
            raise ConfigError(f"model: {err}") from None
        self.drop_epochs()
        self.sparsity_list()

    def drop_epochs(self) -> tuple[float, ...]:
        """Epochs (possibly fractional) at which the learning rate drops."""
        if self.lr_drop_epochs == "auto":
            return (0.4 * self.epochs, 0.6 * self.epochs)
        if not self.lr_drop_epochs.strip():
            return ()
        try:
            return tuple(sorted(float(v) for v in self.lr_drop_epochs.split(",")))
        except ValueError:
            raise ConfigError(f"lr_drop_epochs must be 'auto' or comma-separated numbers, got {self.lr_drop_epochs!r}")

    def sparsity_list(self) -> tuple[float, ...]:
        try:
            return tuple(float(v) for v in self.flops_sparsities.split(","))
        except ValueError:
            raise ConfigError(f"flops_sparsities must be comma-separated numbers, got {self.flops_sparsities!r}")

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_REQUIRED = [f.name for f in fields(ExperimentConfig) if f.default is MISSING]


def _convert(kind, raw, key, lineno):
    where = f"line {lineno}: {key}"
    if kind in ("bool", bool):
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"{where}: expected true or false, got {raw!r}")
    if kind in ("int", int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None
    if kind in ("float", float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") from None
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    return raw


def parse_config(text: str, env=None, base_dir=None) -> ExperimentConfig:
    """Parse config text.

    ``env`` (default: ``os.environ``) may carry ``SPARSEGROW_SEED``, which
    beats the seed in the file.  A relative ``data_dir``/``output_dir`` is
    resolved against ``base_dir`` when given.
    """
    env = os.environ if env is None else env
    values = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(_FIELDS[key].type, raw, key, lineno)
        lines[key] = lineno
    if env.get(SEED_ENV) not in (None, ""):
        values["seed"] = _convert(int, env[SEED_ENV], SEED_ENV, 0)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    if base_dir is not None:
        for key in ("data_dir", "output_dir"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(Path(base_dir) / values[key])
    try:
        return ExperimentConfig(**values)
    except ConfigError as err:
        key = str(err).split()[0].rstrip(":")
        if key in lines:
            raise ConfigError(f"line {lines[key]}: {err}") from None
        raise


def load_config(path, env=None) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), env=env, base_dir=path.parent)


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(config, name)
        lines.append(f"{name} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"
