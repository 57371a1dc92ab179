"""Single-document JSON experiment configuration.

Every section is optional and falls back to the defaults below. Unknown
keys anywhere are rejected. One top-level ``seed`` drives every random
component: network init and training shuffles use ``seed``, pruning
fine-tunes use ``seed + 1``, Monte Carlo and BMA draws use ``seed``.
Relative dataset paths resolve against ``$PHASEPRUNE_DATA_DIR`` when it is set.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import BmaConfig, Dataset, mnist_dataset, split, synth_dataset
from .network import TrainConfig
from .pruning import ThresholdRule
from .uncertainty import MODES

DATA_DIR_ENV = "PHASEPRUNE_DATA_DIR"


class ConfigError(ValueError):
    pass


class DataError(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetSection:
    kind: str = "synthetic"
    classes: int = 10
    per_class: int = 60
    dim: int = 8
    noise: float = 0.3
    seed: int = 3
    test_fraction: float = 0.25
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    limit: int | None = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "mnist"):
            raise ConfigError(f"dataset.kind must be 'synthetic' or 'mnist', got {self.kind!r}")
        if self.kind == "mnist" and not (self.train_images and self.train_labels):
            raise ConfigError("mnist dataset needs train_images and train_labels")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError("dataset.test_fraction must be in [0, 1)")


@dataclass(frozen=True)
class ModelSection:
    dims: tuple[int, ...] = (8, 16, 10)
    class_count: int = 10
    bias: float = -0.1


@dataclass(frozen=True)
class TrainSection:
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 16
    shuffle: bool = True
    momentum: float = 0.0
    train_sigma: bool = True
    train_bias: bool = False

    def build(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **{f.name: getattr(self, f.name) for f in fields(self)})


@dataclass(frozen=True)
class ThresholdSection:
    signed: bool = False  # std of signed phases instead of magnitudes
    ddof: int = 0  # 0: population std, 1: sample std

    def build(self) -> ThresholdRule:
        return ThresholdRule(self.signed, self.ddof)


@dataclass(frozen=True)
class OneShotSection:
    alphas: tuple[float, ...] = (1.0, 1.5, 2.0)
    acc_min: float | None = None
    acc_drop: float = 0.05
    finetune: TrainSection = field(default_factory=lambda: TrainSection(epochs=5))


@dataclass(frozen=True)
class IterativeSection:
    delta_alpha: float = 0.25
    alpha0: float | None = None
    acc_min: float | None = None
    acc_drop: float = 0.05
    max_iters: int = 40
    finetune: TrainSection = field(default_factory=lambda: TrainSection(epochs=5))


@dataclass(frozen=True)
class UncertaintySection:
    sigmas: tuple[float, ...] = (0.0, 0.02, 0.05, 0.1, 0.2)
    iterations: int = 1000
    modes: tuple[str, ...] = MODES

    def __post_init__(self):
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown uncertainty modes {bad}")


@dataclass(frozen=True)
class BmaSection:
    dims: tuple[int, ...] = (8, 16, 32)
    samples_per_dim: int = 1000
    sw_range: tuple[float, float] = (80.0, 100.0)
    zero_tol: float = 1e-10

    def build(self, seed: int) -> BmaConfig:
        return BmaConfig(tuple(self.dims), self.samples_per_dim, tuple(self.sw_range), self.zero_tol, seed)


@dataclass(frozen=True)
class ReportSection:
    histogram_bins: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    oneshot: OneShotSection = field(default_factory=OneShotSection)
    iterative: IterativeSection = field(default_factory=IterativeSection)
    threshold: ThresholdSection = field(default_factory=ThresholdSection)
    uncertainty: UncertaintySection = field(default_factory=UncertaintySection)
    bma: BmaSection = field(default_factory=BmaSection)
    report: ReportSection = field(default_factory=ReportSection)

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)


def _build(cls, doc, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in doc.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else known[name].default
        if hasattr(default, "__dataclass_fields__"):
            value = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}.{name}: expected a list")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(doc) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, doc, "config")
    # touch the derived configs so invalid values fail before any work starts
    try:
        cfg.train.build(cfg.seed)
        cfg.oneshot.finetune.build(cfg.seed)
        cfg.iterative.finetune.build(cfg.seed)
        cfg.bma.build(cfg.seed)
        cfg.threshold.build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.oneshot.alphas or min(cfg.oneshot.alphas) < 0:
        raise ConfigError("oneshot.alphas must be a non-empty list of values >= 0")
    if cfg.iterative.delta_alpha <= 0:
        raise ConfigError("iterative.delta_alpha must be > 0")
    if cfg.uncertainty.iterations < 1 or any(s < 0 for s in cfg.uncertainty.sigmas):
        raise ConfigError("uncertainty needs iterations >= 1 and sigmas >= 0")
    dims = cfg.model.dims
    if len(dims) < 2 or min(dims) < 1 or not 1 <= cfg.model.class_count <= dims[-1]:
        raise ConfigError(f"invalid model dims {dims} / class_count {cfg.model.class_count}")
    return cfg


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc)


def _resolve(p: str) -> Path:
    path = Path(p)
    base = os.environ.get(DATA_DIR_ENV)
    if not path.is_absolute() and base:
        path = Path(base) / path
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    return path


def load_datasets(section: DatasetSection) -> tuple[Dataset, Dataset]:
    """Return ``(train, test)``; the test split equals the train split when no test data is configured."""
    if section.kind == "synthetic":
        data = synth_dataset(section.classes, section.per_class, section.dim, section.seed, section.noise)
        if section.test_fraction == 0:
            return data, data
        return split(data, section.test_fraction, seed=section.seed)
    try:
        train = mnist_dataset(_resolve(section.train_images), _resolve(section.train_labels), section.limit)
        if section.test_images and section.test_labels:
            test = mnist_dataset(_resolve(section.test_images), _resolve(section.test_labels), section.limit)
        else:
            test = train
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return train, test
