"""Budgeted architecture search over dense classifier heads.

Candidates are drawn from a small grammar::

    input -> encoding -> [normalization] -> block{1..3} -> dense(K) -> softmax
    block := dense(units) -> [batch_norm] -> relu -> [dropout(rate)]

Every trial derives its own seed from the search seed and its index, so
the result does not depend on whether trials run serially or in a pool.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import nnet
from .errors import ConfigError, DataError, ShapeError
from .nnet import ArchitectureSpec, LayerSpec, TrainConfig
from .rng import SplitMix64, derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchSpace:
    use_normalization: tuple = (True, False)
    num_blocks: tuple = (1, 2, 3)
    units: tuple = (16, 32, 64, 128, 256, 512, 1024)
    use_batch_norm: tuple = (True, False)
    dropout_rate: tuple = (0.0, 0.25, 0.5)
    learning_rate: tuple = (1e-2, 1e-3, 1e-4)

    def __post_init__(self):
        for name in ("use_normalization", "num_blocks", "units", "use_batch_norm", "dropout_rate", "learning_rate"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"search space dimension {name} is empty")

    def to_dict(self):
        return {k: list(v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class Candidate:
    spec: ArchitectureSpec
    learning_rate: float


def random_strategy(space, input_width, num_classes, rng, trials=()):
    """Uniform draw over the grammar; ignores previous trials."""
    hidden = []
    normalization = rng.choice(space.use_normalization)
    for _ in range(rng.choice(space.num_blocks)):
        hidden.append(nnet.dense(rng.choice(space.units)))
        if rng.choice(space.use_batch_norm):
            hidden.append(LayerSpec(nnet.BATCH_NORM))
        hidden.append(LayerSpec(nnet.RELU))
        rate = rng.choice(space.dropout_rate)
        if rate > 0:
            hidden.append(nnet.dropout(rate))
    lr = rng.choice(space.learning_rate)
    spec = ArchitectureSpec.build(input_width, num_classes, hidden, normalization=normalization)
    return Candidate(spec, lr)


STRATEGIES = {"random": random_strategy}


def sample_architecture(space, input_width, num_classes, rng):
    if input_width < 1 or num_classes < 2:
        raise ConfigError("need input_width >= 1 and num_classes >= 2")
    return random_strategy(space, input_width, num_classes, rng).spec


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    architecture: ArchitectureSpec
    config: TrainConfig
    seed: int
    val_accuracy: float
    epochs_run: int
    wall_time: float

    def to_dict(self):
        return {
            "trial_index": self.trial_index,
            "architecture": self.architecture.to_dict(),
            "config": self.config.to_dict(),
            "seed": self.seed,
            "val_accuracy": self.val_accuracy,
            "epochs_run": self.epochs_run,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["trial_index"], ArchitectureSpec.from_dict(d["architecture"]), TrainConfig.from_dict(d["config"]),
            d["seed"], d["val_accuracy"], d["epochs_run"], d["wall_time"],
        )


@dataclass(frozen=True, eq=False)
class SearchResult:
    trials: tuple
    best_trial_index: int
    best_model: nnet.TrainedModel
    best_history: tuple = ()

    @property
    def best(self):
        return self.trials[self.best_trial_index]


def select_best(trials):
    """Index of the highest val_accuracy, lowest trial_index on ties."""
    if not trials:
        raise ValueError("no trials to select from")
    best = min(trials, key=lambda t: (-t.val_accuracy, t.trial_index))
    return best.trial_index


def _run_trial(index, train, val, space, seed, base_config, max_epochs, strategy, train_fn):
    trial_seed = derive_seed(seed, index)
    candidate = strategy(space, train.width, _num_classes(train, val), SplitMix64(derive_seed(trial_seed, 0)))
    config = replace(base_config, max_epochs=max_epochs, learning_rate=candidate.learning_rate)
    train_seed = derive_seed(trial_seed, 1)
    t0 = time.perf_counter()
    model, history = train_fn(candidate.spec, train, val, config, train_seed)
    elapsed = time.perf_counter() - t0
    val_acc = max(h.val_accuracy for h in history) if history else _val_accuracy(model, val)
    record = TrialRecord(index, candidate.spec, config, train_seed, float(val_acc), len(history), elapsed)
    logger.info("trial %d: val_accuracy=%.4f epochs=%d (%.2fs)", index, val_acc, len(history), elapsed)
    return record, model, history


def _val_accuracy(model, val):
    return float(np.mean(nnet.predict(model, val.values) == val.labels))


def _num_classes(train, val):
    return int(max(train.labels.max(), val.labels.max())) + 1


def search(
    train,
    val,
    space=None,
    max_trials=55,
    max_epochs=25,
    seed=0,
    parallel=1,
    base_config=None,
    strategy="random",
    search_patience=None,
    train_fn=None,
    log_path=None,
):
    """Run up to ``max_trials`` trials and keep the best model by validation accuracy.

    ``search_patience`` stops after that many consecutive non-improving
    trials (off by default; forces serial execution). ``train_fn`` defaults
    to :func:`headsmith.nnet.train` and exists for instrumentation.
    """
    space = space or SearchSpace()
    base_config = base_config or TrainConfig()
    train_fn = train_fn or nnet.train
    if isinstance(strategy, str):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown search strategy {strategy!r}")
        strategy = STRATEGIES[strategy]
    if max_trials < 1:
        raise ConfigError("max_trials must be >= 1")
    if max_epochs < 0:
        raise ConfigError("max_epochs must be >= 0")
    if train.n_samples == 0 or val.n_samples == 0:
        raise DataError("train and validation splits must be non-empty")
    if train.width != val.width:
        raise ShapeError(f"train width {train.width} != validation width {val.width}")
    if _num_classes(train, val) < 2:
        raise DataError("need at least two classes")
    if not set(np.unique(val.labels)) <= set(np.unique(train.labels)):
        raise DataError("validation split has labels absent from the training split")

    args = (train, val, space, seed, base_config, max_epochs, strategy, train_fn)
    trials = []
    best_model = best_history = None
    best_acc, since = -1.0, 0
    serial = search_patience is not None or parallel <= 1
    pool = None if serial else ThreadPoolExecutor(max_workers=parallel)
    try:
        if serial:
            outcomes = (_run_trial(i, *args) for i in range(max_trials))
        else:
            outcomes = pool.map(lambda i: _run_trial(i, *args), range(max_trials))
        # outcomes arrive in trial order, so strict ">" keeps the lowest index on ties
        for record, model, history in outcomes:
            trials.append(record)
            if record.val_accuracy > best_acc:
                best_acc, best_model, best_history, since = record.val_accuracy, model, history, 0
            else:
                since += 1
                if search_patience is not None and since >= search_patience:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    trials = tuple(trials)
    best = select_best(trials)
    if log_path is not None:
        write_search_log(trials, log_path)
    return SearchResult(trials, best, best_model, tuple(best_history))


def write_search_log(trials, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_dict()) + "\n")


def read_search_log(path):
    with open(path, encoding="utf-8") as fh:
        return [TrialRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def architecture_rows(spec):
    """(layer name, output width, parameter count) per layer."""
    per_layer, _ = nnet.param_count(spec)
    return [
        (nnet.DISPLAY_NAMES[layer.kind], w_out, count)
        for layer, (_, w_out), count in zip(spec.layers, spec.widths(), per_layer)
    ]


def export_architecture(result_or_spec):
    """Three-column text table (Layer Type / Output Shape / Parameter Count).

    Accepts a SearchResult (its best architecture) or an ArchitectureSpec.
    Parameter-free layers show ``-``; the last line totals the column.
    """
    spec = result_or_spec.best.architecture if isinstance(result_or_spec, SearchResult) else result_or_spec
    rows = architecture_rows(spec)
    header = ("Layer Type", "Output Shape", "Parameter Count")
    cells = [(name, str(w), str(c) if c else "-") for name, w, c in rows]
    total = sum(c for _, _, c in rows)
    widths = [max(len(r[i]) for r in cells + [header]) for i in range(3)]
    fmt = lambda r: "| " + " | ".join(s.ljust(w) for s, w in zip(r, widths)) + " |"  # noqa: E731
    lines = [fmt(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines += [fmt(r) for r in cells]
    lines.append(f"\nTotal parameters: {total}")
    return "\n".join(lines) + "\n"


def result_to_dict(result):
    best = result.best
    return {
        "best_trial_index": result.best_trial_index,
        "val_accuracy": best.val_accuracy,
        "architecture": best.architecture.to_dict(),
        "config": best.config.to_dict(),
        "n_trials": len(result.trials),
        "table": export_architecture(result),
    }
