"""End-to-end experiments: split, threshold, search, evaluate, report.

One experiment runs a Baseline condition (no thresholding) plus one
condition per percentile. Each condition writes into its own directory::

    <out>/<condition>/report.json     classification report on the test split
                      selector.json   fitted threshold (absent for baseline)
                      trials.jsonl    one search trial per line
                      model.json      best trained head
                      history.csv     per-epoch history of the best trial
                      table.md        architecture and metric tables

and ``<out>/comparison.md`` / ``<out>/summary.json`` across conditions.
"""

import io
import json
import logging
import os
import tempfile
import zlib
from dataclasses import dataclass, field, fields
from importlib import resources

import jsonschema
import numpy as np

from . import avt, metrics, nas, nnet
from .data import read_feature_csv
from .errors import ConfigError, DataError
from .rng import SplitMix64, derive_seed

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
PRESET_NAMES = {1.5: ("low", "Low AVT"), 50.0: ("mid", "Mid AVT"), 98.5: ("high", "High AVT")}


# --- patient-wise splitting ------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    fractions: tuple
    seed: int
    assignment: dict  # patient_id -> "train" | "val" | "test"

    def indices(self, data):
        """Row indices of ``data`` per split, in original row order."""
        out = {name: [] for name in SPLITS}
        for i, pid in enumerate(data.patient_ids):
            out[self.assignment[pid]].append(i)
        return {k: np.array(v, dtype=np.int64) for k, v in out.items()}

    def apply(self, data):
        idx = self.indices(data)
        return tuple(data.rows(idx[name]) for name in SPLITS)

    def to_dict(self):
        return {"fractions": list(self.fractions), "seed": self.seed, "assignment": dict(sorted(self.assignment.items()))}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["fractions"]), int(d["seed"]), dict(d["assignment"]))


def _check_fractions(fractions):
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    return fractions


def patient_split(data, fractions=DEFAULT_FRACTIONS, seed=0):
    """Assign whole patients to train/val/test, stratified by label.

    Patients are shuffled with the seed; the first three seed one split
    each. Every remaining patient goes to the split furthest below its
    target sample count for the patient's majority label, then furthest
    below its overall target, then the earlier split.
    """
    fractions = _check_fractions(fractions)
    patients = sorted(set(data.patient_ids))
    if len(patients) < len(SPLITS):
        raise DataError(f"need at least {len(SPLITS)} distinct patients, got {len(patients)}")
    sizes, label_counts = {}, {}
    for pid, label in zip(data.patient_ids, data.labels):
        sizes[pid] = sizes.get(pid, 0) + 1
        counts = label_counts.setdefault(pid, {})
        counts[int(label)] = counts.get(int(label), 0) + 1
    majority = {pid: min(c, key=lambda lab: (-c[lab], lab)) for pid, c in label_counts.items()}
    class_totals = {}
    for pid in patients:
        class_totals[majority[pid]] = class_totals.get(majority[pid], 0) + sizes[pid]

    order = [patients[i] for i in SplitMix64(seed).permutation(len(patients))]
    filled = [0, 0, 0]
    class_filled = {c: [0, 0, 0] for c in class_totals}
    assignment = {}
    for rank, pid in enumerate(order):
        c = majority[pid]
        if rank < len(SPLITS):
            k = rank
        else:
            def key(s):
                class_gap = fractions[s] * class_totals[c] - class_filled[c][s]
                total_gap = fractions[s] * data.n_samples - filled[s]
                return (class_gap, total_gap, -s)

            k = max(range(3), key=key)
        assignment[pid] = SPLITS[k]
        filled[k] += sizes[pid]
        class_filled[c][k] += sizes[pid]
    return SplitPlan(fractions, int(seed), assignment)


# --- configuration ---------------------------------------------------------


def config_schema():
    return json.loads(resources.files("headsmith").joinpath("config.schema.json").read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ExperimentConfig:
    feature_csv: str
    out_dir: str = "runs"
    percentiles: tuple = (1.5, 50.0, 98.5)
    baseline: bool = True
    max_trials: int = 55
    max_epochs: int = 25
    seed: int = 0
    parallel: int = 1
    fractions: tuple = DEFAULT_FRACTIONS
    average: str = "macro"
    variance_ddof: int = 0
    strict: bool = False
    batch_size: int = 32
    patience: int = 5
    search_space: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "percentiles", tuple(float(p) for p in self.percentiles))
        object.__setattr__(self, "fractions", _check_fractions(self.fractions))
        ps = self.percentiles
        if any(not 0 <= p <= 100 for p in ps) or any(b <= a for a, b in zip(ps, ps[1:])):
            raise ConfigError("percentiles must lie in [0, 100] and be strictly increasing")
        if not ps and not self.baseline:
            raise ConfigError("no conditions to run")
        if self.max_trials < 1 or self.max_epochs < 0 or self.parallel < 1:
            raise ConfigError("need max_trials >= 1, max_epochs >= 0, parallel >= 1")
        if self.average not in ("macro", "weighted"):
            raise ConfigError("average must be 'macro' or 'weighted'")
        if self.variance_ddof not in (0, 1):
            raise ConfigError("variance_ddof must be 0 or 1")

    @classmethod
    def from_dict(cls, doc, **overrides):
        try:
            jsonschema.validate(doc, config_schema())
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message}") from None
        merged = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in merged.items() if k in known})

    @classmethod
    def load(cls, path, **overrides):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls.from_dict(doc, **overrides)
        if not os.path.isabs(cfg.feature_csv):
            base = os.path.dirname(os.path.abspath(path))
            object.__setattr__(cfg, "feature_csv", os.path.join(base, cfg.feature_csv))
        return cfg


@dataclass(frozen=True)
class Condition:
    key: str  # directory name
    label: str  # table column header
    percentile: float | None


def conditions_for(config):
    out = [Condition("baseline", "Baseline", None)] if config.baseline else []
    for p in config.percentiles:
        key, label = PRESET_NAMES.get(p, (f"p{p:g}", f"AVT p={p:g}"))
        out.append(Condition(key, label, p))
    return out


# --- running ----------------------------------------------------------------


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj):
    return json.dumps(obj, indent=1) + "\n"


def infer_num_classes(train, *others):
    present = set(int(v) for v in np.unique(train.labels))
    k = max(present) + 1
    missing = sorted(set(range(k)) - present)
    if missing:
        raise DataError(f"classes {missing} are absent from the training split")
    for other in others:
        if other.n_samples and other.labels.max() >= k:
            raise DataError("a held-out split contains labels never seen in training")
    if k < 2:
        raise DataError("training split holds a single class")
    return k


def evaluate(model, data, num_classes, average="macro"):
    preds = nnet.predict(model, data.values)
    return metrics.classification_report(data.labels, preds, num_classes, average, dimensionality=data.width)


@dataclass
class ConditionResult:
    condition: Condition
    report: metrics.ClassificationReport | None = None
    search: nas.SearchResult | None = None
    selector: avt.VarianceSelector | None = None
    error: str | None = None


def run_condition(condition, splits, config, out_dir):
    """Threshold, search and evaluate one condition; writes its directory."""
    train, val, test = splits
    k = infer_num_classes(train, val, test)
    seed = derive_seed(config.seed, zlib.crc32(condition.key.encode()))
    selector = None
    if condition.percentile is not None:
        selector = avt.fit(train, condition.percentile, ddof=config.variance_ddof, strict=config.strict)
        train, val, test = (avt.transform(selector, s) for s in (train, val, test))
    base = nnet.TrainConfig(batch_size=config.batch_size, patience=config.patience)
    space = nas.SearchSpace.from_dict(config.search_space) if config.search_space else nas.SearchSpace()
    result = nas.search(
        train, val, space,
        max_trials=config.max_trials, max_epochs=config.max_epochs, seed=seed,
        parallel=config.parallel, base_config=base,
    )
    report = evaluate(result.best_model, test, k, config.average)
    history = result.best_history

    os.makedirs(out_dir, exist_ok=True)
    atomic_write(os.path.join(out_dir, "report.json"), _dump({"condition": condition.label, "percentile": condition.percentile, **report.to_dict()}))
    if selector is not None:
        atomic_write(os.path.join(out_dir, "selector.json"), _dump(selector.to_dict()))
    atomic_write(os.path.join(out_dir, "trials.jsonl"), "".join(json.dumps(t.to_dict()) + "\n" for t in result.trials))
    atomic_write(os.path.join(out_dir, "model.json"), json.dumps(result.best_model.to_dict()) + "\n")
    buf = io.StringIO()
    buf.write("epoch,train_loss,val_accuracy\n")
    for rec in history:
        buf.write(f"{rec.epoch},{rec.train_loss!r},{rec.val_accuracy!r}\n")
    atomic_write(os.path.join(out_dir, "history.csv"), buf.getvalue())
    table = (
        f"# {condition.label}\n\n## Architecture (trial {result.best_trial_index})\n\n"
        + nas.export_architecture(result)
        + "\n## Test metrics\n\n"
        + render_comparison({condition.label: report})
    )
    atomic_write(os.path.join(out_dir, "table.md"), table)
    return ConditionResult(condition, report, result, selector)


def run_experiment(config, only=None):
    """Run every condition of ``config`` (or those whose key is in ``only``).

    A failing condition is recorded in its ``error.json`` and in the summary
    without stopping the others.
    """
    data = read_feature_csv(config.feature_csv)
    plan = patient_split(data, config.fractions, config.seed)
    splits = plan.apply(data)
    os.makedirs(config.out_dir, exist_ok=True)
    atomic_write(os.path.join(config.out_dir, "split.json"), _dump(plan.to_dict()))
    results = []
    for cond in conditions_for(config):
        if only is not None and cond.key not in only:
            continue
        cond_dir = os.path.join(config.out_dir, cond.key)
        logger.info("condition %s", cond.label)
        try:
            results.append(run_condition(cond, splits, config, cond_dir))
            err_path = os.path.join(cond_dir, "error.json")
            if os.path.exists(err_path):
                os.unlink(err_path)
        except Exception as exc:  # noqa: BLE001 - isolate conditions
            logger.error("condition %s failed: %s", cond.label, exc)
            os.makedirs(cond_dir, exist_ok=True)
            msg = f"{type(exc).__name__}: {exc}"
            atomic_write(os.path.join(cond_dir, "error.json"), _dump({"condition": cond.label, "error": msg}))
            results.append(ConditionResult(cond, error=msg))
    reports = {r.condition.label: r.report for r in results if r.report is not None}
    if reports:
        atomic_write(os.path.join(config.out_dir, "comparison.md"), render_comparison(reports))
    summary = {
        "conditions": [
            {
                "key": r.condition.key,
                "label": r.condition.label,
                "percentile": r.condition.percentile,
                "dimensionality": r.report.dimensionality if r.report else None,
                "accuracy": r.report.accuracy if r.report else None,
                "error": r.error,
            }
            for r in results
        ]
    }
    atomic_write(os.path.join(config.out_dir, "summary.json"), _dump(summary))
    return results


# --- rendering --------------------------------------------------------------


def _pct(x):
    return "n/a" if x is None else f"{100.0 * x:.2f}%"


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def render_comparison(reports):
    """Markdown tables comparing reports across conditions.

    ``reports`` maps a column label to a ClassificationReport. One report
    gives a two-column Metric/Value table; several give one column each.
    A per-class recall table follows.
    """
    if not reports:
        raise ValueError("need at least one report")
    labels = list(reports)
    reps = [reports[k] for k in labels]
    metric_rows = [
        ("Dimensionality", lambda r: "n/a" if r.dimensionality is None else str(r.dimensionality)),
        ("Accuracy", lambda r: _pct(r.accuracy)),
        ("Precision", lambda r: _pct(r.precision)),
        ("Recall", lambda r: _pct(r.recall)),
        ("F1-score", lambda r: _pct(r.f1)),
    ]
    header = ["Metric", "Value"] if len(reps) == 1 else [""] + labels
    out = _md_table(header, [[name] + [fn(r) for r in reps] for name, fn in metric_rows])
    k = max(r.confusion.num_classes for r in reps)
    recall_rows = []
    tables = [metrics.recall_table(r.confusion) for r in reps]
    for c in range(k):
        recall_rows.append([str(c)] + [_pct(t[c] if c < len(t) else None) for t in tables])
    rheader = ["Class", "Recall"] if len(reps) == 1 else ["Class"] + labels
    return out + "\n" + _md_table(rheader, recall_rows)
