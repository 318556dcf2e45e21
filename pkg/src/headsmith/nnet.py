"""A small feed-forward network engine for classifier heads.

Everything runs in float64 numpy. Layers are described by ``LayerSpec``
values and evaluated by per-kind forward/backward functions; a model's
mutable numbers live in one dict per layer (``None`` for parameter-free
layers). Training uses Adam on categorical cross-entropy and keeps the
weights from the epoch with the best validation accuracy.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .data import FeatureMatrix
from .errors import ConfigError, DataError, ShapeError
from .rng import SplitMix64

INPUT = "input"
ENCODING = "multi_category_encoding"
NORMALIZATION = "normalization"
DENSE = "dense"
RELU = "relu"
BATCH_NORM = "batch_norm"
DROPOUT = "dropout"
SOFTMAX = "softmax"

KINDS = (INPUT, ENCODING, NORMALIZATION, DENSE, RELU, BATCH_NORM, DROPOUT, SOFTMAX)
PREPROCESSING = (ENCODING, NORMALIZATION)

DISPLAY_NAMES = {
    INPUT: "Input Layer",
    ENCODING: "Multi Category Encoding",
    NORMALIZATION: "Normalization",
    DENSE: "Dense Layer",
    RELU: "ReLU Activation",
    BATCH_NORM: "Batch Normalization",
    DROPOUT: "Dropout",
    SOFTMAX: "Softmax Activation",
}

NORM_EPSILON = 1e-6
BN_EPSILON = 1e-3
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == DENSE:
            if not isinstance(self.units, (int, np.integer)) or self.units < 1:
                raise ConfigError(f"dense layer needs integer units >= 1, got {self.units!r}")
        elif self.units is not None:
            raise ConfigError(f"{self.kind} layer takes no units")
        if self.kind == DROPOUT:
            if self.rate is None or not 0.0 <= self.rate < 1.0:
                raise ConfigError(f"dropout rate must lie in [0, 1), got {self.rate!r}")
        elif self.rate is not None:
            raise ConfigError(f"{self.kind} layer takes no rate")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.units is not None:
            d["units"] = int(self.units)
        if self.rate is not None:
            d["rate"] = float(self.rate)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("units"), d.get("rate"))


def dense(units):
    return LayerSpec(DENSE, units=units)


def dropout(rate):
    return LayerSpec(DROPOUT, rate=rate)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Ordered layers from the input layer to ``dense(num_classes), softmax``."""

    layers: tuple
    input_width: int
    num_classes: int

    def __post_init__(self):
        layers = tuple(
            layer if isinstance(layer, LayerSpec) else LayerSpec(layer) for layer in self.layers
        )
        object.__setattr__(self, "layers", layers)
        if self.input_width < 1 or self.num_classes < 1:
            raise ConfigError("input_width and num_classes must be positive")
        if len(layers) < 3 or layers[0].kind != INPUT:
            raise ConfigError("architecture must start with an input layer")
        if layers[-1].kind != SOFTMAX or layers[-2] != dense(self.num_classes):
            raise ConfigError(f"architecture must end with dense({self.num_classes}) then softmax")
        seen_dense = False
        for i, layer in enumerate(layers):
            if i > 0 and layer.kind == INPUT:
                raise ConfigError("only the first layer may be an input layer")
            if i < len(layers) - 1 and layer.kind == SOFTMAX:
                raise ConfigError("softmax may only appear as the last layer")
            if layer.kind in PREPROCESSING and seen_dense:
                raise ConfigError(f"{layer.kind} must precede every dense layer")
            seen_dense = seen_dense or layer.kind == DENSE

    @classmethod
    def build(cls, input_width, num_classes, hidden, normalization=False, encoding=True):
        """Convenience constructor from the layer list between preprocessing and the head."""
        layers = [LayerSpec(INPUT)]
        if encoding:
            layers.append(LayerSpec(ENCODING))
        if normalization:
            layers.append(LayerSpec(NORMALIZATION))
        layers.extend(hidden)
        layers += [dense(num_classes), LayerSpec(SOFTMAX)]
        return cls(tuple(layers), input_width, num_classes)

    def widths(self):
        """(input width, output width) of every layer."""
        out = []
        w = self.input_width
        for layer in self.layers:
            w_out = layer.units if layer.kind == DENSE else w
            out.append((w, w_out))
            w = w_out
        return out

    def to_list(self):
        return [layer.to_dict() for layer in self.layers]

    def to_dict(self):
        return {"input_width": self.input_width, "num_classes": self.num_classes, "layers": self.to_list()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(LayerSpec.from_dict(x) for x in d["layers"]), int(d["input_width"]), int(d["num_classes"]))


def layer_param_count(kind, width):
    """Parameters of a layer of ``kind`` with input width ``width`` (dense: pass (in, out))."""
    if kind == DENSE:
        n_in, n_out = width
        return (n_in + 1) * n_out
    if kind == BATCH_NORM:
        return 4 * width
    if kind == NORMALIZATION:
        return 2 * width + 1
    return 0


def param_count(spec):
    """Per-layer parameter counts and their total."""
    per_layer = []
    for layer, (w_in, w_out) in zip(spec.layers, spec.widths()):
        per_layer.append(layer_param_count(layer.kind, (w_in, w_out) if layer.kind == DENSE else w_in))
    return per_layer, sum(per_layer)


def compound_scale(base, coefficients, phi):
    """Scale (depth, width, resolution) by (alpha, beta, gamma) ** phi.

    Results are rounded half away from zero and clamped to at least 1.
    """
    if len(base) != 3 or len(coefficients) != 3:
        raise ConfigError("base and coefficients must each have three entries")
    if any(c <= 0 for c in coefficients):
        raise ConfigError("scaling coefficients must be positive")
    if any(b < 1 for b in base):
        raise ConfigError("base depth, width and resolution must be >= 1")
    return tuple(max(1, math.floor(c**phi * b + 0.5)) for b, c in zip(base, coefficients))


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 25
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    patience: int = 5
    early_stop_metric: str = field(default="val_accuracy")

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if not self.adam_epsilon > 0:
            raise ConfigError("adam_epsilon must be positive")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if self.early_stop_metric != "val_accuracy":
            raise ConfigError("only val_accuracy early stopping is supported")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ArchitectureSpec
    state: tuple
    config: TrainConfig
    seed: int

    def __post_init__(self):
        widths = self.spec.widths()
        if len(self.state) != len(self.spec.layers):
            raise ShapeError("model state must hold one entry per layer")
        for layer, (w_in, w_out), params in zip(self.spec.layers, widths, self.state):
            if layer.kind == DENSE:
                if params["W"].shape != (w_out, w_in) or params["b"].shape != (w_out,):
                    raise ShapeError(f"dense weights must be {w_out}x{w_in}")
            elif layer.kind == BATCH_NORM:
                if np.any(params["moving_var"] < 0):
                    raise DataError("batch-norm moving variance must be >= 0")
            elif layer.kind == NORMALIZATION:
                if params["var"].shape != (w_in,) or np.any(params["var"] < 0):
                    raise DataError("normalization variances must be >= 0 with one per feature")
            for arr in (params or {}).values():
                if isinstance(arr, np.ndarray):
                    arr.setflags(write=False)

    @property
    def dense_weights(self):
        return [(p["W"], p["b"]) for layer, p in zip(self.spec.layers, self.state) if layer.kind == DENSE]

    def to_dict(self):
        weights, batch_norm, normalization = [], [], []
        for i, (layer, p) in enumerate(zip(self.spec.layers, self.state)):
            if layer.kind == DENSE:
                weights.append([p["W"].tolist(), p["b"].tolist()])
            elif layer.kind == BATCH_NORM:
                batch_norm.append(
                    {"layer": i, **{k: p[k].tolist() for k in ("gamma", "beta", "moving_mean", "moving_var")}}
                )
            elif layer.kind == NORMALIZATION:
                normalization.append(
                    {"layer": i, "mean": p["mean"].tolist(), "variance": p["var"].tolist(), "count": p["count"]}
                )
        return {
            "spec": self.spec.to_list(),
            "input_width": self.spec.input_width,
            "num_classes": self.spec.num_classes,
            "weights": weights,
            "stats": {"batch_norm": batch_norm, "normalization": normalization},
            "config": self.config.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc):
        spec = ArchitectureSpec(
            tuple(LayerSpec.from_dict(d) for d in doc["spec"]), doc["input_width"], doc["num_classes"]
        )
        weights = iter(doc["weights"])
        bn = {d["layer"]: d for d in doc["stats"]["batch_norm"]}
        norm = {d["layer"]: d for d in doc["stats"]["normalization"]}
        state = []
        for i, layer in enumerate(spec.layers):
            if layer.kind == DENSE:
                W, b = next(weights)
                w_in = spec.widths()[i][0]
                state.append({"W": np.array(W, dtype=np.float64).reshape(-1, w_in), "b": np.array(b, dtype=np.float64)})
            elif layer.kind == BATCH_NORM:
                state.append({k: np.array(bn[i][k], dtype=np.float64) for k in ("gamma", "beta", "moving_mean", "moving_var")})
            elif layer.kind == NORMALIZATION:
                d = norm[i]
                state.append(
                    {"mean": np.array(d["mean"], dtype=np.float64), "var": np.array(d["variance"], dtype=np.float64), "count": int(d["count"])}
                )
            else:
                state.append(None)
        return cls(spec, tuple(state), TrainConfig.from_dict(doc["config"]), int(doc["seed"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def init_state(spec, rng):
    """Seeded initial parameters: Glorot-uniform dense kernels, zero biases."""
    state = []
    for layer, (w_in, w_out) in zip(spec.layers, spec.widths()):
        if layer.kind == DENSE:
            limit = math.sqrt(6.0 / (w_in + w_out))
            state.append({"W": rng.uniform((w_out, w_in), -limit, limit), "b": np.zeros(w_out)})
        elif layer.kind == BATCH_NORM:
            state.append(
                {"gamma": np.ones(w_in), "beta": np.zeros(w_in), "moving_mean": np.zeros(w_in), "moving_var": np.ones(w_in)}
            )
        elif layer.kind == NORMALIZATION:
            state.append({"mean": np.zeros(w_in), "var": np.ones(w_in), "count": 0})
        else:
            state.append(None)
    return state


# --- per-layer kernels -----------------------------------------------------
#
# forward_layer returns (output, cache); backward_layer maps the upstream
# gradient to (input gradient, parameter gradients). ``train`` selects batch
# statistics and dropout masks.


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward_layer(layer, params, x, train=False, rng=None):
    kind = layer.kind
    if kind in (INPUT, ENCODING):
        return x, None
    if kind == NORMALIZATION:
        inv = 1.0 / np.sqrt(params["var"] + NORM_EPSILON)
        return (x - params["mean"]) * inv, inv
    if kind == DENSE:
        return x @ params["W"].T + params["b"], x
    if kind == RELU:
        return relu(x), x > 0
    if kind == BATCH_NORM:
        if train:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
        else:
            mu, var = params["moving_mean"], params["moving_var"]
        inv = 1.0 / np.sqrt(var + BN_EPSILON)
        xhat = (x - mu) * inv
        return params["gamma"] * xhat + params["beta"], (xhat, inv, mu, var)
    if kind == DROPOUT:
        if not train or layer.rate == 0.0:
            return x, None
        keep = rng.uniform(x.shape) >= layer.rate
        scale = keep / (1.0 - layer.rate)
        return x * scale, scale
    if kind == SOFTMAX:
        p = softmax(x)
        return p, p
    raise ConfigError(f"unknown layer kind {kind!r}")


def backward_layer(layer, params, cache, g):
    kind = layer.kind
    if kind in (INPUT, ENCODING):
        return g, None
    if kind == NORMALIZATION:
        return g * cache, None
    if kind == DENSE:
        x = cache
        return g @ params["W"], {"W": g.T @ x, "b": g.sum(axis=0)}
    if kind == RELU:
        return g * cache, None
    if kind == BATCH_NORM:
        xhat, inv, _, _ = cache
        n = g.shape[0]
        dxhat = g * params["gamma"]
        dx = (inv / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return dx, {"gamma": (g * xhat).sum(axis=0), "beta": g.sum(axis=0)}
    if kind == DROPOUT:
        return (g if cache is None else g * cache), None
    if kind == SOFTMAX:
        p = cache
        return p * (g - (g * p).sum(axis=1, keepdims=True)), None
    raise ConfigError(f"unknown layer kind {kind!r}")


def cross_entropy(probs, labels):
    """Mean categorical cross-entropy of probability rows against integer labels."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))


def _check_batch(spec, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[1] != spec.input_width:
        raise ShapeError(f"batch width {X.shape[1]} does not match model input width {spec.input_width}")
    return X


def _run(spec, state, X, train, rng, stop=None):
    caches = []
    h = X
    for layer, params in zip(spec.layers[:stop], state[:stop]):
        h, cache = forward_layer(layer, params, h, train, rng)
        caches.append(cache)
    return h, caches


def forward(model, batch, mode="infer", rng=None):
    """Class probabilities for ``batch``.

    ``mode="train"`` uses batch statistics in batch-norm layers and samples
    dropout masks from ``rng`` (a SplitMix64, seeded from the model seed if
    omitted); the model itself is never modified.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    X = _check_batch(model.spec, batch)
    train = mode == "train"
    if train and rng is None:
        rng = SplitMix64(model.seed)
    probs, _ = _run(model.spec, model.state, X, train, rng)
    return probs


def predict(model, X):
    return np.argmax(forward(model, X, "infer"), axis=1)


def loss_and_gradients(spec, state, X, labels, rng=None):
    """Training-mode cross-entropy and its gradients.

    Returns ``(loss, grads, dX, updates)`` where ``grads[i]`` holds the
    trainable-parameter gradients of layer ``i`` (or ``None``) and
    ``updates[i]`` the batch statistics a batch-norm layer saw.
    """
    logits, caches = _run(spec, state, X, True, rng, stop=-1)
    n = X.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))
    g = np.exp(shifted - log_z[:, None])
    g[np.arange(n), labels] -= 1.0
    g /= n
    grads = [None] * len(spec.layers)
    updates = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        if layer.kind == BATCH_NORM:
            updates[i] = caches[i][2:]
        g, grads[i] = backward_layer(layer, state[i], caches[i], g)
    return loss, grads, g, updates


class Adam:
    def __init__(self, config):
        self.lr = config.learning_rate
        self.b1 = config.adam_beta1
        self.b2 = config.adam_beta2
        self.eps = config.adam_epsilon
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, state, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for i, layer_grads in enumerate(grads):
            if not layer_grads:
                continue
            for name, g in layer_grads.items():
                key = (i, name)
                m = self.m.get(key)
                if m is None:
                    m = self.m[key] = np.zeros_like(g)
                    self.v[key] = np.zeros_like(g)
                v = self.v[key]
                m *= self.b1
                m += (1.0 - self.b1) * g
                v *= self.b2
                v += (1.0 - self.b2) * g * g
                state[i][name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class EpochRecord(NamedTuple):
    epoch: int
    train_loss: float
    val_accuracy: float


def _copy_state(state):
    return [None if p is None else {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in p.items()} for p in state]


def _check_split(spec, data, name):
    if not isinstance(data, FeatureMatrix):
        raise TypeError(f"{name} must be a FeatureMatrix")
    if data.n_samples == 0:
        raise DataError(f"{name} split is empty")
    if data.width != spec.input_width:
        raise ShapeError(f"{name} width {data.width} does not match architecture input width {spec.input_width}")
    if data.labels.max() >= spec.num_classes:
        raise DataError(f"{name} labels must lie in [0, {spec.num_classes})")


def train(spec, train_set, val_set, config=None, seed=0):
    """Train ``spec`` on ``train_set`` and return ``(model, history)``.

    The returned weights are those of the epoch with the highest validation
    accuracy (earliest on ties). Training stops once validation accuracy
    has not improved for ``config.patience`` epochs.
    """
    config = config or TrainConfig()
    _check_split(spec, train_set, "train")
    _check_split(spec, val_set, "validation")
    rng = SplitMix64(seed)
    state = init_state(spec, rng)
    X, y = train_set.values, train_set.labels
    for layer, params in zip(spec.layers, state):
        if layer.kind == NORMALIZATION:
            params["mean"] = X.mean(axis=0)
            params["var"] = X.var(axis=0)
            params["count"] = int(X.shape[0])

    history = []
    best_state = _copy_state(state)
    best_acc = -1.0
    since_best = 0
    opt = Adam(config)
    n = X.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads, _, updates = loss_and_gradients(spec, state, X[idx], y[idx], rng)
            total += loss * len(idx)
            opt.step(state, grads)
            for params, upd in zip(state, updates):
                if upd is not None:
                    mu, var = upd
                    params["moving_mean"] = BN_MOMENTUM * params["moving_mean"] + (1.0 - BN_MOMENTUM) * mu
                    params["moving_var"] = BN_MOMENTUM * params["moving_var"] + (1.0 - BN_MOMENTUM) * var
        val_probs, _ = _run(spec, state, val_set.values, False, None)
        val_acc = float(np.mean(np.argmax(val_probs, axis=1) == val_set.labels))
        history.append(EpochRecord(epoch, total / n, val_acc))
        if val_acc > best_acc:
            best_acc, best_state, since_best = val_acc, _copy_state(state), 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return TrainedModel(spec, tuple(best_state), config, int(seed)), history


def write_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_accuracy"])
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_accuracy)])


def read_history(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["val_accuracy"])) for r in reader]
