"""Feed-forward classifier trained with Adam, and bagging ensembles.

Hidden layers use the rectifier, the output layer a softmax, and the loss is
the mean cross-entropy over a batch. Models serialize to the ISM1 layout::

    magic    b"ISM1"
    u16      version (1)
    u16      flags: bit 0 = biases present, bit 1 = bagging ensemble
    u32      n_members
    u32      n_sizes, then n_sizes x u32 layer sizes
    per member: u64 bootstrap seed, then f64 parameters
                (per layer: weights row-major (out, in), then biases)

All fields little-endian.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ._rng import derive_rng, derive_seed
from .errors import DataError, FormatError, ParameterError, TrainingError

__all__ = [
    "MlpModel", "TrainConfig", "BaggingModel", "AdamState", "Gradients",
    "mlp_init", "mlp_forward", "cross_entropy", "mlp_backward", "adam_step",
    "train_mlp", "bagging_train", "predict_proba", "predict",
    "NearestClassMean", "save_model", "load_model",
]

PROB_CLIP = 1e-12


@dataclass
class MlpModel:
    """Layer sizes plus per-layer weight matrices ``(out, in)`` and biases.

    ``biases`` is None for a biasless network.
    """

    sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: Optional[List[np.ndarray]]

    @property
    def use_bias(self):
        return self.biases is not None

    @property
    def n_inputs(self):
        return self.sizes[0]

    @property
    def n_classes(self):
        return self.sizes[-1]

    def flat(self):
        """All parameters as one vector, in ISM1 order."""
        return _pack(self.weights, self.biases)


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    ``hidden`` is a unit count or a list of counts (one per hidden layer).
    """

    hidden: Union[int, Sequence[int]] = 100
    lr: float = 1e-3
    epochs: int = 300
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    use_bias: bool = True

    def hidden_sizes(self):
        h = self.hidden
        return (int(h),) if np.isscalar(h) else tuple(int(v) for v in h)

    def validate(self):
        if not self.lr > 0:
            raise ParameterError(f"learning rate must be > 0, got {self.lr}")
        if int(self.epochs) < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.batch_size}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ParameterError("Adam betas must lie in (0, 1)")
        if not self.eps > 0:
            raise ParameterError("Adam eps must be > 0")
        if any(h < 1 for h in self.hidden_sizes()):
            raise ParameterError("hidden layers need at least one unit")


@dataclass
class BaggingModel:
    """Ensemble of MLPs with the bootstrap seed used for each member."""

    members: List[MlpModel]
    seeds: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ParameterError("a bagging model needs at least one estimator")
        sizes = {(m.sizes[0], m.sizes[-1]) for m in self.members}
        if len(sizes) != 1:
            raise ParameterError("ensemble members disagree on input/output sizes")

    @property
    def n_inputs(self):
        return self.members[0].n_inputs

    @property
    def n_classes(self):
        return self.members[0].n_classes


# ---------------------------------------------------------------------------
# parameter packing

def _layout(sizes, use_bias):
    out, pos = [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = slice(pos, pos + n_in * n_out)
        pos = w.stop
        b = None
        if use_bias:
            b = slice(pos, pos + n_out)
            pos = b.stop
        out.append((w, (n_out, n_in), b))
    return out, pos


def _pack(weights, biases):
    parts = []
    for i, W in enumerate(weights):
        parts.append(W.ravel())
        if biases is not None:
            parts.append(biases[i])
    return np.concatenate(parts)


def _unpack(flat, sizes, use_bias):
    layout, total = _layout(sizes, use_bias)
    if flat.size != total:
        raise ParameterError(f"parameter vector has {flat.size} entries, expected {total}")
    weights = [flat[w].reshape(shape) for w, shape, _ in layout]
    biases = [flat[b] for _, _, b in layout] if use_bias else None
    return weights, biases


# ---------------------------------------------------------------------------
# forward / backward

def mlp_init(sizes, seed=0, use_bias=True) -> MlpModel:
    """He-style initialization: weights ~ N(0, 2 / fan_in), zero biases."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ParameterError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
               for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(n) for n in sizes[1:]] if use_bias else None
    return MlpModel(sizes, weights, biases)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(weights, biases, X):
    """Return (probabilities, inputs to each layer, hidden pre-activations)."""
    inputs, pre = [], []
    a = X
    last = len(weights) - 1
    for i, W in enumerate(weights):
        inputs.append(a)
        z = a @ W.T
        if biases is not None:
            z = z + biases[i]
        if i == last:
            return _softmax(z), inputs, pre
        pre.append(z)
        a = np.maximum(z, 0.0)


def mlp_forward(model: MlpModel, x):
    """Class probabilities for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None] if single else x
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ParameterError(f"input width {X.shape[-1]} != model input size {model.n_inputs}")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite network input")
    probs = _forward(model.weights, model.biases, X)[0]
    return probs[0] if single else probs


def cross_entropy(probs, target):
    """``-log(probs[target])`` with probabilities clipped at 1e-12.

    Works on one distribution (returns a float) or row-wise on a batch.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return float(-np.log(max(probs[int(target)], PROB_CLIP)))
    target = np.asarray(target, dtype=np.int64)
    return -np.log(np.maximum(probs[np.arange(probs.shape[0]), target], PROB_CLIP))


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: Optional[List[np.ndarray]]
    loss: float


def _backward(weights, biases, X, y):
    n = X.shape[0]
    probs, inputs, pre = _forward(weights, biases, X)
    loss = float(np.mean(-np.log(np.maximum(probs[np.arange(n), y], PROB_CLIP))))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw = [None] * len(weights)
    gb = [None] * len(weights) if biases is not None else None
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = delta.T @ inputs[i]
        if gb is not None:
            gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i]) * (pre[i - 1] > 0)
    return gw, gb, loss


def mlp_backward(model: MlpModel, x, target) -> Gradients:
    """Exact gradients of the mean cross-entropy for one sample or a batch."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(target, dtype=np.int64))
    if X.shape[1] != model.n_inputs or y.size != X.shape[0]:
        raise ParameterError("input width or target count does not match the model")
    gw, gb, loss = _backward(model.weights, model.biases, X, y)
    return Gradients(gw, gb, loss)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        params = np.asarray(params, dtype=np.float64)
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    g = np.asarray(grads, dtype=np.float64)
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * g
    v = beta2 * state.v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    new = np.asarray(params, dtype=np.float64) - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


# ---------------------------------------------------------------------------
# training

def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ParameterError(f"X rows ({X.shape[0] if X.ndim else 0}) must match labels ({y.size})")
    if X.shape[0] == 0:
        raise TrainingError("no training rows")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training features")
    if y.min() < 0:
        raise ParameterError("labels must be non-negative")
    return X, y


def train_mlp(X, y, config: TrainConfig = TrainConfig(), n_classes=None) -> MlpModel:
    """Mini-batch Adam on the mean cross-entropy.

    Deterministic given ``config.seed``: initialization and the per-epoch
    shuffle come from separate named streams of that seed.
    """
    config.validate()
    X, y = _check_xy(X, y)
    if np.unique(y).size < 2:
        raise TrainingError("training data contains a single class")
    n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.max() >= n_classes:
        raise ParameterError(f"label {y.max()} out of range for {n_classes} classes")
    sizes = (X.shape[1], *config.hidden_sizes(), n_classes)
    init = mlp_init(sizes, derive_seed(config.seed, "init"), config.use_bias)
    flat = init.flat()
    state = AdamState.zeros_like(flat)
    rng = derive_rng(config.seed, "shuffle")
    n, bs = X.shape[0], int(config.batch_size)
    for _ in range(int(config.epochs)):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            weights, biases = _unpack(flat, sizes, config.use_bias)
            gw, gb, _ = _backward(weights, biases, X[idx], y[idx])
            flat, state = adam_step(flat, _pack(gw, gb), state, config.lr,
                                    config.beta1, config.beta2, config.eps)
    weights, biases = _unpack(flat, sizes, config.use_bias)
    return MlpModel(sizes, [w.copy() for w in weights],
                    None if biases is None else [b.copy() for b in biases])


def _bootstrap(y, fraction, rng):
    """Stratified bootstrap: ceil(fraction * n_c) draws with replacement per class."""
    picks = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        size = max(1, int(np.ceil(fraction * members.size)))
        picks.append(rng.choice(members, size=size, replace=True))
    return np.sort(np.concatenate(picks))


def bagging_train(X, y, n_estimators=10, config: TrainConfig = TrainConfig(),
                  fraction=1.0, n_classes=None, n_jobs=1) -> BaggingModel:
    """Train ``n_estimators`` MLPs on stratified bootstrap resamples.

    Estimator ``i`` draws its resample from the ``("bootstrap", i)`` stream of
    ``config.seed`` and trains with seed ``("estimator", i)``. Results do not
    depend on ``n_jobs``.
    """
    n_estimators = int(n_estimators)
    if n_estimators < 1:
        raise ParameterError(f"n_estimators must be >= 1, got {n_estimators}")
    if not 0 < fraction <= 1:
        raise ParameterError(f"bootstrap fraction must be in (0, 1], got {fraction}")
    config.validate()
    X, y = _check_xy(X, y)
    n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
    seeds = [derive_seed(config.seed, "bootstrap", i) for i in range(n_estimators)]

    def fit_one(i):
        idx = _bootstrap(y, fraction, np.random.default_rng(seeds[i]))
        cfg = replace(config, seed=derive_seed(config.seed, "estimator", i))
        return train_mlp(X[idx], y[idx], cfg, n_classes)

    if n_jobs is not None and n_jobs > 1 and n_estimators > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            members = list(pool.map(fit_one, range(n_estimators)))
    else:
        members = [fit_one(i) for i in range(n_estimators)]
    return BaggingModel(members, seeds)


def predict_proba(model, X):
    """Class probabilities; a bagging model averages its members."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(model, BaggingModel):
        if X.shape[1] != model.n_inputs:
            raise ParameterError(f"input width {X.shape[1]} != model input size {model.n_inputs}")
        return np.mean([mlp_forward(m, X) for m in model.members], axis=0)
    return mlp_forward(model, X)


def predict(model, X):
    return np.argmax(predict_proba(model, X), axis=1)


class NearestClassMean:
    """Assign each row to the class whose training mean is closest (Euclidean)."""

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes_ = np.unique(y)
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in self.classes_])
        return self

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d = ((X[:, None, :] - self.means_[None]) ** 2).sum(axis=-1)
        return self.classes_[np.argmin(d, axis=1)]


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"ISM1"
_VERSION = 1


def save_model(model, path):
    """Write an MlpModel or BaggingModel in the ISM1 layout."""
    if isinstance(model, BaggingModel):
        members, seeds, ensemble = model.members, list(model.seeds), True
        if len(seeds) != len(members):
            seeds = [0] * len(members)
    else:
        members, seeds, ensemble = [model], [0], False
    first = members[0]
    if any(m.sizes != first.sizes or m.use_bias != first.use_bias for m in members):
        raise ParameterError("ensemble members must share layer sizes and bias mode")
    flags = (1 if first.use_bias else 0) | (2 if ensemble else 0)
    parts = [_MAGIC, struct.pack("<HHII", _VERSION, flags, len(members), len(first.sizes)),
             struct.pack(f"<{len(first.sizes)}I", *first.sizes)]
    for m, s in zip(members, seeds):
        parts.append(struct.pack("<Q", int(s)))
        parts.append(m.flat().astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path):
    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:4] != _MAGIC:
        raise FormatError(f"{path}: not an ISM1 model file")
    version, flags, n_members, n_sizes = struct.unpack_from("<HHII", buf, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported ISM1 version {version}")
    pos = 16
    if n_members < 1 or n_sizes < 2 or pos + 4 * n_sizes > len(buf):
        raise FormatError(f"{path}: corrupt ISM1 header")
    sizes = struct.unpack_from(f"<{n_sizes}I", buf, pos)
    pos += 4 * n_sizes
    use_bias = bool(flags & 1)
    _, total = _layout(sizes, use_bias)
    if len(buf) - pos != n_members * (8 + 8 * total):
        raise FormatError(f"{path}: ISM1 payload size mismatch")
    members, seeds = [], []
    for _ in range(n_members):
        (seed,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        flat = np.frombuffer(buf, dtype="<f8", count=total, offset=pos).astype(np.float64)
        pos += 8 * total
        w, b = _unpack(flat, sizes, use_bias)
        members.append(MlpModel(tuple(sizes), list(w), b if b is None else list(b)))
        seeds.append(seed)
    if flags & 2:
        return BaggingModel(members, seeds)
    return members[0]
