"""Desk-scale two-view contrastive learning on synthetic channel data.

The encoder pools each channel to its mean and standard deviation over the
sequential axis, then applies two dense layers (tanh in between). Training
minimizes a symmetric in-batch InfoNCE loss with hand-derived gradients and
SGD with momentum; evaluation is a linear probe on frozen embeddings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from randquant.augment import AugmentPipeline, RandomizedQuantize, augment_batch
from randquant.rng import CounterRng, SeedPolicy, derive_key
from randquant.tensor import ChannelTensor

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    """Classes differ in coarse per-channel level patterns; instances differ in nuisance.

    A sample of class ``k`` has channel ``c`` equal to
    ``offset + gain * (level[code] + jitter[code] + amplitude * noise[t])``
    where ``code = prototype[k, c, t]`` is a level index, piecewise constant
    over ``segments`` runs of positions. ``gain``/``offset`` are drawn per
    sample and channel, ``jitter`` per sample, channel and level from
    U(-level_jitter, level_jitter), ``amplitude`` per sample and channel from
    U(0, noise_amplitude), and ``noise`` is i.i.d. U(-1, 1) per position.
    """

    n_classes: int = 4
    samples_per_class: int = 64
    seq_len: int = 64
    channels: int = 8
    prototype_scale: float = 1.0
    levels: int = 2
    segments: int = 8
    gain_jitter: float = 0.0
    offset_jitter: float = 0.0
    level_jitter: float = 0.0
    noise_amplitude: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.samples_per_class < 1:
            raise ValueError("need at least one class and one sample per class")
        if self.seq_len < 1 or self.channels < 1 or self.segments < 1 or self.levels < 2:
            raise ValueError("degenerate dataset dimensions")
        if self.segments > self.seq_len:
            raise ValueError("more segments than sequence positions")


@dataclass(frozen=True, eq=False)
class LabeledSet:
    data: np.ndarray  # (n, seq_len, channels)
    labels: np.ndarray  # (n,)

    def __len__(self):
        return len(self.labels)

    def tensors(self) -> List[ChannelTensor]:
        return [ChannelTensor(x, (x.shape[0], 1)) for x in self.data]

    def subset(self, idx) -> "LabeledSet":
        return LabeledSet(self.data[idx], self.labels[idx])


def class_prototypes(spec: SyntheticDatasetSpec) -> np.ndarray:
    """(n_classes, seq_len, channels) integer level codes, pairwise distinct."""
    rng = CounterRng(derive_key(spec.seed, 0))
    seg_of = (np.arange(spec.seq_len) * spec.segments) // spec.seq_len
    protos = []
    seen = set()
    while len(protos) < spec.n_classes:
        codes = rng.integers(0, spec.levels - 1, size=(spec.segments, spec.channels))
        key = codes.tobytes()
        if key in seen:
            continue
        seen.add(key)
        protos.append(codes[seg_of])
    return np.stack(protos)


def generate_dataset(spec: SyntheticDatasetSpec) -> LabeledSet:
    protos = class_prototypes(spec)
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    n, L, C = len(labels), spec.seq_len, spec.channels
    rng = CounterRng(derive_key(spec.seed, 1))
    gain = 1.0 + spec.gain_jitter * rng.uniform(-1.0, 1.0, size=(n, 1, C))
    offset = spec.offset_jitter * rng.uniform(-1.0, 1.0, size=(n, 1, C))
    jitter = spec.level_jitter * rng.uniform(-1.0, 1.0, size=(n, spec.levels, C))
    amplitude = spec.noise_amplitude * rng.random((n, 1, C))
    noise = rng.uniform(-1.0, 1.0, size=(n, L, C))
    codes = protos[labels]  # (n, L, C)
    level_values = np.arange(spec.levels) * (spec.prototype_scale / (spec.levels - 1))
    coarse = level_values[codes] + np.take_along_axis(jitter, codes, axis=1)
    data = offset + gain * (coarse + amplitude * noise)
    return LabeledSet(data, labels)


def split_dataset(ds: LabeledSet, test_fraction: float = 0.5, seed: int = 0) -> Tuple[LabeledSet, LabeledSet]:
    """Stratified split; deterministic under ``seed``."""
    rng = CounterRng(derive_key(seed, 2))
    train_idx, test_idx = [], []
    for k in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == k)
        members = members[rng.permutation(len(members))]
        n_test = int(round(len(members) * test_fraction))
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    return ds.subset(np.sort(train_idx)), ds.subset(np.sort(test_idx))


# --------------------------------------------------------------------------
# encoder


def pool_features(data: np.ndarray) -> np.ndarray:
    """Per-channel mean and standard deviation over the sequential axis: (n, 2C)."""
    data = np.asarray(data, dtype=np.float64)
    return np.concatenate([data.mean(axis=1), data.std(axis=1)], axis=1)


@dataclass(frozen=True, eq=False)
class EncoderParams:
    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray
    w2: np.ndarray  # (embed, hidden)
    b2: np.ndarray

    @classmethod
    def init(cls, n_input: int, n_hidden: int, n_embed: int, rng: CounterRng) -> "EncoderParams":
        def layer(fan_out, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=(fan_out, fan_in)), rng.uniform(-bound, bound, size=fan_out)

        w1, b1 = layer(n_hidden, n_input)
        w2, b2 = layer(n_embed, n_hidden)
        return cls(w1, b1, w2, b2)

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(a.copy() for a in self.arrays()))

    def equals(self, other: "EncoderParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def encode(params: EncoderParams, feats: np.ndarray):
    """Returns (embeddings, hidden activations)."""
    h = np.tanh(feats @ params.w1.T + params.b1)
    return h @ params.w2.T + params.b2, h


def embed(params: EncoderParams, data: np.ndarray) -> np.ndarray:
    return encode(params, pool_features(data))[0]


def encoder_backward(params: EncoderParams, feats, h, grad_z) -> List[np.ndarray]:
    gw2 = grad_z.T @ h
    gb2 = grad_z.sum(axis=0)
    gpre = (grad_z @ params.w2) * (1.0 - h**2)
    gw1 = gpre.T @ feats
    gb1 = gpre.sum(axis=0)
    return [gw1, gb1, gw2, gb2]


# --------------------------------------------------------------------------
# loss


def _normalize(z):
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm embedding")
    return z / norms, norms


def _log_softmax(s, axis):
    m = s.max(axis=axis, keepdims=True)
    return s - m - np.log(np.exp(s - m).sum(axis=axis, keepdims=True))


def info_nce_per_sample(z1, z2, temperature):
    """Per-sample losses of each direction, (view1 -> view2, view2 -> view1)."""
    u, _ = _normalize(np.asarray(z1, dtype=np.float64))
    v, _ = _normalize(np.asarray(z2, dtype=np.float64))
    s = u @ v.T / temperature
    return -np.diag(_log_softmax(s, 1)), -np.diag(_log_softmax(s, 0))


def info_nce_loss(z1, z2, temperature: float = 0.2):
    """Symmetric in-batch InfoNCE over cosine similarities.

    Row ``i`` of ``z1`` is the positive for row ``i`` of ``z2``; every other
    row of the batch is a negative. Returns ``(loss, grad_z1, grad_z2)``.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise ValueError("embedding batches must share a (batch, dim) shape")
    b = z1.shape[0]
    if b < 2:
        raise ValueError("InfoNCE needs a batch of at least 2")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    u, nu = _normalize(z1)
    v, nv = _normalize(z2)
    s = u @ v.T / temperature
    row = _log_softmax(s, 1)
    col = _log_softmax(s, 0)
    loss = -0.5 * (np.trace(row) + np.trace(col)) / b

    eye = np.eye(b)
    grad_s = 0.5 / b * ((np.exp(row) - eye) + (np.exp(col) - eye))
    grad_u = grad_s @ v / temperature
    grad_v = grad_s.T @ u / temperature
    grad_z1 = (grad_u - u * np.sum(grad_u * u, axis=1, keepdims=True)) / nu
    grad_z2 = (grad_v - v * np.sum(grad_v * v, axis=1, keepdims=True)) / nv
    return float(loss), grad_z1, grad_z2


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 30
    learning_rate: float = 0.05
    momentum: float = 0.9
    temperature: float = 0.2
    hidden: int = 32
    embed_dim: int = 8
    seed: int = 0
    pipeline: AugmentPipeline = field(default_factory=AugmentPipeline)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class TrainResult:
    params: EncoderParams
    initial: EncoderParams
    losses: List[float]  # mean loss per epoch


def _epoch_order(n, seed, epoch):
    return CounterRng(derive_key(seed, 3, epoch)).permutation(n)


def train(dataset: LabeledSet, cfg: TrainConfig) -> TrainResult:
    """Mini-batch SGD with momentum on InfoNCE over pairs of augmented views.

    Draw ``epoch * len(dataset) + i`` keys the augmentation of sample ``i``
    in a given epoch, so every epoch sees fresh views.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least two samples")
    n_input = 2 * dataset.data.shape[2]
    params = EncoderParams.init(n_input, cfg.hidden, cfg.embed_dim, CounterRng(derive_key(cfg.seed, 4)))
    initial = params.copy()
    velocity = [np.zeros_like(a) for a in params.arrays()]
    pipeline = cfg.pipeline
    losses = []
    for epoch in range(cfg.epochs):
        order = _epoch_order(n, cfg.seed, epoch)
        total, count = 0.0, 0
        for start in range(0, n - 1, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue
            draws = epoch * n + idx
            x = dataset.data[idx]
            f1 = pool_features(augment_batch(pipeline, x, draws, view=0))
            f2 = pool_features(augment_batch(pipeline, x, draws, view=1))
            z1, h1 = encode(params, f1)
            z2, h2 = encode(params, f2)
            loss, g1, g2 = info_nce_loss(z1, z2, cfg.temperature)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch starting {start}")
            grads = [a + b for a, b in zip(encoder_backward(params, f1, h1, g1), encoder_backward(params, f2, h2, g2))]
            for p, vel, g in zip(params.arrays(), velocity, grads):
                vel *= cfg.momentum
                vel += g
                p -= cfg.learning_rate * vel
            total += loss * len(idx)
            count += len(idx)
        losses.append(total / count)
        log.debug("epoch %d loss %.4f", epoch, losses[-1])
    return TrainResult(params, initial, losses)


def evaluate_loss(params: EncoderParams, dataset: LabeledSet, cfg: TrainConfig, epoch: int = 0) -> float:
    """Mean InfoNCE over the batches of one epoch, without updating parameters."""
    n = len(dataset)
    order = _epoch_order(n, cfg.seed, epoch)
    total, count = 0.0, 0
    for start in range(0, n - 1, cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        if len(idx) < 2:
            continue
        draws = epoch * n + idx
        x = dataset.data[idx]
        z1 = embed(params, augment_batch(cfg.pipeline, x, draws, view=0))
        z2 = embed(params, augment_batch(cfg.pipeline, x, draws, view=1))
        total += info_nce_loss(z1, z2, cfg.temperature)[0] * len(idx)
        count += len(idx)
    return total / count


# --------------------------------------------------------------------------
# linear probe


@dataclass
class ProbeReport:
    train_accuracy: float
    test_accuracy: float
    mode: Optional[str] = None
    n_bins: Optional[int] = None
    iterations: int = 0


def fit_softmax_regression(x, y, n_classes, max_iter=2000, lr=0.5, tol=1e-6, l2=1e-4):
    """Multinomial logistic regression by full-batch gradient descent on standardized inputs."""
    mean, std = x.mean(axis=0), x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    xs = (x - mean) / std
    w = np.zeros((xs.shape[1], n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    it = 0
    for it in range(1, max_iter + 1):
        logits = xs @ w + b
        p = np.exp(_log_softmax(logits, 1))
        g = (p - onehot) / len(y)
        gw = xs.T @ g + l2 * w
        gb = g.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
        if np.sqrt(np.sum(gw**2) + np.sum(gb**2)) < tol:
            break

    def predict(xq):
        return np.argmax(((xq - mean) / std) @ w + b, axis=1)

    return predict, it


def linear_probe(params: EncoderParams, train_set: LabeledSet, test_set: LabeledSet, **kw) -> ProbeReport:
    n_classes = int(max(train_set.labels.max(), test_set.labels.max())) + 1
    if len(np.unique(train_set.labels)) < 2:
        raise ValueError("linear probe needs at least two classes in the training split")
    e_train = embed(params, train_set.data)
    e_test = embed(params, test_set.data)
    predict, iters = fit_softmax_regression(e_train, train_set.labels, n_classes, **kw)
    train_acc = float(np.mean(predict(e_train) == train_set.labels))
    test_acc = float(np.mean(predict(e_test) == test_set.labels))
    return ProbeReport(train_acc, test_acc, iterations=iters)
