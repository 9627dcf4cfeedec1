"""Randomized scalar quantizers applied independently per channel.

A quantizer is a partition of ``[a_0, a_n]`` into half-open bins
``[a_i, a_{i+1})`` (the last one closed at ``a_n``) with one reproduction
value per bin. Randomization can draw the interior cut points and/or the
reproduction values uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from randquant.rng import CounterRng, SeedPolicy, derive_keys, uniforms_at
from randquant.tensor import ChannelTensor

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class RandomMode:
    random_bins: bool = True
    random_values: bool = True

    @property
    def name(self) -> str:
        return _MODE_NAMES[(self.random_bins, self.random_values)]

    @classmethod
    def parse(cls, name: str) -> "RandomMode":
        for key, value in _MODE_NAMES.items():
            if value == name:
                return cls(*key)
        raise ValueError(f"unknown mode {name!r}; expected one of {sorted(_MODE_NAMES.values())}")


_MODE_NAMES = {
    (False, False): "uniform",
    (False, True): "rand-values",
    (True, False): "rand-bins",
    (True, True): "full",
}

UNIFORM = RandomMode(False, False)
RAND_VALUES = RandomMode(False, True)
RAND_BINS = RandomMode(True, False)
FULL = RandomMode(True, True)
ALL_MODES = (UNIFORM, RAND_VALUES, RAND_BINS, FULL)


@dataclass(frozen=True)
class QuantizerConfig:
    n_bins: int = 8
    mode: RandomMode = FULL

    def __post_init__(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError(f"n_bins must be a positive integer, got {self.n_bins}")


@dataclass(frozen=True, eq=False)
class Quantizer:
    boundaries: np.ndarray  # a_0 .. a_n
    values: np.ndarray  # y_0 .. y_{n-1}

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if b.ndim != 1 or v.ndim != 1 or len(b) != len(v) + 1 or len(v) < 1:
            raise ValueError("need n+1 boundaries for n values")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite quantizer parameters")
        if np.any(np.diff(b) < 0):
            raise ValueError("boundaries must be non-decreasing")
        if np.any(v < b[:-1]) or np.any(v > b[1:]):
            raise ValueError("reproduction value outside its bin")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def _trusted(cls, boundaries: np.ndarray, values: np.ndarray) -> "Quantizer":
        # invariants already hold by construction in build_quantizer
        q = object.__new__(cls)
        object.__setattr__(q, "boundaries", boundaries)
        object.__setattr__(q, "values", values)
        return q

    @property
    def n_bins(self) -> int:
        return len(self.values)


def build_quantizer(lo: float, hi: float, cfg: QuantizerConfig, rng: CounterRng) -> Quantizer:
    """Construct a quantizer covering ``[lo, hi]``.

    Random bins draw ``n - 1`` interior cuts from U(lo, hi) and pin the
    outer boundaries to ``lo`` and ``hi``; otherwise cuts are evenly spaced.
    Random values draw each ``y_i`` from U(a_i, a_{i+1}); otherwise the
    midpoint is used.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError(f"non-finite channel range [{lo}, {hi}]")
    if lo > hi:
        raise ValueError(f"invalid channel range: min {lo} > max {hi}")
    n = cfg.n_bins
    lo, hi = float(lo), float(hi)
    width = hi - lo

    bounds = np.empty(n + 1)
    bounds[0], bounds[n] = lo, hi
    if n > 1:
        if cfg.mode.random_bins:
            cuts = np.sort(lo + rng.random(n - 1) * width)
        else:
            cuts = lo + width * (np.arange(1, n) / n)
        bounds[1:n] = np.minimum(np.maximum(cuts, lo), hi)

    left, right = bounds[:-1], bounds[1:]
    if cfg.mode.random_values:
        values = left + rng.random(n) * (right - left)
    else:
        values = (left + right) / 2.0
    values = np.minimum(np.maximum(values, left), right)
    # keep y_i strictly inside a non-empty half-open bin so it maps back to itself
    spill = (values[:-1] >= right[:-1]) & (right[:-1] > left[:-1])
    if spill.any():
        i = np.flatnonzero(spill)
        values[i] = np.nextafter(right[i], -np.inf)
    return Quantizer._trusted(bounds, values)


def _checked_inputs(q: Quantizer, xs) -> np.ndarray:
    x = np.asarray(xs, dtype=np.float64)
    if x.size == 0:
        return x
    lo, hi = q.boundaries[0], q.boundaries[-1]
    xmin, xmax = x.min(), x.max()
    if not (np.isfinite(xmin) and np.isfinite(xmax)):
        raise ValueError("non-finite input to quantizer")
    if xmin < lo - CLAMP_TOL or xmax > hi + CLAMP_TOL:
        raise ValueError(f"input outside quantizer range [{lo}, {hi}]")
    if xmin < lo or xmax > hi:
        x = np.clip(x, lo, hi)
    return x


def apply(q: Quantizer, xs) -> np.ndarray:
    """Map each input to the reproduction value of its bin (binary search)."""
    x = _checked_inputs(q, xs)
    idx = np.searchsorted(q.boundaries, x, side="right") - 1
    idx = np.minimum(idx, q.n_bins - 1)
    return q.values[idx]


def apply_brute_force(q: Quantizer, xs) -> np.ndarray:
    """Reference evaluation of ``sum_i y_i * 1[x in S_i]`` by a linear scan."""
    x = _checked_inputs(q, xs)
    a, y = q.boundaries, q.values
    col = x[..., None]
    inside = (col >= a[:-1]) & (col < a[1:])
    inside[..., -1] = (col[..., 0] >= a[-2]) & (col[..., 0] <= a[-1])
    return np.where(inside, y, 0.0).sum(axis=-1)


def quantize_tensor(
    t: ChannelTensor,
    cfg: QuantizerConfig,
    seeds: SeedPolicy,
    sample_idx: int,
    view: int = 0,
    stage: int = 0,
) -> ChannelTensor:
    """Quantize every channel with its own freshly drawn quantizer.

    Channel ``c`` draws from the stream keyed ``(sample_idx, view, stage, c)``.
    Constant channels are returned unchanged.
    """
    data = t.data
    lo, hi = data.min(axis=0), data.max(axis=0)
    out = data.copy()
    for c in range(t.channels):
        if lo[c] == hi[c]:
            continue
        q = build_quantizer(lo[c], hi[c], cfg, seeds.rng(sample_idx, view, stage, c))
        out[:, c] = apply(q, data[:, c])
    return t.with_data(out)


def quantize_batch(
    data: np.ndarray,
    cfg: QuantizerConfig,
    seeds: SeedPolicy,
    sample_indices,
    view: int = 0,
    stage: int = 0,
) -> np.ndarray:
    """Vectorized :func:`quantize_tensor` over a (batch, seq_len, channels) array.

    Row ``b`` is treated as sample ``sample_indices[b]``; results are
    bit-identical to calling :func:`quantize_tensor` on each row.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected (batch, seq_len, channels), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to quantizer")
    b, _, c = x.shape
    n = cfg.n_bins
    lo, hi = x.min(axis=1), x.max(axis=1)  # (b, c)
    width = hi - lo
    keys = derive_keys(
        seeds.master_seed,
        np.asarray(sample_indices, dtype=np.int64)[:, None],
        view,
        stage,
        np.arange(c)[None, :],
    )  # (b, c)

    drawn = 0
    bounds = np.empty((b, c, n + 1))
    bounds[..., 0], bounds[..., n] = lo, hi
    if n > 1:
        if cfg.mode.random_bins:
            u = uniforms_at(keys[..., None], np.arange(n - 1))
            cuts = np.sort(lo[..., None] + u * width[..., None], axis=-1)
            drawn = n - 1
        else:
            cuts = lo[..., None] + width[..., None] * (np.arange(1, n) / n)
        bounds[..., 1:n] = np.minimum(np.maximum(cuts, lo[..., None]), hi[..., None])

    left, right = bounds[..., :-1], bounds[..., 1:]
    if cfg.mode.random_values:
        values = left + uniforms_at(keys[..., None], drawn + np.arange(n)) * (right - left)
    else:
        values = (left + right) / 2.0
    values = np.minimum(np.maximum(values, left), right)
    spill = (values[..., :-1] >= right[..., :-1]) & (right[..., :-1] > left[..., :-1])
    if spill.any():
        head = values[..., :-1]
        head[spill] = np.nextafter(right[..., :-1][spill], -np.inf)

    # bin index = number of interior cuts <= x, which equals the binary-search lookup
    xt = x.transpose(0, 2, 1)  # (b, c, L)
    idx = (xt[..., None] >= bounds[:, :, None, 1:n]).sum(axis=-1)
    out = np.take_along_axis(values, idx, axis=-1).transpose(0, 2, 1)
    constant = (lo == hi)[:, None, :]
    return np.where(constant, x, out)
