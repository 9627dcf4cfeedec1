"""Sequential-axis crops and channel-axis quantization, composed into two-view pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from randquant.quantizer import QuantizerConfig, quantize_batch, quantize_tensor
from randquant.rng import CounterRng, SeedPolicy
from randquant.tensor import ChannelTensor

# default bin counts per modality; all overridable
DEFAULT_BINS = {"image": 8, "audio": 5, "pointcloud": 30, "generic": 8}

# channel index reserved for the spatial draws of a crop stage, far above any real channel
_SPATIAL_STREAM = 2**62


def _require_grid(t: ChannelTensor) -> Tuple[int, int]:
    if t.grid_shape is None:
        raise ValueError("crop stages need a tensor with grid_shape")
    return t.grid_shape


def _window(t: ChannelTensor, top: int, left: int, h: int, w: int) -> np.ndarray:
    gh, gw = t.grid_shape
    grid = t.data.reshape(gh, gw, t.channels)
    return grid[top : top + h, left : left + w]


def center_crop(t: ChannelTensor, out_h: int, out_w: int) -> ChannelTensor:
    h, w = _require_grid(t)
    if out_h < 1 or out_w < 1:
        raise ValueError("crop size must be positive")
    if out_h > h or out_w > w:
        raise ValueError(f"crop {out_h}x{out_w} larger than grid {h}x{w}")
    top, left = (h - out_h) // 2, (w - out_w) // 2
    win = _window(t, top, left, out_h, out_w)
    return ChannelTensor(win.reshape(out_h * out_w, t.channels), (out_h, out_w))


def resize_bilinear(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an (H, W, C) array with half-pixel centers and edge clamping."""
    h, w = grid.shape[:2]

    def taps(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        i0 = np.floor(pos).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    y0, y1, fy = taps(h, out_h)
    x0, x1, fx = taps(w, out_w)
    fx = fx[None, :, None]
    fy = fy[:, None, None]
    # lerp form a + f*(b - a) is exact on constant fields
    top = grid[y0][:, x0] + fx * (grid[y0][:, x1] - grid[y0][:, x0])
    bot = grid[y1][:, x0] + fx * (grid[y1][:, x1] - grid[y1][:, x0])
    return top + fy * (bot - top)


def sample_crop_window(h, w, scale_range, aspect_range, rng: CounterRng, attempts=10):
    """Draw (top, left, height, width) the way random-resized-crop does.

    Falls back to the largest centered window with an admissible aspect
    ratio when every attempt fails.
    """
    area = h * w
    log_lo, log_hi = math.log(aspect_range[0]), math.log(aspect_range[1])
    for _ in range(attempts):
        target = area * rng.uniform(scale_range[0], scale_range[1])
        ratio = math.exp(rng.uniform(log_lo, log_hi))
        cw = int(round(math.sqrt(target * ratio)))
        ch = int(round(math.sqrt(target / ratio)))
        if 0 < cw <= w and 0 < ch <= h:
            top = rng.integers(0, h - ch)
            left = rng.integers(0, w - cw)
            return top, left, ch, cw
    in_ratio = w / h
    if in_ratio < aspect_range[0]:
        cw, ch = w, max(1, int(round(w / aspect_range[0])))
    elif in_ratio > aspect_range[1]:
        ch, cw = h, max(1, int(round(h * aspect_range[1])))
    else:
        cw, ch = w, h
    ch, cw = min(ch, h), min(cw, w)
    return (h - ch) // 2, (w - cw) // 2, ch, cw


def random_resized_crop(
    t: ChannelTensor,
    out_h: int,
    out_w: int,
    scale_range=(0.2, 1.0),
    aspect_range=(3 / 4, 4 / 3),
    rng: CounterRng = None,
) -> ChannelTensor:
    h, w = _require_grid(t)
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    if not (0 < scale_range[0] <= scale_range[1] <= 1):
        raise ValueError(f"scale_range must lie in (0, 1], got {scale_range}")
    if not (0 < aspect_range[0] <= aspect_range[1]):
        raise ValueError(f"aspect_range must be positive and ordered, got {aspect_range}")
    if rng is None:
        raise ValueError("random_resized_crop needs an rng")
    top, left, ch, cw = sample_crop_window(h, w, scale_range, aspect_range, rng)
    win = _window(t, top, left, ch, cw)
    if (ch, cw) == (out_h, out_w):
        out = win
    else:
        out = resize_bilinear(win, out_h, out_w)
    return ChannelTensor(out.reshape(out_h * out_w, t.channels), (out_h, out_w))


def random_crop(t: ChannelTensor, out_h: int, out_w: int, rng: CounterRng) -> ChannelTensor:
    """Uniformly placed window of fixed size, no resampling."""
    h, w = _require_grid(t)
    if out_h > h or out_w > w or out_h < 1 or out_w < 1:
        raise ValueError(f"crop {out_h}x{out_w} does not fit grid {h}x{w}")
    top, left = rng.integers(0, h - out_h), rng.integers(0, w - out_w)
    win = _window(t, top, left, out_h, out_w)
    return ChannelTensor(win.reshape(out_h * out_w, t.channels), (out_h, out_w))


@dataclass(frozen=True)
class CenterCrop:
    out_h: int
    out_w: int

    def __call__(self, t, seeds, sample_idx, view, stage):
        return center_crop(t, self.out_h, self.out_w)

    def output_shape(self, shape):
        return self.out_h * self.out_w, shape[1]


@dataclass(frozen=True)
class RandomResizedCrop:
    out_h: int
    out_w: int
    scale_range: Tuple[float, float] = (0.2, 1.0)
    aspect_range: Tuple[float, float] = (3 / 4, 4 / 3)

    def __call__(self, t, seeds, sample_idx, view, stage):
        rng = seeds.rng(sample_idx, view, stage, _SPATIAL_STREAM)
        return random_resized_crop(t, self.out_h, self.out_w, self.scale_range, self.aspect_range, rng)

    def output_shape(self, shape):
        return self.out_h * self.out_w, shape[1]


@dataclass(frozen=True)
class RandomCrop:
    out_h: int
    out_w: int

    def __call__(self, t, seeds, sample_idx, view, stage):
        rng = seeds.rng(sample_idx, view, stage, _SPATIAL_STREAM)
        return random_crop(t, self.out_h, self.out_w, rng)

    def output_shape(self, shape):
        return self.out_h * self.out_w, shape[1]


@dataclass(frozen=True)
class RandomizedQuantize:
    config: QuantizerConfig = field(default_factory=QuantizerConfig)

    def __call__(self, t, seeds, sample_idx, view, stage):
        return quantize_tensor(t, self.config, seeds, sample_idx, view=view, stage=stage)

    def output_shape(self, shape):
        return shape


AugmentStage = Union[CenterCrop, RandomResizedCrop, RandomCrop, RandomizedQuantize]


@dataclass(frozen=True)
class AugmentPipeline:
    stages: Sequence[AugmentStage] = ()
    seeds: SeedPolicy = field(default_factory=SeedPolicy)

    def __call__(self, t: ChannelTensor, sample_idx: int, view: int = 0) -> ChannelTensor:
        for stage_idx, stage in enumerate(self.stages):
            t = stage(t, self.seeds, sample_idx, view, stage_idx)
        return t

    def output_shape(self, shape: Tuple[int, int]) -> Tuple[int, int]:
        for stage in self.stages:
            shape = stage.output_shape(shape)
        return shape

    def without_quantization(self) -> "AugmentPipeline":
        kept = [s for s in self.stages if not isinstance(s, RandomizedQuantize)]
        return AugmentPipeline(tuple(kept), self.seeds)


def make_views(t: ChannelTensor, pipeline: AugmentPipeline, sample_idx: int):
    """Two independently drawn augmented views of one sample (view indices 0 and 1)."""
    return pipeline(t, sample_idx, 0), pipeline(t, sample_idx, 1)


def augment_batch(pipeline: AugmentPipeline, data: np.ndarray, sample_indices, view: int = 0) -> np.ndarray:
    """Run ``pipeline`` over a (batch, seq_len, channels) array of 1D sequences.

    Rows are treated as grids of shape (seq_len, 1). Quantization stages run
    vectorized; crop stages run per row. Every row matches what the pipeline
    produces for that sample on its own.
    """
    x = np.asarray(data, dtype=np.float64)
    idx = np.asarray(sample_indices)
    for stage_idx, stage in enumerate(pipeline.stages):
        if isinstance(stage, RandomizedQuantize):
            x = quantize_batch(x, stage.config, pipeline.seeds, idx, view=view, stage=stage_idx)
        else:
            x = np.stack(
                [
                    stage(ChannelTensor(row, (row.shape[0], 1)), pipeline.seeds, int(i), view, stage_idx).data
                    for row, i in zip(x, idx)
                ]
            )
    return x
