"""Sequential x channel data model shared by every modality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """A dense (seq_len, channels) float64 matrix.

    ``grid_shape`` records the (height, width) layout when the sequential
    axis was flattened row-major from a 2D grid.
    """

    data: np.ndarray
    grid_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise ValueError(f"expected a 2D (seq_len, channels) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"empty tensor of shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor contains non-finite values")
        if self.grid_shape is not None:
            h, w = (int(v) for v in self.grid_shape)
            if h < 1 or w < 1 or h * w != data.shape[0]:
                raise ValueError(f"grid_shape {self.grid_shape} does not match seq_len {data.shape[0]}")
            object.__setattr__(self, "grid_shape", (h, w))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def seq_len(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "ChannelTensor":
        """Same layout, new values."""
        return ChannelTensor(data, self.grid_shape)

    def __eq__(self, other):
        if not isinstance(other, ChannelTensor):
            return NotImplemented
        return self.grid_shape == other.grid_shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"ChannelTensor(seq_len={self.seq_len}, channels={self.channels}, grid_shape={self.grid_shape})"


@dataclass(frozen=True)
class ChannelStats:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        if np.any(self.minimum > self.maximum):
            raise ValueError("channel minimum exceeds maximum")


def channel_stats(t: ChannelTensor) -> ChannelStats:
    if t.seq_len < 1:
        raise ValueError("channel_stats of an empty tensor")
    return ChannelStats(t.data.min(axis=0), t.data.max(axis=0))


def from_grid(pixels) -> ChannelTensor:
    """Flatten an (H, W, C) array row-major into a ChannelTensor."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"expected an (H, W, C) grid, got shape {arr.shape}")
    h, w, c = arr.shape
    return ChannelTensor(arr.reshape(h * w, c), (h, w))


def to_grid(t: ChannelTensor) -> np.ndarray:
    if t.grid_shape is None:
        raise ValueError("tensor has no grid_shape")
    h, w = t.grid_shape
    return t.data.reshape(h, w, t.channels).copy()
