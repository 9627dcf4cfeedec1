"""Randomized channel-wise quantization as a data augmentation."""

from randquant.tensor import ChannelStats, ChannelTensor, channel_stats, from_grid, to_grid
from randquant.rng import CounterRng, SeedPolicy
from randquant.quantizer import (
    Quantizer,
    QuantizerConfig,
    RandomMode,
    apply,
    apply_brute_force,
    build_quantizer,
    quantize_tensor,
)

__all__ = [
    "ChannelStats",
    "ChannelTensor",
    "CounterRng",
    "Quantizer",
    "QuantizerConfig",
    "RandomMode",
    "SeedPolicy",
    "apply",
    "apply_brute_force",
    "build_quantizer",
    "channel_stats",
    "from_grid",
    "quantize_tensor",
    "to_grid",
]

__version__ = "0.1.0"
