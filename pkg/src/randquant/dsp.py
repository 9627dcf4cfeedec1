"""Radix-2 FFT, STFT and log-mel spectrograms for the audio path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from randquant.modality_io import WavClip
from randquant.tensor import ChannelTensor

LOG_EPS = 1e-6


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def fft(signal, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 DFT along the last axis; the inverse is scaled by 1/N."""
    x = np.asarray(signal, dtype=np.complex128)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((np.arange(n) >> b) & 1) << (bits - 1 - b)
    x = x[..., rev]
    sign = 1.0 if inverse else -1.0
    lead = x.shape[:-1]
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        blocks = x.reshape(*lead, n // m, m)
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        x = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        m *= 2
    if inverse:
        x = x / n
    return x


def naive_dft(signal, inverse: bool = False) -> np.ndarray:
    x = np.asarray(signal, dtype=np.complex128)
    n = len(x)
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    out = np.exp(sign * 2j * np.pi * np.outer(k, k) / n) @ x
    return out / n if inverse else out


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    hop: int = 160

    def __post_init__(self):
        if self.fft_size < 2 or not _is_pow2(self.fft_size):
            raise ValueError(f"fft_size must be a power of two >= 2, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must lie in (0, fft_size], got {self.hop}")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 64
    f_min: float = 60.0
    f_max: float = 7800.0
    sample_rate: int = 16000

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError(f"need 0 <= f_min < f_max <= sample_rate/2, got {self.f_min}, {self.f_max}")


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(mel: MelConfig, fft_size: int) -> np.ndarray:
    """Triangular HTK-mel filters, shape (n_mels, fft_size // 2 + 1), unit peak."""
    edges = mel_to_hz(np.linspace(hz_to_mel(mel.f_min), hz_to_mel(mel.f_max), mel.n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * mel.sample_rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def stft_frames(samples, cfg: StftConfig) -> np.ndarray:
    """Hann-windowed frames, shape (n_frames, fft_size). No padding."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < cfg.fft_size:
        raise ValueError(f"clip of {len(x)} samples is shorter than one {cfg.fft_size}-sample frame")
    n_frames = 1 + (len(x) - cfg.fft_size) // cfg.hop
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return x[idx] * hann(cfg.fft_size)


def stft(samples, cfg: StftConfig) -> np.ndarray:
    """Full complex spectra of every frame, shape (n_frames, fft_size)."""
    return fft(stft_frames(samples, cfg))


def power_spectrogram(samples, cfg: StftConfig) -> np.ndarray:
    spec = stft(samples, cfg)[:, : cfg.fft_size // 2 + 1]
    return spec.real**2 + spec.imag**2


def log_mel_spectrogram(clip: WavClip, stft_cfg: StftConfig = StftConfig(), mel: MelConfig = MelConfig()) -> ChannelTensor:
    """Log-mel spectrogram with time frames on the sequential axis and mel bands as channels."""
    if clip.sample_rate != mel.sample_rate:
        raise ValueError(f"clip rate {clip.sample_rate} Hz does not match configured {mel.sample_rate} Hz")
    power = power_spectrogram(clip.samples, stft_cfg)
    bands = power @ mel_filterbank(mel, stft_cfg.fft_size).T
    logmel = np.log(bands + LOG_EPS)
    return ChannelTensor(logmel, (logmel.shape[0], 1))
