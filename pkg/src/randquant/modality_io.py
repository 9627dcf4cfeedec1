"""File codecs between real formats and ChannelTensor.

Supported containers:

* binary portable pixmaps: P6 (RGB) and P5 (gray), 8-bit, values mapped to [0, 1]
* RIFF WAVE, 16-bit PCM mono, samples scaled by 1/32768
* ASCII XYZ point clouds, one ``x y z`` triple per line
* numeric CSV, rows are sequence positions, columns are channels, optional header

Each codec has a bytes-level ``decode_*``/``encode_*`` pair and path-level
``read_*``/``write_*`` wrappers. Parse failures raise :class:`CodecError`
carrying the byte offset and the expected token.
"""

from __future__ import annotations

import csv
import io
import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from randquant.quantizer import QuantizerConfig, quantize_tensor
from randquant.rng import SeedPolicy
from randquant.tensor import ChannelTensor

FORMATS = ("ppm", "pgm", "wav", "xyz", "csv")


class CodecError(ValueError):
    def __init__(self, offset: int, expected: str, detail: str = ""):
        self.offset = offset
        self.expected = expected
        msg = f"byte {offset}: expected {expected}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


# --------------------------------------------------------------------------
# portable pixmaps


def _pnm_token(data: bytes, pos: int, what: str) -> Tuple[bytes, int, int]:
    n = len(data)
    while pos < n:
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        elif data[pos : pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise CodecError(start, what, "unexpected end of header")
    return data[start:pos], start, pos


def decode_pnm(data: bytes) -> ChannelTensor:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise CodecError(0, "magic 'P5' or 'P6'", f"found {magic!r}")
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pnm_token(data, pos, name)
        if not tok.isdigit() or int(tok) < 1:
            raise CodecError(start, f"positive integer {name}", f"found {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise CodecError(start, "maxval 255", f"found {maxval}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise CodecError(pos, "single whitespace byte before raster")
    pos += 1
    size = width * height * channels
    payload = data[pos:]
    if len(payload) < size:
        raise CodecError(len(data), f"{size} raster bytes", f"truncated, got {len(payload)}")
    if len(payload) > size:
        raise CodecError(pos + size, "end of file", f"{len(payload) - size} trailing bytes")
    raster = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return ChannelTensor(raster.reshape(height * width, channels), (height, width))


def encode_pnm(t: ChannelTensor) -> bytes:
    if t.grid_shape is None:
        raise ValueError("pixmap output needs a grid_shape")
    if t.channels not in (1, 3):
        raise ValueError(f"pixmaps carry 1 or 3 channels, got {t.channels}")
    h, w = t.grid_shape
    codes = np.clip(round_half_away(t.data * 255.0), 0, 255).astype(np.uint8)
    magic = b"P6" if t.channels == 3 else b"P5"
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + codes.tobytes()


# --------------------------------------------------------------------------
# WAV


@dataclass(frozen=True, eq=False)
class WavClip:
    sample_rate: int
    samples: np.ndarray

    def to_tensor(self) -> ChannelTensor:
        n = len(self.samples)
        return ChannelTensor(np.asarray(self.samples, dtype=np.float64)[:, None], (n, 1))

    @classmethod
    def from_tensor(cls, t: ChannelTensor, sample_rate: int) -> "WavClip":
        if t.channels != 1:
            raise ValueError("only mono audio is supported")
        return cls(sample_rate, t.data[:, 0].copy())


def decode_wav(data: bytes) -> WavClip:
    if len(data) < 12:
        raise CodecError(len(data), "12-byte RIFF header", "truncated")
    if data[:4] != b"RIFF":
        raise CodecError(0, "'RIFF'", f"found {data[:4]!r}")
    if data[8:12] != b"WAVE":
        raise CodecError(8, "'WAVE'", f"found {data[8:12]!r}")
    pos = 12
    fmt = None
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise CodecError(len(data), f"{size} bytes of chunk {cid!r}", "truncated")
        if cid == b"fmt ":
            if size < 16:
                raise CodecError(pos + 4, "fmt chunk of at least 16 bytes", f"size {size}")
            tag, nch, rate, _byte_rate, _align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag != 1:
                raise CodecError(body, "PCM format tag 1", f"found {tag}")
            if nch != 1:
                raise CodecError(body + 2, "1 channel (mono)", f"found {nch}")
            if bits != 16:
                raise CodecError(body + 14, "16 bits per sample", f"found {bits}")
            fmt = rate
        elif cid == b"data":
            if fmt is None:
                raise CodecError(pos, "'fmt ' chunk before 'data'")
            if size % 2:
                raise CodecError(pos + 4, "even data length for 16-bit samples", f"size {size}")
            codes = np.frombuffer(data, dtype="<i2", count=size // 2, offset=body)
            if codes.size == 0:
                raise CodecError(body, "at least one sample")
            return WavClip(fmt, codes.astype(np.float64) / 32768.0)
        pos = body + size + (size & 1)
    raise CodecError(pos, "'data' chunk", "end of file")


def encode_wav(clip: WavClip) -> bytes:
    x = np.asarray(clip.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite samples")
    codes = np.clip(round_half_away(x * 32768.0), -32768, 32767).astype("<i2")
    payload = codes.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,
        1,
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    return header + payload


# --------------------------------------------------------------------------
# text formats


def _parse_real(tok: str, offset: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise CodecError(offset, "real number", f"found {tok!r}") from None
    if not math.isfinite(v):
        raise CodecError(offset, "finite real number", f"found {tok!r}")
    return v


_TOKEN = re.compile(rb"\S+")


def _fmt_real(v: float) -> str:
    return repr(float(v))


def decode_xyz(data: bytes) -> ChannelTensor:
    rows = []
    offset = 0
    for line in data.splitlines(keepends=True):
        toks = list(_TOKEN.finditer(line))
        if toks:
            if len(toks) != 3:
                raise CodecError(offset, "3 coordinates per line", f"found {len(toks)}")
            rows.append([_parse_real(m.group().decode("ascii", "replace"), offset + m.start()) for m in toks])
        offset += len(line)
    if not rows:
        raise CodecError(0, "at least one point")
    return ChannelTensor(np.array(rows))


def encode_xyz(t: ChannelTensor) -> bytes:
    if t.channels != 3:
        raise ValueError(f"point clouds have 3 channels, got {t.channels}")
    lines = [" ".join(_fmt_real(v) for v in row) for row in t.data]
    return ("\n".join(lines) + "\n").encode("ascii")


def decode_csv(data: bytes) -> Tuple[ChannelTensor, Optional[List[str]]]:
    """Decode numeric CSV. A first row containing any non-numeric field is a header."""
    text = data.decode("utf-8")
    lines = text.splitlines(keepends=True)
    starts = np.cumsum([0] + [len(line.encode("utf-8")) for line in lines])
    header = None
    rows = []
    width = None
    for i, fields in enumerate(csv.reader(lines)):
        if not fields:
            continue
        offset = int(starts[i])
        if i == 0 and header is None:
            try:
                [float(f) for f in fields]
            except ValueError:
                header = [f.strip() for f in fields]
                width = len(header)
                continue
        if width is None:
            width = len(fields)
        if len(fields) != width:
            raise CodecError(offset, f"{width} fields per row", f"found {len(fields)}")
        rows.append([_parse_real(f, offset) for f in fields])
    if not rows:
        raise CodecError(len(data), "at least one data row")
    return ChannelTensor(np.array(rows)), header


def encode_csv(t: ChannelTensor, header: Optional[List[str]] = None) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        if len(header) != t.channels:
            raise ValueError("header width does not match channel count")
        writer.writerow(header)
    for row in t.data:
        writer.writerow([_fmt_real(v) for v in row])
    return buf.getvalue().encode("utf-8")


# --------------------------------------------------------------------------
# path-level wrappers


def read_pnm(path) -> ChannelTensor:
    return decode_pnm(Path(path).read_bytes())


def write_pnm(path, t: ChannelTensor) -> None:
    Path(path).write_bytes(encode_pnm(t))


def read_wav(path) -> WavClip:
    return decode_wav(Path(path).read_bytes())


def write_wav(path, clip: WavClip) -> None:
    Path(path).write_bytes(encode_wav(clip))


def read_xyz(path) -> ChannelTensor:
    return decode_xyz(Path(path).read_bytes())


def write_xyz(path, t: ChannelTensor) -> None:
    Path(path).write_bytes(encode_xyz(t))


def read_csv(path) -> Tuple[ChannelTensor, Optional[List[str]]]:
    return decode_csv(Path(path).read_bytes())


def write_csv(path, t: ChannelTensor, header: Optional[List[str]] = None) -> None:
    Path(path).write_bytes(encode_csv(t, header))


@dataclass
class Decoded:
    """A decoded file plus whatever is needed to re-encode it in the same container."""

    fmt: str
    tensor: ChannelTensor
    sample_rate: Optional[int] = None
    header: Optional[List[str]] = None

    def encode(self, t: ChannelTensor) -> bytes:
        if self.fmt in ("ppm", "pgm"):
            return encode_pnm(t)
        if self.fmt == "wav":
            return encode_wav(WavClip.from_tensor(t, self.sample_rate))
        if self.fmt == "xyz":
            return encode_xyz(t)
        return encode_csv(t, self.header)


def decode_any(data: bytes, fmt: str) -> Decoded:
    if fmt in ("ppm", "pgm"):
        t = decode_pnm(data)
        want = 3 if fmt == "ppm" else 1
        if t.channels != want:
            raise CodecError(0, "'P6'" if fmt == "ppm" else "'P5'", f"{fmt} file has {t.channels} channels")
        return Decoded(fmt, t)
    if fmt == "wav":
        clip = decode_wav(data)
        return Decoded(fmt, clip.to_tensor(), sample_rate=clip.sample_rate)
    if fmt == "xyz":
        return Decoded(fmt, decode_xyz(data))
    if fmt == "csv":
        t, header = decode_csv(data)
        return Decoded(fmt, t, header=header)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def quantize_file(in_path, fmt: str, cfg: QuantizerConfig, seed: int, out_path, sample_idx: int = 0) -> None:
    """Decode, quantize every channel, re-encode in the same container."""
    decoded = decode_any(Path(in_path).read_bytes(), fmt)
    out = quantize_tensor(decoded.tensor, cfg, SeedPolicy(seed), sample_idx)
    Path(out_path).write_bytes(decoded.encode(out))
