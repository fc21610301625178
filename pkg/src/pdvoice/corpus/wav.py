"""RIFF/WAVE reader and writer for integer PCM (16- and 24-bit)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..frontend import AudioClip

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
SUPPORTED_BITS = (16, 24)


class WavError(ValueError):
    """Malformed or unsupported WAV data; the message names the byte offset."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


def _chunks(data: bytes):
    if len(data) < 12:
        raise WavError(0, f"file is {len(data)} bytes, too short for a RIFF header")
    if data[0:4] != b"RIFF":
        raise WavError(0, f"expected 'RIFF', found {data[0:4]!r}")
    if data[8:12] != b"WAVE":
        raise WavError(8, f"expected 'WAVE', found {data[8:12]!r}")
    riff_end = min(len(data), 8 + struct.unpack_from("<I", data, 4)[0])
    pos = 12
    while pos + 8 <= riff_end:
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if body + size > len(data):
            raise WavError(
                body, f"chunk {cid.decode('latin-1')!r} declares {size} bytes "
                f"but only {len(data) - body} remain (truncated)"
            )
        yield cid, body, size
        pos = body + size + (size & 1)
    if pos < riff_end and pos + 8 > riff_end:
        raise WavError(pos, "trailing bytes too short for a chunk header")


def _parse_fmt(data: bytes, offset: int, size: int):
    if size < 16:
        raise WavError(offset, f"fmt chunk is {size} bytes, need at least 16")
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", data, offset)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if size < 40:
            raise WavError(offset, "WAVE_FORMAT_EXTENSIBLE fmt chunk is shorter than 40 bytes")
        tag = struct.unpack_from("<H", data, offset + 24)[0]
    if tag != WAVE_FORMAT_PCM:
        raise WavError(offset, f"unsupported encoding (format tag {tag:#06x}); only integer PCM is read")
    if channels < 1:
        raise WavError(offset + 2, "channel count is zero")
    if rate == 0:
        raise WavError(offset + 4, "sample rate is zero")
    if bits not in SUPPORTED_BITS:
        raise WavError(offset + 14, f"{bits}-bit samples are not supported (16 or 24 only)")
    if block_align != channels * bits // 8:
        raise WavError(offset + 12, f"block align {block_align} does not match {channels} x {bits}-bit")
    return channels, rate, bits


def decode_pcm(raw: bytes, bits: int) -> np.ndarray:
    """Little-endian signed PCM to integers."""
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.int32)
    b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
    return np.where(ints >= 1 << 23, ints - (1 << 24), ints)


def read_wav_ints(path) -> tuple[np.ndarray, int, int]:
    """(frames x channels integer array, sample rate, bits per sample)."""
    data = Path(path).read_bytes()
    fmt = None
    payload = None
    for cid, offset, size in _chunks(data):
        if cid == b"fmt ":
            fmt = _parse_fmt(data, offset, size)
        elif cid == b"data":
            if fmt is None:
                raise WavError(offset - 8, "data chunk precedes the fmt chunk")
            payload = (offset, size)
            break
    if fmt is None:
        raise WavError(12, "no fmt chunk found")
    if payload is None:
        raise WavError(12, "no data chunk found")
    channels, rate, bits = fmt
    offset, size = payload
    block = channels * bits // 8
    if size % block:
        raise WavError(offset, f"data chunk of {size} bytes is not a whole number of {block}-byte frames")
    if size == 0:
        raise WavError(offset, "data chunk is empty")
    ints = decode_pcm(data[offset : offset + size], bits)
    return ints.reshape(-1, channels), rate, bits


def load_wav(path) -> AudioClip:
    """Mono clip scaled to [-1, 1); multi-channel audio is averaged."""
    ints, rate, bits = read_wav_ints(path)
    samples = ints.astype(np.float64) / float(1 << (bits - 1))
    if samples.shape[1] > 1:
        samples = samples.mean(axis=1)
    else:
        samples = samples[:, 0]
    return AudioClip(samples, rate)


def write_wav(path, samples, sample_rate: int, bits: int = 16) -> None:
    """Write float samples in [-1, 1) as integer PCM; 2-D input is frames x channels."""
    if bits not in SUPPORTED_BITS:
        raise ValueError(f"bits must be one of {SUPPORTED_BITS}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    scale = 1 << (bits - 1)
    ints = np.clip(np.round(x * scale), -scale, scale - 1).astype(np.int64)
    write_wav_ints(path, ints, sample_rate, bits)


def write_wav_ints(path, ints, sample_rate: int, bits: int = 16) -> None:
    ints = np.asarray(ints, dtype=np.int64)
    if ints.ndim == 1:
        ints = ints[:, None]
    channels = ints.shape[1]
    if bits == 16:
        raw = ints.astype("<i2").tobytes()
    else:
        u = (ints.reshape(-1) & 0xFFFFFF).astype(np.uint32)
        raw = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, channels, int(sample_rate),
                      int(sample_rate) * block, block, bits)
    pad = b"\x00" if len(raw) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(raw)) + raw + pad
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
