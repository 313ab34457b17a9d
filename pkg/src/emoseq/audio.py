"""WAV reading/writing and sample-rate conversion.

The reader is a small RIFF parser rather than ``wave`` from the stdlib so
that broken headers and compressed codecs can be reported as distinct
errors, and so 24-bit and float payloads are handled uniformly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .errors import DataError, FormatError, TooShortError, UnsupportedCodecError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class WaveForm:
    """Mono audio: float64 samples in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("waveform contains non-finite samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _decode_pcm(raw: bytes, bits: int) -> np.ndarray:
    if bits == 8:
        # 8-bit WAV is unsigned, midpoint 128.
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        val = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        return val.astype(np.float64) / float(1 << 23)
    if bits == 32:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    raise FormatError(f"unsupported PCM sample width: {bits} bits")


def _decode_float(raw: bytes, bits: int) -> np.ndarray:
    if bits == 32:
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if bits == 64:
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)
    raise FormatError(f"unsupported float sample width: {bits} bits")


def read_wav(path) -> WaveForm:
    """Read a RIFF/WAVE file into a mono WaveForm.

    Integer PCM (8/16/24/32 bit) and IEEE float payloads are accepted;
    multichannel audio is averaged down to mono. Compressed codecs raise
    UnsupportedCodecError, structural problems raise FormatError.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body_start = pos + 8
        if body_start + size > len(blob):
            raise FormatError(f"{path}: chunk {chunk_id!r} extends past end of file")
        body = blob[body_start : body_start + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise FormatError(f"{path}: fmt chunk too small ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise FormatError(f"{path}: missing data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format == WAVE_FORMAT_EXTENSIBLE:
        raise UnsupportedCodecError(f"{path}: WAVE_FORMAT_EXTENSIBLE is not supported")
    if audio_format not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedCodecError(
            f"{path}: compressed or non-PCM codec (format tag 0x{audio_format:04x})"
        )
    if n_channels < 1:
        raise FormatError(f"{path}: channel count {n_channels} in fmt chunk")
    if sample_rate <= 0:
        raise FormatError(f"{path}: sample rate {sample_rate} in fmt chunk")

    bytes_per_sample = bits // 8
    if bits % 8 != 0 or bytes_per_sample == 0:
        raise FormatError(f"{path}: sample width {bits} bits is not byte-aligned")
    frame_bytes = bytes_per_sample * n_channels
    if len(data) % frame_bytes != 0:
        raise FormatError(f"{path}: data chunk is not a whole number of sample frames")

    if audio_format == WAVE_FORMAT_PCM:
        samples = _decode_pcm(data, bits)
    else:
        samples = _decode_float(data, bits)
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return WaveForm(samples=samples, sample_rate=sample_rate)


def write_wav(path, w: WaveForm) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.round(np.clip(w.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    data = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, WAVE_FORMAT_PCM, 1, w.sample_rate, w.sample_rate * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(data))
    with open(path, "wb") as fh:
        fh.write(header + data)


def resample(w: WaveForm, target_rate: int) -> WaveForm:
    """Resample with polyphase windowed-sinc filtering (identity if rates match)."""
    if target_rate <= 0:
        raise DataError(f"target rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return w
    if len(w.samples) == 0:
        return WaveForm(samples=w.samples.copy(), sample_rate=target_rate)
    g = math.gcd(target_rate, w.sample_rate)
    out = resample_poly(w.samples, target_rate // g, w.sample_rate // g)
    return WaveForm(samples=np.asarray(out, dtype=np.float64), sample_rate=target_rate)


def require_min_duration(w: WaveForm, seconds: float, what: str) -> None:
    if w.duration < seconds:
        raise TooShortError(
            f"{what} needs at least {seconds:g} s of audio, got {w.duration:.4f} s"
        )
