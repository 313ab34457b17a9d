"""Flat binary tensor files (little-endian float32) and CSV dumps.

Two containers share the same layout, magic + uint32 header + payload:

* frame tensors:      magic ``EMSQ1``, header (n_frames, 3, 40, 40)
* embedding sequences: magic ``EMSE1``, header (n_steps, dim)
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import FormatError
from .frontend import FRAME_COLS, FrameSequence, SpectroFrame, frames_to_array
from .ioutil import atomic_write_bytes

FRAME_MAGIC = b"EMSQ1"
EMBED_MAGIC = b"EMSE1"


def _pack(magic: bytes, dims: tuple[int, ...], payload: np.ndarray) -> bytes:
    header = magic + struct.pack(f"<{len(dims)}I", *dims)
    return header + np.ascontiguousarray(payload, dtype="<f4").tobytes()


def _unpack(path, blob: bytes, magic: bytes, n_dims: int):
    if len(blob) < len(magic) + 4 * n_dims or blob[: len(magic)] != magic:
        raise FormatError(f"{path}: not a {magic.decode()} tensor file")
    dims = struct.unpack_from(f"<{n_dims}I", blob, len(magic))
    start = len(magic) + 4 * n_dims
    count = int(np.prod(dims))
    if len(blob) - start != 4 * count:
        raise FormatError(
            f"{path}: payload has {len(blob) - start} bytes, expected {4 * count}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=start).reshape(dims)
    return data.astype(np.float64)


def write_frame_tensor(path, frames) -> None:
    """Serialize a FrameSequence (or frame iterable) to an EMSQ1 file."""
    arr = frames_to_array(frames)
    atomic_write_bytes(path, _pack(FRAME_MAGIC, arr.shape, arr))


def read_frame_tensor(path) -> np.ndarray:
    """Load an EMSQ1 file as a (T, 3, 40, 40) float64 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    arr = _unpack(path, blob, FRAME_MAGIC, 4)
    if arr.ndim != 4 or arr.shape[1:] != (3, FRAME_COLS, FRAME_COLS):
        raise FormatError(f"{path}: unexpected frame tensor shape {arr.shape}")
    return arr


def write_embedding_tensor(path, embeddings: np.ndarray) -> None:
    """Serialize a (T, dim) embedding sequence to an EMSE1 file."""
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"embedding sequence must be 2-D, got shape {arr.shape}")
    atomic_write_bytes(path, _pack(EMBED_MAGIC, arr.shape, arr))


def read_embedding_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    return _unpack(path, blob, EMBED_MAGIC, 2)


def frames_to_csv(frames) -> str:
    """Human-inspectable dump: one row per (frame, channel, band row)."""
    seq = frames.frames if isinstance(frames, FrameSequence) else tuple(frames)
    out = io.StringIO()
    cols = ",".join(f"c{i}" for i in range(FRAME_COLS))
    out.write(f"frame,start_time,channel,row,{cols}\n")
    for idx, frame in enumerate(seq):
        for ch in range(3):
            for row in range(FRAME_COLS):
                vals = ",".join(repr(float(v)) for v in frame.channels[ch, row])
                out.write(f"{idx},{frame.start_time!r},{ch},{row},{vals}\n")
    return out.getvalue()


def write_frames_csv(path, frames) -> None:
    atomic_write_bytes(path, frames_to_csv(frames).encode("utf-8"))


def read_frames_from_tensor(path):
    """Rebuild SpectroFrames (with 0.2 s spaced timestamps) from an EMSQ1 file."""
    arr = read_frame_tensor(path)
    return FrameSequence(
        frames=tuple(
            SpectroFrame(channels=arr[i], start_time=0.2 * i) for i in range(len(arr))
        )
    )
