"""Small convolutional frame encoder with hand-derived gradients.

Two 3x3 stride-2 valid convolutions with tanh, then a linear map to the
embedding dimension: (3, 40, 40) -> (c1, 19, 19) -> (c2, 9, 9) -> d.
Convolutions run as patch-matrix products (im2col); the backward pass
scatter-adds patch gradients back into image space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError

KERNEL = 3
STRIDE = 2
IN_CHANNELS = 3
IN_SIZE = 40


def conv_out_size(size: int) -> int:
    return (size - KERNEL) // STRIDE + 1


CONV1_SIZE = conv_out_size(IN_SIZE)  # 19
CONV2_SIZE = conv_out_size(CONV1_SIZE)  # 9


@dataclass
class EncoderParams:
    k1: np.ndarray  # (c1, 3, 3, 3)
    b1: np.ndarray
    k2: np.ndarray  # (c2, c1, 3, 3)
    b2: np.ndarray
    w_out: np.ndarray  # (d, c2 * 9 * 9)
    b_out: np.ndarray

    @property
    def embed_dim(self) -> int:
        return self.w_out.shape[0]

    def arrays(self) -> dict:
        return {
            "enc.k1": self.k1,
            "enc.b1": self.b1,
            "enc.k2": self.k2,
            "enc.b2": self.b2,
            "enc.w_out": self.w_out,
            "enc.b_out": self.b_out,
        }


def init_encoder(rng: np.random.Generator, c1: int, c2: int, embed_dim: int) -> EncoderParams:
    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return EncoderParams(
        k1=u(c1, IN_CHANNELS, KERNEL, KERNEL),
        b1=u(c1),
        k2=u(c2, c1, KERNEL, KERNEL),
        b2=u(c2),
        w_out=u(embed_dim, c2 * CONV2_SIZE * CONV2_SIZE),
        b_out=u(embed_dim),
    )


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, P, C*9) patch matrix for 3x3 stride-2 windows."""
    win = np.lib.stride_tricks.sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))
    win = win[:, :, ::STRIDE, ::STRIDE]  # (B, C, H2, W2, 3, 3)
    b, c, h2, w2 = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b, h2 * w2, c * KERNEL * KERNEL)


@lru_cache(maxsize=8)
def _col2im_index(channels: int, size: int) -> np.ndarray:
    """Flat input index for every (patch, patch-element) pair."""
    out = conv_out_size(size)
    idx = np.empty((out * out, channels * KERNEL * KERNEL), dtype=np.intp)
    p = 0
    for i in range(out):
        for j in range(out):
            e = 0
            for c in range(channels):
                for u in range(KERNEL):
                    for v in range(KERNEL):
                        idx[p, e] = c * size * size + (STRIDE * i + u) * size + (STRIDE * j + v)
                        e += 1
            p += 1
    idx.setflags(write=False)
    return idx


def _col2im(dpatches: np.ndarray, channels: int, size: int) -> np.ndarray:
    idx = _col2im_index(channels, size)
    b = dpatches.shape[0]
    flat = np.zeros((b, channels * size * size))
    np.add.at(flat, (np.arange(b)[:, None, None], idx[None, :, :]), dpatches)
    return flat.reshape(b, channels, size, size)


def encoder_forward(p: EncoderParams, frames: np.ndarray):
    """Encode (T, 3, 40, 40) frames to (T, d) embeddings; returns cache for backward."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3:
        frames = frames[None]
    if frames.ndim != 4 or frames.shape[1:] != (IN_CHANNELS, IN_SIZE, IN_SIZE):
        raise DimensionError(
            f"frames must be (T, {IN_CHANNELS}, {IN_SIZE}, {IN_SIZE}), got {frames.shape}"
        )
    c1 = p.k1.shape[0]
    c2 = p.k2.shape[0]
    patches1 = _im2col(frames)
    a1 = np.tanh(patches1 @ p.k1.reshape(c1, -1).T + p.b1)  # (T, P1, c1)
    img1 = a1.transpose(0, 2, 1).reshape(-1, c1, CONV1_SIZE, CONV1_SIZE)
    patches2 = _im2col(img1)
    a2 = np.tanh(patches2 @ p.k2.reshape(c2, -1).T + p.b2)  # (T, P2, c2)
    flat = a2.transpose(0, 2, 1).reshape(len(frames), -1)  # channel-major flatten
    emb = flat @ p.w_out.T + p.b_out
    cache = (patches1, a1, patches2, a2, flat)
    return emb, cache


def encoder_backward(p: EncoderParams, cache, demb: np.ndarray) -> dict:
    """Gradients of all encoder parameters given d loss / d embeddings."""
    patches1, a1, patches2, a2, flat = cache
    c1 = p.k1.shape[0]
    c2 = p.k2.shape[0]
    dw_out = demb.T @ flat
    db_out = demb.sum(axis=0)
    dflat = demb @ p.w_out
    da2 = dflat.reshape(len(demb), c2, -1).transpose(0, 2, 1)
    dz2 = da2 * (1.0 - a2**2)
    dk2 = np.einsum("bpc,bpk->ck", dz2, patches2).reshape(p.k2.shape)
    db2 = dz2.sum(axis=(0, 1))
    dpatches2 = dz2 @ p.k2.reshape(c2, -1)
    dimg1 = _col2im(dpatches2, c1, CONV1_SIZE)
    da1 = dimg1.reshape(len(demb), c1, -1).transpose(0, 2, 1)
    dz1 = da1 * (1.0 - a1**2)
    dk1 = np.einsum("bpc,bpk->ck", dz1, patches1).reshape(p.k1.shape)
    db1 = dz1.sum(axis=(0, 1))
    return {
        "enc.k1": dk1,
        "enc.b1": db1,
        "enc.k2": dk2,
        "enc.b2": db2,
        "enc.w_out": dw_out,
        "enc.b_out": db_out,
    }


def encode_frame(p: EncoderParams, frame: np.ndarray) -> np.ndarray:
    """Embedding of a single (3, 40, 40) frame."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (IN_CHANNELS, IN_SIZE, IN_SIZE):
        raise DimensionError(
            f"frame must be ({IN_CHANNELS}, {IN_SIZE}, {IN_SIZE}), got {frame.shape}"
        )
    emb, _ = encoder_forward(p, frame[None])
    return emb[0]
