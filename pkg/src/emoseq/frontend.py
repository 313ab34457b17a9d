"""Spectrogram frontend: raw audio to 3x40x40 frame tensors and 2 s intervals.

The processing chain is fixed: 16 kHz input, 20 ms Hann window with 10 ms
hop, power bins mean-pooled into 40 linear bands over 0-4000 Hz, natural
log with a 1e-10 floor. Frames are 40 columns (0.4 s) sliding by 20
columns, so the frame rate is 5 Hz; each frame carries three channels:
the raw log values, their min-max normalization and a histogram-equalized
copy, both computed per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import WaveForm
from .errors import DataError, DimensionError, TooShortError

WORK_RATE = 16000
WINDOW_SAMPLES = 320  # 20 ms at 16 kHz
HOP_SAMPLES = 160  # 10 ms
FFT_SIZE = 512
N_BANDS = 40
MAX_FREQ_HZ = 4000.0
LOG_FLOOR = 1e-10
FRAME_COLS = 40  # 0.4 s of columns per frame
FRAME_HOP_COLS = 20  # 50% overlap -> one frame every 0.2 s
FRAME_RATE = 5.0
INTERVAL_FRAMES = 10  # 2 s of frames
MIN_TAIL_FRAMES = 2
EQ_LEVELS = 256


@dataclass(frozen=True)
class Spectrogram:
    """Log-power matrix, rows = frequency bands, columns = 10 ms steps."""

    values: np.ndarray
    band_edges: np.ndarray = field(
        default_factory=lambda: np.linspace(0.0, MAX_FREQ_HZ, N_BANDS + 1)
    )
    column_hop: float = 0.010
    window: float = 0.020

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != N_BANDS:
            raise DimensionError(
                f"spectrogram must be {N_BANDS} x columns, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError("spectrogram contains non-finite values")

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SpectroFrame:
    """One 0.4 s frame: channels (3, 40, 40) = (log, norm, equalized)."""

    channels: np.ndarray
    start_time: float

    def __post_init__(self):
        if self.channels.shape != (3, FRAME_COLS, FRAME_COLS):
            raise DimensionError(
                f"frame channels must be (3, {FRAME_COLS}, {FRAME_COLS}), "
                f"got {self.channels.shape}"
            )


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    frame_rate: float = FRAME_RATE

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Interval:
    """Up to 2 s worth of consecutive frames from one utterance."""

    frames: tuple
    utterance_id: str
    start: float
    duration: float


def _band_pool_matrix() -> np.ndarray:
    """(n_used_bins, 40) matrix that mean-pools power bins into bands."""
    freqs = np.fft.rfftfreq(FFT_SIZE, d=1.0 / WORK_RATE)
    used = freqs <= MAX_FREQ_HZ
    edges = np.linspace(0.0, MAX_FREQ_HZ, N_BANDS + 1)
    band = np.searchsorted(edges, freqs[used], side="right") - 1
    band = np.minimum(band, N_BANDS - 1)  # the bin at exactly 4000 Hz
    pool = np.zeros((int(used.sum()), N_BANDS))
    pool[np.arange(len(band)), band] = 1.0
    return pool / pool.sum(axis=0, keepdims=True)


_POOL = _band_pool_matrix()
_HANN = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(WINDOW_SAMPLES) / WINDOW_SAMPLES)


def spectrogram_columns(n_samples: int) -> int:
    """Closed-form column count for an input of n_samples at 16 kHz."""
    return (n_samples - WINDOW_SAMPLES) // HOP_SAMPLES + 1


def compute_spectrogram(w: WaveForm) -> Spectrogram:
    """Short-time log power in 40 linear bands; input must be 16 kHz mono."""
    if w.sample_rate != WORK_RATE:
        raise DataError(
            f"spectrogram expects {WORK_RATE} Hz input, got {w.sample_rate} Hz; "
            "resample first"
        )
    if len(w.samples) < WINDOW_SAMPLES:
        raise TooShortError(
            f"need at least {WINDOW_SAMPLES} samples (20 ms), got {len(w.samples)}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(w.samples, WINDOW_SAMPLES)
    windows = windows[::HOP_SAMPLES] * _HANN
    spectra = np.fft.rfft(windows, n=FFT_SIZE, axis=1)
    power = spectra.real**2 + spectra.imag**2
    bands = power[:, : _POOL.shape[0]] @ _POOL  # (columns, 40)
    values = np.log(np.maximum(bands.T, LOG_FLOOR))
    return Spectrogram(values=values)


def normalize_minmax(values: np.ndarray) -> np.ndarray:
    """Map to [0, 1]; a constant input maps to all zeros."""
    vmin = values.min()
    vmax = values.max()
    if vmax == vmin:
        return np.zeros_like(values)
    return (values - vmin) / (vmax - vmin)


def equalize_histogram(norm_values: np.ndarray) -> np.ndarray:
    """Remap [0, 1] values through the empirical CDF of 256 quantized levels."""
    levels = np.rint(norm_values * (EQ_LEVELS - 1)).astype(np.intp)
    counts = np.bincount(levels.ravel(), minlength=EQ_LEVELS)
    cdf = np.cumsum(counts) / levels.size
    return cdf[levels]


def channelize(spec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log, normalized, equalized) channels for a Spectrogram or 2-D array."""
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
    if not np.all(np.isfinite(values)):
        raise DataError("cannot channelize non-finite values")
    log_ch = values.copy()
    norm_ch = normalize_minmax(values)
    eq_ch = equalize_histogram(norm_ch)
    return log_ch, norm_ch, eq_ch


def slice_frames(s: Spectrogram) -> FrameSequence:
    """Cut 40-column frames every 20 columns; channels computed per frame."""
    cols = s.n_columns
    if cols < FRAME_COLS:
        raise TooShortError(
            f"need at least {FRAME_COLS} spectrogram columns for one frame, got {cols}"
        )
    n_frames = (cols - FRAME_COLS) // FRAME_HOP_COLS + 1
    frames = []
    for k in range(n_frames):
        crop = s.values[:, k * FRAME_HOP_COLS : k * FRAME_HOP_COLS + FRAME_COLS]
        frames.append(
            SpectroFrame(
                channels=np.stack(channelize(crop)),
                start_time=k * FRAME_HOP_COLS * s.column_hop,
            )
        )
    return FrameSequence(frames=tuple(frames))


def segment_intervals(f: FrameSequence, utterance_id: str) -> list[Interval]:
    """Split into non-overlapping 10-frame (2 s) intervals.

    A trailing remainder is kept as a shorter interval when it has at
    least two frames, otherwise dropped.
    """
    if len(f) == 0:
        raise DataError("cannot segment an empty frame sequence")
    intervals = []
    for lo in range(0, len(f), INTERVAL_FRAMES):
        chunk = f.frames[lo : lo + INTERVAL_FRAMES]
        if len(chunk) < INTERVAL_FRAMES and len(chunk) < MIN_TAIL_FRAMES:
            break
        intervals.append(
            Interval(
                frames=chunk,
                utterance_id=utterance_id,
                start=chunk[0].start_time,
                duration=len(chunk) / FRAME_RATE,
            )
        )
    return intervals


def frames_to_array(frames) -> np.ndarray:
    """Stack SpectroFrames (or an iterable of them) into (T, 3, 40, 40)."""
    seq = frames.frames if isinstance(frames, FrameSequence) else tuple(frames)
    return np.stack([fr.channels for fr in seq])
