"""Connectionist temporal classification over framewise posteriors.

A path assigns one symbol (an emotion or the blank) to every frame; its
probability is the product of the per-frame posteriors along it. The
probability of a label sequence is the sum over all paths that collapse
to it, where collapsing merges adjacent repeats and then removes blanks.

Two evaluators are provided: an exhaustive-enumeration oracle (exact but
capped at 12 frames) and the efficient lattice recursion over the
blank-interleaved extended label, which also yields the analytic loss
gradient. All probability math runs in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    InfeasibleLabelError,
    InvalidLabelError,
    NumericError,
)

BLANK_SYMBOL = "-"
ORACLE_MAX_FRAMES = 12
ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Emotion symbols at indices 0..n-2 plus the blank at the last index."""

    symbols: tuple

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise DataError("alphabet needs at least one emotion symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise DataError("alphabet symbols must be distinct")
        if BLANK_SYMBOL in self.symbols:
            raise DataError(f"{BLANK_SYMBOL!r} is reserved for the blank")

    @property
    def n_classes(self) -> int:
        return len(self.symbols) + 1

    @property
    def blank_index(self) -> int:
        return len(self.symbols)

    @property
    def n_emotions(self) -> int:
        return len(self.symbols)

    def symbol_of(self, index: int) -> str:
        return BLANK_SYMBOL if index == self.blank_index else self.symbols[index]


@dataclass(frozen=True)
class PosteriorMatrix:
    """(frames x classes) probabilities; every row sums to one."""

    y: np.ndarray

    def __post_init__(self):
        y = self.y
        if y.ndim != 2:
            raise DimensionError(f"posteriors must be 2-D, got shape {y.shape}")
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise DataError("posterior entries must lie in [0, 1]")
        sums = y.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise DataError(
                f"posterior row {worst} sums to {sums[worst]!r}, expected 1"
            )

    @property
    def n_frames(self) -> int:
        return self.y.shape[0]

    @property
    def n_classes(self) -> int:
        return self.y.shape[1]


def _as_y(y) -> np.ndarray:
    if isinstance(y, PosteriorMatrix):
        return y.y
    return np.asarray(y, dtype=np.float64)


def _logsumexp(values: np.ndarray) -> float:
    m = values.max()
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.exp(values - m).sum()))


def path_probability(y, path) -> float:
    """Product over frames of the posterior assigned to the path's symbol."""
    y = _as_y(y)
    path = np.asarray(path, dtype=np.intp)
    if path.shape != (y.shape[0],):
        raise DimensionError(
            f"path length {path.shape} does not match {y.shape[0]} frames"
        )
    with np.errstate(divide="ignore"):
        logs = np.log(y[np.arange(y.shape[0]), path])
    total = logs.sum()
    return float(np.exp(total)) if total > -np.inf else 0.0


def collapse(path, alphabet: Alphabet) -> tuple:
    """Merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for sym in path:
        if sym != prev:
            out.append(int(sym))
        prev = sym
    return tuple(s for s in out if s != alphabet.blank_index)


def min_path_length(label) -> int:
    """Shortest path that can collapse to the label (repeats need a blank)."""
    label = tuple(label)
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def _check_label(label, alphabet: Alphabet) -> tuple:
    label = tuple(int(s) for s in label)
    for s in label:
        if s == alphabet.blank_index:
            raise InvalidLabelError("label sequences must not contain the blank")
        if not 0 <= s < alphabet.n_classes:
            raise InvalidLabelError(
                f"label symbol {s} outside alphabet of {alphabet.n_classes} classes"
            )
    return label


@lru_cache(maxsize=64)
def _enumeration_tables(n_classes: int, n_frames: int, blank: int):
    """All paths of length T over n classes, with their collapsed projections.

    Returns (paths, lengths, projection): paths is (M, T) int8; projection
    holds each path's collapsed sequence left-justified, padded with -1.
    """
    total = n_classes**n_frames
    flat = np.arange(total, dtype=np.int64)
    paths = np.empty((total, n_frames), dtype=np.int8)
    for t in range(n_frames - 1, -1, -1):
        paths[:, t] = flat % n_classes
        flat //= n_classes
    keep = np.ones_like(paths, dtype=bool)
    keep[:, 1:] = paths[:, 1:] != paths[:, :-1]
    keep &= paths != blank
    lengths = keep.sum(axis=1)
    proj = np.full((total, n_frames), -1, dtype=np.int8)
    rows = np.nonzero(keep)[0]
    cols = (np.cumsum(keep, axis=1) - 1)[keep]
    proj[rows, cols] = paths[keep]
    for arr in (paths, lengths, proj):
        arr.setflags(write=False)
    return paths, lengths, proj


def expand_labelings(label, n_frames: int, alphabet: Alphabet) -> np.ndarray:
    """Every length-T path that collapses to the label, as an (M, T) array.

    Exhaustive by construction; refuses T > 12 where enumeration blows up.
    """
    if n_frames < 1:
        raise ValueError(f"path length must be >= 1, got {n_frames}")
    if n_frames > ORACLE_MAX_FRAMES:
        raise ValueError(
            f"enumeration refused for {n_frames} frames (cap {ORACLE_MAX_FRAMES})"
        )
    label = _check_label(label, alphabet)
    if min_path_length(label) > n_frames:
        return np.empty((0, n_frames), dtype=np.int8)
    paths, lengths, proj = _enumeration_tables(
        alphabet.n_classes, n_frames, alphabet.blank_index
    )
    sel = lengths == len(label)
    if label:
        sel &= (proj[:, : len(label)] == np.asarray(label, dtype=np.int8)).all(axis=1)
    return paths[sel].copy()


def label_probability_bruteforce(y, label, alphabet: Alphabet) -> float:
    """Sum of path probabilities over the exhaustive expansion (oracle)."""
    y = _as_y(y)
    expansions = expand_labelings(label, y.shape[0], alphabet)
    if len(expansions) == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        logy = np.log(y)
    log_paths = logy[np.arange(y.shape[0])[None, :], expansions].sum(axis=1)
    total = _logsumexp(log_paths)
    return float(np.exp(total)) if total > -np.inf else 0.0


def _extended_label(label, blank: int):
    """Blank-interleaved label and the allowed skip transitions into each slot."""
    size = 2 * len(label) + 1
    ext = np.full(size, blank, dtype=np.intp)
    ext[1::2] = label
    skip_ok = np.zeros(size, dtype=bool)
    for s in range(3, size, 2):
        skip_ok[s] = ext[s] != ext[s - 2]
    return ext, skip_ok


def _forward_lattice(logy: np.ndarray, ext, skip_ok) -> np.ndarray:
    n_frames = logy.shape[0]
    size = len(ext)
    la = np.full((n_frames, size), -np.inf)
    la[0, 0] = logy[0, ext[0]]
    if size > 1:
        la[0, 1] = logy[0, ext[1]]
    for t in range(1, n_frames):
        prev = la[t - 1]
        stay = prev
        step = np.concatenate(([-np.inf], prev[:-1]))
        acc = np.logaddexp(stay, step)
        skip = np.concatenate(([-np.inf, -np.inf], prev[:-2]))
        acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        la[t] = acc + logy[t, ext]
    return la


def _backward_lattice(logy: np.ndarray, ext, skip_ok) -> np.ndarray:
    n_frames = logy.shape[0]
    size = len(ext)
    lb = np.full((n_frames, size), -np.inf)
    lb[-1, -1] = logy[-1, ext[-1]]
    if size > 1:
        lb[-1, -2] = logy[-1, ext[-2]]
    # skip from s to s+2 is legal exactly when skipping into s+2 is
    skip_from = np.zeros(size, dtype=bool)
    skip_from[:-2] = skip_ok[2:]
    for t in range(n_frames - 2, -1, -1):
        nxt = lb[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [-np.inf]))
        acc = np.logaddexp(stay, step)
        skip = np.concatenate((nxt[2:], [-np.inf, -np.inf]))
        acc = np.where(skip_from, np.logaddexp(acc, skip), acc)
        lb[t] = acc + logy[t, ext]
    return lb


def _lattice_loglik(la: np.ndarray) -> float:
    if la.shape[1] > 1:
        return float(np.logaddexp(la[-1, -1], la[-1, -2]))
    return float(la[-1, -1])


def label_probability_forward(y, label, alphabet: Alphabet):
    """Label probability via the lattice recursion; also returns the lattice.

    Matches label_probability_bruteforce wherever the oracle is computable,
    but runs in O(T * |label|) and works for any sequence length.
    """
    y = _as_y(y)
    label = _check_label(label, alphabet)
    with np.errstate(divide="ignore"):
        logy = np.log(y)
    ext, skip_ok = _extended_label(label, alphabet.blank_index)
    la = _forward_lattice(logy, ext, skip_ok)
    logp = _lattice_loglik(la)
    prob = float(np.exp(logp)) if logp > -np.inf else 0.0
    return prob, la


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def ctc_loss_and_grad(logits, label, alphabet: Alphabet):
    """Negative log label probability of row-softmaxed logits, plus gradient.

    The gradient is the analytic forward/backward result, d loss / d logits,
    shaped like the input.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != alphabet.n_classes:
        raise DimensionError(
            f"logits must be (frames, {alphabet.n_classes}), got {logits.shape}"
        )
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits contain non-finite values")
    label = _check_label(label, alphabet)
    n_frames = logits.shape[0]
    if min_path_length(label) > n_frames:
        raise InfeasibleLabelError(
            f"label of {len(label)} symbols needs at least "
            f"{min_path_length(label)} frames, got {n_frames}"
        )
    logy = _log_softmax(logits)
    ext, skip_ok = _extended_label(label, alphabet.blank_index)
    la = _forward_lattice(logy, ext, skip_ok)
    lb = _backward_lattice(logy, ext, skip_ok)
    logp = _lattice_loglik(la)
    if logp == -np.inf:
        raise InfeasibleLabelError("label probability underflowed to zero")
    # occupancy[t, s] = P(full path passes slot s at frame t) / P(label)
    occupancy = np.exp(la + lb - logy[:, ext] - logp)
    grad = np.exp(logy)
    for s in range(len(ext)):
        grad[:, ext[s]] -= occupancy[:, s]
    return -logp, grad


def best_path_decode(y, alphabet: Alphabet):
    """Per-frame argmax path (ties to the lowest index) and its collapse."""
    y = _as_y(y)
    path = tuple(int(i) for i in np.argmax(y, axis=1))
    return path, collapse(path, alphabet)


class EmotionDecode(NamedTuple):
    index: int
    symbol: str
    probability: float


def constrained_emotion_decode(y, alphabet: Alphabet) -> EmotionDecode:
    """Most probable single-emotion label.

    Scores each emotion e by the probability of the one-symbol label (e),
    whose expansions are exactly the blank*-e+-blank* paths; ties go to
    the lowest emotion index.
    """
    y = _as_y(y)
    probs = np.empty(alphabet.n_emotions)
    for e in range(alphabet.n_emotions):
        probs[e], _ = label_probability_forward(y, (e,), alphabet)
    best = int(np.argmax(probs))
    return EmotionDecode(best, alphabet.symbols[best], float(probs[best]))


def emotion_label_scores(y, alphabet: Alphabet) -> np.ndarray:
    """Single-emotion label probabilities for every emotion, in index order."""
    y = _as_y(y)
    return np.array(
        [label_probability_forward(y, (e,), alphabet)[0] for e in range(alphabet.n_emotions)]
    )
