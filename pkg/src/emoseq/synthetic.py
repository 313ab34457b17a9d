"""Synthetic datasets that exercise the full pipeline at desk scale.

separable_tones: WAV utterances whose class decides the fundamental of a
harmonic sine mixture (200 + 150k Hz), so spectrogram frames are linearly
separable. complementary_modalities: paired embedding sequences where each
modality reveals only one bit of the 4-class label, so neither modality
alone can do better than chance over pairs but their fusion separates all
four classes.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .audio import WaveForm, write_wav
from .errors import DataError
from .frontend import WORK_RATE
from .ioutil import atomic_write_text
from .manifest import EMOTIONS
from .tensorio import write_embedding_tensor

KINDS = ("separable_tones", "complementary_modalities")


def _targets_for_class(k: int, n_classes: int, rng: np.random.Generator):
    arousal = (k + 1) / (n_classes + 1) + rng.uniform(-0.02, 0.02)
    valence = 2.0 * (k + 1) / (n_classes + 1) - 1.0 + rng.uniform(-0.02, 0.02)
    return float(np.clip(arousal, 0.0, 1.0)), float(np.clip(valence, -1.0, 1.0))


def _manifest_text(modalities, records) -> str:
    out = io.StringIO()
    out.write("utterance_id,label,arousal,valence,split," + ",".join(modalities) + "\n")
    for uid, label, arousal, valence, split, paths in records:
        cells = [uid, label, f"{arousal:.6f}", f"{valence:.6f}", split]
        cells += [paths.get(m, "") for m in modalities]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def _separable_tones(n: int, seed: int, out_dir: str, n_classes: int):
    if not 2 <= n_classes <= len(EMOTIONS):
        raise DataError(f"separable_tones supports 2..{len(EMOTIONS)} classes")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        k = i % n_classes
        duration = rng.uniform(2.4, 3.4)
        t = np.arange(int(duration * WORK_RATE)) / WORK_RATE
        f0 = 200.0 + 150.0 * k
        amp = rng.uniform(0.4, 0.7)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
        signal = amp * (
            np.sin(2 * np.pi * f0 * t + phases[0])
            + 0.5 * np.sin(2 * np.pi * 2 * f0 * t + phases[1])
            + 0.25 * np.sin(2 * np.pi * 3 * f0 * t + phases[2])
        )
        signal += 0.05 * rng.standard_normal(len(t))
        peak = np.max(np.abs(signal))
        if peak > 0.95:
            signal *= 0.95 / peak
        name = f"tone_{i:04d}.wav"
        write_wav(os.path.join(out_dir, name), WaveForm(signal, WORK_RATE))
        arousal, valence = _targets_for_class(k, n_classes, rng)
        records.append((f"utt{i:04d}", EMOTIONS[k], arousal, valence, "train", {"audio": name}))
    return ("audio",), records


def _complementary_modalities(n: int, seed: int, out_dir: str):
    n_classes = 4
    steps, dim = 10, 4
    rng = np.random.default_rng(seed)
    n_train = int(np.ceil(0.7 * n))
    records = []
    for i in range(n):
        k = i % n_classes
        sign1 = 1.0 if k // 2 else -1.0  # separates {0,1} from {2,3}
        sign2 = 1.0 if k % 2 else -1.0  # separates {0,2} from {1,3}
        paths = {}
        for mod, sign in (("m1", sign1), ("m2", sign2)):
            seq = 0.25 * rng.standard_normal((steps, dim))
            seq[:, 0] += sign
            name = f"{mod}_{i:04d}.emb"
            write_embedding_tensor(os.path.join(out_dir, name), seq)
            paths[mod] = name
        split = "train" if i < n_train else "validation"
        arousal, valence = _targets_for_class(k, n_classes, rng)
        records.append((f"utt{i:04d}", EMOTIONS[k], arousal, valence, split, paths))
    return ("m1", "m2"), records


def generate_synthetic(kind: str, n: int, seed: int, out_dir, n_classes: int = 3) -> str:
    """Write a dataset plus manifest.csv into out_dir; returns the manifest path.

    Byte-identical output for identical arguments.
    """
    if kind not in KINDS:
        raise DataError(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    if n < 1:
        raise DataError(f"need at least one example, got {n}")
    os.makedirs(out_dir, exist_ok=True)
    if kind == "separable_tones":
        modalities, records = _separable_tones(n, seed, str(out_dir), n_classes)
    else:
        modalities, records = _complementary_modalities(n, seed, str(out_dir))
    manifest_path = os.path.join(str(out_dir), "manifest.csv")
    atomic_write_text(manifest_path, _manifest_text(modalities, records))
    return manifest_path
