"""Dataset manifests: one CSV row per utterance.

Fixed columns: utterance_id, label, arousal, valence, split. Every other
column names a modality and holds a path to either a WAV file or an
embedding tensor; which modalities are used is decided by the run config.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from .errors import ManifestError

EMOTIONS = ("anger", "disgust", "fear", "happy", "neutral", "sad", "surprise")
SPLITS = ("train", "validation", "test")
FIXED_COLUMNS = ("utterance_id", "label", "arousal", "valence", "split")


@dataclass(frozen=True)
class ManifestRow:
    utterance_id: str
    label: str
    arousal: float
    valence: float
    split: str
    paths: dict  # modality name -> file path

    @property
    def label_index(self) -> int:
        return EMOTIONS.index(self.label)


@dataclass(frozen=True)
class Manifest:
    rows: tuple
    modalities: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def split(self, name: str) -> tuple:
        return tuple(r for r in self.rows if r.split == name)


def _parse_float(raw: str, line: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ManifestError(
            f"line {line}, column {column!r}: {raw!r} is not a number"
        ) from None


def load_manifest(path, check_files: bool = True) -> Manifest:
    """Read and fully validate a manifest; errors name the offending line."""
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        missing = [c for c in FIXED_COLUMNS if c not in header]
        if missing:
            raise ManifestError(f"{path}: header is missing columns {missing}")
        modalities = tuple(c for c in header if c not in FIXED_COLUMNS)
        if not modalities:
            raise ManifestError(f"{path}: no modality path columns in header")
        col = {name: header.index(name) for name in header}

        rows = []
        seen = {}
        base = os.path.dirname(os.path.abspath(path))
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise ManifestError(
                    f"line {line_no}: {len(record)} fields, header has {len(header)}"
                )
            uid = record[col["utterance_id"]].strip()
            if not uid:
                raise ManifestError(f"line {line_no}: empty utterance_id")
            if uid in seen:
                raise ManifestError(
                    f"line {line_no}: duplicate utterance_id {uid!r} "
                    f"(first seen on line {seen[uid]})"
                )
            seen[uid] = line_no
            label = record[col["label"]].strip()
            if label not in EMOTIONS:
                raise ManifestError(
                    f"line {line_no}, column 'label': unknown label {label!r}"
                )
            split = record[col["split"]].strip()
            if split not in SPLITS:
                raise ManifestError(
                    f"line {line_no}, column 'split': unknown split {split!r}"
                )
            paths = {}
            for m in modalities:
                raw = record[col[m]].strip()
                if not raw:
                    continue  # modality absent for this utterance
                p = raw if os.path.isabs(raw) else os.path.join(base, raw)
                if check_files and not os.path.exists(p):
                    raise ManifestError(
                        f"line {line_no}, column {m!r}: file not found: {raw}"
                    )
                paths[m] = p
            rows.append(
                ManifestRow(
                    utterance_id=uid,
                    label=label,
                    arousal=_parse_float(record[col["arousal"]], line_no, "arousal"),
                    valence=_parse_float(record[col["valence"]], line_no, "valence"),
                    split=split,
                    paths=paths,
                )
            )
    if not rows:
        raise ManifestError(f"{path}: manifest has a header but no rows")
    return Manifest(rows=tuple(rows), modalities=modalities)
