"""Versioned binary model checkpoints.

Layout: magic ``EMSQCKPT``, uint32 version, uint32 JSON length, a JSON
metadata block (model structure plus the name and shape of every array),
then the arrays as little-endian float32 in metadata order. Saving what
load returns reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .encoder import EncoderParams
from .errors import FormatError
from .fusion import FusionModel
from .lstm import LstmParams
from .network import BranchModel, HeadParams
from .ioutil import atomic_write_bytes

MAGIC = b"EMSQCKPT"
VERSION = 1


def save_checkpoint(path, metadata: dict, arrays: dict) -> None:
    names = sorted(arrays)
    meta = dict(metadata)
    meta["arrays"] = [{"name": n, "shape": list(arrays[n].shape)} for n in names]
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    out += [np.ascontiguousarray(arrays[n], dtype="<f4").tobytes() for n in names]
    atomic_write_bytes(path, b"".join(out))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    version, meta_len = struct.unpack_from("<II", blob, len(MAGIC))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    start = len(MAGIC) + 8
    if start + meta_len > len(blob):
        raise FormatError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(blob[start : start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata: {exc}") from None
    arrays = {}
    offset = start + meta_len
    for spec in meta.get("arrays", []):
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(blob):
            raise FormatError(f"{path}: truncated array {spec['name']!r}")
        arrays[spec["name"]] = (
            np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset = end
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return meta, arrays


def _branch_from_arrays(meta: dict, arrays: dict, prefix: str) -> BranchModel:
    def get(key):
        full = f"{prefix}.{key}"
        if full not in arrays:
            raise FormatError(f"checkpoint is missing array {full!r}")
        return arrays[full].copy()

    encoder = None
    if meta["input_kind"] == "frames":
        encoder = EncoderParams(
            k1=get("enc.k1"), b1=get("enc.b1"),
            k2=get("enc.k2"), b2=get("enc.b2"),
            w_out=get("enc.w_out"), b_out=get("enc.b_out"),
        )
    lstm = LstmParams(
        w_i=get("lstm.w_i"), w_f=get("lstm.w_f"),
        w_o=get("lstm.w_o"), w_g=get("lstm.w_g"),
        b_i=get("lstm.b_i"), b_f=get("lstm.b_f"),
        b_o=get("lstm.b_o"), b_g=get("lstm.b_g"),
    )
    head = HeadParams(
        w_cls=get("head.w_cls"), b_cls=get("head.b_cls"),
        w_reg=get("head.w_reg"), b_reg=get("head.b_reg"),
    )
    return BranchModel(
        class_names=tuple(meta["class_names"]),
        loss_mode=meta["loss_mode"],
        input_kind=meta["input_kind"],
        encoder=encoder,
        lstm=lstm,
        head=head,
    )


def save_model_bundle(path, branches: dict, fusion: FusionModel, extra: dict | None = None) -> None:
    """Serialize trained branches plus the fusion head into one checkpoint."""
    arrays = {}
    branch_meta = {}
    for name, branch in branches.items():
        branch_meta[name] = {
            "class_names": list(branch.class_names),
            "loss_mode": branch.loss_mode,
            "input_kind": branch.input_kind,
        }
        arrays.update({f"branch.{name}.{k}": v for k, v in branch.arrays().items()})
    arrays.update(fusion.arrays())
    metadata = {
        "kind": "emoseq-model",
        "branches": branch_meta,
        "fusion": {
            "modalities": list(fusion.modalities),
            "dims": list(fusion.dims),
            "class_names": list(fusion.class_names),
        },
        "extra": extra or {},
    }
    save_checkpoint(path, metadata, arrays)


def load_model_bundle(path):
    meta, arrays = load_checkpoint(path)
    if meta.get("kind") != "emoseq-model":
        raise FormatError(f"{path}: not a model checkpoint")
    branches = {
        name: _branch_from_arrays(bmeta, arrays, f"branch.{name}")
        for name, bmeta in meta["branches"].items()
    }
    fmeta = meta["fusion"]
    head = HeadParams(
        w_cls=arrays["fusion.w_cls"].copy(),
        b_cls=arrays["fusion.b_cls"].copy(),
        w_reg=arrays["fusion.w_reg"].copy(),
        b_reg=arrays["fusion.b_reg"].copy(),
    )
    fusion = FusionModel(
        modalities=tuple(fmeta["modalities"]),
        dims=tuple(int(d) for d in fmeta["dims"]),
        class_names=tuple(fmeta["class_names"]),
        head=head,
    )
    return branches, fusion, meta.get("extra", {})
