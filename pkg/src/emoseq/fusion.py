"""Decision-level fusion of per-modality embeddings.

Interval embeddings (final recurrent hidden states) are concatenated in a
fixed modality order and pushed through a linear softmax head for the
emotion classes plus a linear regression head for arousal and valence
(clamped to [0, 1] and [-1, 1]). Utterance predictions average the
per-interval outputs and take the argmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import encoder_backward, encoder_forward
from .errors import DataError, DimensionError, EmptyInputError
from .lstm import lstm_backward, lstm_forward
from .network import BranchModel, HeadParams, TrainConfig, softmax

AROUSAL_RANGE = (0.0, 1.0)
VALENCE_RANGE = (-1.0, 1.0)


@dataclass(frozen=True)
class ModalityEmbedding:
    modality: str
    vector: np.ndarray


@dataclass(frozen=True)
class UtterancePrediction:
    class_probs: np.ndarray
    predicted_class: int
    arousal: float
    valence: float

    def __post_init__(self):
        p = self.class_probs
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise DataError("class probabilities must form a simplex")
        if self.predicted_class != int(np.argmax(p)):
            raise DataError("predicted_class must be the argmax of class_probs")


@dataclass
class FusionModel:
    """Head over the concatenation of modality embeddings, in listed order."""

    modalities: tuple
    dims: tuple
    class_names: tuple
    head: HeadParams

    @property
    def total_dim(self) -> int:
        return int(sum(self.dims))

    def arrays(self) -> dict:
        return {f"fusion.{k.split('.', 1)[1]}": v for k, v in self.head.arrays().items()}

    def slices(self) -> dict:
        out = {}
        lo = 0
        for name, dim in zip(self.modalities, self.dims):
            out[name] = slice(lo, lo + dim)
            lo += dim
        return out


def new_fusion_model(modalities, dims, class_names, seed: int = 0) -> FusionModel:
    if len(modalities) != len(dims):
        raise DataError("one dimension per modality is required")
    rng = np.random.default_rng(seed)
    total = int(sum(dims))
    head = HeadParams(
        w_cls=rng.uniform(-0.1, 0.1, size=(len(class_names), total)),
        b_cls=rng.uniform(-0.1, 0.1, size=len(class_names)),
        w_reg=rng.uniform(-0.1, 0.1, size=(2, total)),
        b_reg=rng.uniform(-0.1, 0.1, size=2),
    )
    return FusionModel(
        modalities=tuple(modalities),
        dims=tuple(int(d) for d in dims),
        class_names=tuple(class_names),
        head=head,
    )


def _concat_embeddings(model: FusionModel, embeddings) -> np.ndarray:
    """Fixed-order concatenation; a missing modality contributes zeros."""
    if isinstance(embeddings, dict):
        table = dict(embeddings)
    else:
        table = {e.modality: e.vector for e in embeddings}
    unknown = set(table) - set(model.modalities)
    if unknown:
        raise DataError(f"unknown modalities {sorted(unknown)}; expected {model.modalities}")
    parts = []
    for name, dim in zip(model.modalities, model.dims):
        vec = table.get(name)
        if vec is None:
            parts.append(np.zeros(dim))
            continue
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (dim,):
            raise DimensionError(
                f"modality {name!r} embedding must have shape ({dim},), got {vec.shape}"
            )
        parts.append(vec)
    return np.concatenate(parts)


def fuse(model: FusionModel, embeddings):
    """(class probabilities, arousal, valence) for one interval."""
    x = _concat_embeddings(model, embeddings)
    head = model.head
    probs = softmax(head.w_cls @ x + head.b_cls)
    raw = head.w_reg @ x + head.b_reg
    arousal = float(np.clip(raw[0], *AROUSAL_RANGE))
    valence = float(np.clip(raw[1], *VALENCE_RANGE))
    return probs, arousal, valence


def aggregate_utterance(interval_outputs) -> UtterancePrediction:
    """Mean the per-interval outputs, then argmax (ties to the lowest index)."""
    outputs = list(interval_outputs)
    if not outputs:
        raise EmptyInputError("cannot aggregate zero intervals")
    probs = np.mean([np.asarray(o[0], dtype=np.float64) for o in outputs], axis=0)
    arousal = float(np.mean([o[1] for o in outputs]))
    valence = float(np.mean([o[2] for o in outputs]))
    return UtterancePrediction(
        class_probs=probs,
        predicted_class=int(np.argmax(probs)),
        arousal=arousal,
        valence=valence,
    )


def _loss_and_head_grads(model: FusionModel, x, label: int, arousal: float, valence: float, lam: float):
    """Joint loss (CE + lam * squared regression errors) and its gradients.

    Returns (loss, grads-by-name, d loss / d x) so callers can keep
    backpropagating into modality branches.
    """
    head = model.head
    probs = softmax(head.w_cls @ x + head.b_cls)
    raw = head.w_reg @ x + head.b_reg
    a_hat = float(np.clip(raw[0], *AROUSAL_RANGE))
    v_hat = float(np.clip(raw[1], *VALENCE_RANGE))
    loss = -np.log(probs[label]) + lam * ((a_hat - arousal) ** 2 + (v_hat - valence) ** 2)

    dlogits = probs.copy()
    dlogits[label] -= 1.0
    # clamp passes gradient only strictly inside its range
    da = 2.0 * lam * (a_hat - arousal) * (AROUSAL_RANGE[0] < raw[0] < AROUSAL_RANGE[1])
    dv = 2.0 * lam * (v_hat - valence) * (VALENCE_RANGE[0] < raw[1] < VALENCE_RANGE[1])
    draw = np.array([da, dv])
    grads = {
        "fusion.w_cls": np.outer(dlogits, x),
        "fusion.b_cls": dlogits,
        "fusion.w_reg": np.outer(draw, x),
        "fusion.b_reg": draw,
    }
    dx = head.w_cls.T @ dlogits + head.w_reg.T @ draw
    return float(loss), grads, dx


def _check_fusion_targets(model: FusionModel, label, arousal, valence):
    if not 0 <= int(label) < len(model.class_names):
        raise DataError(f"class label {label} outside the {len(model.class_names)}-class set")
    if not AROUSAL_RANGE[0] <= arousal <= AROUSAL_RANGE[1]:
        raise DataError(f"arousal target {arousal} outside {AROUSAL_RANGE}")
    if not VALENCE_RANGE[0] <= valence <= VALENCE_RANGE[1]:
        raise DataError(f"valence target {valence} outside {VALENCE_RANGE}")


def train_fusion(model: FusionModel, dataset, config: TrainConfig, lam: float = 1.0):
    """SGD on the fusion head over fixed (frozen-branch) embeddings.

    dataset: (embeddings dict, class label, arousal, valence) tuples.
    Returns the per-epoch loss trace.
    """
    items = list(dataset)
    if not items:
        raise EmptyInputError("fusion training dataset is empty")
    for _, label, arousal, valence in items:
        _check_fusion_targets(model, label, arousal, valence)
    xs = [_concat_embeddings(model, emb) for emb, _, _, _ in items]
    arrays = model.arrays()
    rng = np.random.default_rng(config.seed)
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(len(items))
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = sorted(order[lo : lo + config.batch_size])
            acc = None
            for idx in batch:
                _, label, arousal, valence = items[idx]
                loss, grads, _ = _loss_and_head_grads(
                    model, xs[idx], int(label), arousal, valence, lam
                )
                epoch_losses.append(loss)
                if acc is None:
                    acc = grads
                else:
                    for k in acc:
                        acc[k] += grads[k]
            for k, arr in arrays.items():
                arr -= config.learning_rate * acc[k] / len(batch)
        trace.append(float(np.mean(epoch_losses)))
    return trace


def joint_backward(model: FusionModel, branches: dict, inputs: dict, label: int, arousal: float, valence: float, lam: float = 1.0):
    """Loss and gradients for the fusion head AND the modality branches.

    inputs maps modality name to that branch's input sequence. Branch
    gradients flow through the final hidden state only (the embedding the
    head consumes). Keys in the returned dict are prefixed per modality.
    """
    states = {}
    table = {}
    for name in inputs:
        branch: BranchModel = branches[name]
        x = np.asarray(inputs[name], dtype=np.float64)
        if branch.input_kind == "frames":
            emb, enc_cache = encoder_forward(branch.encoder, x)
        else:
            emb, enc_cache = x, None
        hs, _, lstm_cache = lstm_forward(branch.lstm, emb)
        states[name] = (branch, enc_cache, lstm_cache, hs.shape[0])
        table[name] = hs[-1]

    xcat = _concat_embeddings(model, table)
    loss, grads, dx = _loss_and_head_grads(model, xcat, label, arousal, valence, lam)
    for name, sl in model.slices().items():
        if name not in states:
            continue
        branch, enc_cache, lstm_cache, n_frames = states[name]
        dhs = np.zeros((n_frames, branch.hidden_size))
        dhs[-1] = dx[sl]
        lstm_grads, dxs = lstm_backward(branch.lstm, lstm_cache, dhs)
        branch_grads = dict(lstm_grads)
        if branch.input_kind == "frames":
            branch_grads.update(encoder_backward(branch.encoder, enc_cache, dxs))
        grads.update({f"{name}.{k}": v for k, v in branch_grads.items()})
    return loss, grads


def train_fusion_joint(model: FusionModel, branches: dict, dataset, config: TrainConfig, lam: float = 1.0):
    """SGD on the fusion head and the branch encoders/recurrences together.

    dataset: (inputs dict modality -> sequence, class label, arousal,
    valence) tuples. Returns the per-epoch loss trace.
    """
    items = list(dataset)
    if not items:
        raise EmptyInputError("fusion training dataset is empty")
    for _, label, arousal, valence in items:
        _check_fusion_targets(model, label, arousal, valence)
    arrays = model.arrays()
    for name, branch in branches.items():
        arrays.update({f"{name}.{k}": v for k, v in branch.arrays().items()})
    rng = np.random.default_rng(config.seed)
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(len(items))
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = sorted(order[lo : lo + config.batch_size])
            acc = {}
            for idx in batch:
                inputs, label, arousal, valence = items[idx]
                loss, grads = joint_backward(
                    model, branches, inputs, int(label), arousal, valence, lam
                )
                epoch_losses.append(loss)
                for k, g in grads.items():
                    if k in acc:
                        acc[k] += g
                    else:
                        acc[k] = g.copy()
            for k, g in acc.items():
                arrays[k] -= config.learning_rate * g / len(batch)
        trace.append(float(np.mean(epoch_losses)))
    return trace
