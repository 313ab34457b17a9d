"""Sequence classifier: frame encoder -> LSTM -> softmax/regression heads.

Branches train by plain SGD on either framewise cross-entropy (the
utterance label repeated at every frame) or the CTC objective with the
single-emotion label. Both paths share the hand-derived backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import Alphabet, ctc_loss_and_grad, emotion_label_scores
from .encoder import EncoderParams, encoder_backward, encoder_forward, init_encoder
from .errors import DataError, DimensionError, EmptyInputError
from .lstm import LstmParams, init_lstm, lstm_backward, lstm_forward

LOSS_MODES = ("framewise_ce", "ctc")


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class HeadParams:
    """Linear classification head plus a 2-output regression head."""

    w_cls: np.ndarray  # (n_outputs, h)
    b_cls: np.ndarray
    w_reg: np.ndarray  # (2, h): arousal, valence
    b_reg: np.ndarray

    def arrays(self) -> dict:
        return {
            "head.w_cls": self.w_cls,
            "head.b_cls": self.b_cls,
            "head.w_reg": self.w_reg,
            "head.b_reg": self.b_reg,
        }


def init_head(rng: np.random.Generator, hidden: int, n_outputs: int) -> HeadParams:
    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return HeadParams(
        w_cls=u(n_outputs, hidden),
        b_cls=u(n_outputs),
        w_reg=u(2, hidden),
        b_reg=u(2),
    )


@dataclass
class TrainConfig:
    loss_mode: str = "framewise_ce"
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise DataError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.learning_rate < 0:
            raise DataError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise DataError("epochs must be >= 0 and batch size >= 1")


@dataclass
class BranchModel:
    """One modality's model over frame tensors or precomputed embeddings."""

    class_names: tuple
    loss_mode: str
    input_kind: str  # "frames" or "embeddings"
    encoder: EncoderParams | None
    lstm: LstmParams
    head: HeadParams

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(symbols=tuple(self.class_names))

    @property
    def n_outputs(self) -> int:
        # CTC adds the blank as an extra output column
        return self.n_classes + (1 if self.loss_mode == "ctc" else 0)

    @property
    def hidden_size(self) -> int:
        return self.lstm.hidden_size

    def arrays(self) -> dict:
        out = {}
        if self.encoder is not None:
            out.update(self.encoder.arrays())
        out.update(self.lstm.arrays())
        out.update(self.head.arrays())
        return out


def new_branch_model(
    class_names,
    loss_mode: str = "framewise_ce",
    input_kind: str = "frames",
    input_dim: int | None = None,
    conv1: int = 4,
    conv2: int = 4,
    embed_dim: int = 16,
    hidden_size: int = 16,
    seed: int = 0,
) -> BranchModel:
    if loss_mode not in LOSS_MODES:
        raise DataError(f"loss_mode must be one of {LOSS_MODES}, got {loss_mode!r}")
    if input_kind not in ("frames", "embeddings"):
        raise DataError(f"input_kind must be 'frames' or 'embeddings', got {input_kind!r}")
    rng = np.random.default_rng(seed)
    if input_kind == "frames":
        enc = init_encoder(rng, conv1, conv2, embed_dim)
        lstm_in = embed_dim
    else:
        if input_dim is None:
            raise DataError("embedding input needs input_dim")
        enc = None
        lstm_in = input_dim
    lstm = init_lstm(rng, lstm_in, hidden_size)
    n_outputs = len(class_names) + (1 if loss_mode == "ctc" else 0)
    head = init_head(rng, hidden_size, n_outputs)
    return BranchModel(
        class_names=tuple(class_names),
        loss_mode=loss_mode,
        input_kind=input_kind,
        encoder=enc,
        lstm=lstm,
        head=head,
    )


def classify_frames(head: HeadParams, hs: np.ndarray) -> np.ndarray:
    """Row-softmax of the linear head over hidden states; rows sum to one."""
    hs = np.asarray(hs, dtype=np.float64)
    if hs.ndim != 2 or hs.shape[0] == 0:
        raise DimensionError(f"hidden states must be (T, h) and nonempty, got {hs.shape}")
    return softmax(hs @ head.w_cls.T + head.b_cls)


def model_forward(model: BranchModel, x: np.ndarray):
    """Full forward pass. Returns (logits, hidden states, caches)."""
    x = np.asarray(x, dtype=np.float64)
    if model.input_kind == "frames":
        emb, enc_cache = encoder_forward(model.encoder, x)
    else:
        if x.ndim != 2 or x.shape[1] != model.lstm.input_size:
            raise DimensionError(
                f"embeddings must be (T, {model.lstm.input_size}), got {x.shape}"
            )
        emb, enc_cache = x, None
    hs, _, lstm_cache = lstm_forward(model.lstm, emb)
    logits = hs @ model.head.w_cls.T + model.head.b_cls
    return logits, hs, (enc_cache, lstm_cache)


def _framewise_ce(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy over frames; returns (loss, d loss / d logits)."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), targets].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), targets] -= 1.0
    return loss, dlogits / n


def backward(model: BranchModel, x: np.ndarray, target, loss_mode: str | None = None):
    """Loss and gradients for every parameter of the branch.

    target: an int (class applied to all frames), a length-T sequence of
    per-frame classes (framewise_ce), or a label sequence (ctc).
    """
    mode = loss_mode or model.loss_mode
    logits, hs, (enc_cache, lstm_cache) = model_forward(model, x)
    n_frames = logits.shape[0]
    if mode == "framewise_ce":
        targets = np.asarray(target, dtype=np.intp)
        if targets.ndim == 0:
            targets = np.full(n_frames, int(targets), dtype=np.intp)
        if targets.shape != (n_frames,):
            raise DimensionError(
                f"framewise targets must have length {n_frames}, got {targets.shape}"
            )
        if np.any(targets < 0) or np.any(targets >= model.n_outputs):
            raise DataError("framewise target class out of range")
        loss, dlogits = _framewise_ce(logits, targets)
    elif mode == "ctc":
        label = (int(target),) if np.isscalar(target) else tuple(int(s) for s in target)
        loss, dlogits = ctc_loss_and_grad(logits, label, model.alphabet)
    else:
        raise DataError(f"unknown loss mode {mode!r}")

    grads = {
        "head.w_cls": dlogits.T @ hs,
        "head.b_cls": dlogits.sum(axis=0),
        "head.w_reg": np.zeros_like(model.head.w_reg),
        "head.b_reg": np.zeros_like(model.head.b_reg),
    }
    dhs = dlogits @ model.head.w_cls
    lstm_grads, dxs = lstm_backward(model.lstm, lstm_cache, dhs)
    grads.update(lstm_grads)
    if model.input_kind == "frames":
        grads.update(encoder_backward(model.encoder, enc_cache, dxs))
    return loss, grads


def train(model: BranchModel, dataset, config: TrainConfig):
    """SGD over (sequence, class) examples; returns the per-epoch loss trace.

    Deterministic given the seed: shuffling uses a dedicated generator and
    batch gradients accumulate in ascending dataset-index order.
    """
    items = list(dataset)
    if not items:
        raise EmptyInputError("training dataset is empty")
    for _, label in items:
        if not 0 <= int(label) < model.n_classes:
            raise DataError(f"label {label} outside the {model.n_classes}-class set")
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
                x, label = items[idx]
                loss, grads = backward(model, x, int(label), config.loss_mode)
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


def predict_interval(model: BranchModel, x: np.ndarray):
    """Class probabilities and the final hidden state for one interval.

    framewise_ce: mean of the per-frame softmax rows. ctc: single-emotion
    label probabilities normalized over the emotion set.
    """
    logits, hs, _ = model_forward(model, x)
    if model.loss_mode == "ctc":
        scores = emotion_label_scores(softmax(logits), model.alphabet)
        probs = scores / scores.sum()
    else:
        probs = softmax(logits).mean(axis=0)
    return probs, hs[-1]
