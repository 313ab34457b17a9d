"""LSTM cell with explicit backpropagation through time.

Standard formulation: sigmoid input/forget/output gates, tanh candidate
and output squashing, zero initial hidden and cell state. Weights act on
the concatenation [x_t, h_{t-1}].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyInputError


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    w_i: np.ndarray  # (h, d + h), acts on [x, h_prev]
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[1] - self.w_i.shape[0]

    def arrays(self) -> dict:
        return {
            "lstm.w_i": self.w_i,
            "lstm.w_f": self.w_f,
            "lstm.w_o": self.w_o,
            "lstm.w_g": self.w_g,
            "lstm.b_i": self.b_i,
            "lstm.b_f": self.b_f,
            "lstm.b_o": self.b_o,
            "lstm.b_g": self.b_g,
        }


def init_lstm(rng: np.random.Generator, input_size: int, hidden_size: int) -> LstmParams:
    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    d = input_size + hidden_size
    return LstmParams(
        w_i=u(hidden_size, d),
        w_f=u(hidden_size, d),
        w_o=u(hidden_size, d),
        w_g=u(hidden_size, d),
        b_i=u(hidden_size),
        b_f=u(hidden_size),
        b_o=u(hidden_size),
        b_g=u(hidden_size),
    )


def lstm_forward(p: LstmParams, xs: np.ndarray):
    """Run the recurrence over (T, d) inputs.

    Returns (hidden_states (T, h), final (h, c), cache) where cache holds
    the per-step gate activations needed by lstm_backward.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2:
        raise DimensionError(f"inputs must be (T, d), got shape {xs.shape}")
    if xs.shape[0] == 0:
        raise EmptyInputError("cannot run the recurrence on an empty sequence")
    if xs.shape[1] != p.input_size:
        raise DimensionError(
            f"input dim {xs.shape[1]} does not match cell input size {p.input_size}"
        )
    n_steps = xs.shape[0]
    h_size = p.hidden_size
    w = np.concatenate([p.w_i, p.w_f, p.w_o, p.w_g], axis=0)
    b = np.concatenate([p.b_i, p.b_f, p.b_o, p.b_g])

    hs = np.zeros((n_steps, h_size))
    gates = np.zeros((n_steps, 4, h_size))
    cells = np.zeros((n_steps, h_size))
    tanh_c = np.zeros((n_steps, h_size))
    xh = np.zeros((n_steps, p.input_size + h_size))

    h = np.zeros(h_size)
    c = np.zeros(h_size)
    for t in range(n_steps):
        xh[t] = np.concatenate([xs[t], h])
        z = w @ xh[t] + b
        gi = sigmoid(z[:h_size])
        gf = sigmoid(z[h_size : 2 * h_size])
        go = sigmoid(z[2 * h_size : 3 * h_size])
        gg = np.tanh(z[3 * h_size :])
        c = gf * c + gi * gg
        tc = np.tanh(c)
        h = go * tc
        gates[t, 0], gates[t, 1], gates[t, 2], gates[t, 3] = gi, gf, go, gg
        cells[t] = c
        tanh_c[t] = tc
        hs[t] = h
    cache = (xh, gates, cells, tanh_c)
    return hs, (h, c), cache


def lstm_backward(p: LstmParams, cache, dhs: np.ndarray):
    """BPTT. dhs is d loss / d hidden state at each step (zeros allowed).

    Returns (grads dict, dxs (T, d)).
    """
    xh, gates, cells, tanh_c = cache
    n_steps, h_size = tanh_c.shape
    d_in = p.input_size
    grads = {k: np.zeros_like(v) for k, v in p.arrays().items()}
    dxs = np.zeros((n_steps, d_in))
    dh_next = np.zeros(h_size)
    dc_next = np.zeros(h_size)
    for t in range(n_steps - 1, -1, -1):
        gi, gf, go, gg = gates[t]
        c_prev = cells[t - 1] if t > 0 else np.zeros(h_size)
        dh = dhs[t] + dh_next
        do = dh * tanh_c[t]
        dc = dh * go * (1.0 - tanh_c[t] ** 2) + dc_next
        di = dc * gg
        dg = dc * gi
        df = dc * c_prev
        dc_next = dc * gf
        dz_i = di * gi * (1.0 - gi)
        dz_f = df * gf * (1.0 - gf)
        dz_o = do * go * (1.0 - go)
        dz_g = dg * (1.0 - gg**2)
        grads["lstm.w_i"] += np.outer(dz_i, xh[t])
        grads["lstm.w_f"] += np.outer(dz_f, xh[t])
        grads["lstm.w_o"] += np.outer(dz_o, xh[t])
        grads["lstm.w_g"] += np.outer(dz_g, xh[t])
        grads["lstm.b_i"] += dz_i
        grads["lstm.b_f"] += dz_f
        grads["lstm.b_o"] += dz_o
        grads["lstm.b_g"] += dz_g
        dxh = (
            p.w_i.T @ dz_i + p.w_f.T @ dz_f + p.w_o.T @ dz_o + p.w_g.T @ dz_g
        )
        dxs[t] = dxh[:d_in]
        dh_next = dxh[d_in:]
    return grads, dxs
