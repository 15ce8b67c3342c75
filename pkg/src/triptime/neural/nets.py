"""Dense and LSTM networks with hand-written backpropagation.

Everything here is plain numpy: a dense layer computes
``activation(weights @ x + bias)``; an LSTM cell applies sigmoid input,
forget, and output gates plus a tanh candidate (gate order fixed as
i, f, o, candidate), updating the memory cell as f*C + i*C~ and the
hidden state as o*tanh(C). Gradients are exact analytic derivatives of
the mean-squared-error loss; the ReLU subgradient at 0 is taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit as _sigmoid

from ..errors import ValidationError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")


def apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValidationError(f"unknown activation {name!r}")


def activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d activation / d z, expressed from the pre-activation z and output a."""
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "identity":
        return np.ones_like(z)
    raise ValidationError(f"unknown activation {name!r}")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    """Fully connected layer: activation(x @ weights.T + bias)."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, activation: str):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.ndim != 1 or weights.shape[0] != bias.shape[0]:
            raise ValidationError(
                f"inconsistent dense shapes: weights {weights.shape}, bias {bias.shape}")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise ValidationError("dense parameters must be finite")
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        self.weights = weights
        self.bias = bias
        self.activation = activation

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, out_dim: int,
             activation: str) -> "DenseLayer":
        w = glorot_uniform(rng, in_dim, out_dim, (out_dim, in_dim))
        return cls(w, np.zeros(out_dim), activation)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Batch or single-vector forward pass."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ValidationError(f"expected {self.in_dim} inputs, got {x.shape[1]}")
        z = x @ self.weights.T + self.bias
        a = apply_activation(self.activation, z)
        return a[0] if single else a

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        if x.shape[1] != self.in_dim:
            raise ValidationError(f"expected {self.in_dim} inputs, got {x.shape[1]}")
        z = x @ self.weights.T + self.bias
        a = apply_activation(self.activation, z)
        return a, {"x": x, "z": z, "a": a}

    def backward(self, cache: dict, d_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (d_input, d_weights, d_bias) for upstream gradient d_out."""
        dz = d_out * activation_grad(self.activation, cache["z"], cache["a"])
        dw = dz.T @ cache["x"]
        db = dz.sum(axis=0)
        dx = dz @ self.weights
        return dx, dw, db


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


class MlpNetwork:
    """A chain of dense layers ending in a single linear output unit."""

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ValidationError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValidationError(
                    f"layer width mismatch: {a.out_dim} feeds {b.in_dim}")
        self.layers = list(layers)

    @classmethod
    def build(cls, rng: np.random.Generator, input_dim: int,
              hidden_units: Sequence[int], activation: str = "relu") -> "MlpNetwork":
        """Hidden layers with the given activation, then a linear scalar output."""
        layers = []
        in_dim = input_dim
        for width in hidden_units:
            layers.append(DenseLayer.init(rng, in_dim, width, activation))
            in_dim = width
        layers.append(DenseLayer.init(rng, in_dim, 1, "identity"))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Predictions for a batch, returned as a 1-D array."""
        return self.forward_cached(np.asarray(x, dtype=np.float64))[0]

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[dict]]:
        a = np.asarray(x, dtype=np.float64)
        if a.ndim == 1:
            a = a[None, :]
        caches = []
        for layer in self.layers:
            a, cache = layer.forward_cached(a)
            caches.append(cache)
        if a.shape[1] != 1:
            raise ValidationError("final layer must have width 1")
        return a[:, 0], caches

    def backward(self, caches: list[dict], d_pred: np.ndarray) -> list[np.ndarray]:
        """Gradients aligned with parameters(), from d loss / d prediction."""
        grads: list[np.ndarray | None] = [None] * (2 * len(self.layers))
        d = np.asarray(d_pred, dtype=np.float64)[:, None]
        for i in range(len(self.layers) - 1, -1, -1):
            d, dw, db = self.layers[i].backward(caches[i], d)
            grads[2 * i] = dw
            grads[2 * i + 1] = db
        return grads  # type: ignore[return-value]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def param_names(self) -> list[str]:
        out = []
        for i in range(len(self.layers)):
            out.append(f"layer{i}.weights")
            out.append(f"layer{i}.bias")
        return out


# LSTM gate slices within the stacked [4*hidden] pre-activation,
# ordered (input, forget, output, candidate).
_GATES = ("i", "f", "o", "g")


class LstmCell:
    """One LSTM layer: stacked input/recurrent weights and biases.

    input_weights is [4h, in], recurrent_weights [4h, h], bias [4h];
    rows are grouped per gate in the fixed (i, f, o, candidate) order.
    """

    def __init__(self, input_weights: np.ndarray, recurrent_weights: np.ndarray,
                 bias: np.ndarray):
        wx = np.asarray(input_weights, dtype=np.float64)
        wh = np.asarray(recurrent_weights, dtype=np.float64)
        b = np.asarray(bias, dtype=np.float64)
        if wx.ndim != 2 or wh.ndim != 2 or b.ndim != 1:
            raise ValidationError("LSTM parameters have wrong ranks")
        hidden4 = wx.shape[0]
        if hidden4 % 4 != 0 or wh.shape != (hidden4, hidden4 // 4) or b.shape != (hidden4,):
            raise ValidationError(
                f"inconsistent LSTM shapes: wx {wx.shape}, wh {wh.shape}, b {b.shape}")
        if not (np.isfinite(wx).all() and np.isfinite(wh).all() and np.isfinite(b).all()):
            raise ValidationError("LSTM parameters must be finite")
        self.input_weights = wx
        self.recurrent_weights = wh
        self.bias = b

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, hidden: int) -> "LstmCell":
        wx = np.concatenate(
            [glorot_uniform(rng, in_dim, hidden, (hidden, in_dim)) for _ in _GATES])
        wh = np.concatenate(
            [glorot_uniform(rng, hidden, hidden, (hidden, hidden)) for _ in _GATES])
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias starts open (training stabilizer)
        return cls(wx, wh, b)

    @property
    def hidden(self) -> int:
        return self.input_weights.shape[0] // 4

    @property
    def in_dim(self) -> int:
        return self.input_weights.shape[1]

    def step_cached(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                    ) -> tuple[np.ndarray, np.ndarray, dict]:
        h = self.hidden
        pre = x @ self.input_weights.T + h_prev @ self.recurrent_weights.T + self.bias
        gi = _sigmoid(pre[:, 0:h])
        gf = _sigmoid(pre[:, h:2 * h])
        go = _sigmoid(pre[:, 2 * h:3 * h])
        gc = np.tanh(pre[:, 3 * h:4 * h])
        c = gf * c_prev + gi * gc
        tanh_c = np.tanh(c)
        h_new = go * tanh_c
        cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev,
                 "i": gi, "f": gf, "o": go, "g": gc, "tanh_c": tanh_c}
        return h_new, c, cache

    def backward_step(self, cache: dict, dh: np.ndarray, dc_next: np.ndarray,
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                 np.ndarray, np.ndarray, np.ndarray]:
        """One BPTT step: returns (dx, dh_prev, dc_prev, d_wx, d_wh, d_b)."""
        gi, gf, go, gc = cache["i"], cache["f"], cache["o"], cache["g"]
        tanh_c = cache["tanh_c"]
        do = dh * tanh_c
        dc = dc_next + dh * go * (1.0 - tanh_c * tanh_c)
        di = dc * gc
        dg = dc * gi
        df = dc * cache["c_prev"]
        dc_prev = dc * gf
        dpre = np.concatenate([
            di * gi * (1.0 - gi),
            df * gf * (1.0 - gf),
            do * go * (1.0 - go),
            dg * (1.0 - gc * gc),
        ], axis=1)
        d_wx = dpre.T @ cache["x"]
        d_wh = dpre.T @ cache["h_prev"]
        d_b = dpre.sum(axis=0)
        dx = dpre @ self.input_weights
        dh_prev = dpre @ self.recurrent_weights
        return dx, dh_prev, dc_prev, d_wx, d_wh, d_b


@dataclass
class LstmState:
    """Hidden and memory-cell state of one LSTM layer."""

    hidden: np.ndarray
    cell: np.ndarray

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise ValidationError("hidden and cell state must have equal shapes")


def lstm_step(cell: LstmCell, x: np.ndarray, prev: LstmState) -> LstmState:
    """Advance one LSTM cell by a single timestep (vector or batch input)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h_prev = np.atleast_2d(prev.hidden)
    c_prev = np.atleast_2d(prev.cell)
    if single:
        x = x[None, :]
    if x.shape[1] != cell.in_dim:
        raise ValidationError(f"expected {cell.in_dim} inputs, got {x.shape[1]}")
    h, c, _ = cell.step_cached(x, h_prev, c_prev)
    if single:
        return LstmState(h[0], c[0])
    return LstmState(h, c)


class LstmNetwork:
    """Stacked LSTM cells followed by a linear head on the final hidden state.

    Inputs may be [n, features] (treated as a length-1 sequence) or
    [n, timesteps, features].
    """

    def __init__(self, cells: Sequence[LstmCell], head: DenseLayer):
        if not cells:
            raise ValidationError("network needs at least one LSTM cell")
        for a, b in zip(cells, cells[1:]):
            if a.hidden != b.in_dim:
                raise ValidationError("stacked cell width mismatch")
        if head.in_dim != cells[-1].hidden or head.out_dim != 1:
            raise ValidationError("head must map final hidden state to one output")
        self.cells = list(cells)
        self.head = head

    @classmethod
    def build(cls, rng: np.random.Generator, input_dim: int, hidden: int,
              stacked_layers: int = 2) -> "LstmNetwork":
        cells = []
        in_dim = input_dim
        for _ in range(stacked_layers):
            cells.append(LstmCell.init(rng, in_dim, hidden))
            in_dim = hidden
        head = DenseLayer.init(rng, hidden, 1, "identity")
        return cls(cells, head)

    @property
    def input_dim(self) -> int:
        return self.cells[0].in_dim

    @staticmethod
    def _as_sequence(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            return x[:, None, :]
        if x.ndim == 3:
            return x
        raise ValidationError(f"expected 2-D or 3-D input, got shape {x.shape}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cached(x)[0]

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        seq = self._as_sequence(x)
        n, steps, _ = seq.shape
        layer_caches: list[list[dict]] = []
        inputs = [seq[:, t, :] for t in range(steps)]
        for cell in self.cells:
            h = np.zeros((n, cell.hidden))
            c = np.zeros((n, cell.hidden))
            caches = []
            outputs = []
            for x_t in inputs:
                h, c, cache = cell.step_cached(x_t, h, c)
                caches.append(cache)
                outputs.append(h)
            layer_caches.append(caches)
            inputs = outputs
        final_h = inputs[-1]
        pred, head_cache = self.head.forward_cached(final_h)
        return pred[:, 0], {"layers": layer_caches, "head": head_cache,
                            "n": n, "steps": steps}

    def backward(self, caches: dict, d_pred: np.ndarray) -> list[np.ndarray]:
        n, steps = caches["n"], caches["steps"]
        d = np.asarray(d_pred, dtype=np.float64)[:, None]
        dh_final, dw_head, db_head = self.head.backward(caches["head"], d)

        # gradient wrt each layer's output sequence, top layer first
        d_outputs = [np.zeros((n, self.cells[-1].hidden)) for _ in range(steps)]
        d_outputs[-1] = dh_final
        grads: list[np.ndarray] = []
        for li in range(len(self.cells) - 1, -1, -1):
            cell = self.cells[li]
            layer_cache = caches["layers"][li]
            d_wx = np.zeros_like(cell.input_weights)
            d_wh = np.zeros_like(cell.recurrent_weights)
            d_b = np.zeros_like(cell.bias)
            dh_carry = np.zeros((n, cell.hidden))
            dc_carry = np.zeros((n, cell.hidden))
            d_inputs = []
            for t in range(steps - 1, -1, -1):
                dh = d_outputs[t] + dh_carry
                dx, dh_carry, dc_carry, g_wx, g_wh, g_b = cell.backward_step(
                    layer_cache[t], dh, dc_carry)
                d_wx += g_wx
                d_wh += g_wh
                d_b += g_b
                d_inputs.append(dx)
            d_inputs.reverse()
            grads[:0] = [d_wx, d_wh, d_b]
            d_outputs = d_inputs
        return grads + [dw_head, db_head]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for cell in self.cells:
            out.extend([cell.input_weights, cell.recurrent_weights, cell.bias])
        out.extend([self.head.weights, self.head.bias])
        return out

    def param_names(self) -> list[str]:
        out = []
        for i in range(len(self.cells)):
            out.extend([f"cell{i}.input_weights", f"cell{i}.recurrent_weights",
                        f"cell{i}.bias"])
        out.extend(["head.weights", "head.bias"])
        return out
