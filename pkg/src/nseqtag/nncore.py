"""Dense numeric core: parameter storage, layer forward/backward passes,
plain-SGD updates, and deterministic random streams.

Everything is float64. Backpropagation is hand-derived per layer; each
forward pass returns the cache its matching backward pass needs. There is
no general autodiff graph.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ConfigError, TrainingDiverged


class RngState:
    """Seeded random stream with platform-stable draws (PCG64).

    `child(tag)` derives an independent, reproducible stream for a named
    purpose (init, shuffling, dropout, ...) so adding a consumer never
    perturbs the others.
    """

    def __init__(self, seed: int, _path: tuple = ()):
        self.seed = int(seed)
        self._path = tuple(int(p) for p in _path)
        key = (self.seed,) + self._path
        self.gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))

    def child(self, tag: str) -> "RngState":
        return RngState(self.seed, self._path + (zlib.crc32(tag.encode("utf-8")),))

    def random(self, shape=None):
        return self.gen.random(shape)

    def normal(self, shape=None):
        return self.gen.standard_normal(shape)

    def uniform(self, low, high, shape=None):
        return self.gen.uniform(low, high, shape)

    def shuffle(self, seq) -> None:
        self.gen.shuffle(seq)


class Param:
    """A named trainable tensor paired with a same-shaped gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


class ParameterSet:
    """Ordered name -> Param map.

    Iteration follows insertion order, so two runs that build the model the
    same way serialize byte-identically.
    """

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, value) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        p = Param(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self):
        return iter(self._params.values())

    def names(self):
        return list(self._params.keys())

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def scale_grads(self, factor: float) -> None:
        for p in self._params.values():
            p.grad *= factor

    def values_finite(self) -> bool:
        return all(np.isfinite(p.value).all() for p in self._params.values())

    def grads_finite(self) -> bool:
        return all(np.isfinite(p.grad).all() for p in self._params.values())


def sigmoid(x):
    # Clip keeps exp() from overflowing; saturation is exact at these bounds.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def logsumexp(x, axis=None):
    """log(sum(exp(x))) without overflow; tolerates -inf entries."""
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


def log_softmax(x: np.ndarray) -> np.ndarray:
    return x - logsumexp(x)


def log_softmax_backward(y: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Backward for y = log_softmax(x): dx = dout - softmax(x) * sum(dout)."""
    return dout - np.exp(y) * np.sum(dout)


# ---------------------------------------------------------------------------
# Lookup table


def lookup_forward(table: np.ndarray, indices, name: str = "table") -> np.ndarray:
    """Gather rows `indices` of `table` into a (len(indices), D) array."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        bad = idx[(idx < 0) | (idx >= table.shape[0])][0]
        raise IndexError(f"index {bad} out of range for {name} with {table.shape[0]} rows")
    return table[idx].copy()


def lookup_backward(grad_table: np.ndarray, indices, dout: np.ndarray) -> None:
    """Scatter-add upstream row gradients into the table's gradient buffer.

    Repeated indices accumulate (np.add.at is unbuffered).
    """
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size:
        np.add.at(grad_table, idx, dout)


# ---------------------------------------------------------------------------
# Linear layer


def linear_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    if W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ValueError(
            f"linear shape mismatch: W {W.shape}, b {b.shape}, x {x.shape}"
        )
    return W @ x + b


def linear_backward(W: np.ndarray, x: np.ndarray, dout: np.ndarray):
    """Returns (dW, db, dx) for y = Wx + b."""
    dW = np.outer(dout, x)
    db = dout.copy()
    dx = W.T @ dout
    return dW, db, dx


# ---------------------------------------------------------------------------
# LSTM cell (Gers-style forget gate, no peepholes)


class LstmCellParams:
    """One direction/layer of LSTM weights.

    Gate blocks are stacked along axis 0 in the order
    [input, forget, output, candidate]: W is (4H, D_in), U is (4H, H),
    b is (4H,).
    """

    def __init__(self, W: Param, U: Param, b: Param, hidden: int):
        if W.shape[0] != 4 * hidden or U.shape != (4 * hidden, hidden) or b.shape != (4 * hidden,):
            raise ValueError(
                f"lstm shape mismatch for H={hidden}: W {W.shape}, U {U.shape}, b {b.shape}"
            )
        self.W = W
        self.U = U
        self.b = b
        self.hidden = hidden

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]


def lstm_step(p: LstmCellParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One LSTM time step. Returns (h, c, cache)."""
    if x.shape[0] != p.input_dim:
        raise ValueError(f"lstm input dim {x.shape[0]} != expected {p.input_dim}")
    H = p.hidden
    z = p.W.value @ x + p.U.value @ h_prev + p.b.value
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    o = sigmoid(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def lstm_step_backward(p: LstmCellParams, cache, dh: np.ndarray, dc: np.ndarray):
    """Backward through one step; accumulates into p's gradients.

    dh, dc are gradients w.r.t. this step's h and c outputs.
    Returns (dx, dh_prev, dc_prev).
    """
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dct = dh * o * (1.0 - tc * tc) + dc
    di = dct * g
    df = dct * c_prev
    dg = dct * i
    dc_prev = dct * f
    dz = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        do * o * (1.0 - o),
        dg * (1.0 - g * g),
    ])
    p.W.grad += np.outer(dz, x)
    p.U.grad += np.outer(dz, h_prev)
    p.b.grad += dz
    dx = p.W.value.T @ dz
    dh_prev = p.U.value.T @ dz
    return dx, dh_prev, dc_prev


# ---------------------------------------------------------------------------
# Dropout (inverted scaling: inference needs no rescale)


def dropout_mask(shape, p_discard: float, rng: RngState) -> np.ndarray:
    """Scaled keep-mask: entries are 0 with prob p_discard, else 1/(1-p)."""
    keep = rng.random(shape) >= p_discard
    return keep / (1.0 - p_discard)


def dropout_apply(x: np.ndarray, p_discard: float, mode: str, rng: RngState | None = None) -> np.ndarray:
    if not 0.0 <= p_discard < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p_discard}")
    if mode == "eval" or p_discard == 0.0:
        return x
    if mode != "train":
        raise ConfigError(f"unknown dropout mode {mode!r}")
    if rng is None:
        raise ConfigError("train-mode dropout needs an RngState")
    return x * dropout_mask(x.shape, p_discard, rng)


# ---------------------------------------------------------------------------
# SGD


def sgd_update(params: ParameterSet, lr: float) -> None:
    """value <- value - lr * grad for every parameter, then zero the grads."""
    if not params.grads_finite():
        raise TrainingDiverged("non-finite gradient before SGD update")
    for p in params:
        p.value -= lr * p.grad
        p.grad[...] = 0.0


# ---------------------------------------------------------------------------
# Initializers


def init_normal(rng: RngState, shape) -> np.ndarray:
    return rng.normal(shape)


def init_uniform(rng: RngState, shape, half_range: float) -> np.ndarray:
    return rng.uniform(-half_range, half_range, shape)


def init_fan_in(rng: RngState, shape, fan_in: int) -> np.ndarray:
    return rng.uniform(-1.0 / np.sqrt(fan_in), 1.0 / np.sqrt(fan_in), shape)
