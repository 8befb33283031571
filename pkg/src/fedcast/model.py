"""LSTM load forecaster with analytic gradients and a partitioned flat view.

The model rolls an LSTM cell over a lookback window of input vectors
x_t = [load_t ; features_t], starting from zero hidden and cell states,
concatenates the hidden states of every step and maps them through an MLP
with learnable-slope PReLU activations to a single forecast.

Parameter groups (fixed order; this order defines flattening, wire layout
and the reduction order everywhere else):

  lstm.w_xi lstm.w_hi lstm.b_i    input gate
  lstm.w_xf lstm.w_hf lstm.b_f    forget gate
  lstm.w_xg lstm.w_hg lstm.b_g    candidate
  lstm.w_xo lstm.w_ho lstm.b_o    output gate
  mlp.w0 mlp.b0 mlp.slope0        first hidden layer + PReLU slope
  mlp.w1 mlp.b1 mlp.slope1        second hidden layer + PReLU slope
  mlp.w2 mlp.b2                   linear output layer
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import ShapeError, elementwise, matvec, sample_uniform
from .params import PERSONALIZED, SHARED, ParamVector, PartitionScheme

GATES = ("i", "f", "g", "o")


@dataclass(frozen=True)
class ModelDims:
    hidden: int = 25
    lookback: int = 12
    lookahead: int = 4
    n_features: int = 7
    mlp_hidden: tuple[int, int] = (150, 75)

    @property
    def input_size(self) -> int:
        return 1 + self.n_features

    @property
    def mlp_input(self) -> int:
        return self.lookback * self.hidden


def group_names(dims: ModelDims) -> list[str]:
    names = []
    for g in GATES:
        names += [f"lstm.w_x{g}", f"lstm.w_h{g}", f"lstm.b_{g}"]
    names += ["mlp.w0", "mlp.b0", "mlp.slope0", "mlp.w1", "mlp.b1", "mlp.slope1", "mlp.w2", "mlp.b2"]
    return names


def group_shapes(dims: ModelDims) -> dict[str, tuple[int, ...]]:
    h, d = dims.hidden, dims.input_size
    h1, h2 = dims.mlp_hidden
    shapes: dict[str, tuple[int, ...]] = {}
    for g in GATES:
        shapes[f"lstm.w_x{g}"] = (h, d)
        shapes[f"lstm.w_h{g}"] = (h, h)
        shapes[f"lstm.b_{g}"] = (h,)
    shapes["mlp.w0"] = (h1, dims.mlp_input)
    shapes["mlp.b0"] = (h1,)
    shapes["mlp.slope0"] = (1,)
    shapes["mlp.w1"] = (h2, h1)
    shapes["mlp.b1"] = (h2,)
    shapes["mlp.slope1"] = (1,)
    shapes["mlp.w2"] = (1, h2)
    shapes["mlp.b2"] = (1,)
    return shapes


def n_params(dims: ModelDims) -> int:
    return sum(int(np.prod(s)) for s in group_shapes(dims).values())


def init_params(rng: np.random.Generator, dims: ModelDims) -> ParamVector:
    """Uniform fan-in init: LSTM groups in +-1/sqrt(hidden), MLP layers in
    +-1/sqrt(fan_in); PReLU slopes start at 0.25. Draw order = group order."""
    shapes = group_shapes(dims)
    lstm_bound = 1.0 / np.sqrt(dims.hidden)
    fan_in = {"mlp.w0": dims.mlp_input, "mlp.b0": dims.mlp_input,
              "mlp.w1": dims.mlp_hidden[0], "mlp.b1": dims.mlp_hidden[0],
              "mlp.w2": dims.mlp_hidden[1], "mlp.b2": dims.mlp_hidden[1]}
    groups = []
    for name in group_names(dims):
        shape = shapes[name]
        if name in ("mlp.slope0", "mlp.slope1"):
            groups.append((name, np.full(shape, 0.25)))
        elif name.startswith("lstm."):
            groups.append((name, sample_uniform(rng, -lstm_bound, lstm_bound, shape)))
        else:
            bound = 1.0 / np.sqrt(fan_in[name])
            groups.append((name, sample_uniform(rng, -bound, bound, shape)))
    return ParamVector(groups)


# -- partition schemes --------------------------------------------------------

SCHEME_PRESETS = ("full-shared", "lstm-shared", "local-only")


def make_scheme(dims: ModelDims, preset: str) -> PartitionScheme:
    """Standard partitions: everything shared (classical federation),
    LSTM shared / MLP personalized, or everything personalized (local-only)."""
    names = group_names(dims)
    if preset == "full-shared":
        tags = {n: SHARED for n in names}
    elif preset == "local-only":
        tags = {n: PERSONALIZED for n in names}
    elif preset == "lstm-shared":
        tags = {n: SHARED if n.startswith("lstm.") else PERSONALIZED for n in names}
    else:
        raise ValueError(f"unknown scheme preset {preset!r}; choose from {SCHEME_PRESETS}")
    return PartitionScheme(tags, name=preset)


# -- forward / backward -------------------------------------------------------

def lstm_cell_forward(params: ParamVector, h_prev, c_prev, x_t):
    """Single cell step; returns (h, c, gate cache). Built on the strict
    numerics layer; the rollout kernels are the fast path."""
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if h_prev.shape != c_prev.shape:
        raise ShapeError(f"h/c shape mismatch: {h_prev.shape} vs {c_prev.shape}")
    pre = {
        g: matvec(params[f"lstm.w_x{g}"], x_t) + matvec(params[f"lstm.w_h{g}"], h_prev) + params[f"lstm.b_{g}"]
        for g in GATES
    }
    i_t = elementwise("sigmoid", pre["i"])
    f_t = elementwise("sigmoid", pre["f"])
    g_t = elementwise("tanh", pre["g"])
    o_t = elementwise("sigmoid", pre["o"])
    c_t = elementwise("add", elementwise("mul", f_t, c_prev), elementwise("mul", i_t, g_t))
    h_t = elementwise("mul", o_t, elementwise("tanh", c_t))
    gates = {"i": i_t, "f": f_t, "g": g_t, "o": o_t, "c": c_t}
    return h_t, c_t, gates


@dataclass
class Tape:
    """Forward intermediates needed by backward."""
    dims: ModelDims
    schema: ParamVector
    cache: object


def _pack(params: ParamVector, dims: ModelDims):
    wx = np.concatenate([params[f"lstm.w_x{g}"] for g in GATES], axis=0)
    wh = np.concatenate([params[f"lstm.w_h{g}"] for g in GATES], axis=0)
    b = np.concatenate([params[f"lstm.b_{g}"] for g in GATES])
    return (
        wx, wh, b,
        params["mlp.w0"], params["mlp.b0"], float(params["mlp.slope0"][0]),
        params["mlp.w1"], params["mlp.b1"], float(params["mlp.slope1"][0]),
        params["mlp.w2"][0], float(params["mlp.b2"][0]),
    )


def _unpack_grads(grads, dims: ModelDims) -> ParamVector:
    dwx, dwh, db, dw0, db0, ds0, dw1, db1, ds1, dw2, db2 = grads
    h = dims.hidden
    groups = []
    for k, g in enumerate(GATES):
        groups.append((f"lstm.w_x{g}", dwx[k * h : (k + 1) * h]))
        groups.append((f"lstm.w_h{g}", dwh[k * h : (k + 1) * h]))
        groups.append((f"lstm.b_{g}", db[k * h : (k + 1) * h]))
    groups += [
        ("mlp.w0", dw0), ("mlp.b0", db0), ("mlp.slope0", np.array([ds0])),
        ("mlp.w1", dw1), ("mlp.b1", db1), ("mlp.slope1", np.array([ds1])),
        ("mlp.w2", dw2.reshape(1, -1)), ("mlp.b2", np.array([db2])),
    ]
    return ParamVector(groups)


def forward_batch(params: ParamVector, dims: ModelDims, x) -> tuple[np.ndarray, Tape]:
    """Forecast a batch of windows; x has shape (batch, lookback, 1+d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != dims.lookback or x.shape[2] != dims.input_size:
        raise ShapeError(f"input shape {x.shape} != (B, {dims.lookback}, {dims.input_size})")
    yhat, cache = kernels.forward_batch(x, *_pack(params, dims))
    return yhat, Tape(dims, params, cache)


def backward_batch(tape: Tape, dy) -> ParamVector:
    """Gradients of sum_b dy[b] * yhat[b] with respect to every group."""
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != (tape.cache.x.shape[0],):
        raise ShapeError(f"dy shape {dy.shape} != ({tape.cache.x.shape[0]},)")
    return _unpack_grads(kernels.backward_batch(tape.cache, dy), tape.dims)


def forward(params: ParamVector, dims: ModelDims, x_seq) -> tuple[float, Tape]:
    """Single-window forecast; x_seq has shape (lookback, 1+d)."""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    yhat, tape = forward_batch(params, dims, x_seq[None, :, :])
    return float(yhat[0]), tape


def backward(tape: Tape, dl_dyhat: float) -> ParamVector:
    return backward_batch(tape, np.array([float(dl_dyhat)]))
