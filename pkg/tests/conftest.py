"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from fedcast import data as da
from fedcast import model as mo
from fedcast.numerics import make_rng
from fedcast.params import ParamVector

SMALL_DIMS = mo.ModelDims(hidden=3, lookback=4, lookahead=2, n_features=7, mlp_hidden=(5, 3))


@pytest.fixture
def small_dims():
    return SMALL_DIMS


def make_series(length=400, seed=0, phase=0.0, name="fixture"):
    """Sinusoid-plus-noise client series at 15-minute cadence, arbitrary length."""
    rng = make_rng(seed, 7)
    t = np.arange(length, dtype=float)
    load = 10.0 + 3.0 * np.sin(2 * np.pi * t / 96 + phase) + 0.5 * rng.normal(size=length)
    temp = 15.0 + 5.0 * np.sin(2 * np.pi * t / 96) + 0.2 * rng.normal(size=length)
    wind = 4.0 + 0.3 * rng.normal(size=length)
    exog = np.column_stack([temp, wind,
                            np.full(length, 1000.0), np.full(length, 400.0), np.full(length, 50.0)])
    timestamps = np.datetime64("2023-03-01T00:00", "m") + (np.arange(length) * 15).astype("timedelta64[m]")
    return da.ClientSeries(timestamps, load, exog, name=name)


def tiny_datasets(n_clients=3, length=400, dims=SMALL_DIMS):
    """Small per-client datasets sized so every split has windows."""
    return [
        da.split_and_window(make_series(length, seed=c, phase=0.9 * c, name=f"c{c}"),
                            (0.8, 0.1, 0.1), dims.lookback, dims.lookahead)
        for c in range(n_clients)
    ]


# -- independent oracles ------------------------------------------------------

def scalar_cell_reference(params: ParamVector, h_prev, c_prev, x_t, hidden):
    """Loop-based LSTM cell step using only Python floats, no matrix ops."""

    def dot_row(w, row, vec):
        return sum(float(w[row][j]) * float(vec[j]) for j in range(len(vec)))

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    h, c = [], []
    for k in range(hidden):
        pre = {}
        for g in "ifgo":
            pre[g] = (dot_row(params[f"lstm.w_x{g}"], k, x_t)
                      + dot_row(params[f"lstm.w_h{g}"], k, h_prev)
                      + float(params[f"lstm.b_{g}"][k]))
        i_k, f_k, o_k = sig(pre["i"]), sig(pre["f"]), sig(pre["o"])
        g_k = math.tanh(pre["g"])
        c_k = f_k * float(c_prev[k]) + i_k * g_k
        c.append(c_k)
        h.append(o_k * math.tanh(c_k))
    return h, c


def scalar_forward_reference(params: ParamVector, dims, x_seq):
    """Loop-based full forecaster forward pass, no matrix ops."""
    h = [0.0] * dims.hidden
    c = [0.0] * dims.hidden
    hs = []
    for t in range(dims.lookback):
        h, c = scalar_cell_reference(params, h, c, x_seq[t], dims.hidden)
        hs.extend(h)

    def layer(w, b, vec):
        return [sum(float(w[k][j]) * vec[j] for j in range(len(vec))) + float(b[k])
                for k in range(len(b))]

    def prelu(vec, slope):
        return [z if z > 0 else slope * z for z in vec]

    a0 = prelu(layer(params["mlp.w0"], params["mlp.b0"], hs), float(params["mlp.slope0"][0]))
    a1 = prelu(layer(params["mlp.w1"], params["mlp.b1"], a0), float(params["mlp.slope1"][0]))
    return layer(params["mlp.w2"], params["mlp.b2"], a1)[0]


def fd_gradient(params: ParamVector, dims, x, dy, eps=1e-5):
    """Central finite differences of sum_b dy[b] * yhat[b] over flat params."""
    flat = params.flatten()

    def value(fl):
        yhat, _ = mo.forward_batch(params.unflatten(fl), dims, x)
        return float(np.dot(dy, yhat))

    grad = np.zeros_like(flat)
    for i in range(flat.size):
        fp = flat.copy()
        fp[i] += eps
        fm = flat.copy()
        fm[i] -= eps
        grad[i] = (value(fp) - value(fm)) / (2 * eps)
    return grad


def max_rel_err(a, b, floor=1e-8):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))
