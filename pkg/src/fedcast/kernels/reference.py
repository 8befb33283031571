"""Pure numpy implementation of the forecaster kernels.

Forward: roll an LSTM cell over the lookback window from zero states, feed the
concatenated hidden states through a two-hidden-layer MLP with learnable-slope
PReLU activations, emit one scalar forecast per batch row.

Backward: exact reverse-mode gradients (backpropagation through time) of
sum_b dy[b] * yhat[b] with respect to every packed weight array.
"""

from __future__ import annotations

import numpy as np

from .common import KernelCache

NAME = "python"


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def forward_batch(x, wx, wh, b, w0, b0, s0, w1, b1, s1, w2, b2):
    x = np.ascontiguousarray(x, dtype=np.float64)
    B, T, D = x.shape
    H = wh.shape[1]
    gi = np.empty((B, T, H))
    gf = np.empty((B, T, H))
    gg = np.empty((B, T, H))
    go = np.empty((B, T, H))
    c = np.empty((B, T, H))
    tc = np.empty((B, T, H))
    h = np.empty((B, T, H))

    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        pre = x[:, t] @ wx.T + h_prev @ wh.T + b
        gi[:, t] = _sigmoid(pre[:, :H])
        gf[:, t] = _sigmoid(pre[:, H : 2 * H])
        gg[:, t] = np.tanh(pre[:, 2 * H : 3 * H])
        go[:, t] = _sigmoid(pre[:, 3 * H :])
        c[:, t] = gf[:, t] * c_prev + gi[:, t] * gg[:, t]
        tc[:, t] = np.tanh(c[:, t])
        h[:, t] = go[:, t] * tc[:, t]
        h_prev = h[:, t]
        c_prev = c[:, t]

    flat = h.reshape(B, T * H)
    z0 = flat @ w0.T + b0
    a0 = np.where(z0 > 0.0, z0, s0 * z0)
    z1 = a0 @ w1.T + b1
    a1 = np.where(z1 > 0.0, z1, s1 * z1)
    yhat = a1 @ w2 + b2
    cache = KernelCache(x, wx, wh, w0, float(s0), w1, float(s1), w2,
                        gi, gf, gg, go, c, tc, h, z0, a0, z1, a1)
    return yhat, cache


def backward_batch(cache: KernelCache, dy):
    x, wx, wh, w0, s0, w1, s1, w2 = cache[:8]
    gi, gf, gg, go, c, tc, h, z0, a0, z1, a1 = cache[8:]
    dy = np.asarray(dy, dtype=np.float64)
    B, T, D = x.shape
    H = wh.shape[1]

    dw2 = a1.T @ dy
    db2 = float(dy.sum())
    da1 = np.outer(dy, w2)
    dz1 = da1 * np.where(z1 > 0.0, 1.0, s1)
    ds1 = float(np.sum(da1 * np.where(z1 > 0.0, 0.0, z1)))
    dw1 = dz1.T @ a0
    db1 = dz1.sum(axis=0)
    da0 = dz1 @ w1
    dz0 = da0 * np.where(z0 > 0.0, 1.0, s0)
    ds0 = float(np.sum(da0 * np.where(z0 > 0.0, 0.0, z0)))
    flat = h.reshape(B, T * H)
    dw0 = dz0.T @ flat
    db0 = dz0.sum(axis=0)
    dflat = (dz0 @ w0).reshape(B, T, H)

    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i_t, f_t, g_t, o_t = gi[:, t], gf[:, t], gg[:, t], go[:, t]
        c_prev = c[:, t - 1] if t > 0 else np.zeros((B, H))
        h_prev = h[:, t - 1] if t > 0 else np.zeros((B, H))
        dh = dflat[:, t] + dh_next
        do = dh * tc[:, t]
        dc = dh * o_t * (1.0 - tc[:, t] ** 2) + dc_next
        di = dc * g_t
        dg = dc * i_t
        df = dc * c_prev
        dpre = np.concatenate(
            [
                di * i_t * (1.0 - i_t),
                df * f_t * (1.0 - f_t),
                dg * (1.0 - g_t ** 2),
                do * o_t * (1.0 - o_t),
            ],
            axis=1,
        )
        dwx += dpre.T @ x[:, t]
        dwh += dpre.T @ h_prev
        db += dpre.sum(axis=0)
        dh_next = dpre @ wh
        dc_next = dc * f_t

    return dwx, dwh, db, dw0, db0, ds0, dw1, db1, ds1, dw2, db2
