"""Shared cache layout for the forecaster kernels.

Both kernel backends (compiled and pure numpy) produce this cache from the
forward pass; either backward can consume it.

Packed weight layout:
  wx : (4H, D)  input weights, gate rows stacked in order i, f, g, o
  wh : (4H, H)  recurrent weights, same stacking
  b  : (4H,)    gate biases
  w0 : (H1, T*H), b0 : (H1,), s0 : scalar slope of the first hidden activation
  w1 : (H2, H1),  b1 : (H2,), s1 : scalar slope of the second hidden activation
  w2 : (H2,),     b2 : scalar (final linear layer to one output)
"""

from typing import NamedTuple

import numpy as np


class KernelCache(NamedTuple):
    x: np.ndarray        # (B, T, D) inputs
    wx: np.ndarray
    wh: np.ndarray
    w0: np.ndarray
    s0: float
    w1: np.ndarray
    s1: float
    w2: np.ndarray
    gi: np.ndarray       # (B, T, H) input-gate activations
    gf: np.ndarray       # (B, T, H) forget-gate activations
    gg: np.ndarray       # (B, T, H) candidate activations (tanh)
    go: np.ndarray       # (B, T, H) output-gate activations
    c: np.ndarray        # (B, T, H) cell states
    tc: np.ndarray       # (B, T, H) tanh of cell states
    h: np.ndarray        # (B, T, H) hidden states
    z0: np.ndarray       # (B, H1) first-layer pre-activations
    a0: np.ndarray       # (B, H1) first-layer activations
    z1: np.ndarray       # (B, H2) second-layer pre-activations
    a1: np.ndarray       # (B, H2) second-layer activations
