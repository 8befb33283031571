"""Dense array helpers with strict shape discipline and seeded randomness.

All arrays are float64 internally. Binary operations require exactly equal
shapes; there is no broadcasting. Randomness always flows through an explicit
generator so that equal seeds reproduce equal streams on every platform.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "make_rng",
    "matvec",
    "sigmoid",
    "elementwise",
    "sample_uniform",
]


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for ``seed`` plus an optional stream tag.

    Stream tags (e.g. round index, client index) derive statistically
    independent substreams that are stable across runs and platforms.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def matvec(w, x) -> np.ndarray:
    w = _as_f64(w)
    x = _as_f64(x)
    if w.ndim != 2 or x.ndim != 1:
        raise ShapeError(f"matvec expects (matrix, vector), got ndim {w.ndim} and {x.ndim}")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec shape mismatch: {w.shape} x {x.shape}")
    return w @ x


def sigmoid(z) -> np.ndarray:
    z = _as_f64(z)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


_UNARY = {
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "square": np.square,
    "sqrt": np.sqrt,
    "sign": np.sign,
    "abs": np.abs,
}

_BINARY = {
    "mul": np.multiply,
    "add": np.add,
    "sub": np.subtract,
    "max": np.maximum,
}


def elementwise(op: str, a, b=None) -> np.ndarray:
    """Apply a named elementwise operation; binary ops require equal shapes."""
    a = _as_f64(a)
    if op in _UNARY:
        if b is not None:
            raise ValueError(f"{op!r} is unary")
        return _UNARY[op](a)
    if op in _BINARY:
        if b is None:
            raise ValueError(f"{op!r} needs two operands")
        b = _as_f64(b)
        if a.shape != b.shape:
            raise ShapeError(f"elementwise {op!r} shape mismatch: {a.shape} vs {b.shape}")
        return _BINARY[op](a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


def sample_uniform(rng: np.random.Generator, lo: float, hi: float, shape) -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"sample_uniform needs lo < hi, got [{lo}, {hi})")
    return rng.uniform(lo, hi, size=shape)
