import numpy as np
import pytest

from conftest import fd_gradient, max_rel_err, scalar_cell_reference, scalar_forward_reference

from fedcast import model as mo
from fedcast.numerics import ShapeError, make_rng
from fedcast.params import split

DEFAULT = mo.ModelDims()


def test_default_parameter_counts():
    # 4 gates x (25x8 + 25x25 + 25) = 3,400 LSTM parameters;
    # 300x150+150 + 150x75+75 + 75+1 + 2 slopes = 56,553 MLP parameters
    shapes = mo.group_shapes(DEFAULT)
    lstm = sum(int(np.prod(s)) for n, s in shapes.items() if n.startswith("lstm."))
    mlp = sum(int(np.prod(s)) for n, s in shapes.items() if n.startswith("mlp."))
    assert lstm == 3400
    assert mlp == 56553
    assert mo.n_params(DEFAULT) == 59953


def test_init_deterministic():
    p1 = mo.init_params(make_rng(9), DEFAULT)
    p2 = mo.init_params(make_rng(9), DEFAULT)
    assert p1.equals(p2)


def test_init_bounds_and_slopes(small_dims):
    p = mo.init_params(make_rng(0), small_dims)
    bound = 1.0 / np.sqrt(small_dims.hidden)
    for g in mo.GATES:
        assert np.all(np.abs(p[f"lstm.w_x{g}"]) <= bound)
    assert np.array_equal(p["mlp.slope0"], [0.25])
    assert np.array_equal(p["mlp.slope1"], [0.25])


def test_partition_presets():
    p = mo.init_params(make_rng(0), DEFAULT)
    shared, personal = split(p, mo.make_scheme(DEFAULT, "full-shared"))
    assert shared.n_elements == 59953 and personal.n_elements == 0
    shared, personal = split(p, mo.make_scheme(DEFAULT, "local-only"))
    assert shared.n_elements == 0 and personal.n_elements == 59953
    shared, personal = split(p, mo.make_scheme(DEFAULT, "lstm-shared"))
    assert shared.n_elements == 3400
    assert personal.n_elements == 56553


def test_unknown_preset():
    with pytest.raises(ValueError):
        mo.make_scheme(DEFAULT, "half-shared")


def test_cell_zero_params(small_dims):
    p = mo.init_params(make_rng(0), small_dims).zeros_like()
    c_prev = np.array([0.4, -0.2, 1.0])
    h, c, gates = mo.lstm_cell_forward(p, np.zeros(3), c_prev, np.ones(small_dims.input_size))
    assert np.allclose(gates["i"], 0.5) and np.allclose(gates["f"], 0.5) and np.allclose(gates["o"], 0.5)
    assert np.allclose(gates["g"], 0.0)
    assert np.allclose(c, 0.5 * c_prev)
    assert np.allclose(h, 0.5 * np.tanh(0.5 * c_prev))
    h0, c0, _ = mo.lstm_cell_forward(p, np.zeros(3), np.zeros(3), np.ones(small_dims.input_size))
    assert np.all(h0 == 0.0) and np.all(c0 == 0.0)


def test_cell_matches_scalar_reference():
    dims = mo.ModelDims(hidden=2, lookback=1, lookahead=1, n_features=2, mlp_hidden=(3, 2))
    rng = make_rng(11)
    p = mo.init_params(rng, dims)
    h_prev = rng.normal(size=2)
    c_prev = rng.normal(size=2)
    x_t = rng.normal(size=3)
    h, c, _ = mo.lstm_cell_forward(p, h_prev, c_prev, x_t)
    h_ref, c_ref = scalar_cell_reference(p, h_prev, c_prev, x_t, 2)
    assert np.allclose(h, h_ref, atol=1e-12)
    assert np.allclose(c, c_ref, atol=1e-12)


def test_forward_zero_params(small_dims):
    p = mo.init_params(make_rng(0), small_dims).zeros_like()
    x = np.ones((small_dims.lookback, small_dims.input_size))
    y, _ = mo.forward(p, small_dims, x)
    assert y == 0.0
    y2, _ = mo.forward(p, small_dims, 2.0 * x)
    assert y2 == 0.0


def test_forward_matches_scalar_reference():
    dims = mo.ModelDims(hidden=2, lookback=3, lookahead=1, n_features=2, mlp_hidden=(4, 2))
    rng = make_rng(21)
    p = mo.init_params(rng, dims)
    x = rng.normal(size=(dims.lookback, dims.input_size))
    y, _ = mo.forward(p, dims, x)
    assert y == pytest.approx(scalar_forward_reference(p, dims, x), abs=1e-12)


def test_forward_purity(small_dims):
    rng = make_rng(5)
    p = mo.init_params(rng, small_dims)
    x = rng.normal(size=(2, small_dims.lookback, small_dims.input_size))
    y1, _ = mo.forward_batch(p, small_dims, x)
    y2, _ = mo.forward_batch(p, small_dims, x)
    assert np.array_equal(y1, y2)


def test_forward_shape_check(small_dims):
    p = mo.init_params(make_rng(0), small_dims)
    with pytest.raises(ShapeError):
        mo.forward_batch(p, small_dims, np.zeros((2, small_dims.lookback + 1, small_dims.input_size)))


def test_backward_zero_upstream(small_dims):
    rng = make_rng(2)
    p = mo.init_params(rng, small_dims)
    x = rng.normal(size=(small_dims.lookback, small_dims.input_size))
    _, tape = mo.forward(p, small_dims, x)
    g = mo.backward(tape, 0.0)
    assert g.flatten().max() == 0.0 and g.flatten().min() == 0.0


def test_backward_linear_case():
    # frozen-zero LSTM -> hidden states 0 -> MLP sees zeros; only biases and
    # slopes feed through, so check the bias-path gradient analytically
    dims = mo.ModelDims(hidden=2, lookback=1, lookahead=1, n_features=1, mlp_hidden=(2, 2))
    p = mo.init_params(make_rng(3), dims).zeros_like()
    p["mlp.b2"] = np.array([0.7])
    x = np.ones((dims.lookback, dims.input_size))
    y, tape = mo.forward(p, dims, x)
    assert y == pytest.approx(0.7)
    g = mo.backward(tape, 1.0)
    assert g["mlp.b2"] == pytest.approx([1.0])
    assert np.allclose(g["mlp.w2"], 0.0)  # a1 is zero


def test_backward_matches_finite_differences():
    rng = make_rng(77)
    for trial in range(3):
        dims = mo.ModelDims(hidden=int(rng.integers(2, 4)), lookback=int(rng.integers(1, 5)),
                            lookahead=1, n_features=2, mlp_hidden=(4, 3))
        p = mo.init_params(make_rng(trial), dims)
        x = rng.normal(size=(2, dims.lookback, dims.input_size))
        dy = rng.normal(size=2)
        _, tape = mo.forward_batch(p, dims, x)
        g = mo.backward_batch(tape, dy)
        assert max_rel_err(g.flatten(), fd_gradient(p, dims, x, dy)) < 1e-5
