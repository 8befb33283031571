import numpy as np
import pytest

from conftest import SMALL_DIMS, tiny_datasets

from fedcast import client_opt as co
from fedcast import data as da
from fedcast import model as mo
from fedcast.numerics import make_rng

HYPER = co.ClientHyper(lr=0.02, local_steps=6, batch_size=8, prox_weight=0.05)


def _zero_dataset(n=20, dims=SMALL_DIMS):
    scaler = da.Scaler(np.zeros(dims.input_size), np.ones(dims.input_size))
    return da.WindowedDataset(np.zeros((n, dims.lookback, dims.input_size)),
                              np.zeros(n), dims.lookback, dims.lookahead, scaler)


def _flat_adam_reference(theta0, broadcast, dataset, dims, hyper, rng, ams=False, prox=0.0,
                         collect_vmax=False):
    """Independent Adam/AdamAMS loop on flat arrays (update math reimplemented)."""
    schema = theta0
    theta = theta0.flatten()
    ref = broadcast.flatten()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    vmax = np.zeros_like(theta)
    vmax_history = []
    batches = co.minibatch_indices(len(dataset), hyper.batch_size, hyper.local_steps, rng)
    for step, idx in enumerate(batches, start=1):
        pv = schema.unflatten(theta)
        yhat, tape = mo.forward_batch(pv, dims, dataset.inputs[idx])
        g = mo.backward_batch(tape, 2.0 * (yhat - dataset.labels[idx]) / len(idx)).flatten()
        if prox:
            g = g + 2.0 * prox * (theta - ref)
        m = hyper.beta1 * m + (1 - hyper.beta1) * g
        v = hyper.beta2 * v + (1 - hyper.beta2) * g ** 2
        m_hat = m / (1 - hyper.beta1 ** step)
        v_hat = v / (1 - hyper.beta2 ** step)
        if ams:
            vmax = np.maximum(vmax, v_hat)
            vmax_history.append(vmax.copy())
            theta = theta - hyper.lr * m_hat / (np.sqrt(vmax) + hyper.eps)
        else:
            theta = theta - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    if collect_vmax:
        return schema.unflatten(theta), vmax_history
    return schema.unflatten(theta)


def _flat_sgd_reference(theta0, dataset, dims, hyper, rng):
    schema = theta0
    theta = theta0.flatten()
    for idx in co.minibatch_indices(len(dataset), hyper.batch_size, hyper.local_steps, rng):
        pv = schema.unflatten(theta)
        yhat, tape = mo.forward_batch(pv, dims, dataset.inputs[idx])
        g = mo.backward_batch(tape, 2.0 * (yhat - dataset.labels[idx]) / len(idx)).flatten()
        theta = theta - hyper.lr * g
    return schema.unflatten(theta)


@pytest.fixture(scope="module")
def dataset():
    return tiny_datasets(1)[0].train


@pytest.fixture(scope="module")
def init():
    return mo.init_params(make_rng(0), SMALL_DIMS)


@pytest.mark.parametrize("kind", co.CLIENT_KINDS)
def test_zero_data_zero_params_is_fixed_point(kind):
    p = mo.init_params(make_rng(0), SMALL_DIMS).zeros_like()
    state = co.init_client_state(kind, p)
    new_state, g, loss = co.client_opt(kind, p, state, _zero_dataset(), SMALL_DIMS, HYPER, make_rng(1))
    assert g.flatten().max() == 0.0 and g.flatten().min() == 0.0
    assert new_state.params.equals(p)
    assert loss == 0.0


def test_prox_alpha_zero_equals_sgd(dataset, init):
    hyper = co.ClientHyper(lr=0.03, local_steps=10, batch_size=8, prox_weight=0.0)
    state = co.init_client_state("prox", init)
    new_state, _, _ = co.client_opt("prox", init, state, dataset, SMALL_DIMS, hyper, make_rng(5))
    expected = _flat_sgd_reference(init, dataset, SMALL_DIMS, hyper, make_rng(5))
    assert np.allclose(new_state.params.flatten(), expected.flatten(), atol=1e-12)


def test_prox_positive_alpha_differs_from_sgd(dataset, init):
    state = co.init_client_state("prox", init)
    new_state, _, _ = co.client_opt("prox", init, state, dataset, SMALL_DIMS, HYPER, make_rng(5))
    sgd = _flat_sgd_reference(init, dataset, SMALL_DIMS, HYPER, make_rng(5))
    assert not np.allclose(new_state.params.flatten(), sgd.flatten())


def test_prox_empty_penalty_mask_degenerates_to_sgd(dataset, init):
    # personalizing everything leaves no shared groups, so the pull vanishes
    state = co.init_client_state("prox", init)
    new_state, _, _ = co.client_opt("prox", init, state, dataset, SMALL_DIMS, HYPER,
                                    make_rng(5), penalty_groups=set())
    expected = _flat_sgd_reference(init, dataset, SMALL_DIMS, HYPER, make_rng(5))
    assert np.allclose(new_state.params.flatten(), expected.flatten(), atol=1e-12)


def test_prox_adam_alpha_zero_first_round_equals_adam(dataset, init):
    hyper = co.ClientHyper(lr=0.02, local_steps=10, batch_size=8, prox_weight=0.0)
    out = {}
    for kind in ("adam", "prox_adam"):
        state = co.init_client_state(kind, init)  # round 1: state params = broadcast
        new_state, _, _ = co.client_opt(kind, init, state, dataset, SMALL_DIMS, hyper, make_rng(9))
        out[kind] = new_state.params.flatten()
    assert np.allclose(out["adam"], out["prox_adam"], atol=1e-12)


def test_adam_matches_flat_reference(dataset, init):
    state = co.init_client_state("adam", init)
    new_state, _, _ = co.client_opt("adam", init, state, dataset, SMALL_DIMS, HYPER, make_rng(3))
    expected = _flat_adam_reference(init, init, dataset, SMALL_DIMS, HYPER, make_rng(3))
    assert np.allclose(new_state.params.flatten(), expected.flatten(), atol=1e-12)


def test_adam_ams_matches_reference_and_vmax_monotone(dataset, init):
    state = co.init_client_state("adam_ams", init)
    new_state, _, _ = co.client_opt("adam_ams", init, state, dataset, SMALL_DIMS, HYPER, make_rng(3))
    expected, vmax_history = _flat_adam_reference(init, init, dataset, SMALL_DIMS, HYPER,
                                                  make_rng(3), ams=True, collect_vmax=True)
    assert np.allclose(new_state.params.flatten(), expected.flatten(), atol=1e-12)
    for prev, cur in zip(vmax_history, vmax_history[1:]):
        assert np.all(cur >= prev)


def test_single_adam_step_closed_form(dataset, init):
    hyper = co.ClientHyper(lr=0.1, local_steps=1, batch_size=len(dataset))
    state = co.init_client_state("adam", init)
    new_state, _, _ = co.client_opt("adam", init, state, dataset, SMALL_DIMS, hyper, make_rng(7))
    # one full-batch step: m_hat = g, v_hat = g^2, so theta1 = theta0 - lr*g/(|g|+eps)
    yhat, tape = mo.forward_batch(init, SMALL_DIMS, dataset.inputs)
    g = mo.backward_batch(tape, 2.0 * (yhat - dataset.labels) / len(dataset)).flatten()
    expected = init.flatten() - hyper.lr * g / (np.abs(g) + hyper.eps)
    assert np.allclose(new_state.params.flatten(), expected, atol=1e-12)


@pytest.mark.parametrize("kind", co.CLIENT_KINDS)
def test_pseudo_gradient_identity_and_schema(dataset, init, kind):
    state = co.init_client_state(kind, init)
    start_local = kind in ("adam_ams", "prox_adam")
    new_state, g, _ = co.client_opt(kind, init, state, dataset, SMALL_DIMS, HYPER, make_rng(2))
    start = state.params if start_local else init
    assert (start - new_state.params).equals(g)
    assert new_state.params.schema == init.schema
    assert (new_state.m is None) == (kind == "prox")


def test_moments_reset_each_call(dataset, init):
    # stale moments in the incoming state must not influence the trajectory
    fresh = co.init_client_state("adam", init)
    stale = co.ClientState(init.copy(), init.map(lambda a: a + 3.0), init.map(np.abs))
    out_fresh, _, _ = co.client_opt("adam", init, fresh, dataset, SMALL_DIMS, HYPER, make_rng(4))
    out_stale, _, _ = co.client_opt("adam", init, stale, dataset, SMALL_DIMS, HYPER, make_rng(4))
    assert out_fresh.params.equals(out_stale.params)


def test_adam_ams_starts_from_local_params(dataset, init):
    shifted = init.map(lambda a: a + 0.01)
    state = co.ClientState(shifted.copy(), init.zeros_like(), init.zeros_like())
    new_state, g, _ = co.client_opt("adam_ams", init, state, dataset, SMALL_DIMS, HYPER, make_rng(6))
    assert (shifted - new_state.params).equals(g)


def test_empty_dataset_rejected(init):
    state = co.init_client_state("adam", init)
    with pytest.raises(ValueError, match="empty"):
        co.client_opt("adam", init, state, _zero_dataset(n=0), SMALL_DIMS, HYPER, make_rng(0))


def test_unknown_kind_rejected(init):
    with pytest.raises(ValueError):
        co.init_client_state("sgd", init)


def test_hyper_validation():
    with pytest.raises(ValueError):
        co.ClientHyper(lr=-1.0)
    with pytest.raises(ValueError):
        co.ClientHyper(beta1=1.0)
    with pytest.raises(ValueError):
        co.ClientHyper(local_steps=0)
