"""Client-side local training procedures.

Four kinds: adam, adam_ams, prox, prox_adam. Each consumes the broadcast
parameters and the client's previous state, runs a fixed number of minibatch
steps on the squared forecast error (plus an optional proximal pull toward
the broadcast), and returns the new state together with the pseudo-gradient
(start parameters minus final parameters).

Conventions:
  - adam and prox start from the broadcast; adam_ams and prox_adam start
    from the client's own previous parameters.
  - First/second moments are reset to zero on every call; bias correction
    therefore uses the local step index.
  - The proximal reference is always the broadcast vector, and the penalty
    can be restricted to a subset of groups (the shared ones, when training
    with personalization).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import model
from .model import ModelDims
from .params import ParamVector

CLIENT_KINDS = ("adam", "adam_ams", "prox", "prox_adam")
_ADAM_FAMILY = ("adam", "adam_ams", "prox_adam")
_LOCAL_START = ("adam_ams", "prox_adam")


@dataclass
class ClientHyper:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    prox_weight: float = 0.01
    local_steps: int = 10
    batch_size: int = 16

    def __post_init__(self):
        if self.lr <= 0 or self.eps <= 0 or self.prox_weight < 0:
            raise ValueError("need lr > 0, eps > 0, prox_weight >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.local_steps < 1 or self.batch_size < 1:
            raise ValueError("local_steps and batch_size must be >= 1")


@dataclass
class ClientState:
    params: ParamVector
    m: ParamVector | None = None
    v: ParamVector | None = None


def init_client_state(kind: str, params: ParamVector) -> ClientState:
    if kind not in CLIENT_KINDS:
        raise ValueError(f"unknown client optimizer {kind!r}; choose from {CLIENT_KINDS}")
    if kind in _ADAM_FAMILY:
        return ClientState(params.copy(), params.zeros_like(), params.zeros_like())
    return ClientState(params.copy())


def minibatch_indices(n: int, batch_size: int, steps: int,
                      rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Deterministic epoch-style sampling: a shuffled permutation consumed in
    batch-size chunks, reshuffled when exhausted. Batches never mix epochs."""
    batch_size = min(batch_size, n)
    perm = rng.permutation(n)
    pos = 0
    for _ in range(steps):
        if pos + batch_size > n:
            perm = rng.permutation(n)
            pos = 0
        yield perm[pos : pos + batch_size]
        pos += batch_size


def _batch_loss_grad(params: ParamVector, dims: ModelDims, inputs, labels):
    """Mean squared error over the minibatch and its gradient."""
    yhat, tape = model.forward_batch(params, dims, inputs)
    resid = yhat - labels
    loss = float(np.mean(resid ** 2))
    grad = model.backward_batch(tape, 2.0 * resid / len(resid))
    return loss, grad


def client_opt(kind: str, broadcast: ParamVector, state: ClientState, dataset,
               dims: ModelDims, hyper: ClientHyper, rng: np.random.Generator,
               penalty_groups: Iterable[str] | None = None):
    """Run one round of local training.

    Returns (new_state, pseudo_gradient, mean_train_loss). The pseudo-gradient
    is start-parameters minus final-parameters, where the start is the
    broadcast (adam, prox) or the client's own previous parameters
    (adam_ams, prox_adam).
    """
    if kind not in CLIENT_KINDS:
        raise ValueError(f"unknown client optimizer {kind!r}; choose from {CLIENT_KINDS}")
    if len(dataset) == 0:
        raise ValueError("client_opt: empty training dataset")
    broadcast.check_schema(state.params)
    proximal = kind in ("prox", "prox_adam")
    if penalty_groups is None:
        penalty_names = set(broadcast.names())
    else:
        penalty_names = set(penalty_groups)

    theta0 = state.params.copy() if kind in _LOCAL_START else broadcast.copy()
    theta = theta0.copy()
    if kind in _ADAM_FAMILY:
        m = theta.zeros_like()
        v = theta.zeros_like()
        v_max = theta.zeros_like()
    else:
        m = v = None

    losses = []
    batches = minibatch_indices(len(dataset), hyper.batch_size, hyper.local_steps, rng)
    for step, idx in enumerate(batches, start=1):
        loss, grad = _batch_loss_grad(theta, dims, dataset.inputs[idx], dataset.labels[idx])
        losses.append(loss)
        if proximal and hyper.prox_weight > 0:
            for name in grad:
                if name in penalty_names:
                    grad[name] = grad[name] + 2.0 * hyper.prox_weight * (theta[name] - broadcast[name])
        if kind == "prox":
            theta = theta - hyper.lr * grad
        else:
            m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad
            v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad.map(np.square)
            m_hat = (1.0 / (1.0 - hyper.beta1 ** step)) * m
            v_hat = (1.0 / (1.0 - hyper.beta2 ** step)) * v
            if kind == "adam_ams":
                v_max = v_max.combine(v_hat, np.maximum)
                denom = v_max
            else:
                denom = v_hat
            theta = theta - hyper.lr * m_hat.combine(denom, lambda mm, vv: mm / (np.sqrt(vv) + hyper.eps))

    if kind in _ADAM_FAMILY:
        new_state = ClientState(theta, m, v)
    else:
        new_state = ClientState(theta)
    pseudo_grad = theta0 - theta
    return new_state, pseudo_grad, float(np.mean(losses))
