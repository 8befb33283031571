"""Server-side aggregation of client pseudo-gradients.

Five kinds: fedavg, fedadagrad, fedyogi, fedadam, fedavg_adaptive. All act on
the uniform mean of the client pseudo-gradients (reduced in client-index
order) and step the server parameters against it, so fedavg with a server
learning rate of 1 recovers plain model averaging.

A ``paper_literal`` switch keeps the verbatim source formulations available
for auditing (ascent sign, unaveraged sum, non-accumulating adagrad second
moment, sign-less fedadam recursion); no convergence is claimed for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamVector

SERVER_KINDS = ("fedavg", "fedadagrad", "fedyogi", "fedadam", "fedavg_adaptive")
_ADAPTIVE = ("fedadagrad", "fedyogi", "fedadam")


@dataclass
class ServerHyper:
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    # adaptive server steps are ~ lr * m / (sqrt(v) + eps); with pseudo-gradients
    # this needs a large eps (1e-3 is the usual federated-adaptivity default)
    # to keep unit server rates stable
    eps: float = 1e-3
    paper_literal: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("need lr > 0 and eps > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class ServerState:
    kind: str
    params: ParamVector | None = None
    m: ParamVector | None = None
    v: ParamVector | None = None
    # fedavg_adaptive keeps an independent (params, v) pair per client
    client_params: list[ParamVector] = field(default_factory=list)
    client_v: list[ParamVector] = field(default_factory=list)


def init_server_state(kind: str, params: ParamVector, n_clients: int) -> ServerState:
    if kind not in SERVER_KINDS:
        raise ValueError(f"unknown server optimizer {kind!r}; choose from {SERVER_KINDS}")
    if kind == "fedavg_adaptive":
        return ServerState(
            kind,
            client_params=[params.copy() for _ in range(n_clients)],
            client_v=[params.zeros_like() for _ in range(n_clients)],
        )
    if kind in _ADAPTIVE:
        return ServerState(kind, params.copy(), params.zeros_like(), params.zeros_like())
    return ServerState(kind, params.copy())


def broadcast_params(state: ServerState, client: int) -> ParamVector:
    """Parameters the server sends to a given client this round."""
    if state.kind == "fedavg_adaptive":
        return state.client_params[client].copy()
    return state.params.copy()


def _mean_grad(grads: list[ParamVector], weights, literal: bool) -> ParamVector:
    acc = grads[0].copy() if weights is None else weights[0] * grads[0]
    for c in range(1, len(grads)):
        acc = acc + (grads[c] if weights is None else weights[c] * grads[c])
    if literal or weights is not None:
        return acc
    return (1.0 / len(grads)) * acc


def server_opt(state: ServerState, grads: list[ParamVector], hyper: ServerHyper,
               weights: list[float] | None = None) -> ServerState:
    """One aggregation step; returns the new server state.

    ``weights`` optionally replaces the uniform 1/N mean with fixed client
    weights (they should sum to 1).
    """
    if not grads:
        raise ValueError("server_opt: no client gradients")
    ref = state.client_params[0] if state.kind == "fedavg_adaptive" else state.params
    for g in grads:
        ref.check_schema(g)
    lit = hyper.paper_literal

    if state.kind == "fedavg_adaptive":
        if len(grads) != len(state.client_params):
            raise ValueError(f"expected {len(state.client_params)} gradients, got {len(grads)}")
        new_p, new_v = [], []
        for c, g in enumerate(grads):
            v_c = hyper.beta1 * state.client_v[c] + (1.0 - hyper.beta1) * g.map(np.square)
            step = g.combine(v_c, lambda gg, vv: gg / (np.sqrt(vv) + hyper.eps))
            new_p.append(state.client_params[c] - hyper.lr * step)
            new_v.append(v_c)
        return ServerState(state.kind, client_params=new_p, client_v=new_v)

    gbar = _mean_grad(grads, weights, lit)
    if state.kind == "fedavg":
        theta = state.params + hyper.lr * gbar if lit else state.params - hyper.lr * gbar
        return ServerState(state.kind, theta)

    g2 = gbar.map(np.square)
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * gbar
    if state.kind == "fedadagrad":
        v = g2 if lit else state.v + g2
    elif state.kind == "fedadam":
        if lit:
            v = hyper.beta2 * state.v - (1.0 - hyper.beta2) * g2
        else:
            v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g2
    else:  # fedyogi
        sign = state.v.combine(g2, lambda vv, gg: np.sign(vv - gg))
        delta = g2.combine(sign, np.multiply)
        lead = hyper.beta2 * state.v if lit else state.v
        v = lead - (1.0 - hyper.beta2) * delta
    step = m.combine(v, lambda mm, vv: mm / (np.sqrt(vv) + hyper.eps))
    theta = state.params + hyper.lr * step if lit else state.params - hyper.lr * step
    return ServerState(state.kind, theta, m, v)
