"""Round-based federation loops with byte-exact communication accounting.

Two drivers share the client/server optimizer modules:

  run_classical_fl -- every round broadcasts the full parameter vector and
    uploads the full pseudo-gradient.
  run_pl_fl        -- parameters are partitioned; only the shared groups are
    broadcast, uploaded and aggregated, while personalized groups never leave
    their client.

Every Communicate call is logged by counting the scalar elements of the
vector actually passed, never by formula. The whole run is a pure function
of (config, initial parameters, datasets).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import client_opt as co
from . import model as mo
from . import server_opt as so
from .metrics import mase_aligned
from .numerics import make_rng
from .params import ParamVector, PartitionScheme, merge, split


@dataclass
class FederationConfig:
    n_clients: int
    rounds: int
    scheme: PartitionScheme
    client_kind: str
    server_kind: str
    client_hyper: co.ClientHyper
    server_hyper: so.ServerHyper
    dims: mo.ModelDims
    seed: int = 0
    wire_bytes: int = 4
    weighting: str = "uniform"  # or "samples"

    def __post_init__(self):
        if self.n_clients < 1 or self.rounds < 1:
            raise ValueError("need n_clients >= 1 and rounds >= 1")
        if self.weighting not in ("uniform", "samples"):
            raise ValueError(f"weighting must be uniform|samples, got {self.weighting!r}")


@dataclass
class CommEntry:
    round: int
    client: int
    direction: str  # "down" | "up"
    n_elements: int
    n_bytes: int


@dataclass
class CommLedger:
    wire_bytes: int
    entries: list[CommEntry] = field(default_factory=list)

    def record(self, round_: int, client: int, direction: str, vec: ParamVector) -> None:
        n = vec.n_elements
        self.entries.append(CommEntry(round_, client, direction, n, n * self.wire_bytes))

    def total_bytes(self) -> int:
        return sum(e.n_bytes for e in self.entries)

    def round_client_elements(self, round_: int, client: int) -> dict[str, int]:
        out = {"down": 0, "up": 0}
        for e in self.entries:
            if e.round == round_ and e.client == client:
                out[e.direction] += e.n_elements
        return out

    def cumulative_bytes_by_round(self) -> list[int]:
        per_round: dict[int, int] = {}
        for e in self.entries:
            per_round[e.round] = per_round.get(e.round, 0) + e.n_bytes
        out, acc = [], 0
        for r in sorted(per_round):
            acc += per_round[r]
            out.append(acc)
        return out


@dataclass
class RoundRecord:
    round: int
    train_loss: list[float]
    val_mase: list[float]
    down_elements: list[int]
    up_elements: list[int]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "train_loss": self.train_loss,
            "val_mase": self.val_mase,
            "down_elements": self.down_elements,
            "up_elements": self.up_elements,
        }


@dataclass
class FederationResult:
    client_models: list[ParamVector]
    server_state: so.ServerState
    records: list[RoundRecord]
    ledger: CommLedger

    @property
    def server_params(self) -> ParamVector | None:
        return self.server_state.params


def evaluate_params(params: ParamVector, dims: mo.ModelDims, dataset, chunk: int = 512) -> float:
    """Validation/test MASE of one model on one windowed split, computed on
    denormalized values against the lag-L persistence baseline."""
    if len(dataset) == 0:
        raise ValueError("evaluate_params: empty split")
    preds = np.empty(len(dataset))
    for lo in range(0, len(dataset), chunk):
        yhat, _ = mo.forward_batch(params, dims, dataset.inputs[lo : lo + chunk])
        preds[lo : lo + chunk] = yhat
    return mase_aligned(dataset.scaler.denorm_load(preds),
                        dataset.labels_denorm(),
                        dataset.persistence_denorm())


def _weights(cfg: FederationConfig, datasets) -> list[float] | None:
    if cfg.weighting == "uniform":
        return None
    sizes = np.array([len(d.train) for d in datasets], dtype=np.float64)
    return list(sizes / sizes.sum())


def run_classical_fl(cfg: FederationConfig, model_init: ParamVector, datasets) -> FederationResult:
    """Full-vector federation: every group is broadcast and aggregated."""
    if len(datasets) != cfg.n_clients:
        raise ValueError(f"expected {cfg.n_clients} client datasets, got {len(datasets)}")
    ledger = CommLedger(cfg.wire_bytes)
    server = so.init_server_state(cfg.server_kind, model_init, cfg.n_clients)
    clients = [co.init_client_state(cfg.client_kind, model_init) for _ in range(cfg.n_clients)]
    weights = _weights(cfg, datasets)
    records = []
    for t in range(1, cfg.rounds + 1):
        grads, losses = [], []
        for c in range(cfg.n_clients):
            theta_b = so.broadcast_params(server, c)
            ledger.record(t, c, "down", theta_b)
            try:
                clients[c], g, loss = co.client_opt(
                    cfg.client_kind, theta_b, clients[c], datasets[c].train,
                    cfg.dims, cfg.client_hyper, make_rng(cfg.seed, t, c))
            except Exception as exc:
                raise RuntimeError(f"round {t}, client {c}: {exc}") from exc
            ledger.record(t, c, "up", g)
            grads.append(g)
            losses.append(loss)
        server = so.server_opt(server, grads, cfg.server_hyper, weights)
        models = [so.broadcast_params(server, c) for c in range(cfg.n_clients)]
        val = [evaluate_params(models[c], cfg.dims, datasets[c].val) for c in range(cfg.n_clients)]
        records.append(RoundRecord(
            t, losses, val,
            [ledger.round_client_elements(t, c)["down"] for c in range(cfg.n_clients)],
            [ledger.round_client_elements(t, c)["up"] for c in range(cfg.n_clients)],
        ))
    models = [so.broadcast_params(server, c) for c in range(cfg.n_clients)]
    return FederationResult(models, server, records, ledger)


def run_pl_fl(cfg: FederationConfig, model_init: ParamVector, datasets) -> FederationResult:
    """Partitioned federation: only shared groups are communicated; the
    personalized groups live in the client states and are spliced into the
    broadcast before each local update."""
    if len(datasets) != cfg.n_clients:
        raise ValueError(f"expected {cfg.n_clients} client datasets, got {len(datasets)}")
    shared_init, _ = split(model_init, cfg.scheme)
    shared_names = set(shared_init.names())
    pers_names = cfg.scheme.personalized_names(model_init)
    ledger = CommLedger(cfg.wire_bytes)
    server = so.init_server_state(cfg.server_kind, shared_init, cfg.n_clients)
    clients = [co.init_client_state(cfg.client_kind, model_init) for _ in range(cfg.n_clients)]
    weights = _weights(cfg, datasets)

    def assemble(c: int) -> ParamVector:
        shared_b = so.broadcast_params(server, c)
        personal = clients[c].params.select(pers_names)
        return merge(shared_b, personal, model_init)

    records = []
    for t in range(1, cfg.rounds + 1):
        grads, losses = [], []
        for c in range(cfg.n_clients):
            shared_b = so.broadcast_params(server, c)
            ledger.record(t, c, "down", shared_b)
            theta_start = merge(shared_b, clients[c].params.select(pers_names), model_init)
            try:
                clients[c], g, loss = co.client_opt(
                    cfg.client_kind, theta_start, clients[c], datasets[c].train,
                    cfg.dims, cfg.client_hyper, make_rng(cfg.seed, t, c),
                    penalty_groups=shared_names)
            except Exception as exc:
                raise RuntimeError(f"round {t}, client {c}: {exc}") from exc
            g_shared = g.select(shared_names)
            ledger.record(t, c, "up", g_shared)
            grads.append(g_shared)
            losses.append(loss)
        server = so.server_opt(server, grads, cfg.server_hyper, weights)
        val = [evaluate_params(assemble(c), cfg.dims, datasets[c].val) for c in range(cfg.n_clients)]
        records.append(RoundRecord(
            t, losses, val,
            [ledger.round_client_elements(t, c)["down"] for c in range(cfg.n_clients)],
            [ledger.round_client_elements(t, c)["up"] for c in range(cfg.n_clients)],
        ))
    models = [assemble(c) for c in range(cfg.n_clients)]
    return FederationResult(models, server, records, ledger)
