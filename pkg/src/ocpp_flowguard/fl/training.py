"""Synchronous federated rounds over in-process clients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import model as nn
from .aggregate import ModelUpdate, ServerOptState, aggregate_adaptive, aggregate_fedavg
from .metrics import Metrics, evaluate

FEDAVG_METHODS = {"fedavg", "fedprox"}
ADAPTIVE_METHODS = {"fedadam": "adam", "fedadagrad": "adagrad", "fedyogi": "yogi"}
ALL_METHODS = sorted(FEDAVG_METHODS | set(ADAPTIVE_METHODS))


class TrainingError(Exception):
    pass


@dataclass
class LocalConfig:
    epochs: int = 5
    batch_size: int = 32
    lr: float = 0.01
    # proximal strength; None picks the method default (0.01 for fedprox, 0
    # otherwise), an explicit 0.0 makes fedprox coincide with fedavg
    mu: Optional[float] = None


@dataclass
class RoundConfig:
    method: str = "fedavg"
    rounds: int = 30
    local: LocalConfig = field(default_factory=LocalConfig)
    seed: int = 0
    layout: tuple[int, ...] = nn.DEFAULT_LAYOUT
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3


def local_train(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    cfg: LocalConfig,
    rng: np.random.Generator,
    client_id: str = "client",
    layout: tuple[int, ...] = nn.DEFAULT_LAYOUT,
) -> ModelUpdate:
    """Mini-batch gradient descent for cfg.epochs over the client's data."""
    if len(X) == 0:
        raise TrainingError(f"{client_id}: no local data")
    w = params.copy()
    w_global = params
    mu = cfg.mu if cfg.mu is not None else 0.0
    n = len(X)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grad = nn.loss_and_grad(w, X[batch], y[batch], layout,
                                          mu=mu, w_global=w_global)
            if not np.isfinite(loss):
                raise TrainingError(f"{client_id}: non-finite loss (lr too high?)")
            w -= cfg.lr * grad
    return ModelUpdate(client_id=client_id, params=w, sample_count=n)


def run_rounds(
    clients: Sequence[tuple[str, np.ndarray, np.ndarray]],  # (client_id, X, y)
    cfg: RoundConfig,
    holdout: Optional[tuple[np.ndarray, np.ndarray]] = None,
    initial: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, list[Metrics]]:
    """Broadcast -> parallel local training -> aggregate, for cfg.rounds rounds.

    Fully deterministic given cfg.seed: each client's shuffling RNG is derived
    from (seed, round, client index), independent of scheduling order.
    """
    if cfg.method not in FEDAVG_METHODS and cfg.method not in ADAPTIVE_METHODS:
        raise TrainingError(f"unknown aggregation method {cfg.method!r}")
    for cid, X, _ in clients:
        if len(X) == 0:
            raise TrainingError(f"client {cid} has no data")

    mu = cfg.local.mu
    if mu is None:
        mu = 0.01 if cfg.method == "fedprox" else 0.0
    local_cfg = LocalConfig(epochs=cfg.local.epochs, batch_size=cfg.local.batch_size,
                            lr=cfg.local.lr, mu=mu)

    params = initial if initial is not None else nn.init_params(
        cfg.layout, np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC0FFEE))))
    state = None
    if cfg.method in ADAPTIVE_METHODS:
        state = ServerOptState.zeros(len(params), ADAPTIVE_METHODS[cfg.method],
                                     eta=cfg.eta, beta1=cfg.beta1, beta2=cfg.beta2, tau=cfg.tau)

    history: list[Metrics] = []
    for rnd in range(cfg.rounds):
        updates = []
        for c_idx, (cid, X, y) in enumerate(clients):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, rnd, c_idx)))
            updates.append(local_train(params, X, y, local_cfg, rng, cid, cfg.layout))
        if state is None:
            params = aggregate_fedavg(updates)
        else:
            params, state = aggregate_adaptive(state, params, updates)
        if holdout is not None:
            Xh, yh = holdout
            preds = nn.predict(params, Xh, cfg.layout)
            history.append(evaluate(preds, yh, cfg.layout[-1]))
    return params, history
