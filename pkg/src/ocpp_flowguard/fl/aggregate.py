"""Server-side aggregation: sample-weighted averaging and adaptive optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class ModelUpdate:
    client_id: str
    params: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")


@dataclass
class ServerOptState:
    """First/second moment state for Adam-, Adagrad- and Yogi-style server steps."""

    method: str  # "adam" | "adagrad" | "yogi"
    m: np.ndarray
    v: np.ndarray
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3

    @classmethod
    def zeros(cls, n_params: int, method: str, **hp) -> "ServerOptState":
        return cls(method=method, m=np.zeros(n_params), v=np.zeros(n_params), **hp)


def _weighted_mean(updates: Sequence[ModelUpdate]) -> np.ndarray:
    if not updates:
        raise ValueError("no client updates to aggregate")
    shape = updates[0].params.shape
    for u in updates:
        if u.params.shape != shape:
            raise ValueError("client parameter layouts differ")
    total = float(sum(u.sample_count for u in updates))
    out = np.zeros(shape)
    for u in updates:
        out += (u.sample_count / total) * u.params
    return out


def aggregate_fedavg(updates: Sequence[ModelUpdate]) -> np.ndarray:
    """Sample-count-weighted mean of client parameter vectors."""
    return _weighted_mean(updates)


def aggregate_adaptive(
    state: ServerOptState,
    current: np.ndarray,
    updates: Sequence[ModelUpdate],
) -> tuple[np.ndarray, ServerOptState]:
    """One adaptive server step driven by the pseudo-gradient.

    delta = weighted_mean(client params) - current
    m     = beta1*m + (1-beta1)*delta
    v     = beta2*v + (1-beta2)*delta^2          (adam)
            v + delta^2                          (adagrad)
            v - (1-beta2)*delta^2*sign(v-delta^2) (yogi)
    new   = current + eta * m / (sqrt(v) + tau)
    """
    if state.tau <= 0:
        raise ValueError("tau must be positive")
    delta = _weighted_mean(updates) - current
    m = state.beta1 * state.m + (1.0 - state.beta1) * delta
    d2 = delta * delta
    if state.method == "adam":
        v = state.beta2 * state.v + (1.0 - state.beta2) * d2
    elif state.method == "adagrad":
        v = state.v + d2
    elif state.method == "yogi":
        v = state.v - (1.0 - state.beta2) * d2 * np.sign(state.v - d2)
    else:
        raise ValueError(f"unknown adaptive method {state.method!r}")
    new_params = current + state.eta * m / (np.sqrt(v) + state.tau)
    new_state = ServerOptState(method=state.method, m=m, v=v, eta=state.eta,
                               beta1=state.beta1, beta2=state.beta2, tau=state.tau)
    return new_params, new_state
