"""Federated training of the flow classifier."""

from .aggregate import ModelUpdate, ServerOptState, aggregate_adaptive, aggregate_fedavg
from .metrics import Metrics, evaluate
from .model import init_params, predict, predict_proba
from .training import LocalConfig, RoundConfig, local_train, run_rounds

__all__ = [
    "ModelUpdate", "ServerOptState", "aggregate_adaptive", "aggregate_fedavg",
    "Metrics", "evaluate", "init_params", "predict", "predict_proba",
    "LocalConfig", "RoundConfig", "local_train", "run_rounds",
]
