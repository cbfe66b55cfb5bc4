"""Scikit-learn style wrappers so the classifier composes with pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .fl import model as nn
from .fl.data import MinMaxScaler
from .fl.training import ALL_METHODS, LocalConfig, RoundConfig, run_rounds


class FlowScaler(BaseEstimator, TransformerMixin):
    """Min-max scaling onto [0, 1]; constant columns map to 0."""

    def fit(self, X, y=None):
        X = check_array(X)
        self.scaler_ = MinMaxScaler.fit(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scaler_")
        return self.scaler_.transform(check_array(X))


class FederatedFlowClassifier(BaseEstimator, ClassifierMixin):
    """Softmax MLP trained by synchronous federated rounds.

    ``fit`` accepts an optional ``hubs`` array assigning each row to a
    federated client; without it, training degenerates to a single client
    (equivalent to centralized mini-batch training).
    """

    def __init__(self, method: str = "fedavg", rounds: int = 30, epochs: int = 5,
                 batch_size: int = 32, lr: float = 0.01, mu=None,
                 hidden: tuple[int, ...] = (64, 32), eta: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.99, tau: float = 1e-3,
                 random_state: int = 0):
        self.method = method
        self.rounds = rounds
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.mu = mu
        self.hidden = hidden
        self.eta = eta
        self.beta1 = beta1
        self.beta2 = beta2
        self.tau = tau
        self.random_state = random_state

    def fit(self, X, y, hubs=None):
        X, y = check_X_y(X, y)
        if self.method not in ALL_METHODS:
            raise ValueError(f"method must be one of {ALL_METHODS}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        layout = (X.shape[1],) + tuple(self.hidden) + (len(self.classes_),)
        if hubs is None:
            clients = [("client-0", X, y_idx)]
        else:
            hubs = np.asarray(hubs)
            clients = [(f"hub-{h}", X[hubs == h], y_idx[hubs == h])
                       for h in sorted(set(hubs.tolist()))]
        cfg = RoundConfig(
            method=self.method, rounds=self.rounds,
            local=LocalConfig(epochs=self.epochs, batch_size=self.batch_size,
                              lr=self.lr, mu=self.mu),
            seed=self.random_state, layout=layout,
            eta=self.eta, beta1=self.beta1, beta2=self.beta2, tau=self.tau)
        self.params_, self.history_ = run_rounds(clients, cfg)
        self.layout_ = layout
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return nn.predict_proba(self.params_, check_array(X), self.layout_)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
