"""Small fully-connected softmax classifier stored as one flat parameter vector."""

from __future__ import annotations

import numpy as np

# layer sizes: input -> hidden -> hidden -> classes
DEFAULT_LAYOUT = (47, 64, 32, 5)


def param_count(layout: tuple[int, ...]) -> int:
    return sum(layout[i] * layout[i + 1] + layout[i + 1] for i in range(len(layout) - 1))


def init_params(layout: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """He-scaled random weights, zero biases, flattened."""
    chunks = []
    for i in range(len(layout) - 1):
        fan_in, fan_out = layout[i], layout[i + 1]
        chunks.append((rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)).ravel())
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack(flat: np.ndarray, layout: tuple[int, ...]) -> list[tuple[np.ndarray, np.ndarray]]:
    if flat.shape != (param_count(layout),):
        raise ValueError(f"parameter vector length {flat.shape} does not match layout {layout}")
    layers = []
    pos = 0
    for i in range(len(layout) - 1):
        fan_in, fan_out = layout[i], layout[i + 1]
        w = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(layers, X):
    """Returns (activations per layer incl. input, output probabilities)."""
    acts = [X]
    a = X
    for w, b in layers[:-1]:
        a = np.maximum(a @ w + b, 0.0)
        acts.append(a)
    w, b = layers[-1]
    probs = _softmax(a @ w + b)
    return acts, probs


def predict_proba(flat: np.ndarray, X: np.ndarray, layout: tuple[int, ...] = DEFAULT_LAYOUT) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != layout[0]:
        raise ValueError(f"expected {layout[0]} features, got {X.shape[1]}")
    _, probs = _forward(unpack(flat, layout), X)
    return probs


def predict(flat: np.ndarray, X: np.ndarray, layout: tuple[int, ...] = DEFAULT_LAYOUT) -> np.ndarray:
    """Class indices; argmax breaks ties toward the lowest index."""
    return predict_proba(flat, X, layout).argmax(axis=1)


def loss_and_grad(
    flat: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    layout: tuple[int, ...] = DEFAULT_LAYOUT,
    mu: float = 0.0,
    w_global: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy (plus optional proximal penalty) and its flat gradient.

    With mu > 0 the objective gains (mu/2)*||w - w_global||^2, pulling local
    training toward the incoming global parameters.
    """
    layers = unpack(flat, layout)
    n = X.shape[0]
    acts, probs = _forward(layers, X)
    eps = 1e-12
    loss = float(-np.log(probs[np.arange(n), y] + eps).mean())

    grads: list[np.ndarray] = []
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        a_prev = acts[i]
        gw = a_prev.T @ delta
        gb = delta.sum(axis=0)
        grads.append(gb)
        grads.append(gw.ravel())
        if i > 0:
            delta = (delta @ w.T) * (acts[i] > 0)
    grad = np.concatenate([g.ravel() for g in reversed(grads)])

    if mu > 0.0:
        if w_global is None:
            raise ValueError("proximal term requires the global parameter vector")
        diff = flat - w_global
        loss += 0.5 * mu * float(diff @ diff)
        grad = grad + mu * diff
    return loss, grad
