"""Feed-forward ReLU regressor with hand-written backpropagation.

Hidden layers use ReLU (derivative 0 at 0), the output layer is linear.
Training minimises ``mean_i phi(l(f(x_i), y_i)) + lam * sum ||W||_F^2``;
biases are not regularised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import rng_for
from .errors import DimensionError
from .loss import TruncatedLoss, base_subgrad, base_value
from .optim import Problem
from .truncation import phi, phi_prime


def default_layer_dims(d: int, width: int = 80, layers: int = 5, out: int = 1) -> list:
    """``layers`` affine maps: ``d -> width -> ... -> width -> out``."""
    return [d] + [width] * (layers - 1) + [out]


@dataclass
class MlpModel:
    weights: list  # weights[k] has shape (dims[k+1], dims[k])
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("need one bias vector per weight matrix")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise DimensionError(f"layer {k}: weight {W.shape} and bias {b.shape} disagree")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise DimensionError(f"layer {k} expects {W.shape[1]} inputs, previous layer gives {self.weights[k - 1].shape[0]}")

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def copy(self) -> "MlpModel":
        return MlpModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])


def unflatten(flat: np.ndarray, layer_dims) -> MlpModel:
    """Model whose arrays are views into ``flat`` (writes propagate)."""
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(flat[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in))
        pos += fan_in * fan_out
        biases.append(flat[pos : pos + fan_out])
        pos += fan_out
    if pos != flat.size:
        raise DimensionError(f"flat vector has {flat.size} entries, architecture needs {pos}")
    return MlpModel(weights, biases)


def init(layer_dims, seed: int) -> MlpModel:
    """Glorot-uniform weights ``U[-sqrt(6/(fan_in+fan_out)), +...]``, zero biases."""
    dims = [int(k) for k in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {layer_dims}")
    rng = rng_for(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def _forward_cache(model: MlpModel, X: np.ndarray):
    """Return (pre-activations, activations); activations[0] is the input."""
    acts = [X]
    pres = []
    h = X
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W.T + b
        pres.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return pres, acts


def forward_batch(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.layer_dims[0]:
        raise DimensionError(f"expected inputs with {model.layer_dims[0]} columns, got shape {X.shape}")
    out = _forward_cache(model, X)[1][-1]
    return out[:, 0] if out.shape[1] == 1 else out


def forward(model: MlpModel, x):
    """Prediction for one input vector (a float for scalar-output nets)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.layer_dims[0],):
        raise DimensionError(f"expected input of length {model.layer_dims[0]}, got shape {x.shape}")
    out = forward_batch(model, x[None, :])[0]
    return float(out) if np.ndim(out) == 0 else out


def batch_objective(model: MlpModel, X, y, tl: TruncatedLoss, lam: float = 0.0) -> float:
    out = np.asarray(forward_batch(model, X)).reshape(len(X), -1)
    Y = np.asarray(y, dtype=float).reshape(out.shape)
    vals = phi(tl.trunc, base_value(tl.base, out, Y))
    reg = sum(float(np.sum(W * W)) for W in model.weights)
    return float(np.mean(np.sum(vals, axis=1)) + lam * reg)


def backward(model: MlpModel, X, y, tl: TruncatedLoss, lam: float = 0.0) -> MlpModel:
    """Gradient of :func:`batch_objective`, returned as an ``MlpModel``.

    The output error of sample ``i`` is ``phi'(l_i) * dl/dz_i / |batch|``;
    with several outputs the per-output losses are summed.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] != model.layer_dims[0]:
        raise DimensionError(f"batch must be non-empty with {model.layer_dims[0]} columns, got shape {X.shape}")
    pres, acts = _forward_cache(model, X)
    out = acts[-1]
    Y = np.asarray(y, dtype=float)
    if Y.size != out.size:
        raise DimensionError(f"targets have {Y.size} entries, network outputs {out.shape}")
    Y = Y.reshape(out.shape)
    losses = base_value(tl.base, out, Y)
    delta = phi_prime(tl.trunc, losses) * base_subgrad(tl.base, out, Y) / X.shape[0]
    gW, gb = [None] * len(model.weights), [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        gW[k] = delta.T @ acts[k] + 2.0 * lam * model.weights[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k]) * (pres[k - 1] > 0)
    return MlpModel(gW, gb)


class MlpProblem(Problem):
    """Flat-parameter view of MLP training for :func:`trunclearn.optim.sgd`."""

    def __init__(self, layer_dims, X, y, tl: TruncatedLoss, lam: float = 0.0):
        self.layer_dims = list(layer_dims)
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.tl = tl
        self.lam = lam

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return sum(a * b + b for a, b in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def model(self, w) -> MlpModel:
        return unflatten(w, self.layer_dims)

    def objective(self, w):
        return batch_objective(self.model(w), self.X, self.y, self.tl, self.lam)

    def gradient(self, w):
        return backward(self.model(w), self.X, self.y, self.tl, self.lam).flatten()

    def sample_gradients(self, w, idx):
        m = self.model(w)
        return np.stack([backward(m, self.X[i : i + 1], self.y[i : i + 1], self.tl, self.lam).flatten() for i in np.asarray(idx)])

    def advance(self, w, idx, etas):
        m = self.model(w)
        for t in range(len(etas)):
            rows = idx[t]
            g = backward(m, self.X[rows], self.y[rows], self.tl, self.lam)
            for W, b, dW, db in zip(m.weights, m.biases, g.weights, g.biases):
                W -= etas[t] * dW
                b -= etas[t] * db
            if not np.all(np.isfinite(w)):
                return t
        return -1
