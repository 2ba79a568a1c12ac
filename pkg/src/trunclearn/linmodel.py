"""Truncated-loss empirical risk for linear models.

The objective is ``scale * sum_i phi(l(w.x_i, y_i)) + lam * ||w||^2`` with
``scale = 1/(2n)`` for the square loss and ``1/n`` for Lipschitz losses.
The per-sample gradient is that of ``n * scale * phi(l_i) + lam * ||w||^2``,
so its average over samples is the full gradient and SGD on it shares the
full objective's stationary points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .datagen import Dataset
from .errors import DimensionError, NumericalError
from .loss import TruncatedLoss, base_subgrad, base_value
from .optim import Problem
from .truncation import constants_of, phi, phi_prime


@dataclass(frozen=True)
class ObjectiveSpec:
    tl: TruncatedLoss
    lam: float = 0.0
    scale: str | None = None  # "half_mean" or "mean"; inferred from the base loss when None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        expected = "half_mean" if self.tl.base.kind == "square" else "mean"
        if self.scale is None:
            object.__setattr__(self, "scale", expected)
        elif self.scale != expected:
            raise ValueError(f"scale {self.scale!r} does not match base loss {self.tl.base.kind!r}")

    @property
    def per_sample(self) -> float:
        """Weight of one sample's truncated loss in ``n * objective``."""
        return 0.5 if self.scale == "half_mean" else 1.0


@dataclass
class LinearModel:
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.w


def _weights(model) -> np.ndarray:
    return model.w if isinstance(model, LinearModel) else np.asarray(model, dtype=float)


def _check(w, dataset: Dataset):
    if w.shape != (dataset.d,):
        raise DimensionError(f"model has shape {w.shape}, dataset has {dataset.d} features")
    if dataset.n == 0:
        raise DimensionError("dataset is empty")


def objective(spec: ObjectiveSpec, model, dataset: Dataset) -> float:
    w = _weights(model)
    _check(w, dataset)
    losses = base_value(spec.tl.base, dataset.X @ w, dataset.y)
    vals = np.atleast_1d(phi(spec.tl.trunc, losses))
    return float(spec.per_sample * np.mean(vals) + spec.lam * (w @ w))


def _coefficients(spec: ObjectiveSpec, w, X, y):
    z = X @ w
    losses = base_value(spec.tl.base, z, y)
    return spec.per_sample * np.atleast_1d(phi_prime(spec.tl.trunc, losses)) * np.atleast_1d(base_subgrad(spec.tl.base, z, y))


def full_gradient(spec: ObjectiveSpec, model, dataset: Dataset) -> np.ndarray:
    w = _weights(model)
    _check(w, dataset)
    c = _coefficients(spec, w, dataset.X, dataset.y)
    return dataset.X.T @ c / dataset.n + 2.0 * spec.lam * w


def sample_gradient(spec: ObjectiveSpec, model, dataset: Dataset, index: int) -> np.ndarray:
    w = _weights(model)
    _check(w, dataset)
    if not (0 <= index < dataset.n):
        raise IndexError(f"sample index {index} out of range for n={dataset.n}")
    x = dataset.X[index]
    c = _coefficients(spec, w, x[None, :], dataset.y[index : index + 1])[0]
    return c * x + 2.0 * spec.lam * w


def stationarity_norm(spec: ObjectiveSpec, model, dataset: Dataset) -> float:
    return float(np.linalg.norm(full_gradient(spec, model, dataset)))


def input_radius(dataset: Dataset) -> float:
    """Largest Euclidean norm among the input rows."""
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", dataset.X, dataset.X))))


def ridge_oracle(dataset: Dataset, lam: float) -> LinearModel:
    """Exact minimiser of ``(1/2n)||Xw - y||^2 + lam ||w||^2``."""
    if dataset.n < 1:
        raise DimensionError("dataset is empty")
    n, d = dataset.X.shape
    A = dataset.X.T @ dataset.X / n + 2.0 * lam * np.eye(d)
    rhs = dataset.X.T @ dataset.y / n
    if lam == 0 and np.linalg.matrix_rank(A) < d:
        raise NumericalError("normal equations are singular; use lam > 0")
    try:
        w = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations could not be solved: {exc}") from None
    return LinearModel(w)


def statistical_error(model, w_star) -> float:
    w = _weights(model)
    w_star = np.asarray(w_star, dtype=float)
    if w.shape != w_star.shape:
        raise DimensionError(f"length mismatch: {w.shape} vs {w_star.shape}")
    return float(np.linalg.norm(w - w_star))


def test_metrics(model, dataset: Dataset) -> dict:
    """Mean squared and mean absolute residual on held-out data."""
    if dataset.n == 0:
        raise DimensionError("dataset is empty")
    w = _weights(model)
    _check(w, dataset)
    r = dataset.X @ w - dataset.y
    return {"mse": float(np.mean(r * r)), "mae": float(np.mean(np.abs(r)))}


test_metrics.__test__ = False


class LinearProblem(Problem):
    """Adapter exposing a linear objective to :func:`trunclearn.optim.sgd`."""

    def __init__(self, spec: ObjectiveSpec, dataset: Dataset):
        self.spec = spec
        self.dataset = dataset

    @property
    def n_samples(self) -> int:
        return self.dataset.n

    @property
    def dim(self) -> int:
        return self.dataset.d

    def objective(self, w):
        return objective(self.spec, w, self.dataset)

    def gradient(self, w):
        return full_gradient(self.spec, w, self.dataset)

    def sample_gradients(self, w, idx):
        idx = np.asarray(idx)
        X = self.dataset.X[idx]
        c = _coefficients(self.spec, w, X, self.dataset.y[idx])
        return c[:, None] * X + 2.0 * self.spec.lam * w

    def curvature_scale(self) -> float:
        """``(2 kappa + 1) R^2 + 2 lam`` for the square base, else ``G R^2 + 2 lam``.

        For the truncated square loss this bounds the Lipschitz constant of
        the gradient. Lipschitz bases have no such bound at their kinks;
        ``G R^2`` caps how far one step of size ``1/L`` can move a residual.
        """
        R2 = input_radius(self.dataset) ** 2
        if self.spec.tl.base.kind == "square":
            kappa = constants_of(self.spec.tl.trunc).kappa
            return (2.0 * kappa + 1.0) * R2 + 2.0 * self.spec.lam
        return self.spec.tl.base.lipschitz * R2 + 2.0 * self.spec.lam

    def advance(self, w, idx, etas):
        tl = self.spec.tl
        bad = _kernels.sgd_linear(
            self.dataset.X,
            self.dataset.y,
            w,
            np.ascontiguousarray(idx, dtype=np.int64),
            np.ascontiguousarray(etas, dtype=float),
            _kernels.BASE_CODES[tl.base.kind],
            float(tl.base.param or 0.0),
            _kernels.TRUNC_CODES[tl.trunc.kind],
            float(tl.trunc.alpha),
            int(tl.trunc.m),
            self.spec.per_sample,
            float(self.spec.lam),
        )
        return int(bad)
