import math

import numpy as np
import pytest

from trunclearn import BaseLoss, Dataset, DimensionError, NumericalError, ObjectiveSpec, Truncation, TruncatedLoss
from trunclearn.linmodel import (
    LinearModel,
    LinearProblem,
    full_gradient,
    input_radius,
    objective,
    ridge_oracle,
    sample_gradient,
    stationarity_norm,
    statistical_error,
    test_metrics,
)
from trunclearn.loss import absolute_log, square_log


def _random_instance(rng, n=None, d=None):
    n = n or int(rng.integers(1, 30))
    d = d or int(rng.integers(1, 21))
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n) * 3
    return Dataset(X, y), rng.standard_normal(d)


def test_objective_examples():
    spec = ObjectiveSpec(square_log(1.0))
    ds = Dataset([[1.0]], [1.0])
    assert objective(spec, [2.0], ds) == pytest.approx(0.5 * math.log(2.0), rel=1e-15)
    X = np.random.default_rng(0).standard_normal((7, 3))
    w = np.array([1.0, -2.0, 0.5])
    assert objective(spec, w, Dataset(X, X @ w)) == 0.0
    ds = Dataset(X, np.arange(7.0) - 3)
    spec1 = ObjectiveSpec(square_log(1.0), lam=1.0)
    expected = 0.5 * np.mean(np.log1p(ds.y**2))
    assert objective(spec1, np.zeros(3), ds) == pytest.approx(expected, rel=1e-14)


def test_scale_convention():
    assert ObjectiveSpec(square_log(1.0)).scale == "half_mean"
    assert ObjectiveSpec(absolute_log(1.0)).scale == "mean"
    with pytest.raises(ValueError):
        ObjectiveSpec(square_log(1.0), scale="mean")
    with pytest.raises(ValueError):
        ObjectiveSpec(square_log(1.0), lam=-1.0)


def test_zero_gradient_at_truth_on_noiseless_data():
    # integer data keeps every residual exactly zero, so the absolute loss sits on its kink
    rng = np.random.default_rng(1)
    X = rng.integers(-5, 6, (20, 4)).astype(float)
    w = rng.integers(-3, 4, 4) / 4.0
    ds = Dataset(X, X @ w)
    for tl in (square_log(2.0), absolute_log(2.0)):
        spec = ObjectiveSpec(tl)
        np.testing.assert_allclose(full_gradient(spec, w, ds), 0.0, atol=1e-12)
        assert stationarity_norm(spec, w, ds) < 1e-12
        assert np.all(sample_gradient(spec, w, ds, 3) == 0.0)
    assert stationarity_norm(ObjectiveSpec(square_log(2.0)), w + 1.0, ds) > 0


@pytest.mark.parametrize("kind", ["log", "catoni", "cubic"])
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        ds, w = _random_instance(rng)
        spec = ObjectiveSpec(TruncatedLoss(BaseLoss("square"), Truncation(kind, float(rng.uniform(0.5, 20)))), lam=float(rng.uniform(0, 0.1)))
        g = full_gradient(spec, w, ds)
        h = 1e-6
        fd = np.array([(objective(spec, w + h * e, ds) - objective(spec, w - h * e, ds)) / (2 * h) for e in np.eye(ds.d)])
        if kind == "cubic":
            # skip instances with a residual near the shoulder u = alpha
            u = (ds.X @ w - ds.y) ** 2
            if np.min(np.abs(u - spec.tl.trunc.alpha)) < 1e-3:
                continue
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-8))
    assert worst <= 1e-5


def test_lipschitz_base_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(100):
        ds, w = _random_instance(rng)
        spec = ObjectiveSpec(absolute_log(float(rng.uniform(0.5, 20))), lam=0.01)
        if np.min(np.abs(ds.X @ w - ds.y)) < 1e-4:
            continue
        g = full_gradient(spec, w, ds)
        h = 1e-7
        fd = np.array([(objective(spec, w + h * e, ds) - objective(spec, w - h * e, ds)) / (2 * h) for e in np.eye(ds.d)])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


def test_untruncated_limit_gradient():
    rng = np.random.default_rng(2)
    ds, w = _random_instance(rng, 40, 10)
    g = full_gradient(ObjectiveSpec(square_log(1e9), lam=0.3), w, ds)
    ls = ds.X.T @ (ds.X @ w - ds.y) / ds.n + 0.6 * w
    np.testing.assert_allclose(g, ls, rtol=1e-6)


def test_untruncated_limit_objective_bound():
    rng = np.random.default_rng(3)
    ds, w = _random_instance(rng, 50, 8)
    a = 1e9
    F = objective(ObjectiveSpec(square_log(a)), w, ds)
    r2 = (ds.X @ w - ds.y) ** 2
    F0 = 0.5 * np.mean(r2)
    assert abs(F - F0) <= 0.5 * np.mean(0.5 * r2**2 / a) + 1e-12


def test_sample_gradients_average_to_full():
    rng = np.random.default_rng(4)
    for tl in (square_log(3.0), absolute_log(3.0), TruncatedLoss(BaseLoss("huber", 1.0), Truncation("cubic", 2.0))):
        ds, w = _random_instance(rng, 25, 6)
        spec = ObjectiveSpec(tl, lam=0.2)
        G = np.array([sample_gradient(spec, w, ds, i) for i in range(ds.n)])
        np.testing.assert_allclose(G.mean(axis=0), full_gradient(spec, w, ds), rtol=1e-12, atol=1e-12)
        prob = LinearProblem(spec, ds)
        np.testing.assert_allclose(prob.sample_gradients(w, np.arange(ds.n)), G, rtol=1e-13, atol=1e-14)


def test_one_sample_gradient_equals_full():
    ds = Dataset([[1.0, 2.0]], [0.5])
    spec = ObjectiveSpec(square_log(1.0), lam=0.1)
    w = np.array([0.3, -0.2])
    np.testing.assert_allclose(sample_gradient(spec, w, ds, 0), full_gradient(spec, w, ds), rtol=1e-15)


def test_errors():
    ds = Dataset(np.ones((3, 2)), np.ones(3))
    spec = ObjectiveSpec(square_log(1.0))
    with pytest.raises(DimensionError):
        objective(spec, np.ones(3), ds)
    with pytest.raises(DimensionError):
        full_gradient(spec, np.ones(1), ds)
    with pytest.raises(IndexError):
        sample_gradient(spec, np.ones(2), ds, 3)
    with pytest.raises(IndexError):
        sample_gradient(spec, np.ones(2), ds, -1)
    with pytest.raises(DimensionError):
        statistical_error(np.ones(2), np.ones(3))
    with pytest.raises(DimensionError):
        test_metrics(np.ones(2), Dataset(np.zeros((0, 2)), np.zeros(0)))


def test_ridge_oracle_two_by_two():
    # (X^T X / n + 2 lam I) w = X^T y / n, solved by hand:
    # [[6, 7], [7, 11]] w = [3.5, 5]  ->  w = [3.5, 5.5] / 17
    ds = Dataset([[1.0, 2.0], [3.0, 4.0]], [1.0, 2.0])
    w = ridge_oracle(ds, 0.5).w
    np.testing.assert_allclose(w, [3.5 / 17, 5.5 / 17], rtol=1e-14)


def test_ridge_oracle_limits():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((30, 5))
    w_star = rng.uniform(0, 1, 5)
    ds = Dataset(X, X @ w_star)
    np.testing.assert_allclose(ridge_oracle(ds, 0.0).w, w_star, atol=1e-8)
    assert np.linalg.norm(ridge_oracle(ds, 1e12).w) < 1e-9
    with pytest.raises(NumericalError):
        ridge_oracle(Dataset(np.ones((4, 2)), np.ones(4)), 0.0)
    # the oracle is a stationary point of the untruncated objective
    spec = ObjectiveSpec(square_log(1e12), lam=0.3)
    ds = Dataset(X, X @ w_star + rng.standard_normal(30))
    assert stationarity_norm(spec, ridge_oracle(ds, 0.3), ds) < 1e-6


def test_metrics_and_error():
    ds = Dataset([[1.0], [1.0]], [1.0, -1.0])
    assert test_metrics(np.zeros(1), ds) == {"mse": 1.0, "mae": 1.0}
    X = np.random.default_rng(6).standard_normal((10, 3))
    w = np.array([1.0, 2.0, 3.0])
    assert test_metrics(LinearModel(w), Dataset(X, X @ w)) == {"mse": 0.0, "mae": 0.0}
    assert statistical_error(w, w) == 0.0
    assert statistical_error(w + np.eye(3)[0], w) == 1.0
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal(9), rng.standard_normal(9)
    assert statistical_error(a, b) == pytest.approx(math.sqrt(np.sum((a - b) ** 2)), rel=1e-15)
    r = X @ a[:3] - X @ w
    got = test_metrics(a[:3], Dataset(X, X @ w))
    assert got["mse"] == pytest.approx(np.mean(r**2), rel=1e-14)
    assert got["mae"] == pytest.approx(np.mean(np.abs(r)), rel=1e-14)


def test_weak_convexity_midpoint():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((200, 10))
    ds = Dataset(X, X @ rng.uniform(0, 1, 10) + rng.standard_t(2, 200))
    tl = absolute_log(1.0)
    spec = ObjectiveSpec(tl)
    rho = tl.weak_convexity(input_radius(ds))

    def g(w):
        return objective(spec, w, ds) + 0.5 * rho * (w @ w)

    def ball(k):
        v = rng.standard_normal((k, 10))
        return v / np.linalg.norm(v, axis=1, keepdims=True) * 10 * rng.uniform(0, 1, (k, 1)) ** 0.1

    U, V = ball(1000), ball(1000)
    gap = [g((u + v) / 2) - (g(u) + g(v)) / 2 for u, v in zip(U, V)]
    assert max(gap) <= 1e-9


def test_smoothness_bound_square_log():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((100, 8))
    ds = Dataset(X, X @ rng.standard_normal(8) + 5 * rng.standard_t(2, 100))
    tl = square_log(2.0)
    spec = ObjectiveSpec(tl)
    L = LinearProblem(spec, ds).curvature_scale()
    assert L == pytest.approx(1.5 * input_radius(ds) ** 2)
    for _ in range(300):
        u, v = rng.standard_normal(8) * 5, rng.standard_normal(8) * 5
        lhs = np.linalg.norm(full_gradient(spec, u, ds) - full_gradient(spec, v, ds))
        assert lhs <= L * np.linalg.norm(u - v) + 1e-9


def test_input_radius():
    ds = Dataset([[3.0, 4.0], [1.0, 0.0]], [0.0, 0.0])
    assert input_radius(ds) == 5.0
